// atos command-line front end.
//
//   atos run <config> [--output-dir D]     exit 0 all succeeded, 1 partial, 2 error
//   atos verify <image> <weights> <class>  exit 0 pass, 1 fail, 2 error
//   atos train <dataset> <out_weights> [--epochs --lr --seed --hidden --batch --labels]
//   atos synth <out_images> [--per-class --seed --sample-seed --noise]

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdio>
#include <exception>

#include "atos/cli.hpp"
#include "atos/io.hpp"
#include "atos/model.hpp"
#include "atos/synthetic.hpp"

namespace {

int cmd_run(const std::string& config_path, const std::string& output_dir) {
  auto config = atos::load_config(config_path);
  if (!output_dir.empty()) config.output_dir = output_dir;
  const auto report = atos::run(config);
  const auto& a = report.aggregate;
  fmt::print("{} samples, {} succeeded (ASR {:.1f}%), npp {:.2f}, l0 {:.2f}, linf {:.4f}, l20 {:.2f}\n",
             a.total, a.successes, a.asr, a.npp_mean, a.l0_mean, a.linf_mean, a.l20_mean);
  fmt::print("report: {}\n", (config.output_dir / "report.txt").string());
  return a.successes == a.total ? 0 : 1;
}

int cmd_verify(const std::string& image, const std::string& weights, std::size_t cls) {
  const bool ok = atos::verify(image, weights, cls);
  fmt::print("{}\n", ok ? "pass" : "fail");
  return ok ? 0 : 1;
}

int cmd_train(const std::string& dataset, std::string labels, const std::string& out,
              const atos::TrainOptions& opts) {
  if (labels.empty()) labels = atos::default_labels_path(dataset).string();
  const auto data = atos::load_dataset(dataset, labels);
  const auto result = atos::train_tinynet(data, opts);
  atos::save_tinynet(out, result.net);
  fmt::print("trained on {} samples, accuracy {:.4f}\n", data.size(), result.train_accuracy);
  return 0;
}

int cmd_synth(const std::string& out, const atos::SyntheticSpec& spec) {
  const auto data = atos::make_synthetic_dataset(spec);
  atos::save_dataset(out, atos::default_labels_path(out), data);
  fmt::print("wrote {} images to {}\n", data.size(), out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sparse adversarial attacks with overlapping smoothed l0"};
  app.require_subcommand(1);

  std::string config_path, output_dir;
  auto* run = app.add_subcommand("run", "attack the samples listed in a config file");
  run->add_option("config", config_path, "config file")->required();
  run->add_option("--output-dir", output_dir, "overrides output_dir from the config");

  std::string image, weights;
  std::size_t cls = 0;
  auto* verify = app.add_subcommand("verify", "check the predicted class of a stored image");
  verify->add_option("image", image, "ATN1 tensor or binary PGM/PPM")->required();
  verify->add_option("weights", weights, "ATW1 weights")->required();
  verify->add_option("class", cls, "expected class")->required();

  std::string dataset, labels, out_weights;
  atos::TrainOptions topts;
  auto* train = app.add_subcommand("train", "fit a TinyNet on a dataset");
  train->add_option("dataset", dataset, "images file")->required();
  train->add_option("out_weights", out_weights, "output ATW1 file")->required();
  train->add_option("--labels", labels, "labels sidecar (default <dataset>.labels)");
  train->add_option("--epochs", topts.epochs)->capture_default_str();
  train->add_option("--lr", topts.learning_rate)->capture_default_str();
  train->add_option("--seed", topts.seed)->capture_default_str();
  train->add_option("--hidden", topts.hidden)->capture_default_str();
  train->add_option("--batch", topts.batch_size)->capture_default_str();

  std::string synth_out;
  atos::SyntheticSpec sspec;
  auto* synth = app.add_subcommand("synth", "write the synthetic 3x8x8 toy dataset");
  synth->add_option("out_images", synth_out, "output images file")->required();
  synth->add_option("--per-class", sspec.per_class)->capture_default_str();
  synth->add_option("--seed", sspec.seed, "class prototypes")->capture_default_str();
  synth->add_option("--sample-seed", sspec.sample_seed, "per-sample noise")->capture_default_str();
  synth->add_option("--noise", sspec.noise)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*run) return cmd_run(config_path, output_dir);
    if (*verify) return cmd_verify(image, weights, cls);
    if (*train) return cmd_train(dataset, labels, out_weights, topts);
    if (*synth) return cmd_synth(synth_out, sspec);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "atos: error: %s\n", e.what());
    return 2;
  }
  return 2;
}

#include "atos/cli.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "atos/io.hpp"
#include "atos/model.hpp"

namespace atos {

namespace {

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double d = 0.0;
  try {
    d = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size()) throw std::invalid_argument("key '" + key + "': not a number: " + v);
  return d;
}

std::size_t to_count(const std::string& key, const std::string& v) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) {
    throw std::invalid_argument("key '" + key + "': not a non-negative integer: " + v);
  }
  return static_cast<std::size_t>(std::stoull(v));
}

bool to_bool(const std::string& key, const std::string& v) {
  const auto s = lower(v);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw std::invalid_argument("key '" + key + "': not a boolean: " + v);
}

std::vector<std::size_t> parse_sample_list(const std::string& v) {
  std::vector<std::size_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    const auto dash = item.find('-');
    if (dash == std::string::npos) {
      out.push_back(to_count("samples", item));
    } else {
      const auto lo = to_count("samples", trim(item.substr(0, dash)));
      const auto hi = to_count("samples", trim(item.substr(dash + 1)));
      if (hi < lo) throw std::invalid_argument("samples: empty range " + item);
      for (auto i = lo; i <= hi; ++i) out.push_back(i);
    }
  }
  return out;
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v, double mean) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(v.size()));
}

std::string rule_name(const GroupingRule& rule) {
  switch (rule.mode) {
    case GroupingMode::ElementWise: return "element";
    case GroupingMode::PixelWise: return "pixel";
    case GroupingMode::GroupWise: return fmt::format("group(n={},s={})", rule.window_n, rule.stride_s);
  }
  return "?";
}

std::string target_name(const TargetMode& t) {
  switch (t.kind) {
    case TargetKind::Untargeted: return "untargeted";
    case TargetKind::WorstCase: return "worstcase";
    case TargetKind::Fixed: return fmt::format("{}", t.fixed_class);
  }
  return "?";
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::filesystem::path& base) {
  RunConfig cfg;
  AttackConfig& a = cfg.attack;
  std::stringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  auto resolve = [&](const std::string& v) {
    std::filesystem::path p(v);
    return p.is_absolute() ? p : base / p;
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument(fmt::format("config line {}: expected key = value", lineno));
    }
    const std::string key = lower(trim(line.substr(0, eq)));
    const std::string val = trim(line.substr(eq + 1));
    try {
      if (key == "weights") cfg.weights = resolve(val);
      else if (key == "dataset") cfg.dataset = resolve(val);
      else if (key == "labels") cfg.labels = resolve(val);
      else if (key == "output_dir") cfg.output_dir = resolve(val);
      else if (key == "samples") {
        if (lower(val) == "all") {
          cfg.all_samples = true;
          cfg.samples.clear();
        } else {
          cfg.all_samples = false;
          cfg.samples = parse_sample_list(val);
        }
      }
      else if (key == "only_correct") cfg.only_correct = to_bool(key, val);
      else if (key == "limit") cfg.limit = to_count(key, val);
      else if (key == "threads") cfg.threads = to_count(key, val);
      else if (key == "steps") a.steps = to_count(key, val);
      else if (key == "iters") a.iters = to_count(key, val);
      else if (key == "mu") a.mu = to_double(key, val);
      else if (key == "lambda") a.lambda = to_double(key, val);
      else if (key == "lambda_s") a.lambda_s = to_double(key, val);
      else if (key == "lambda_inf") a.lambda_inf = to_double(key, val);
      else if (key == "s_lambda") a.s_lambda = to_double(key, val);
      else if (key == "s_sigma") a.s_sigma = to_double(key, val);
      else if (key == "sigma0") {
        if (lower(val) == "auto") a.sigma0.reset();
        else a.sigma0 = to_double(key, val);
      }
      else if (key == "p") a.p = to_double(key, val);
      else if (key == "target") {
        const auto v = lower(val);
        if (v == "untargeted") a.target = TargetMode::untargeted();
        else if (v == "worstcase" || v == "worst") a.target = TargetMode::worst_case();
        else a.target = TargetMode::fixed(to_count(key, v));
      }
      else if (key == "rule") {
        const auto v = lower(val);
        if (v == "element") a.rule.mode = GroupingMode::ElementWise;
        else if (v == "pixel") a.rule.mode = GroupingMode::PixelWise;
        else if (v == "group") a.rule.mode = GroupingMode::GroupWise;
        else throw std::invalid_argument("rule must be element, pixel or group");
      }
      else if (key == "window") a.rule.window_n = to_count(key, val);
      else if (key == "stride") a.rule.stride_s = to_count(key, val);
      else if (key == "levels") a.quant = QuantScale(static_cast<unsigned>(to_count(key, val)));
      else if (key == "max_restarts") a.max_restarts = to_count(key, val);
      else if (key == "sigma_m") {
        if (lower(val) == "none") a.sigma_m.reset();
        else a.sigma_m = to_double(key, val);
      }
      else if (key == "linf_clip_factor") {
        if (lower(val) == "none") a.linf_clip_factor.reset();
        else a.linf_clip_factor = to_double(key, val);
      }
      else if (key == "bound_source") {
        const auto v = lower(val);
        if (v == "exact") a.bound_source = BoundSource::Exact;
        else if (v == "heuristic") a.bound_source = BoundSource::Heuristic;
        else throw std::invalid_argument("bound_source must be exact or heuristic");
      }
      else if (key == "l20_block") a.l20_block = to_count(key, val);
      else throw std::invalid_argument("unknown key '" + key + "'");
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(fmt::format("config line {}: {}", lineno, e.what()));
    }
  }
  if (cfg.weights.empty()) throw std::invalid_argument("config: missing 'weights'");
  if (cfg.dataset.empty()) throw std::invalid_argument("config: missing 'dataset'");
  if (cfg.output_dir.empty()) throw std::invalid_argument("config: missing 'output_dir'");
  if (cfg.labels.empty()) cfg.labels = default_labels_path(cfg.dataset);
  if (cfg.threads == 0) cfg.threads = 1;
  a.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  RunConfig cfg = parse_config(ss.str(), path.parent_path());
  cfg.config_path = path;
  return cfg;
}

Aggregate aggregate_rows(const std::vector<SampleRow>& rows) {
  if (rows.empty()) throw std::invalid_argument("empty dataset");
  Aggregate a;
  a.total = rows.size();
  std::vector<double> npp, l0, linf, l20;
  for (const auto& r : rows) {
    a.wall_time_seconds += r.time_seconds;
    if (!r.success) continue;
    ++a.successes;
    npp.push_back(static_cast<double>(r.metrics.npp));
    l0.push_back(static_cast<double>(r.metrics.l0));
    linf.push_back(r.metrics.linf);
    l20.push_back(static_cast<double>(r.metrics.l20));
  }
  a.asr = 100.0 * static_cast<double>(a.successes) / static_cast<double>(a.total);
  a.npp_mean = mean_of(npp);
  a.npp_std = std_of(npp, a.npp_mean);
  a.l0_mean = mean_of(l0);
  a.l0_std = std_of(l0, a.l0_mean);
  a.linf_mean = mean_of(linf);
  a.linf_std = std_of(linf, a.linf_mean);
  a.l20_mean = mean_of(l20);
  a.l20_std = std_of(l20, a.l20_mean);
  return a;
}

std::string format_report(const RunReport& report) {
  std::string out = "# atos run report\n";
  for (const auto& [k, v] : report.header) out += fmt::format("{} = {}\n", k, v);
  const Aggregate& a = report.aggregate;
  out += fmt::format("samples = {}\nsuccesses = {}\nasr = {}\n", a.total, a.successes, a.asr);
  out += fmt::format("npp_mean = {}\nnpp_std = {}\n", a.npp_mean, a.npp_std);
  out += fmt::format("l0_mean = {}\nl0_std = {}\n", a.l0_mean, a.l0_std);
  out += fmt::format("linf_mean = {}\nlinf_std = {}\n", a.linf_mean, a.linf_std);
  out += fmt::format("l20_mean = {}\nl20_std = {}\n", a.l20_mean, a.l20_std);
  out += fmt::format("wall_time_seconds = {}\n", a.wall_time_seconds);
  for (const auto& r : report.per_sample) {
    out += fmt::format("\n[sample]\nid = {}\nlabel = {}\ntarget = {}\npredicted = {}\n", r.sample_id,
                       r.label, r.target, r.predicted);
    out += fmt::format("success = {}\nnumeric_failure = {}\nrestarts = {}\nfinal_lambda = {}\n",
                       r.success ? 1 : 0, r.numeric_failure ? 1 : 0, r.restarts, r.final_lambda);
    out += fmt::format("npp = {}\nl0 = {}\nlinf = {}\nl20 = {}\n", r.metrics.npp, r.metrics.l0,
                       r.metrics.linf, r.metrics.l20);
    out += fmt::format("delta = {}\nadversarial = {}\nmask = {}\n", r.delta_file,
                       r.adversarial_file, r.mask_file);
    out += fmt::format("time_seconds = {}\n", r.time_seconds);
  }
  return out;
}

RunReport parse_report(const std::string& text) {
  RunReport report;
  std::stringstream in(text);
  std::string line;
  SampleRow* row = nullptr;
  std::map<std::string, std::string> agg;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (line == "[sample]") {
      report.per_sample.emplace_back();
      row = &report.per_sample.back();
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("report: malformed line: " + line);
    const auto key = trim(line.substr(0, eq));
    const auto val = trim(line.substr(eq + 1));
    if (!row) {
      agg[key] = val;
      continue;
    }
    if (key == "id") row->sample_id = to_count(key, val);
    else if (key == "label") row->label = to_count(key, val);
    else if (key == "target") row->target = to_count(key, val);
    else if (key == "predicted") row->predicted = to_count(key, val);
    else if (key == "success") row->success = to_bool(key, val);
    else if (key == "numeric_failure") row->numeric_failure = to_bool(key, val);
    else if (key == "restarts") row->restarts = to_count(key, val);
    else if (key == "final_lambda") row->final_lambda = to_double(key, val);
    else if (key == "npp") row->metrics.npp = to_count(key, val);
    else if (key == "l0") row->metrics.l0 = to_count(key, val);
    else if (key == "linf") row->metrics.linf = to_double(key, val);
    else if (key == "l20") row->metrics.l20 = to_count(key, val);
    else if (key == "delta") row->delta_file = val;
    else if (key == "adversarial") row->adversarial_file = val;
    else if (key == "mask") row->mask_file = val;
    else if (key == "time_seconds") row->time_seconds = to_double(key, val);
    else throw FormatError("report: unknown sample key " + key);
  }
  auto num = [&](const char* k) {
    const auto it = agg.find(k);
    if (it == agg.end()) throw FormatError(std::string("report: missing ") + k);
    const double v = to_double(k, it->second);
    agg.erase(it);
    return v;
  };
  Aggregate& a = report.aggregate;
  a.total = static_cast<std::size_t>(num("samples"));
  a.successes = static_cast<std::size_t>(num("successes"));
  a.asr = num("asr");
  a.npp_mean = num("npp_mean");
  a.npp_std = num("npp_std");
  a.l0_mean = num("l0_mean");
  a.l0_std = num("l0_std");
  a.linf_mean = num("linf_mean");
  a.linf_std = num("linf_std");
  a.l20_mean = num("l20_mean");
  a.l20_std = num("l20_std");
  a.wall_time_seconds = num("wall_time_seconds");
  report.header = std::move(agg);
  return report;
}

RunReport load_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open report " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_report(ss.str());
}

std::vector<std::uint8_t> perturbation_mask(const Tensor& delta) {
  const Shape& s = delta.shape();
  std::vector<std::uint8_t> mask(s.pixels(), 0);
  for (std::size_t ch = 0; ch < s.channels; ++ch) {
    for (std::size_t p = 0; p < s.pixels(); ++p) {
      if (delta[ch * s.pixels() + p] != 0.0) mask[p] = 255;
    }
  }
  return mask;
}

RunReport run(const RunConfig& config) {
  const TinyNet net = load_tinynet(config.weights);
  const Dataset data = load_dataset(config.dataset, config.labels);

  std::vector<std::size_t> ids;
  if (config.all_samples) {
    for (std::size_t i = 0; i < data.size(); ++i) ids.push_back(i);
  } else {
    for (std::size_t i : config.samples) {
      if (i >= data.size()) {
        throw std::invalid_argument(fmt::format("sample {} out of range ({} in dataset)", i,
                                                data.size()));
      }
      ids.push_back(i);
    }
  }
  std::vector<Tensor> images;
  std::vector<std::size_t> labels;
  std::vector<std::size_t> kept;
  for (std::size_t i : ids) {
    if (data.labels[i] >= net.num_classes()) {
      throw std::invalid_argument(fmt::format("sample {} has label {} but the net has {} classes",
                                              i, data.labels[i], net.num_classes()));
    }
    if (config.only_correct && net.predict(data.images[i]) != data.labels[i]) continue;
    if (config.limit && kept.size() >= config.limit) break;
    kept.push_back(i);
    images.push_back(data.images[i]);
    labels.push_back(data.labels[i]);
  }
  if (kept.empty()) throw std::invalid_argument("empty dataset");

  const auto results = attack_batch(images, labels, config.attack, net, config.threads);

  std::filesystem::create_directories(config.output_dir);
  RunReport report;
  const GroupIndex index = build_index(config.attack.rule, net.input_shape());
  const auto& a = config.attack;
  report.header["format"] = "atos-report-1";
  report.header["rule"] = rule_name(a.rule);
  report.header["target_mode"] = target_name(a.target);
  report.header["regularizer"] = to_string(mode_of(index));
  report.header["sigma0"] = fmt::format("{}", a.sigma0.value_or(default_sigma0(a, index)));
  report.header["sparsity_step_bound"] = fmt::format("{}", sparsity_step_bound(a, index));
  report.header["l20_block"] =
      fmt::format("{}", std::min({a.l20_block, net.input_shape().width, net.input_shape().height}));

  for (std::size_t n = 0; n < results.size(); ++n) {
    const AttackResult& r = results[n];
    SampleRow row;
    row.sample_id = kept[n];
    row.label = r.true_class;
    row.target = r.target_class;
    row.predicted = r.predicted_class;
    row.success = r.success;
    row.numeric_failure = r.numeric_failure;
    row.restarts = r.restarts_used;
    row.final_lambda = r.final_lambda;
    row.metrics = r.metrics;
    row.time_seconds = r.seconds;
    const std::string stem = fmt::format("sample_{:05d}", kept[n]);
    row.delta_file = stem + "_delta.atn";
    row.adversarial_file = stem + "_adv.atn";
    row.mask_file = stem + "_mask.pgm";
    save_atn(config.output_dir / row.delta_file, r.delta);
    save_atn(config.output_dir / row.adversarial_file, r.adversarial);
    save_pgm(config.output_dir / row.mask_file, r.delta.shape().width, r.delta.shape().height,
             perturbation_mask(r.delta));
    report.per_sample.push_back(std::move(row));
  }
  report.aggregate = aggregate_rows(report.per_sample);

  std::ofstream out(config.output_dir / "report.txt", std::ios::trunc);
  if (!out) throw FormatError("cannot write report in " + config.output_dir.string());
  out << format_report(report);
  return report;
}

bool verify(const std::filesystem::path& image_path, const std::filesystem::path& weights_path,
            std::size_t expected_class) {
  const TinyNet net = load_tinynet(weights_path);
  const Tensor image = load_image(image_path);
  if (expected_class >= net.num_classes()) {
    throw std::invalid_argument("expected class out of range");
  }
  return net.predict(image) == expected_class;
}

}  // namespace atos

#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "atos/attack.hpp"

namespace atos {

/// Contents of a run config file.
///
/// The file is flat "key = value" text; '#' starts a comment. Paths are
/// resolved relative to the config file's directory. Recognized keys:
///
///   weights, dataset, labels, output_dir      files and directories
///   samples       "all" or a list like "0,3,10-19" of dataset indices
///   only_correct  true/false, drop samples the net misclassifies (default true)
///   limit         keep at most this many samples after filtering
///   threads       worker threads for the batch (default 1)
///   steps iters mu lambda lambda_s lambda_inf s_lambda s_sigma sigma0 p
///   target        untargeted | worstcase | <class index>
///   rule          element | pixel | group
///   window stride levels max_restarts sigma_m linf_clip_factor
///   bound_source  exact | heuristic
///   l20_block
struct RunConfig {
  std::filesystem::path config_path;
  std::filesystem::path weights;
  std::filesystem::path dataset;
  std::filesystem::path labels;
  std::filesystem::path output_dir;
  std::vector<std::size_t> samples;  // empty with all_samples = true means every index
  bool all_samples = true;
  bool only_correct = true;
  std::size_t limit = 0;  // 0 = no limit
  std::size_t threads = 1;
  AttackConfig attack;
};

/// Parses config text; `base` resolves relative paths. Throws
/// std::invalid_argument with the offending line on error.
RunConfig parse_config(const std::string& text, const std::filesystem::path& base);
RunConfig load_config(const std::filesystem::path& path);

struct SampleRow {
  std::size_t sample_id = 0;
  std::size_t label = 0;
  std::size_t target = 0;
  std::size_t predicted = 0;
  bool success = false;
  bool numeric_failure = false;
  std::size_t restarts = 0;
  double final_lambda = 0.0;
  MetricBundle metrics;
  std::string delta_file;
  std::string adversarial_file;
  std::string mask_file;
  double time_seconds = 0.0;
};

struct Aggregate {
  std::size_t total = 0;
  std::size_t successes = 0;
  double asr = 0.0;  // percent
  // Mean and population std over successful samples.
  double npp_mean = 0.0, npp_std = 0.0;
  double l0_mean = 0.0, l0_std = 0.0;
  double linf_mean = 0.0, linf_std = 0.0;
  double l20_mean = 0.0, l20_std = 0.0;
  double wall_time_seconds = 0.0;
};

struct RunReport {
  std::map<std::string, std::string> header;
  std::vector<SampleRow> per_sample;
  Aggregate aggregate;
};

/// Recomputes the aggregate block from per-sample rows. Throws on an
/// empty row list.
Aggregate aggregate_rows(const std::vector<SampleRow>& rows);

/// Serializes a report. Keys ending in "time_seconds" carry timing and
/// are the only fields that vary between identical runs.
std::string format_report(const RunReport& report);
RunReport parse_report(const std::string& text);
RunReport load_report(const std::filesystem::path& path);

/// Loads weights and data, attacks the selected samples and writes
/// report.txt plus per-sample delta (ATN1), adversarial image (ATN1) and
/// mask (PGM, 255 = perturbed pixel) into output_dir.
RunReport run(const RunConfig& config);

/// One forward pass on a stored image; true iff argmax == expected_class.
bool verify(const std::filesystem::path& image_path, const std::filesystem::path& weights_path,
            std::size_t expected_class);

/// Pixel mask of a delta: 255 where any channel is nonzero.
std::vector<std::uint8_t> perturbation_mask(const Tensor& delta);

}  // namespace atos

#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "atos/grouping.hpp"
#include "atos/metrics.hpp"
#include "atos/model.hpp"
#include "atos/regularizers.hpp"
#include "atos/tensor.hpp"

namespace atos {

/// A non-finite gradient or iterate aborted the run.
class NumericFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class TargetKind { Untargeted, WorstCase, Fixed };

struct TargetMode {
  TargetKind kind = TargetKind::Untargeted;
  std::size_t fixed_class = 0;

  static TargetMode untargeted() { return {TargetKind::Untargeted, 0}; }
  static TargetMode worst_case() { return {TargetKind::WorstCase, 0}; }
  static TargetMode fixed(std::size_t cls) { return {TargetKind::Fixed, cls}; }
};

/// Hyperparameters of the annealed sparse attack.
struct AttackConfig {
  std::size_t steps = 10;        // outer sigma steps
  std::size_t iters = 200;       // gradient iterations per step
  double mu = 1.2;               // step size
  double lambda = 0.05;          // cross-entropy weight
  double lambda_s = 1.0;         // sparsity weight
  double lambda_inf = 0.0;       // l-infinity weight
  double s_lambda = 2.0;         // lambda growth per restart
  double s_sigma = 0.5;          // sigma decay per step
  std::optional<double> sigma0;  // unset: from the convexity bound
  double p = 1e4;                // LSEAp sharpness
  TargetMode target;
  GroupingRule rule;
  QuantScale quant;
  std::size_t max_restarts = 20;
  std::optional<double> sigma_m;           // expected max |delta| when intensity is controlled
  std::optional<double> linf_clip_factor;  // per-iteration clamp at factor * sigma_m
  BoundSource bound_source = BoundSource::Heuristic;
  std::size_t l20_block = 8;     // clamped to the image size for reporting

  /// Throws std::invalid_argument on out-of-range values.
  void validate() const;
};

struct AttackResult {
  Tensor delta;        // quantized perturbation
  Tensor adversarial;  // clamp(x + delta), the image success was judged on
  bool success = false;
  bool numeric_failure = false;
  std::string error;
  std::size_t restarts_used = 0;
  double final_lambda = 0.0;
  double sigma0 = 0.0;
  std::size_t true_class = 0;
  std::size_t target_class = 0;     // last target used
  std::size_t predicted_class = 0;  // prediction on `adversarial`
  MetricBundle metrics;
  double seconds = 0.0;  // wall time, not part of the deterministic output
};

/// Untargeted: most probable class other than true_class. WorstCase: least
/// probable class. Fixed: the given class, which must differ from
/// true_class.
std::size_t select_target(std::span<const double> logits, std::size_t true_class,
                          const TargetMode& mode);

/// Whether `predicted` satisfies the attack goal.
bool target_reached(std::size_t predicted, std::size_t true_class, std::size_t target,
                    const TargetMode& mode);

/// sigma0 from the convexity bound with delta_m = sigma_m, or 1 when the
/// intensity is not controlled.
double default_sigma0(const AttackConfig& cfg, const GroupIndex& index);

/// Largest stable step for the sigma^2-scaled sparsity term,
/// 1 / (L(sigma) * sigma^2). Independent of sigma.
double sparsity_step_bound(const AttackConfig& cfg, const GroupIndex& index);

/// lambda CE(net(x + delta), target) + lambda_s sigma^2 r_s(delta)
///   + lambda_inf (max|delta| + LSEAp(delta)). The l-inf term is the smooth
/// max whose gradient is lseap_gradient; the max|delta| shift does not
/// change the value's minimizers.
double composite_objective(const Tensor& x, const Tensor& delta, std::size_t target,
                           const AttackConfig& cfg, double sigma, const GroupIndex& index,
                           const Classifier& net);

/// Gradient of composite_objective with respect to delta.
Tensor composite_gradient(const Tensor& x, const Tensor& delta, std::size_t target,
                          const AttackConfig& cfg, double sigma, const GroupIndex& index,
                          const Classifier& net);

/// Progress hook, called after every inner iteration.
struct IterationEvent {
  std::size_t restart;
  std::size_t step;
  std::size_t iter;
  double sigma;
  double lambda;
  std::size_t target;
  const Tensor& delta;
};
using AttackObserver = std::function<void(const IterationEvent&)>;

/// Runs the annealed attack on one image, relaxing lambda on failure.
/// Exhausting the restarts yields success = false; a non-finite gradient
/// throws NumericFailure.
AttackResult attack_image(const Tensor& x, std::size_t true_class, const AttackConfig& cfg,
                          const Classifier& net, const AttackObserver& observer = {});

/// attack_image over a batch. Results keep input order; numeric failures
/// become failed results. threads > 1 runs samples concurrently.
std::vector<AttackResult> attack_batch(std::span<const Tensor> images,
                                       std::span<const std::size_t> labels,
                                       const AttackConfig& cfg, const Classifier& net,
                                       std::size_t threads = 1);

}  // namespace atos

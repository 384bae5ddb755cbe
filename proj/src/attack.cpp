#include "atos/attack.hpp"

#include <algorithm>
#include <atomic>
#include <cassert>
#include <chrono>
#include <cmath>
#include <limits>
#include <thread>

namespace atos {

void AttackConfig::validate() const {
  auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
  if (steps < 1) throw std::invalid_argument("steps must be at least 1");
  if (iters < 1) throw std::invalid_argument("iters must be at least 1");
  if (!positive(mu)) throw std::invalid_argument("mu must be positive");
  if (!positive(lambda)) throw std::invalid_argument("lambda must be positive");
  if (!(lambda_s >= 0.0) || !(lambda_inf >= 0.0)) {
    throw std::invalid_argument("lambda_s and lambda_inf must be non-negative");
  }
  if (!(s_lambda > 1.0)) throw std::invalid_argument("s_lambda must exceed 1");
  if (!(s_sigma > 0.0 && s_sigma < 1.0)) throw std::invalid_argument("s_sigma must lie in (0, 1)");
  if (sigma0 && !positive(*sigma0)) throw std::invalid_argument("sigma0 must be positive");
  if (!positive(p)) throw std::invalid_argument("p must be positive");
  if (sigma_m && !positive(*sigma_m)) throw std::invalid_argument("sigma_m must be positive");
  if (linf_clip_factor && !positive(*linf_clip_factor)) {
    throw std::invalid_argument("linf_clip_factor must be positive");
  }
  if (linf_clip_factor && !sigma_m) {
    throw std::invalid_argument("linf_clip_factor requires sigma_m");
  }
  if (l20_block == 0) throw std::invalid_argument("l20_block must be positive");
}

std::size_t select_target(std::span<const double> logits, std::size_t true_class,
                          const TargetMode& mode) {
  if (logits.size() < 2) throw std::invalid_argument("need at least two classes");
  if (true_class >= logits.size()) throw std::invalid_argument("true class out of range");
  switch (mode.kind) {
    case TargetKind::Untargeted: {
      std::size_t best = true_class == 0 ? 1 : 0;
      for (std::size_t k = 0; k < logits.size(); ++k) {
        if (k != true_class && logits[k] > logits[best]) best = k;
      }
      return best;
    }
    case TargetKind::WorstCase:
      return static_cast<std::size_t>(std::min_element(logits.begin(), logits.end()) -
                                      logits.begin());
    case TargetKind::Fixed:
      if (mode.fixed_class >= logits.size()) {
        throw std::invalid_argument("fixed target out of range");
      }
      if (mode.fixed_class == true_class) {
        throw std::invalid_argument("fixed target equals the true class");
      }
      return mode.fixed_class;
  }
  throw std::invalid_argument("unknown target mode");
}

bool target_reached(std::size_t predicted, std::size_t true_class, std::size_t target,
                    const TargetMode& mode) {
  if (mode.kind == TargetKind::Untargeted) return predicted != true_class;
  return predicted == target;
}

double default_sigma0(const AttackConfig& cfg, const GroupIndex& index) {
  const double delta_m = cfg.sigma_m.value_or(1.0);
  return convexity_sigma_min(mode_of(index), delta_m, index, cfg.bound_source);
}

double sparsity_step_bound(const AttackConfig& cfg, const GroupIndex& index) {
  return 1.0 / lipschitz_bound(mode_of(index), 1.0, index, cfg.bound_source);
}

namespace {

// x + delta without clamping; the iterates are kept feasible by clipping.
Tensor shifted(const Tensor& x, const Tensor& delta) {
  Tensor out = x;
  for (std::size_t j = 0; j < out.size(); ++j) out[j] += delta[j];
  return out;
}

}  // namespace

double composite_objective(const Tensor& x, const Tensor& delta, std::size_t target,
                           const AttackConfig& cfg, double sigma, const GroupIndex& index,
                           const Classifier& net) {
  double value = cfg.lambda * ce_loss(net.forward(shifted(x, delta)), target);
  if (cfg.lambda_s > 0.0) {
    value += cfg.lambda_s * sigma * sigma * osl0_value(categorize(delta, index), Sl0Params(sigma));
  }
  if (cfg.lambda_inf > 0.0) {
    value += cfg.lambda_inf * lseap_smooth_max(delta.values(), LseapParams(cfg.p));
  }
  return value;
}

Tensor composite_gradient(const Tensor& x, const Tensor& delta, std::size_t target,
                          const AttackConfig& cfg, double sigma, const GroupIndex& index,
                          const Classifier& net) {
  Tensor grad = net.input_gradient(shifted(x, delta), target);
  for (double& g : grad.values()) g *= cfg.lambda;
  if (cfg.lambda_s > 0.0) {
    const double w = cfg.lambda_s * sigma * sigma;
    const auto gs = osl0_gradient(categorize(delta, index), Sl0Params(sigma));
    for (std::size_t j = 0; j < gs.size(); ++j) grad[j] += w * gs[j];
  }
  if (cfg.lambda_inf > 0.0) {
    const auto gi = lseap_gradient(delta.values(), LseapParams(cfg.p));
    for (std::size_t j = 0; j < gi.size(); ++j) grad[j] += cfg.lambda_inf * gi[j];
  }
  return grad;
}

namespace {

AttackResult finish(const Tensor& x, const Tensor& delta, std::size_t true_class,
                    std::size_t target, const AttackConfig& cfg, const Classifier& net) {
  AttackResult r;
  r.delta = quantize(delta, cfg.quant);
  r.adversarial = add_clamped(x, r.delta);
  r.true_class = true_class;
  r.target_class = target;
  r.predicted_class = net.predict(r.adversarial);
  r.success = target_reached(r.predicted_class, true_class, target, cfg.target);
  const Shape& s = x.shape();
  r.metrics = compute_metrics(r.delta, std::min({cfg.l20_block, s.width, s.height}));
  return r;
}

}  // namespace

AttackResult attack_image(const Tensor& x, std::size_t true_class, const AttackConfig& cfg,
                          const Classifier& net, const AttackObserver& observer) {
  const auto started = std::chrono::steady_clock::now();
  cfg.validate();
  require_image(x, "attack input");
  if (x.shape() != net.input_shape()) {
    throw std::invalid_argument("image shape " + to_string(x.shape()) +
                                " does not match the classifier input " +
                                to_string(net.input_shape()));
  }
  const GroupIndex index = build_index(cfg.rule, x.shape());
  const double sigma0 = cfg.sigma0.value_or(default_sigma0(cfg, index));
  const auto clean_logits = net.forward(x);
  // WorstCase and Fixed targets are frozen from the clean logits.
  std::size_t target = select_target(clean_logits, true_class, cfg.target);

  auto stamp = [&](AttackResult r, std::size_t restarts, double lambda) {
    r.restarts_used = restarts;
    r.final_lambda = lambda;
    r.sigma0 = sigma0;
    r.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return r;
  };

  const Tensor zero(x.shape());
  {
    auto r = finish(x, zero, true_class, target, cfg, net);
    if (r.success) return stamp(std::move(r), 0, cfg.lambda);
  }

  const std::optional<double> linf_cap =
      cfg.linf_clip_factor ? std::optional<double>(*cfg.linf_clip_factor * *cfg.sigma_m)
                           : std::nullopt;
  AttackConfig run = cfg;
  for (std::size_t restart = 0;; ++restart) {
    Tensor delta = zero;
    for (std::size_t k = 0; k < cfg.steps; ++k) {
      const double sigma = sigma0 * std::pow(cfg.s_sigma, static_cast<double>(k));
      for (std::size_t i = 0; i < cfg.iters; ++i) {
        if (cfg.target.kind == TargetKind::Untargeted) {
          target = select_target(net.forward(shifted(x, delta)), true_class, cfg.target);
        }
        const Tensor grad = composite_gradient(x, delta, target, run, sigma, index, net);
        if (!grad.all_finite()) {
          throw NumericFailure("non-finite gradient at restart " + std::to_string(restart) +
                               ", step " + std::to_string(k) + ", iteration " +
                               std::to_string(i));
        }
        for (std::size_t j = 0; j < delta.size(); ++j) delta[j] -= cfg.mu * grad[j];
        clip_to_box_inplace(x, delta);
        if (linf_cap) {
          for (double& v : delta.values()) v = std::clamp(v, -*linf_cap, *linf_cap);
        }
        assert(shifted(x, delta).is_unit_box());
        if (observer) observer({restart, k, i, sigma, run.lambda, target, delta});
      }
    }
    auto r = finish(x, delta, true_class, target, cfg, net);
    if (r.success || restart >= cfg.max_restarts) return stamp(std::move(r), restart, run.lambda);
    run.lambda *= cfg.s_lambda;
  }
}

std::vector<AttackResult> attack_batch(std::span<const Tensor> images,
                                       std::span<const std::size_t> labels,
                                       const AttackConfig& cfg, const Classifier& net,
                                       std::size_t threads) {
  if (images.size() != labels.size()) {
    throw std::invalid_argument("attack_batch: images and labels differ in length");
  }
  cfg.validate();
  std::vector<AttackResult> results(images.size());
  auto run_one = [&](std::size_t i) {
    try {
      results[i] = attack_image(images[i], labels[i], cfg, net);
    } catch (const NumericFailure& e) {
      AttackResult r;
      r.delta = Tensor(images[i].shape());
      r.adversarial = images[i];
      r.true_class = labels[i];
      r.predicted_class = net.predict(images[i]);
      r.numeric_failure = true;
      r.error = e.what();
      results[i] = std::move(r);
    }
  };

  threads = std::max<std::size_t>(1, std::min(threads, images.size()));
  if (threads == 1) {
    for (std::size_t i = 0; i < images.size(); ++i) run_one(i);
    return results;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < images.size(); i = next++) run_one(i);
    });
  }
  pool.clear();  // joins
  return results;
}

}  // namespace atos

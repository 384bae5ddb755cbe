#pragma once

#include <span>
#include <vector>

#include "atos/grouping.hpp"

namespace atos {

/// Smoothed-l0 relaxation width. Must be positive.
struct Sl0Params {
  double sigma;

  explicit Sl0Params(double s);
};

/// LSEAp sharpness. Must be positive.
struct LseapParams {
  double p;

  explicit LseapParams(double value);
};

/// Which closed-form smoothness bounds apply.
///   SL0   - singleton groups
///   NOSL0 - disjoint groups of n_v > 1 elements
///   OSL0  - overlapping groups
enum class RegularizerMode { SL0, NOSL0, OSL0 };

const char* to_string(RegularizerMode mode);

/// Mode implied by the layout of an index.
RegularizerMode mode_of(const GroupIndex& index);

/// Where the OSL0 constants come from for 2-D window indices.
///   Exact     - n_n and n_{B_m} measured on the index
///   Heuristic - treat the window as a linear group of n_v = c*n elements
///               with the window stride
enum class BoundSource { Exact, Heuristic };

struct SmoothnessBounds {
  RegularizerMode mode;
  double convexity_sigma_min;
  double lipschitz_L;
};

// Overlapping smoothed l0: sum_b (1 - exp(-||x_b||^2 / (2 sigma^2))).
double osl0_value(const GroupedView& groups, const Sl0Params& params);

/// d/dx_j = (x_j / sigma^2) * sum_{b in B_j} exp(-||x_b||^2 / (2 sigma^2)).
std::vector<double> osl0_gradient(const GroupedView& groups, const Sl0Params& params);

/// Dense row-major N x N Hessian of osl0_value.
std::vector<double> osl0_hessian(const GroupedView& groups, const Sl0Params& params);

/// Element-wise smoothed l0, sum_i (1 - exp(-x_i^2 / (2 sigma^2))).
double sl0_value(std::span<const double> x, const Sl0Params& params);
std::vector<double> sl0_gradient(std::span<const double> x, const Sl0Params& params);

/// (1/p) ln sum_i exp(p (|x_i| - max|x|)). Throws on empty input.
double lseap_value(std::span<const double> x, const LseapParams& params);

/// max|x| + lseap_value(x), i.e. (1/p) ln sum_i exp(p |x_i|) evaluated
/// stably. A smooth upper bound on ||x||_inf; lseap_gradient is its exact
/// gradient wherever no x_i is 0.
double lseap_smooth_max(std::span<const double> x, const LseapParams& params);

/// sgn(x_k) exp(p(|x_k| - max|x|)) / sum_i exp(p(|x_i| - max|x|)), with
/// sgn(0) = 0. Throws on empty input.
std::vector<double> lseap_gradient(std::span<const double> x, const LseapParams& params);

/// Smallest sigma for which OSL0 on this index is provably convex when all
/// |x| <= x_max.
double convexity_sigma_min(RegularizerMode mode, double x_max, const GroupIndex& index,
                           BoundSource source = BoundSource::Exact);

/// Gradient Lipschitz constant of OSL0 on this index at the given sigma.
double lipschitz_bound(RegularizerMode mode, double sigma, const GroupIndex& index,
                       BoundSource source = BoundSource::Exact);

SmoothnessBounds smoothness_bounds(const GroupIndex& index, double x_max, double sigma,
                                   BoundSource source = BoundSource::Exact);

}  // namespace atos

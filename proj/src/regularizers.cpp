#include "atos/regularizers.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace atos {

Sl0Params::Sl0Params(double s) : sigma(s) {
  if (!(s > 0.0) || !std::isfinite(s)) throw std::invalid_argument("sigma must be positive");
}

LseapParams::LseapParams(double value) : p(value) {
  if (!(value > 0.0) || !std::isfinite(value)) throw std::invalid_argument("p must be positive");
}

const char* to_string(RegularizerMode mode) {
  switch (mode) {
    case RegularizerMode::SL0: return "SL0";
    case RegularizerMode::NOSL0: return "NOSL0";
    case RegularizerMode::OSL0: return "OSL0";
  }
  return "?";
}

RegularizerMode mode_of(const GroupIndex& index) {
  switch (index.layout()) {
    case GroupLayout::Singleton: return RegularizerMode::SL0;
    case GroupLayout::Disjoint: return RegularizerMode::NOSL0;
    case GroupLayout::Linear:
    case GroupLayout::Window: return RegularizerMode::OSL0;
  }
  return RegularizerMode::OSL0;
}

namespace {

// SL0 and OSL0 share these two expressions so singleton groups reproduce
// SL0 bit for bit.
inline double group_factor(double energy, double two_sigma_sq) {
  return std::exp(-energy / two_sigma_sq);
}

inline double scaled_coordinate(double x, double sigma_sq, double weight) {
  return x / sigma_sq * weight;
}

std::vector<double> group_factors(const GroupedView& groups, double two_sigma_sq) {
  std::vector<double> factors(groups.n_groups());
  for (std::size_t b = 0; b < factors.size(); ++b) {
    factors[b] = group_factor(groups.group_energy(b), two_sigma_sq);
  }
  return factors;
}

double max_abs(std::span<const double> x) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace

double osl0_value(const GroupedView& groups, const Sl0Params& params) {
  const double two_sigma_sq = 2.0 * params.sigma * params.sigma;
  double total = 0.0;
  for (std::size_t b = 0; b < groups.n_groups(); ++b) {
    total += 1.0 - group_factor(groups.group_energy(b), two_sigma_sq);
  }
  return total;
}

std::vector<double> osl0_gradient(const GroupedView& groups, const Sl0Params& params) {
  const double sigma_sq = params.sigma * params.sigma;
  const auto factors = group_factors(groups, 2.0 * sigma_sq);
  const auto& index = groups.index();
  const auto x = groups.values();
  std::vector<double> grad(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    double weight = 0.0;  // E_{T_j}
    for (std::size_t b : index.groups_of(j)) weight += factors[b];
    grad[j] = scaled_coordinate(x[j], sigma_sq, weight);
  }
  return grad;
}

std::vector<double> osl0_hessian(const GroupedView& groups, const Sl0Params& params) {
  const double inv_sigma_sq = 1.0 / (params.sigma * params.sigma);
  const auto factors = group_factors(groups, 2.0 * params.sigma * params.sigma);
  const auto& index = groups.index();
  const auto x = groups.values();
  const std::size_t n = x.size();
  std::vector<double> h(n * n, 0.0);
  for (std::size_t b = 0; b < groups.n_groups(); ++b) {
    const auto members = index.members(b);
    for (std::size_t j : members) {
      for (std::size_t k : members) {
        if (j == k) {
          h[j * n + j] += inv_sigma_sq * (1.0 - inv_sigma_sq * x[j] * x[j]) * factors[b];
        } else {
          h[j * n + k] -= inv_sigma_sq * inv_sigma_sq * x[j] * x[k] * factors[b];
        }
      }
    }
  }
  return h;
}

double sl0_value(std::span<const double> x, const Sl0Params& params) {
  const double two_sigma_sq = 2.0 * params.sigma * params.sigma;
  double total = 0.0;
  for (double v : x) total += 1.0 - group_factor(v * v, two_sigma_sq);
  return total;
}

std::vector<double> sl0_gradient(std::span<const double> x, const Sl0Params& params) {
  const double sigma_sq = params.sigma * params.sigma;
  std::vector<double> grad(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    grad[j] = scaled_coordinate(x[j], sigma_sq, group_factor(x[j] * x[j], 2.0 * sigma_sq));
  }
  return grad;
}

double lseap_value(std::span<const double> x, const LseapParams& params) {
  if (x.empty()) throw std::invalid_argument("LSEAp of an empty vector");
  const double lx = max_abs(x);
  double sum = 0.0;
  for (double v : x) sum += std::exp(params.p * (std::abs(v) - lx));
  return std::log(sum) / params.p;
}

double lseap_smooth_max(std::span<const double> x, const LseapParams& params) {
  return max_abs(x) + lseap_value(x, params);
}

std::vector<double> lseap_gradient(std::span<const double> x, const LseapParams& params) {
  if (x.empty()) throw std::invalid_argument("LSEAp gradient of an empty vector");
  const double lx = max_abs(x);
  std::vector<double> grad(x.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    grad[k] = std::exp(params.p * (std::abs(x[k]) - lx));
    sum += grad[k];
  }
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double sgn = x[k] > 0.0 ? 1.0 : (x[k] < 0.0 ? -1.0 : 0.0);
    grad[k] = sgn * grad[k] / sum;
  }
  return grad;
}

namespace {

struct OverlapConstants {
  double neighbors;            // 2n_v - 1, or n_n
  double groups_per_element;   // ceil(n_v / s), or n_{B_m}
};

OverlapConstants overlap_constants(const GroupIndex& index, BoundSource source) {
  if (index.layout() == GroupLayout::Window && source == BoundSource::Exact) {
    return {static_cast<double>(index.max_neighbors()),
            static_cast<double>(index.max_groups_per_element())};
  }
  std::size_t nv = index.group_size();
  std::size_t s = index.stride();
  if (index.layout() == GroupLayout::Window) nv = index.shape().channels * index.window();
  const std::size_t ceil_ratio = (nv + s - 1) / s;
  // The flush tail group can put an element in one more group than the
  // regular spacing allows; n_{B_m} is the true maximum.
  std::size_t nbm = ceil_ratio;
  if (index.layout() != GroupLayout::Window) nbm = std::max(nbm, index.max_groups_per_element());
  return {2.0 * static_cast<double>(nv) - 1.0, static_cast<double>(nbm)};
}

}  // namespace

double convexity_sigma_min(RegularizerMode mode, double x_max, const GroupIndex& index,
                           BoundSource source) {
  if (x_max < 0.0) throw std::invalid_argument("x_max must be non-negative");
  switch (mode) {
    case RegularizerMode::SL0: return x_max;
    case RegularizerMode::NOSL0:
      return x_max * std::sqrt(static_cast<double>(index.group_size()));
    case RegularizerMode::OSL0:
      return x_max * std::sqrt(overlap_constants(index, source).neighbors);
  }
  return x_max;
}

double lipschitz_bound(RegularizerMode mode, double sigma, const GroupIndex& index,
                       BoundSource source) {
  if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
  const double inv_e = 1.0 / std::numbers::e;
  const double inv_sigma_sq = 1.0 / (sigma * sigma);
  switch (mode) {
    case RegularizerMode::SL0: return inv_sigma_sq;
    case RegularizerMode::NOSL0: {
      const double nv = static_cast<double>(index.group_size());
      return (1.0 + 2.0 * (nv - 2.0) * inv_e) * inv_sigma_sq;
    }
    case RegularizerMode::OSL0: {
      const auto c = overlap_constants(index, source);
      // 2n_v - 3 == (2n_v - 1) - 2, and n_n - 2 for windows.
      return (1.0 + 2.0 * (c.neighbors - 2.0) * inv_e) * c.groups_per_element * inv_sigma_sq;
    }
  }
  return inv_sigma_sq;
}

SmoothnessBounds smoothness_bounds(const GroupIndex& index, double x_max, double sigma,
                                   BoundSource source) {
  const auto mode = mode_of(index);
  return {mode, convexity_sigma_min(mode, x_max, index, source),
          lipschitz_bound(mode, sigma, index, source)};
}

}  // namespace atos

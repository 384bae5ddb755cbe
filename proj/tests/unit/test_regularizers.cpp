#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>
#include <random>

#include "atos/model.hpp"
#include "atos/regularizers.hpp"
#include "oracles.hpp"

using namespace atos;

namespace {

std::vector<std::vector<std::size_t>> groups_of_index(const GroupIndex& idx) {
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t b = 0; b < idx.n_groups(); ++b) {
    const auto m = idx.members(b);
    out.emplace_back(m.begin(), m.end());
  }
  return out;
}

std::vector<double> random_vec(std::mt19937_64& gen, std::size_t n, double a) {
  std::uniform_real_distribution<double> u(-a, a);
  std::vector<double> v(n);
  for (double& x : v) x = u(gen);
  return v;
}

}  // namespace

TEST_CASE("osl0 value examples") {
  const auto idx = build_linear_index(2, 2, 2);
  const std::vector<double> x{3.0, 4.0};
  CHECK(osl0_value(GroupedView(x, idx), Sl0Params(5.0)) ==
        doctest::Approx(1.0 - std::exp(-0.5)).epsilon(1e-14));
  CHECK(osl0_value(GroupedView(x, idx), Sl0Params(5.0)) == doctest::Approx(0.3934693).epsilon(1e-7));
  const std::vector<double> z(2, 0.0);
  CHECK(osl0_value(GroupedView(z, idx), Sl0Params(0.1)) == 0.0);
}

TEST_CASE("parameter validation") {
  CHECK_THROWS_AS(Sl0Params(0.0), std::invalid_argument);
  CHECK_THROWS_AS(Sl0Params(-1.0), std::invalid_argument);
  CHECK_THROWS_AS(LseapParams(0.0), std::invalid_argument);
  const std::vector<double> empty;
  CHECK_THROWS_AS(lseap_value(empty, LseapParams(1.0)), std::invalid_argument);
  CHECK_THROWS_AS(lseap_gradient(empty, LseapParams(1.0)), std::invalid_argument);
}

TEST_CASE("osl0 gradient examples") {
  const auto idx = build_linear_index(4, 1, 1);
  const double sigma = 0.7;
  const std::vector<double> x{sigma, 0.0, -0.3, 0.2};
  const auto g = osl0_gradient(GroupedView(x, idx), Sl0Params(sigma));
  CHECK(g[0] == doctest::Approx(std::exp(-0.5) / sigma).epsilon(1e-14));
  CHECK(g[1] == 0.0);
  const std::vector<double> z(4, 0.0);
  for (double v : osl0_gradient(GroupedView(z, idx), Sl0Params(1.0))) CHECK(v == 0.0);
}

TEST_CASE("osl0 gradient tends to x_j n_Bj / sigma^2 for large sigma") {
  std::mt19937_64 gen(3);
  const auto idx = build_index(GroupingRule::group_wise(3, 1), Shape{3, 6, 5});
  const auto x = random_vec(gen, idx.n_elements(), 1.0);
  double xmax = 0.0;
  for (double v : x) xmax = std::max(xmax, std::fabs(v));
  const double sigma = 1e3 * xmax;
  const auto g = osl0_gradient(GroupedView(x, idx), Sl0Params(sigma));
  std::vector<double> limit(x.size());
  for (std::size_t j = 0; j < x.size(); ++j)
    limit[j] = x[j] * static_cast<double>(idx.groups_of(j).size()) / (sigma * sigma);
  CHECK(oracle::rel_error(g, limit) <= 1e-4);
}

TEST_CASE("osl0 value agrees with the definition oracle") {
  std::mt19937_64 gen(5);
  for (const auto& idx : {build_linear_index(13, 4, 3), build_linear_index(8, 2, 2),
                          build_index(GroupingRule::group_wise(2, 1), Shape{2, 4, 3})}) {
    const auto x = random_vec(gen, idx.n_elements(), 0.8);
    for (double sigma : {0.05, 0.3, 2.0}) {
      CHECK(osl0_value(GroupedView(x, idx), Sl0Params(sigma)) ==
            doctest::Approx(oracle::osl0(groups_of_index(idx), x, sigma)).epsilon(1e-13));
    }
  }
}

TEST_CASE("osl0 gradient matches central differences") {
  std::mt19937_64 gen(17);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 8 + trial;
    const std::size_t nv = 1 + trial % 5;
    const std::size_t s = 1 + (trial / 5) % nv;
    const auto idx = build_linear_index(n, nv, s);
    const auto x = random_vec(gen, n, 1.0);
    const Sl0Params params(0.3 + 0.05 * trial);
    const auto g = osl0_gradient(GroupedView(x, idx), params);
    const auto fd = fd_gradient(
        [&](std::span<const double> v) { return osl0_value(GroupedView(v, idx), params); }, x,
        1e-6);
    CAPTURE(trial);
    CHECK(oracle::rel_error(g, fd) <= 1e-5);
  }
}

TEST_CASE("osl0 hessian matches differences of the gradient") {
  std::mt19937_64 gen(19);
  const auto idx = build_linear_index(9, 3, 1);
  const auto x = random_vec(gen, 9, 0.6);
  const Sl0Params params(0.5);
  const auto h = osl0_hessian(GroupedView(x, idx), params);
  for (std::size_t k = 0; k < 9; ++k) {
    const auto col = fd_gradient(
        [&](std::span<const double> v) { return osl0_gradient(GroupedView(v, idx), params)[k]; },
        x, 1e-6);
    for (std::size_t j = 0; j < 9; ++j) CHECK(h[k * 9 + j] == doctest::Approx(col[j]).epsilon(1e-6).scale(1.0));
  }
}

TEST_CASE("singleton osl0 is sl0 bit for bit") {
  std::mt19937_64 gen(23);
  const auto idx = build_linear_index(40, 1, 1);
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = random_vec(gen, 40, 2.0);
    const Sl0Params params(0.01 + 0.1 * trial);
    const GroupedView v(x, idx);
    CHECK(osl0_value(v, params) == sl0_value(x, params));
    CHECK(osl0_gradient(v, params) == sl0_gradient(x, params));
  }
}

TEST_CASE("lseap examples") {
  const std::vector<double> single{0.7};
  CHECK(lseap_value(single, LseapParams(3.0)) == 0.0);
  const std::vector<double> two{1.0, 1.0};
  CHECK(lseap_value(two, LseapParams(10.0)) == doctest::Approx(std::log(2.0) / 10).epsilon(1e-14));
  CHECK(lseap_value(two, LseapParams(10.0)) == doctest::Approx(0.0693147).epsilon(1e-6));
  const std::vector<double> zeros(7, 0.0);
  CHECK(lseap_value(zeros, LseapParams(4.0)) == doctest::Approx(std::log(7.0) / 4).epsilon(1e-14));

  CHECK(lseap_gradient(two, LseapParams(123.0)) == std::vector<double>{0.5, 0.5});
  const std::vector<double> pm{2.0, -2.0};
  CHECK(lseap_gradient(pm, LseapParams(0.5)) == std::vector<double>{0.5, -0.5});
  const std::vector<double> x{1.0, 0.5};
  const auto g = lseap_gradient(x, LseapParams(20.0));
  CHECK(g[0] == doctest::Approx(1.0 / (1.0 + std::exp(-10.0))).epsilon(1e-14));
  CHECK(g[0] == doctest::Approx(0.9999546).epsilon(1e-7));
  CHECK(g[1] == doctest::Approx(4.54e-5).epsilon(1e-3));
  for (double v : lseap_gradient(zeros, LseapParams(2.0))) CHECK(v == 0.0);
}

TEST_CASE("lseap gradient normalization and finite differences") {
  std::mt19937_64 gen(29);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + trial % 60;
    auto x = random_vec(gen, n, 1.0);
    const LseapParams params(1.0 + trial % 20);
    const auto g = lseap_gradient(x, params);
    double sum = 0.0;
    for (double v : g) sum += std::fabs(v);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    const auto fd = fd_gradient(
        [&](std::span<const double> v) { return lseap_smooth_max(v, params); }, x, 1e-6);
    std::vector<double> a(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) a[i] = std::fabs(x[i]);
    std::sort(a.rbegin(), a.rend());
    if (a[0] - a[1] < 1e-4 || a.back() < 1e-4) continue;
    CHECK(oracle::rel_error(g, fd) <= 1e-5);
    // off the max the shifted value has the same partials
    const auto fdv = fd_gradient([&](std::span<const double> v) { return lseap_value(v, params); },
                                 x, 1e-6);
    for (std::size_t k = 0; k < x.size(); ++k) {
      if (std::fabs(x[k]) < a[0]) CHECK(std::fabs(fdv[k] - g[k]) <= 1e-8);
    }
  }
}

TEST_CASE("lseap smooth max oracle") {
  const std::vector<double> x{0.3, -0.9, 0.5};
  const double p = 3.0;
  const double direct = std::log(std::exp(p * 0.3) + std::exp(p * 0.9) + std::exp(p * 0.5)) / p;
  CHECK(lseap_smooth_max(x, LseapParams(p)) == doctest::Approx(direct).epsilon(1e-14));
  const double big = lseap_smooth_max(x, LseapParams(1e4));
  CHECK(big >= 0.9);
  CHECK(big <= 0.9 + std::log(3.0) / 1e4 + 1e-15);
}

TEST_CASE("lseap gradient sums to less than one when zeros are present") {
  const std::vector<double> x{0.0, 0.0, 0.1};
  const auto g = lseap_gradient(x, LseapParams(1.0));
  CHECK(g[0] == 0.0);
  CHECK(std::fabs(g[2]) < 1.0);
}

TEST_CASE("convexity threshold examples") {
  CHECK(convexity_sigma_min(RegularizerMode::SL0, 1.0, build_linear_index(4, 1, 1)) == 1.0);
  CHECK(convexity_sigma_min(RegularizerMode::NOSL0, 1.0, build_linear_index(9, 3, 3)) ==
        doctest::Approx(std::sqrt(3.0)).epsilon(1e-15));
  CHECK(convexity_sigma_min(RegularizerMode::OSL0, 0.5, build_linear_index(9, 3, 1)) ==
        doctest::Approx(0.5 * std::sqrt(5.0)).epsilon(1e-15));
}

TEST_CASE("lipschitz examples") {
  CHECK(lipschitz_bound(RegularizerMode::SL0, 0.5, build_linear_index(4, 1, 1)) == 4.0);
  CHECK(lipschitz_bound(RegularizerMode::NOSL0, 1.0, build_linear_index(8, 2, 2)) == 1.0);
  const double expected = (1.0 + 10.0 / std::numbers::e) * 2.0;
  CHECK(lipschitz_bound(RegularizerMode::OSL0, 1.0, build_linear_index(10, 4, 2)) ==
        doctest::Approx(expected).epsilon(1e-14));
  CHECK(lipschitz_bound(RegularizerMode::OSL0, 1.0, build_linear_index(10, 4, 2)) ==
        doctest::Approx(9.357589).epsilon(1e-7));
}

TEST_CASE("window bounds use n_n and n_Bm from the index when exact") {
  const auto idx = build_index(GroupingRule::group_wise(2, 1), Shape{3, 4, 4});
  const double nn = static_cast<double>(idx.max_neighbors());
  const double nb = static_cast<double>(idx.max_groups_per_element());
  CHECK(convexity_sigma_min(RegularizerMode::OSL0, 0.1, idx, BoundSource::Exact) ==
        doctest::Approx(0.1 * std::sqrt(nn)));
  CHECK(lipschitz_bound(RegularizerMode::OSL0, 0.5, idx, BoundSource::Exact) ==
        doctest::Approx((1.0 + 2.0 * (nn - 2.0) / std::numbers::e) * nb / 0.25));
  // heuristic treats the window as n_v = c * n with the window stride
  const double nv = 3.0 * 2.0;
  CHECK(convexity_sigma_min(RegularizerMode::OSL0, 0.1, idx, BoundSource::Heuristic) ==
        doctest::Approx(0.1 * std::sqrt(2.0 * nv - 1.0)));
}

TEST_CASE("mode of an index") {
  CHECK(mode_of(build_index(GroupingRule::element_wise(), Shape{3, 4, 4})) == RegularizerMode::SL0);
  CHECK(mode_of(build_index(GroupingRule::pixel_wise(), Shape{3, 4, 4})) == RegularizerMode::NOSL0);
  CHECK(mode_of(build_index(GroupingRule::group_wise(2, 1), Shape{3, 4, 4})) == RegularizerMode::OSL0);
  CHECK(mode_of(build_index(GroupingRule::group_wise(2, 2), Shape{3, 4, 4})) == RegularizerMode::NOSL0);
}

TEST_CASE("hessian is PSD above the convexity threshold on a small window index") {
  std::mt19937_64 gen(31);
  const auto idx = build_index(GroupingRule::group_wise(2, 1), Shape{1, 3, 3});
  const auto mode = mode_of(idx);
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = random_vec(gen, idx.n_elements(), 0.9);
    double xm = 0.0;
    for (double v : x) xm = std::max(xm, std::fabs(v));
    const double sigma = convexity_sigma_min(mode, xm, idx);
    const auto h = osl0_hessian(GroupedView(x, idx), Sl0Params(sigma));
    const std::size_t n = idx.n_elements();
    const Eigen::Map<const Eigen::MatrixXd> m(h.data(), n, n);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    CHECK(es.eigenvalues().minCoeff() >= -1e-8);
  }
}

TEST_CASE("limits in sigma") {
  std::mt19937_64 gen(37);
  const auto idx = build_index(GroupingRule::group_wise(2, 1), Shape{2, 5, 4});
  auto x = random_vec(gen, idx.n_elements(), 1.0);
  for (std::size_t j = 0; j < x.size(); j += 3) x[j] = 0.0;
  for (std::size_t j = 0; j < 12; ++j) x[j] = 0.0;
  double mn = 1e9, mx = 0.0;
  for (double v : x)
    if (v != 0.0) mn = std::min(mn, std::fabs(v)), mx = std::max(mx, std::fabs(v));
  std::size_t active = 0;
  for (const auto& g : groups_of_index(idx)) {
    bool any = false;
    for (auto i : g) any = any || x[i] != 0.0;
    active += any;
  }
  CHECK(std::fabs(osl0_value(GroupedView(x, idx), Sl0Params(1e-3 * mn)) - active) <= 1e-6);

  const double sigma = 1e3 * mx;
  double weighted = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) weighted += 0.5 * idx.groups_of(j).size() * x[j] * x[j];
  const double scaled = sigma * sigma * osl0_value(GroupedView(x, idx), Sl0Params(sigma));
  CHECK(std::fabs(scaled - weighted) / weighted <= 1e-3);
}

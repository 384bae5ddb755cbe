#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "atos/attack.hpp"
#include "atos/io.hpp"
#include "oracles.hpp"

using namespace atos;

namespace {

TinyNet random_net(std::mt19937_64& gen, const Shape& s, std::size_t hidden, std::size_t classes) {
  std::normal_distribution<double> n(0.0, 0.5);
  TinyNet net(s, hidden, classes);
  for (double& v : net.w1()) v = n(gen);
  for (double& v : net.b1()) v = n(gen);
  for (double& v : net.w2()) v = n(gen);
  for (double& v : net.b2()) v = n(gen);
  return net;
}

// Constant logits, NaN gradient.
class BrokenNet final : public Classifier {
 public:
  explicit BrokenNet(Shape s) : shape_(s) {}
  std::size_t num_classes() const override { return 2; }
  const Shape& input_shape() const override { return shape_; }
  std::vector<double> forward(const Tensor&) const override { return {1.0, 0.0}; }
  Tensor input_gradient(const Tensor& x, std::size_t) const override {
    return Tensor(x.shape(), std::numeric_limits<double>::quiet_NaN());
  }

 private:
  Shape shape_;
};

double sigmoid(double m) { return 1.0 / (1.0 + std::exp(-m)); }

}  // namespace

TEST_CASE("target selection examples") {
  const std::vector<double> z{2.0, -1.0, 0.5};
  CHECK(select_target(z, 0, TargetMode::worst_case()) == 1);
  CHECK(select_target(z, 0, TargetMode::untargeted()) == 2);
  CHECK(select_target(z, 0, TargetMode::fixed(1)) == 1);
  CHECK_THROWS_AS(select_target(z, 0, TargetMode::fixed(0)), std::invalid_argument);
  const std::vector<double> two{5.0, -3.0}, two_b{-5.0, 3.0};
  CHECK(select_target(two, 0, TargetMode::untargeted()) == 1);
  CHECK(select_target(two_b, 0, TargetMode::untargeted()) == 1);
}

TEST_CASE("target_reached") {
  CHECK(target_reached(2, 0, 1, TargetMode::untargeted()));
  CHECK_FALSE(target_reached(0, 0, 1, TargetMode::untargeted()));
  CHECK_FALSE(target_reached(2, 0, 1, TargetMode::worst_case()));
  CHECK(target_reached(1, 0, 1, TargetMode::worst_case()));
}

TEST_CASE("config validation") {
  AttackConfig c;
  CHECK_NOTHROW(c.validate());
  c.s_sigma = 1.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = AttackConfig{};
  c.s_lambda = 1.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = AttackConfig{};
  c.steps = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = AttackConfig{};
  c.linf_clip_factor = 2.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("default sigma0 examples") {
  const Shape s{3, 8, 8};
  AttackConfig c;
  c.rule = GroupingRule::element_wise();
  CHECK(default_sigma0(c, build_index(c.rule, s)) == 1.0);
  c.rule = GroupingRule::pixel_wise();
  CHECK(default_sigma0(c, build_index(c.rule, s)) == doctest::Approx(std::sqrt(3.0)).epsilon(1e-15));
  c.sigma_m = 0.04;
  CHECK(default_sigma0(c, build_index(c.rule, s)) ==
        doctest::Approx(0.04 * std::sqrt(3.0)).epsilon(1e-15));
}

TEST_CASE("composite gradient term isolation") {
  std::mt19937_64 gen(51);
  const Shape s{3, 4, 4};
  const TinyNet net = random_net(gen, s, 6, 4);
  const Tensor x = oracle::random_tensor(gen, s, 0.2, 0.8);
  const auto idx = build_index(GroupingRule::group_wise(2, 1), s);
  AttackConfig c;
  c.lambda = 0.3;
  c.lambda_s = 0.7;
  c.lambda_inf = 0.4;

  // zero delta: only the CE term survives
  const Tensor zero(s);
  Tensor ce = net.input_gradient(x, 2);
  for (double& v : ce.values()) v *= c.lambda;
  CHECK(composite_gradient(x, zero, 2, c, 0.5, idx, net) == ce);

  // lambda = lambda_inf = 0: only the scaled sparsity term
  const Tensor d = oracle::random_tensor(gen, s, -0.1, 0.1);
  c.lambda = 0.0;
  c.lambda_inf = 0.0;
  const double sigma = 0.3;
  const auto gs = osl0_gradient(categorize(d, idx), Sl0Params(sigma));
  const Tensor g = composite_gradient(x, d, 2, c, sigma, idx, net);
  for (std::size_t j = 0; j < g.size(); ++j) CHECK(g[j] == doctest::Approx(0.7 * sigma * sigma * gs[j]).epsilon(1e-14));
}

TEST_CASE("composite gradient matches central differences of the objective") {
  std::mt19937_64 gen(53);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int checked = 0;
  for (std::size_t t = 0; t < 140; ++t) {
    const Shape s{1 + t % 3, 4, 2 + t % 3};
    const TinyNet net = random_net(gen, s, 5, 3);
    const Tensor x = oracle::random_tensor(gen, s, 0.2, 0.8);
    const Tensor d = oracle::random_tensor(gen, s, -0.15, 0.15);
    const GroupingRule rules[] = {GroupingRule::element_wise(), GroupingRule::pixel_wise(),
                                  GroupingRule::group_wise(2, 1)};
    const auto idx = build_index(rules[t % 3], s);
    AttackConfig c;
    c.lambda = 0.1 + u(gen);
    c.lambda_s = u(gen);
    c.lambda_inf = u(gen);
    c.p = 1.0 + 30.0 * u(gen);
    const double sigma = 0.05 + u(gen);
    Tensor xd = x;
    for (std::size_t j = 0; j < x.size(); ++j) xd[j] += d[j];
    bool near_kink = false;
    for (double z : net.hidden_preactivation(xd)) near_kink = near_kink || std::fabs(z) < 1e-4;
    std::vector<double> a(d.size());
    for (std::size_t j = 0; j < d.size(); ++j) a[j] = std::fabs(d[j]);
    std::sort(a.rbegin(), a.rend());
    if (near_kink || a[0] - a[1] < 1e-4) continue;
    const std::size_t target = t % 3;
    const Tensor g = composite_gradient(x, d, target, c, sigma, idx, net);
    const auto fd = fd_gradient(
        [&](std::span<const double> v) {
          return composite_objective(x, Tensor(s, std::vector<double>(v.begin(), v.end())),
                                     target, c, sigma, idx, net);
        },
        d.values(), 1e-6);
    CHECK(oracle::rel_error(g.values(), fd) <= 1e-4);
    ++checked;
  }
  CHECK(checked >= 100);
}

TEST_CASE("without regularizers each iteration is plain clipped descent on CE") {
  std::mt19937_64 gen(57);
  const Shape s{3, 4, 4};
  const TinyNet net = random_net(gen, s, 8, 3);
  const Tensor x = oracle::random_tensor(gen, s, 0.0, 1.0);
  const std::size_t label = net.predict(x);
  AttackConfig c;
  c.steps = 3;
  c.iters = 7;
  c.lambda = 0.02;
  c.lambda_s = 0.0;
  c.lambda_inf = 0.0;
  c.mu = 0.5;
  c.target = TargetMode::worst_case();
  c.max_restarts = 0;
  const std::size_t target = select_target(net.forward(x), label, c.target);

  Tensor ref(s);
  std::size_t n = 0;
  attack_image(x, label, c, net, [&](const IterationEvent& e) {
    // independent loop: one step of gradient descent then box clamp
    const Tensor g = net.input_gradient(add_clamped(x, ref), target);
    for (std::size_t j = 0; j < ref.size(); ++j) {
      const double v = ref[j] - c.mu * (c.lambda * g[j]);
      ref[j] = std::min(std::max(v, -x[j]), 1.0 - x[j]);
    }
    CHECK(oracle::rel_error(e.delta.values(), ref.values()) <= 1e-14);
    ++n;
  });
  CHECK(n == 21);
}

TEST_CASE("sigma schedule, feasibility and restart resets") {
  std::mt19937_64 gen(59);
  const Shape s{3, 4, 4};
  const TinyNet net = random_net(gen, s, 8, 3);
  const Tensor x = oracle::random_tensor(gen, s, 0.0, 1.0);
  const std::size_t label = net.predict(x);
  AttackConfig c;
  c.steps = 4;
  c.iters = 3;
  c.lambda = 1e-9;  // too weak to succeed, forces restarts
  c.s_lambda = 1.5;
  c.sigma0 = 0.8;
  c.s_sigma = 0.3;
  c.max_restarts = 3;
  c.sigma_m = 0.05;
  c.linf_clip_factor = 2.0;
  std::size_t events = 0;
  const auto r = attack_image(x, label, c, net, [&](const IterationEvent& e) {
    CHECK(e.sigma == 0.8 * std::pow(0.3, static_cast<double>(e.step)));
    CHECK(e.lambda == doctest::Approx(1e-9 * std::pow(1.5, static_cast<double>(e.restart))).epsilon(1e-14));
    for (std::size_t j = 0; j < x.size(); ++j) {
      REQUIRE(x[j] + e.delta[j] >= 0.0);
      REQUIRE(x[j] + e.delta[j] <= 1.0);
      REQUIRE(std::fabs(e.delta[j]) <= 0.1);
    }
    if (e.step == 0 && e.iter == 0) {
      // first iterate after a reset is one step from zero
      Tensor g = composite_gradient(x, Tensor(s), e.target, [&] {
        AttackConfig k = c;
        k.lambda = e.lambda;
        return k;
      }(), e.sigma, build_index(c.rule, s), net);
      Tensor expect(s);
      for (std::size_t j = 0; j < s.size(); ++j) expect[j] = std::clamp(-c.mu * g[j], -0.1, 0.1);
      clip_to_box_inplace(x, expect);
      for (std::size_t j = 0; j < s.size(); ++j) CHECK(e.delta[j] == doctest::Approx(expect[j]).epsilon(1e-14));
    }
    ++events;
  });
  CHECK_FALSE(r.success);
  CHECK(r.restarts_used == 3);
  CHECK(r.final_lambda == doctest::Approx(1e-9 * 1.5 * 1.5 * 1.5));
  CHECK(events == 4 * 4 * 3);
}

TEST_CASE("a target already met at zero perturbation succeeds with nothing perturbed") {
  const Shape s{1, 2, 1};
  const LinearClassifier lin(s, {1.0, 0.0, 0.0, 1.0}, {0.0, 5.0});
  const Tensor x(s, std::vector<double>{0.5, 0.5});
  REQUIRE(lin.predict(x) == 1);
  AttackConfig c;
  const auto r = attack_image(x, 0, c, lin);
  CHECK(r.success);
  CHECK(r.metrics.npp == 0);
  CHECK(r.restarts_used == 0);
}

TEST_CASE("two-class linear victim follows the scalar margin recursion") {
  const Shape s{1, 4, 1};
  const std::vector<double> w0{0.3, -0.2, 0.1, 0.4}, w1{-0.1, 0.2, 0.0, -0.2};
  std::vector<double> W(w0);
  W.insert(W.end(), w1.begin(), w1.end());
  const LinearClassifier lin(s, W, {0.2, 0.0});
  const Tensor x(s, std::vector<double>{0.5, 0.5, 0.5, 0.5});
  double dd = 0.0, m0 = 0.2;
  for (std::size_t j = 0; j < 4; ++j) {
    dd += (w0[j] - w1[j]) * (w0[j] - w1[j]);
    m0 += (w0[j] - w1[j]) * 0.5;
  }
  REQUIRE(m0 > 0.0);
  AttackConfig c;
  c.steps = 2;
  c.iters = 20;
  c.mu = 0.5;
  c.lambda = 0.4;
  c.lambda_s = 0.0;
  c.lambda_inf = 0.0;
  c.max_restarts = 0;

  // closed form per step: m <- m - mu lambda sigmoid(m) ||w0 - w1||^2
  // valid until the box clip first bites
  double m = m0;
  bool free = true;
  std::size_t flip = 0, compared = 0;
  const auto r = attack_image(x, 0, c, lin, [&](const IterationEvent& e) {
    m -= c.mu * c.lambda * sigmoid(m) * dd;
    for (std::size_t j = 0; j < 4; ++j) free = free && std::fabs(e.delta[j]) < 0.5;
    if (!free) return;
    double margin = 0.2;
    for (std::size_t j = 0; j < 4; ++j) margin += (w0[j] - w1[j]) * (0.5 + e.delta[j]);
    CHECK(margin == doctest::Approx(m).epsilon(1e-12));
    ++compared;
    if (!flip && m < 0) flip = e.step * c.iters + e.iter + 1;
  });
  CHECK(compared > 5);
  CHECK(flip > 0);
  CHECK(flip <= c.steps * c.iters);
  CHECK(r.success);
  CHECK(r.predicted_class == 1);
}

TEST_CASE("numeric failure becomes a failed result in a batch") {
  const Shape s{1, 2, 2};
  const BrokenNet net(s);
  const std::vector<Tensor> imgs{Tensor(s, 0.5)};
  const std::vector<std::size_t> labels{0};
  AttackConfig c;
  CHECK_THROWS_AS(attack_image(imgs[0], 0, c, net), NumericFailure);
  const auto rs = attack_batch(imgs, labels, c, net);
  REQUIRE(rs.size() == 1);
  CHECK(rs[0].numeric_failure);
  CHECK_FALSE(rs[0].success);
  CHECK_FALSE(rs[0].error.empty());
}

TEST_CASE("attack_batch ordering, determinism and threads") {
  const TinyNet net = load_tinynet(ATOS_DATA_DIR "/tinynet.atw");
  const Dataset data = load_dataset(ATOS_DATA_DIR "/synth_test.atn", ATOS_DATA_DIR "/synth_test.atn.labels");
  std::vector<Tensor> imgs;
  std::vector<std::size_t> labels;
  for (std::size_t i = 0; imgs.size() < 10 && i < data.size(); ++i) {
    if (net.predict(data.images[i]) != data.labels[i]) continue;
    imgs.push_back(data.images[i]);
    labels.push_back(data.labels[i]);
  }
  REQUIRE(imgs.size() == 10);
  AttackConfig c;
  CHECK(attack_batch(std::span<const Tensor>{}, std::span<const std::size_t>{}, c, net).empty());
  const auto a = attack_batch(imgs, labels, c, net);
  const auto b = attack_batch(imgs, labels, c, net, 3);
  const auto one = attack_image(imgs[4], labels[4], c, net);
  CHECK(a[4].delta == one.delta);
  for (std::size_t i = 0; i < imgs.size(); ++i) {
    CHECK(a[i].success);
    CHECK(a[i].delta == b[i].delta);
    CHECK(a[i].true_class == labels[i]);
    // independent forward pass on the quantized adversarial image
    Tensor adv = imgs[i];
    for (std::size_t j = 0; j < adv.size(); ++j) {
      adv[j] = std::clamp(adv[j] + std::round(a[i].delta[j] * 255.0) / 255.0, 0.0, 1.0);
    }
    CHECK(adv == a[i].adversarial);
    CHECK(argmax(net.forward(adv)) != labels[i]);
    CHECK(a[i].metrics == compute_metrics(a[i].delta, 8));
  }
}

TEST_CASE("pixel-wise on one channel matches element-wise") {
  std::mt19937_64 gen(61);
  const Shape s{1, 5, 4};
  const TinyNet net = random_net(gen, s, 8, 3);
  const Tensor x = oracle::random_tensor(gen, s, 0.0, 1.0);
  AttackConfig e, p;
  e.rule = GroupingRule::element_wise();
  p.rule = GroupingRule::pixel_wise();
  e.steps = p.steps = 3;
  e.iters = p.iters = 20;
  const auto ie = build_index(e.rule, s), ip = build_index(p.rule, s);
  const Tensor d = oracle::random_tensor(gen, s, -0.2, 0.2);
  CHECK(composite_gradient(x, d, 1, e, 0.4, ie, net) == composite_gradient(x, d, 1, p, 0.4, ip, net));
  const auto re = attack_image(x, net.predict(x), e, net);
  const auto rp = attack_image(x, net.predict(x), p, net);
  CHECK(re.delta == rp.delta);
  CHECK(re.metrics == rp.metrics);
}

#include "atos/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <string>

namespace atos {

std::size_t Classifier::predict(const Tensor& x) const { return argmax(forward(x)); }

std::size_t argmax(std::span<const double> v) {
  if (v.empty()) throw std::invalid_argument("argmax of an empty vector");
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) throw std::invalid_argument("softmax of an empty vector");
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

double ce_loss(std::span<const double> logits, std::size_t target) {
  if (target >= logits.size()) {
    throw std::invalid_argument("target class " + std::to_string(target) + " out of range");
  }
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - m);
  return std::log(sum) - (logits[target] - m);
}

// --- TinyNet -------------------------------------------------------------

TinyNet::TinyNet(Shape input, std::size_t hidden, std::size_t classes)
    : input_(input),
      hidden_(hidden),
      classes_(classes),
      w1_(hidden * input.size(), 0.0),
      b1_(hidden, 0.0),
      w2_(classes * hidden, 0.0),
      b2_(classes, 0.0) {
  if (input.size() == 0 || hidden == 0 || classes == 0) {
    throw std::invalid_argument("TinyNet dimensions must be positive");
  }
}

TinyNet::TinyNet(Shape input, std::vector<double> w1, std::vector<double> b1,
                 std::vector<double> w2, std::vector<double> b2)
    : input_(input),
      hidden_(b1.size()),
      classes_(b2.size()),
      w1_(std::move(w1)),
      b1_(std::move(b1)),
      w2_(std::move(w2)),
      b2_(std::move(b2)) {
  if (input.size() == 0 || hidden_ == 0 || classes_ == 0 ||
      w1_.size() != hidden_ * input.size() || w2_.size() != classes_ * hidden_) {
    throw std::invalid_argument("TinyNet weight dimensions are inconsistent");
  }
}

void TinyNet::check_input(const Tensor& x) const {
  if (x.shape() != input_) {
    throw std::invalid_argument("input shape " + to_string(x.shape()) + " does not match " +
                                to_string(input_));
  }
}

std::vector<double> TinyNet::hidden_preactivation(const Tensor& x) const {
  check_input(x);
  const std::size_t n = input_.size();
  const auto xv = x.values();
  std::vector<double> pre(b1_);
  for (std::size_t h = 0; h < hidden_; ++h) {
    const double* row = &w1_[h * n];
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += row[i] * xv[i];
    pre[h] += acc;
  }
  return pre;
}

namespace {

std::vector<double> output_layer(const std::vector<double>& act, const std::vector<double>& w2,
                                 const std::vector<double>& b2) {
  const std::size_t hidden = act.size();
  std::vector<double> z(b2);
  for (std::size_t k = 0; k < z.size(); ++k) {
    const double* row = &w2[k * hidden];
    for (std::size_t h = 0; h < hidden; ++h) z[k] += row[h] * act[h];
  }
  return z;
}

void relu_inplace(std::vector<double>& v) {
  for (double& a : v) a = a > 0.0 ? a : 0.0;
}

}  // namespace

std::vector<double> TinyNet::forward(const Tensor& x) const {
  auto act = hidden_preactivation(x);
  relu_inplace(act);
  return output_layer(act, w2_, b2_);
}

Tensor TinyNet::input_gradient(const Tensor& x, std::size_t target) const {
  const auto pre = hidden_preactivation(x);
  auto act = pre;
  relu_inplace(act);
  const auto z = output_layer(act, w2_, b2_);
  if (target >= classes_) throw std::invalid_argument("target class out of range");

  auto dz = softmax(z);
  dz[target] -= 1.0;

  std::vector<double> dpre(hidden_, 0.0);
  for (std::size_t k = 0; k < classes_; ++k) {
    const double* row = &w2_[k * hidden_];
    for (std::size_t h = 0; h < hidden_; ++h) dpre[h] += row[h] * dz[k];
  }
  for (std::size_t h = 0; h < hidden_; ++h) {
    if (!(pre[h] > 0.0)) dpre[h] = 0.0;  // subgradient 0 at the kink
  }

  const std::size_t n = input_.size();
  Tensor grad(input_);
  for (std::size_t h = 0; h < hidden_; ++h) {
    if (dpre[h] == 0.0) continue;
    const double* row = &w1_[h * n];
    for (std::size_t i = 0; i < n; ++i) grad[i] += row[i] * dpre[h];
  }
  return grad;
}

// --- LinearClassifier ----------------------------------------------------

LinearClassifier::LinearClassifier(Shape input, std::vector<double> weights,
                                   std::vector<double> bias)
    : input_(input), weights_(std::move(weights)), bias_(std::move(bias)) {
  if (bias_.empty() || weights_.size() != bias_.size() * input_.size()) {
    throw std::invalid_argument("LinearClassifier weight dimensions are inconsistent");
  }
}

std::vector<double> LinearClassifier::forward(const Tensor& x) const {
  if (x.shape() != input_) throw std::invalid_argument("input shape mismatch");
  const std::size_t n = input_.size();
  std::vector<double> z(bias_);
  for (std::size_t k = 0; k < z.size(); ++k) {
    for (std::size_t i = 0; i < n; ++i) z[k] += weights_[k * n + i] * x[i];
  }
  return z;
}

Tensor LinearClassifier::input_gradient(const Tensor& x, std::size_t target) const {
  auto dz = softmax(forward(x));
  if (target >= dz.size()) throw std::invalid_argument("target class out of range");
  dz[target] -= 1.0;
  const std::size_t n = input_.size();
  Tensor grad(input_);
  for (std::size_t k = 0; k < dz.size(); ++k) {
    for (std::size_t i = 0; i < n; ++i) grad[i] += weights_[k * n + i] * dz[k];
  }
  return grad;
}

// --- finite differences --------------------------------------------------

std::vector<double> fd_gradient(const std::function<double(std::span<const double>)>& f,
                                std::span<const double> x, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("finite-difference step must be positive");
  std::vector<double> probe(x.begin(), x.end());
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + step;
    const double up = f(probe);
    probe[i] = orig - step;
    const double down = f(probe);
    probe[i] = orig;
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

Tensor fd_gradient_oracle(const Classifier& net, const Tensor& x, std::size_t target,
                          double step) {
  const Shape shape = x.shape();
  auto loss = [&](std::span<const double> v) {
    return ce_loss(net.forward(Tensor(shape, std::vector<double>(v.begin(), v.end()))), target);
  };
  return Tensor(shape, fd_gradient(loss, x.values(), step));
}

// --- Rng -----------------------------------------------------------------

Rng::Rng(std::uint64_t seed) : engine_(seed) {}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t Rng::below(std::size_t n) {
  return static_cast<std::size_t>(uniform() * static_cast<double>(n));
}

// --- training ------------------------------------------------------------

TinyNet init_tinynet(const Shape& input, std::size_t hidden, std::size_t classes,
                     std::uint64_t seed) {
  TinyNet net(input, hidden, classes);
  Rng rng(seed);
  const double a1 = std::sqrt(6.0 / static_cast<double>(input.size()));
  const double a2 = std::sqrt(6.0 / static_cast<double>(hidden));
  for (double& w : net.w1()) w = rng.uniform(-a1, a1);
  for (double& w : net.w2()) w = rng.uniform(-a2, a2);
  return net;
}

double accuracy(const Classifier& net, const Dataset& data) {
  if (data.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (net.predict(data.images[i]) == data.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

TrainResult train_tinynet(const Dataset& data, const TrainOptions& options,
                          std::size_t num_classes) {
  if (data.empty()) throw std::invalid_argument("empty dataset");
  if (data.images.size() != data.labels.size()) {
    throw std::invalid_argument("images and labels differ in length");
  }
  const std::size_t max_label = *std::max_element(data.labels.begin(), data.labels.end());
  if (num_classes == 0) num_classes = max_label + 1;
  if (max_label >= num_classes) throw std::invalid_argument("label exceeds class count");
  if (options.batch_size == 0) throw std::invalid_argument("batch size must be positive");

  const Shape shape = data.images.front().shape();
  const std::size_t n = shape.size();
  const std::size_t hidden = options.hidden;
  TinyNet net = init_tinynet(shape, hidden, num_classes, options.seed);
  Rng rng(options.seed ^ 0x9E3779B97F4A7C15ULL);

  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::vector<double> gw1(net.w1().size()), gb1(hidden), gw2(net.w2().size()), gb2(num_classes);
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t end = std::min(order.size(), start + options.batch_size);
      std::fill(gw1.begin(), gw1.end(), 0.0);
      std::fill(gb1.begin(), gb1.end(), 0.0);
      std::fill(gw2.begin(), gw2.end(), 0.0);
      std::fill(gb2.begin(), gb2.end(), 0.0);
      for (std::size_t s = start; s < end; ++s) {
        const Tensor& x = data.images[order[s]];
        const auto pre = net.hidden_preactivation(x);
        auto act = pre;
        relu_inplace(act);
        auto dz = softmax(output_layer(act, net.w2(), net.b2()));
        dz[data.labels[order[s]]] -= 1.0;
        std::vector<double> dpre(hidden, 0.0);
        for (std::size_t k = 0; k < num_classes; ++k) {
          gb2[k] += dz[k];
          for (std::size_t h = 0; h < hidden; ++h) {
            gw2[k * hidden + h] += dz[k] * act[h];
            dpre[h] += net.w2()[k * hidden + h] * dz[k];
          }
        }
        for (std::size_t h = 0; h < hidden; ++h) {
          if (!(pre[h] > 0.0)) continue;
          gb1[h] += dpre[h];
          for (std::size_t i = 0; i < n; ++i) gw1[h * n + i] += dpre[h] * x[i];
        }
      }
      const double scale = options.learning_rate / static_cast<double>(end - start);
      for (std::size_t i = 0; i < gw1.size(); ++i) net.w1()[i] -= scale * gw1[i];
      for (std::size_t i = 0; i < gb1.size(); ++i) net.b1()[i] -= scale * gb1[i];
      for (std::size_t i = 0; i < gw2.size(); ++i) net.w2()[i] -= scale * gw2[i];
      for (std::size_t i = 0; i < gb2.size(); ++i) net.b2()[i] -= scale * gb2[i];
    }
  }
  const double acc = accuracy(net, data);
  return {std::move(net), acc};
}

// --- ATW1 ----------------------------------------------------------------

namespace {
constexpr char kAtwMagic[4] = {'A', 'T', 'W', '1'};
}

void save_tinynet(const std::filesystem::path& path, const TinyNet& net) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(kAtwMagic, 4);
  const Shape& s = net.input_shape();
  for (auto v : {s.channels, s.width, s.height, net.hidden(), net.num_classes()}) {
    le::write_u32(out, static_cast<std::uint32_t>(v));
  }
  for (const auto* block : {&net.w1(), &net.b1(), &net.w2(), &net.b2()}) {
    for (double v : *block) le::write_f64(out, v);
  }
  if (!out) throw FormatError("write failed: " + path.string());
}

TinyNet load_tinynet(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kAtwMagic, 4) != 0) {
    throw FormatError(path.string() + ": bad ATW1 magic");
  }
  try {
    Shape shape;
    shape.channels = le::read_u32(in);
    shape.width = le::read_u32(in);
    shape.height = le::read_u32(in);
    const std::size_t hidden = le::read_u32(in);
    const std::size_t classes = le::read_u32(in);
    if (shape.size() == 0 || hidden == 0 || classes == 0) {
      throw FormatError("zero dimension in header");
    }
    auto read_block = [&](std::size_t count) {
      std::vector<double> v(count);
      for (double& x : v) x = le::read_f64(in);
      return v;
    };
    auto w1 = read_block(hidden * shape.size());
    auto b1 = read_block(hidden);
    auto w2 = read_block(classes * hidden);
    auto b2 = read_block(classes);
    return TinyNet(shape, std::move(w1), std::move(b1), std::move(w2), std::move(b2));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace atos

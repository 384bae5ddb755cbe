#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "atos/io.hpp"
#include "atos/tensor.hpp"

namespace atos {

/// A differentiable victim classifier.
///
/// Implementations must be deterministic and reentrant: forward() and
/// input_gradient() may be called concurrently on one instance.
class Classifier {
 public:
  virtual ~Classifier() = default;

  virtual std::size_t num_classes() const = 0;
  virtual const Shape& input_shape() const = 0;
  virtual std::vector<double> forward(const Tensor& x) const = 0;
  /// Gradient of ce_loss(forward(x), target) with respect to x.
  virtual Tensor input_gradient(const Tensor& x, std::size_t target) const = 0;

  std::size_t predict(const Tensor& x) const;
};

std::vector<double> softmax(std::span<const double> logits);

/// -log softmax(logits)[target], max-shifted. Throws on a bad target.
double ce_loss(std::span<const double> logits, std::size_t target);

std::size_t argmax(std::span<const double> v);

/// flatten -> affine(hidden) -> ReLU -> affine(classes).
///
/// Weights are row-major: w1 is hidden x N, w2 is classes x hidden.
class TinyNet final : public Classifier {
 public:
  TinyNet(Shape input, std::size_t hidden, std::size_t classes);
  TinyNet(Shape input, std::vector<double> w1, std::vector<double> b1, std::vector<double> w2,
          std::vector<double> b2);

  std::size_t num_classes() const override { return classes_; }
  const Shape& input_shape() const override { return input_; }
  std::size_t hidden() const { return hidden_; }

  std::vector<double> forward(const Tensor& x) const override;
  Tensor input_gradient(const Tensor& x, std::size_t target) const override;

  /// Hidden-layer pre-activations, for kink detection in gradient checks.
  std::vector<double> hidden_preactivation(const Tensor& x) const;

  std::vector<double>& w1() { return w1_; }
  std::vector<double>& b1() { return b1_; }
  std::vector<double>& w2() { return w2_; }
  std::vector<double>& b2() { return b2_; }
  const std::vector<double>& w1() const { return w1_; }
  const std::vector<double>& b1() const { return b1_; }
  const std::vector<double>& w2() const { return w2_; }
  const std::vector<double>& b2() const { return b2_; }

  friend bool operator==(const TinyNet& a, const TinyNet& b) {
    return a.input_ == b.input_ && a.hidden_ == b.hidden_ && a.classes_ == b.classes_ &&
           a.w1_ == b.w1_ && a.b1_ == b.b1_ && a.w2_ == b.w2_ && a.b2_ == b.b2_;
  }

 private:
  void check_input(const Tensor& x) const;

  Shape input_;
  std::size_t hidden_;
  std::size_t classes_;
  std::vector<double> w1_, b1_, w2_, b2_;
};

/// Softmax regression, logits = W vec(x) + b. W is classes x N, row-major.
class LinearClassifier final : public Classifier {
 public:
  LinearClassifier(Shape input, std::vector<double> weights, std::vector<double> bias);

  std::size_t num_classes() const override { return bias_.size(); }
  const Shape& input_shape() const override { return input_; }
  std::vector<double> forward(const Tensor& x) const override;
  Tensor input_gradient(const Tensor& x, std::size_t target) const override;

 private:
  Shape input_;
  std::vector<double> weights_, bias_;
};

/// Central-difference estimate of the CE input gradient. Test oracle only.
Tensor fd_gradient_oracle(const Classifier& net, const Tensor& x, std::size_t target,
                          double step);

/// Central differences of an arbitrary scalar function of a flat vector.
std::vector<double> fd_gradient(const std::function<double(std::span<const double>)>& f,
                                std::span<const double> x, double step);

// Portable deterministic random numbers: uses only the raw mt19937_64
// stream, so results do not depend on the standard library's distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  double uniform();                       // [0, 1)
  double uniform(double lo, double hi);   // [lo, hi)
  double normal();                        // Box-Muller
  std::size_t below(std::size_t n);       // [0, n)
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::mt19937_64 engine_;
};

struct TrainOptions {
  std::size_t hidden = 32;
  std::size_t epochs = 100;
  double learning_rate = 0.05;
  std::size_t batch_size = 16;
  std::uint64_t seed = 42;
};

/// He-uniform initialization from the seed.
TinyNet init_tinynet(const Shape& input, std::size_t hidden, std::size_t classes,
                     std::uint64_t seed);

struct TrainResult {
  TinyNet net;
  double train_accuracy;
};

/// Mini-batch SGD on mean cross-entropy. Deterministic for a given seed;
/// zero epochs returns the initialization. num_classes = max label + 1
/// unless given.
TrainResult train_tinynet(const Dataset& data, const TrainOptions& options,
                          std::size_t num_classes = 0);

double accuracy(const Classifier& net, const Dataset& data);

// ATW1 weight files: "ATW1", u32 c, w, h, hidden, classes, then w1, b1,
// w2, b2 as f64 LE.
void save_tinynet(const std::filesystem::path& path, const TinyNet& net);
TinyNet load_tinynet(const std::filesystem::path& path);

}  // namespace atos

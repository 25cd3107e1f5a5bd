#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "pgg/tensor.hpp"

namespace pgg {

using Rng = std::mt19937_64;

struct AdamOptions {
  double learning_rate = 2.5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-5;
};

// Per-parameter moment accumulators, laid out in the optimizer's parameter
// order.
struct AdamState {
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  std::uint64_t step = 0;
};

// Scales all gradients in place so their joint L2 norm is at most max_norm.
// Returns the norm before clipping.
double clip_grad_norm(std::vector<Tensor>& params, double max_norm);

class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamOptions options);

  // Clips the global gradient norm to max_grad_norm, then applies one
  // bias-corrected Adam update in place. Throws pgg::Error naming the
  // parameter if any gradient is NaN.
  void step(double max_grad_norm);
  void zero_grad();

  void set_learning_rate(double lr) { options_.learning_rate = lr; }
  double learning_rate() const { return options_.learning_rate; }
  const AdamOptions& options() const { return options_; }
  const AdamState& state() const { return state_; }
  AdamState& mutable_state() { return state_; }
  const std::vector<Tensor>& params() const { return params_; }

 private:
  std::vector<Tensor> params_;
  AdamOptions options_;
  AdamState state_;
};

// Orthogonal matrix of the given [rows, cols] shape scaled by gain: QR of a
// seeded Gaussian matrix with Q's columns sign-corrected by diag(R). The
// smaller of rows/cols spans an orthonormal set.
std::vector<double> orthogonal_init(std::size_t rows, std::size_t cols, double gain, Rng& rng);
Tensor orthogonal_init(const Shape& shape, double gain, Rng& rng);
Tensor constant_init(const Shape& shape, double value);

}  // namespace pgg

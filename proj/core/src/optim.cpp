#include "pgg/optim.hpp"

#include <Eigen/Dense>

#include <cmath>

#include "pgg/error.hpp"

namespace pgg {

double clip_grad_norm(std::vector<Tensor>& params, double max_norm) {
  if (!(max_norm > 0.0)) throw Error("clip_grad_norm: max_grad_norm must be > 0");
  double sq = 0.0;
  for (auto& p : params) {
    if (!p.has_grad()) throw Error("clip_grad_norm: missing grad for '" + p.name() + "'");
    for (double g : p.grad()) {
      if (std::isnan(g)) throw Error("adam_step: NaN gradient in '" + p.name() + "'");
      sq += g * g;
    }
  }
  const double norm = std::sqrt(sq);
  const double coef = max_norm / (norm + 1e-6);
  if (coef < 1.0) {
    for (auto& p : params) {
      for (double& g : p.mutable_grad()) g *= coef;
    }
  }
  return norm;
}

Adam::Adam(std::vector<Tensor> params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
  if (!(options_.learning_rate > 0.0)) throw Error("adam: learning rate must be > 0");
  for (const auto& p : params_) {
    if (!p.requires_grad()) throw Error("adam: '" + p.name() + "' is not a parameter");
    state_.first_moment.emplace_back(p.numel(), 0.0);
    state_.second_moment.emplace_back(p.numel(), 0.0);
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

void Adam::step(double max_grad_norm) {
  clip_grad_norm(params_, max_grad_norm);
  ++state_.step;
  const double t = static_cast<double>(state_.step);
  const double bc1 = 1.0 - std::pow(options_.beta1, t);
  const double bc2 = 1.0 - std::pow(options_.beta2, t);
  const double step_size = options_.learning_rate / bc1;
  const double bc2_sqrt = std::sqrt(bc2);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto values = params_[i].mutable_values();
    const auto grad = params_[i].grad();
    auto& m = state_.first_moment[i];
    auto& v = state_.second_moment[i];
    for (std::size_t k = 0; k < values.size(); ++k) {
      const double g = grad[k];
      m[k] = options_.beta1 * m[k] + (1.0 - options_.beta1) * g;
      v[k] = options_.beta2 * v[k] + (1.0 - options_.beta2) * g * g;
      const double denom = std::sqrt(v[k]) / bc2_sqrt + options_.eps;
      values[k] -= step_size * m[k] / denom;
    }
  }
}

std::vector<double> orthogonal_init(std::size_t rows, std::size_t cols, double gain, Rng& rng) {
  if (rows == 0 || cols == 0) throw Error("orthogonal_init: empty shape");
  using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix flat(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) flat(r, c) = normal(rng);
  }
  const bool wide = rows < cols;
  Matrix tall = wide ? Matrix(flat.transpose()) : flat;
  Eigen::HouseholderQR<Matrix> qr(tall);
  const auto n = tall.cols();
  Matrix q = qr.householderQ() * Matrix::Identity(tall.rows(), n);
  Matrix r = qr.matrixQR().topLeftCorner(n, n).triangularView<Eigen::Upper>();
  for (Eigen::Index c = 0; c < n; ++c) {
    if (r(c, c) < 0.0) q.col(c) *= -1.0;
  }
  Matrix w = wide ? Matrix(q.transpose()) : q;
  w *= gain;
  return std::vector<double>(w.data(), w.data() + w.size());
}

Tensor orthogonal_init(const Shape& shape, double gain, Rng& rng) {
  if (shape.size() != 2) throw Error("orthogonal_init: expected 2-D shape, got " + shape_str(shape));
  return Tensor::from(shape, orthogonal_init(shape[0], shape[1], gain, rng));
}

Tensor constant_init(const Shape& shape, double value) {
  return Tensor::from(shape, std::vector<double>(shape_numel(shape), value));
}

}  // namespace pgg

#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "pgg/tensor.hpp"

namespace pgg::test {

// Central differences of a scalar function of the parameters' values.
inline std::vector<double> numeric_grad(std::vector<Tensor> params,
                                        const std::function<double()>& f, double h = 1e-5) {
  std::vector<double> out;
  NoGradGuard no_grad;
  for (auto& p : params) {
    auto v = p.mutable_values();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double x = v[i];
      v[i] = x + h;
      const double up = f();
      v[i] = x - h;
      const double down = f();
      v[i] = x;
      out.push_back((up - down) / (2 * h));
    }
  }
  return out;
}

inline std::vector<double> analytic_grad(std::vector<Tensor> params, const Tensor& loss) {
  for (auto& p : params) p.zero_grad();
  backward(loss);
  std::vector<double> out;
  for (auto& p : params) out.insert(out.end(), p.grad().begin(), p.grad().end());
  return out;
}

// max |a - n| / max(max |n|, 1e-8)
inline double rel_error(const std::vector<double>& a, const std::vector<double>& n) {
  double err = 0, mag = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    err = std::max(err, std::abs(a[i] - n[i]));
    mag = std::max(mag, std::abs(n[i]));
  }
  return err / std::max(mag, 1e-8);
}

inline std::vector<double> uniform_values(std::size_t n, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

}  // namespace pgg::test

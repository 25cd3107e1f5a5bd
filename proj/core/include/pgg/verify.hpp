#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pgg/guided.hpp"
#include "pgg/tensor.hpp"

namespace pgg {

// Deliberate faults for checking that the suites can fail.
enum class Injection {
  kNone,
  kDropUncondBranch,  // guided head = gamma * cond, the (1 - gamma) branch is lost
  kBiasedAdvantage,   // state-dependent bias of size 1 added to oracle advantages
};

Injection parse_injection(const std::string& name);
std::string injection_name(Injection injection);

// Guidance rule used by the trainer under the given injection.
GuidanceRule guidance_rule_for(Injection injection);

struct VerifyOptions {
  Injection inject = Injection::kNone;
  std::size_t instances = 100;  // random tabular instances
  std::size_t fd_configs = 50;  // random finite-difference configurations
  std::size_t gaussian_points = 1000;
  std::uint64_t seed = 7;
};

struct SuiteResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double worst = 0.0;  // suite-specific worst-case statistic
};

SuiteResult verify_z_cancellation(const VerifyOptions& options);
SuiteResult verify_zero_mean_advantage(const VerifyOptions& options);
SuiteResult verify_bias_sensitivity(const VerifyOptions& options);
SuiteResult verify_gaussian_product(const VerifyOptions& options);
SuiteResult verify_finite_differences(const VerifyOptions& options);
SuiteResult verify_gamma1_reduction(const VerifyOptions& options);
// Checks dloss/d(uncond head) = (1 - g) dloss/d(guided head) and
// dloss/d(cond head) = g dloss/d(guided head) on random minibatches, and that
// the null embedding receives a nonzero gradient whenever g != 1.
SuiteResult verify_gradient_interpolation(const VerifyOptions& options, const std::string& env);

std::vector<SuiteResult> run_verify(const VerifyOptions& options);

// Largest |autodiff - central difference| over all parameter entries,
// divided by max(max |central difference|, 1e-8). `f` must rebuild its graph
// from the parameters on every call.
double finite_difference_error(std::vector<Tensor> params, const std::function<Tensor()>& f,
                               double h = 1e-5);

}  // namespace pgg

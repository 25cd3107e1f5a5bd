#include <gtest/gtest.h>

#include "pgg/error.hpp"
#include "pgg/verify.hpp"

using namespace pgg;

namespace {

VerifyOptions quick(Injection inject) {
  VerifyOptions o;
  o.inject = inject;
  o.instances = 10;
  o.fd_configs = 5;
  o.gaussian_points = 50;
  return o;
}

}  // namespace

TEST(Verify, CleanBuildPassesEverySuite) {
  for (const auto& r : run_verify(quick(Injection::kNone))) EXPECT_TRUE(r.passed) << r.name << ": " << r.detail;
}

TEST(Verify, DroppedUnconditionalBranchIsCaught) {
  const auto o = quick(Injection::kDropUncondBranch);
  EXPECT_FALSE(verify_gradient_interpolation(o, "cartpole").passed);
  EXPECT_FALSE(verify_gradient_interpolation(o, "pendulum").passed);
}

TEST(Verify, BiasedAdvantageIsCaught) {
  const auto o = quick(Injection::kBiasedAdvantage);
  const auto r = verify_z_cancellation(o);
  EXPECT_FALSE(r.passed);
  EXPECT_GT(r.worst, 1e-3);
}

TEST(Verify, InjectionNames) {
  for (auto i : {Injection::kNone, Injection::kDropUncondBranch, Injection::kBiasedAdvantage}) {
    EXPECT_EQ(parse_injection(injection_name(i)), i);
  }
  EXPECT_THROW(parse_injection("bogus"), Error);
}

TEST(Verify, FiniteDifferenceHelperDetectsWrongGradient) {
  Tensor w = Tensor::parameter({2}, {0.3, -0.7}, "w");
  EXPECT_LT(finite_difference_error({w}, [&] { return sum(square(w)); }), 1e-8);
}

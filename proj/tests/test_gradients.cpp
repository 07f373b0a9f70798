#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>

#include "darklighter/gradient_suite.hpp"

namespace dl = darklighter;

TEST(GradientSuite, EveryComponentPasses) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto results = dl::run_gradient_suite();
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto names = dl::gradient_suite_components();
  ASSERT_EQ(results.size(), names.size());
  for (std::size_t i = 0; i < results.size(); ++i) {
    EXPECT_EQ(results[i].component, names[i]);
    EXPECT_TRUE(results[i].passed) << results[i].component << " rel error " << results[i].rel_error;
    EXPECT_LT(results[i].rel_error, 1e-4);
    EXPECT_GT(results[i].probes, 0u);
  }
  EXPECT_LT(seconds, 60.0);
}

TEST(GradientSuite, CoversLayersLossesAndChain) {
  const auto names = dl::gradient_suite_components();
  for (const char* n : {"menet.conv1.weight", "menet.head_n.bias", "enhancer.e_stack", "loss.col", "loss.cen",
                        "loss.ill", "loss.sem", "loss.noi", "loss.total.final", "chain.params"}) {
    EXPECT_NE(std::find(names.begin(), names.end(), n), names.end()) << n;
  }
}

TEST(GradientSuite, InjectedFaultIsCaught) {
  dl::GradCheckOptions opt;
  opt.fault = "loss.ill";
  opt.samples = 6;
  const auto results = dl::run_gradient_suite(opt);
  for (const auto& r : results) {
    if (r.component == "loss.ill") {
      EXPECT_FALSE(r.passed);
      EXPECT_GT(r.rel_error, 0.5);
    } else {
      EXPECT_TRUE(r.passed) << r.component;
    }
  }
}

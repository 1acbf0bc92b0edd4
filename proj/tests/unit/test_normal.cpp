#include <gtest/gtest.h>

#include <cmath>

#include "rareis/errors.hpp"
#include "rareis/normal.hpp"
#include "rareis/stats.hpp"

using namespace rareis;

TEST(Normal, CdfReferenceValues) {
  EXPECT_DOUBLE_EQ(std_normal_cdf(0.0), 0.5);
  EXPECT_NEAR(std_normal_sf(1.5), 0.066807201268858057, 1e-16);
  EXPECT_NEAR(std_normal_sf(2.5), 0.0062096653257761323, 1e-17);
  EXPECT_NEAR(std_normal_sf(6.0) / 9.8658764503769814e-10, 1.0, 1e-12);
  EXPECT_NEAR(std_normal_cdf(-10.0) / 7.6198530241605e-24, 1.0, 1e-12);
}

TEST(Normal, QuantileInvertsCdf) {
  for (double p : {1e-300, 1e-20, 1e-9, 1e-4, 0.02425, 0.3, 0.5, 0.9, 0.97575, 1 - 1e-9}) {
    const double x = std_normal_quantile(p);
    EXPECT_NEAR(std_normal_cdf(x) / p, 1.0, 1e-13) << p;
  }
  EXPECT_NEAR(std_normal_quantile(1 - 1e-4), 3.719016485455709, 1e-12);
  EXPECT_NEAR(std_normal_quantile(0.975), 1.959963984540054, 1e-14);
}

TEST(Normal, QuantileRejectsEndpoints) {
  EXPECT_THROW(std_normal_quantile(0.0), DomainError);
  EXPECT_THROW(std_normal_quantile(1.0), DomainError);
  EXPECT_THROW(std_normal_quantile(std::nan("")), DomainError);
}

TEST(Normal, CriticalValue) {
  EXPECT_EQ(normal_critical_value(0.95), 1.96);
  EXPECT_NEAR(normal_critical_value(0.99), 2.5758293035489, 1e-12);
}

TEST(Stats, LogSumExpDoesNotOverflow) {
  const std::vector<double> big{1000.0, 1000.0};
  EXPECT_NEAR(log_sum_exp(big), 1000.0 + std::log(2.0), 1e-12);
  EXPECT_EQ(log_sum_exp(std::vector<double>{}), -INFINITY);
  EXPECT_EQ(log_sum_exp(std::vector<double>{-INFINITY, -INFINITY}), -INFINITY);
}

TEST(Stats, MeanVariance) {
  const std::vector<double> v{1, 2, 3, 4};
  const MeanVariance mv = sample_mean_variance(v);
  EXPECT_DOUBLE_EQ(mv.mean, 2.5);
  EXPECT_DOUBLE_EQ(mv.variance, 5.0 / 3.0);
  EXPECT_EQ(sample_mean_variance(std::vector<double>{7}).variance, 0.0);
}

TEST(Normal, BatchRowsMatchSequentialDraws) {
  RngStream a(1, 1), b(1, 1);
  const PointMatrix m = sample_std_normal_batch(a, 3, 4);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(Point(m.row(i).transpose()), sample_std_normal(b, 4));
}

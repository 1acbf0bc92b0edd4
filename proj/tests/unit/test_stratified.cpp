#include <gtest/gtest.h>

#include <numeric>

#include "rareis/errors.hpp"
#include "rareis/normal.hpp"
#include "rareis/stats.hpp"
#include "rareis/stratified.hpp"

using namespace rareis;

TEST(Strata, FromShift) {
  const StrataSpec s = strata_from_shift(ShiftVector{{3.0, 4.0}}, 2);
  EXPECT_NEAR(s.direction(0), 0.6, 1e-15);
  EXPECT_NEAR(s.direction(1), 0.8, 1e-15);
  ASSERT_EQ(s.levels.size(), 3u);
  EXPECT_EQ(s.levels[0], -INFINITY);
  EXPECT_NEAR(s.levels[1], 0.0, 1e-15);
  EXPECT_EQ(s.levels[2], INFINITY);
  EXPECT_EQ(s.weights, (std::vector<double>{0.5, 0.5}));
  for (std::size_t count : {3u, 10u, 37u}) {
    const StrataSpec t = strata_from_shift(ShiftVector::Ones(3), count);
    for (double w : t.weights) EXPECT_EQ(w, 1.0 / count);
    std::vector<double> mass(count);
    for (std::size_t i = 0; i < count; ++i) mass[i] = normal_interval_mass(t.levels[i], t.levels[i + 1]);
    EXPECT_NEAR(std::accumulate(mass.begin(), mass.end(), 0.0), 1.0, 1e-14);
    EXPECT_NEAR(mass[count / 2], 1.0 / count, 1e-14);
  }
  EXPECT_THROW(strata_from_shift(ShiftVector::Zero(2), 4), DomainError);
  EXPECT_THROW(strata_from_shift(ShiftVector::Ones(2), 1), DomainError);
}

TEST(Strata, MakeValidates) {
  EXPECT_THROW(StrataSpec::make(Vector::Ones(2), {-INFINITY, 0.0, INFINITY}), DomainError);
  EXPECT_THROW(StrataSpec::make(Vector::Unit(2, 0), {-INFINITY, 1.0, 0.5, INFINITY}), DomainError);
  EXPECT_THROW(StrataSpec::make(Vector::Unit(2, 0), {0.0, INFINITY}), DomainError);
  EXPECT_NO_THROW(StrataSpec::make(Vector::Unit(2, 0), {-INFINITY, INFINITY}));
}

TEST(ConditionalSampler, ProjectionStaysInStratum) {
  RngStream rng(1, 1);
  Vector u(3);
  u << 2, -1, 2;
  u /= 3.0;
  for (auto [a, b] : {std::pair{-INFINITY, -2.0}, {-0.3, 0.4}, {3.0, 3.5}, {6.0, INFINITY}, {-9.0, -8.0}}) {
    const PointMatrix x = conditional_gaussian_batch(u, a, b, 2000, rng);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const double t = x.row(i).dot(u);
      ASSERT_GE(t, a);
      ASSERT_LE(t, b);
    }
  }
}

TEST(ConditionalSampler, TruncatedMean) {
  RngStream rng(2, 1);
  const PointMatrix x = conditional_gaussian_batch(Vector::Ones(1), 1.0, 2.0, 100'000, rng);
  std::vector<double> v(x.data(), x.data() + x.size());
  const MeanVariance mv = sample_mean_variance(v);
  const double want = (std_normal_pdf(1.0) - std_normal_pdf(2.0)) / (std_normal_cdf(2.0) - std_normal_cdf(1.0));
  EXPECT_NEAR(want, 1.3832, 1e-4);
  EXPECT_LE(std::abs(mv.mean - want), 3 * std::sqrt(mv.variance / 100'000));
}

TEST(ConditionalSampler, WholeSpaceIsStandardNormal) {
  RngStream rng(3, 1);
  Vector u = Vector::Unit(2, 1);
  const PointMatrix x = conditional_gaussian_batch(u, -INFINITY, INFINITY, 50'000, rng);
  for (int c = 0; c < 2; ++c) {
    std::vector<double> v(50'000);
    for (int i = 0; i < 50'000; ++i) v[i] = x(i, c);
    const MeanVariance mv = sample_mean_variance(v);
    EXPECT_NEAR(mv.mean, 0.0, 0.02);
    EXPECT_NEAR(mv.variance, 1.0, 0.03);
  }
}

TEST(ConditionalSampler, OrthogonalPartIsUnconditioned) {
  RngStream rng(4, 1);
  Vector u = Vector::Unit(2, 0);
  const PointMatrix x = conditional_gaussian_batch(u, 2.0, 3.0, 50'000, rng);
  std::vector<double> v(50'000);
  for (int i = 0; i < 50'000; ++i) v[i] = x(i, 1);
  const MeanVariance mv = sample_mean_variance(v);
  EXPECT_NEAR(mv.mean, 0.0, 0.02);
  EXPECT_NEAR(mv.variance, 1.0, 0.03);
}

TEST(ConditionalSampler, Errors) {
  RngStream rng(5, 1);
  EXPECT_THROW(conditional_gaussian_sample(Vector::Ones(1), 1.0, 1.0, rng), DomainError);
  EXPECT_THROW(conditional_gaussian_sample(Vector::Ones(2), 0.0, 1.0, rng), DomainError);
  EXPECT_THROW(conditional_gaussian_sample(Vector::Ones(1), 40.0, 41.0, rng), DegenerateStratum);
}

TEST(Allocation, Examples) {
  EXPECT_EQ(optimal_allocation({0.5, 0.5}, {1, 3}, 100).counts, (std::vector<std::size_t>{25, 75}));
  EXPECT_EQ(optimal_allocation({0.9, 0.1}, {0, 5}, 10).counts, (std::vector<std::size_t>{1, 9}));
  EXPECT_EQ(optimal_allocation({0.2, 0.3, 0.5}, {2, 2, 2}, 10).counts, (std::vector<std::size_t>{2, 3, 5}));
}

TEST(Allocation, SumsToTotalWithFloor) {
  RngStream rng(6, 1);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 2 + trial % 9;
    std::vector<double> p(k), v(k);
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) sum += p[i] = rng.uniform();
    for (std::size_t i = 0; i < k; ++i) p[i] /= sum, v[i] = trial % 3 == 0 && i % 2 ? 0.0 : rng.uniform();
    const std::size_t total = k + trial;
    const AllocationPlan plan = optimal_allocation(p, v, total);
    EXPECT_EQ(plan.total(), total);
    for (std::size_t n : plan.counts) EXPECT_GE(n, 1u);
  }
}

TEST(Allocation, Errors) {
  EXPECT_THROW(optimal_allocation({0.5, 0.6}, {1, 1}, 10), DomainError);
  EXPECT_THROW(optimal_allocation({0.5, 0.5}, {0, 0}, 10), DomainError);
  EXPECT_THROW(optimal_allocation({0.5, 0.5}, {1, 1}, 1), DomainError);
}

TEST(Stratified, SingleStratumIsPlainMonteCarlo) {
  const ModelSpec spec = ModelSpec::identity(1);
  Model model(spec);
  RngStream rng(7, 1);
  const StrataSpec one = StrataSpec::make(Vector::Ones(1), {-INFINITY, INFINITY});
  const StratifiedResult r = stratified_estimate(model, 1.0, one, 0.2, 1000, rng);
  ASSERT_EQ(r.strata.size(), 1u);
  EXPECT_EQ(r.strata[0].count, 1000u);
  const double p = r.report.estimate;
  EXPECT_NEAR(r.variance, p * (1 - p) / 999.0, 1e-15);
}

TEST(Stratified, IdentityModelDeciles) {
  const ModelSpec spec = ModelSpec::identity(1);
  std::vector<double> levels{-INFINITY};
  for (int i = 1; i < 10; ++i) levels.push_back(std_normal_quantile(i / 10.0));
  levels.push_back(INFINITY);
  const StrataSpec strata = StrataSpec::make(Vector::Ones(1), levels);
  Model model(spec);
  RngStream rng(8, 1);
  const std::size_t n = 10'000;
  const StratifiedResult r = stratified_estimate(model, 1.5, strata, 0.2, n, rng);
  const double p = std_normal_sf(1.5);
  EXPECT_LE(std::abs(r.report.estimate - p), 3 * std::sqrt(r.variance));
  EXPECT_LT(r.variance, p * (1 - p) / n);
  EXPECT_EQ(model.evaluations(), n);
  std::size_t total = 0;
  for (const StratumSummary& s : r.strata) total += s.count;
  EXPECT_EQ(total, n);
  EXPECT_LE(r.optimal_variance, r.proportional_variance * (1 + 1e-12));
}

TEST(Stratified, UnbiasedOverSeeds) {
  const ModelSpec spec = ModelSpec::linear_family(2, 1.0, 3, 0.5);
  const double gamma = *analytic_threshold(spec, 0.01);
  const StrataSpec strata = strata_from_shift(spec.coefficients, 8);
  std::vector<double> estimates;
  for (int seed = 0; seed < 200; ++seed) {
    Model model(spec);
    RngStream rng(seed, 9);
    estimates.push_back(stratified_estimate(model, gamma, strata, 0.2, 400, rng).report.estimate);
  }
  const MeanVariance mv = sample_mean_variance(estimates);
  EXPECT_LE(std::abs(mv.mean - 0.01), 3 * std::sqrt(mv.variance / 200));
}

TEST(Stratified, WorkerCountInvariant) {
  const ModelSpec spec = ModelSpec::skewed(3);
  const StrataSpec strata = strata_from_shift(ShiftVector::Ones(3), 5);
  Model one(spec, 1), many(spec, 3);
  RngStream a(10, 1), b(10, 1);
  EXPECT_EQ(stratified_estimate(one, 2.0, strata, 0.2, 600, a).report.estimate,
            stratified_estimate(many, 2.0, strata, 0.2, 600, b).report.estimate);
}

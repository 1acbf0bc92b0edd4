#include <gtest/gtest.h>

#include "rareis/dimred.hpp"
#include "rareis/errors.hpp"
#include "rareis/multilevel.hpp"
#include "rareis/normal.hpp"

using namespace rareis;

namespace {

WeightedBatch batch_for(const ModelSpec& spec, double p, std::size_t n, RngStream& rng) {
  Model model(spec);
  PointMatrix x = sample_std_normal_batch(rng, n, spec.dim);
  std::vector<double> r = model.evaluate(x);
  const double level = next_level(r, 0.1, *analytic_threshold(spec, p));
  return WeightedBatch::make(std::move(x), std::move(r), level, ShiftVector::Zero(spec.dim));
}

}  // namespace

TEST(Selection, TiesPreferLowerIndices) {
  const SubspaceSelection s = select_important(Vector::Ones(12), 5, 0.99);
  EXPECT_EQ(s.indices, (std::vector<std::size_t>{0, 1, 2, 3, 4}));
  EXPECT_EQ(s.dim, 12u);
}

TEST(Selection, FullCapAndFullEnergySelectsAll) {
  Vector m = Vector::LinSpaced(6, 1, 6);
  EXPECT_EQ(select_important(m, 6, 1.0).size(), 6u);
}

TEST(Selection, EnergyThreshold) {
  Vector m(4);
  m << 0.1, 3.0, 0.0, 4.0;
  // 16 / 25.01 < 0.9, 25 / 25.01 >= 0.9
  EXPECT_EQ(select_important(m, 10, 0.9).indices, (std::vector<std::size_t>{1, 3}));
  EXPECT_EQ(select_important(m, 10, 1.0).indices, (std::vector<std::size_t>{0, 1, 3}));
  EXPECT_EQ(select_important(Vector::Zero(3), 10, 0.9).size(), 1u);
}

TEST(Selection, EmbedAndProject) {
  SubspaceSelection s{{1, 4}, 5};
  const ShiftVector full = s.embed(Vector{{2.0, -3.0}});
  EXPECT_EQ(full, (ShiftVector{{0.0, 2.0, 0.0, 0.0, -3.0}}));
  EXPECT_EQ(s.project(full), (Vector{{2.0, -3.0}}));
}

TEST(Selection, Activation) {
  DimredConfig c;
  EXPECT_FALSE(c.active_for(500));
  EXPECT_TRUE(c.active_for(501));
  c.mode = DimredMode::kOff;
  EXPECT_FALSE(c.active_for(5000));
  c.mode = DimredMode::kOn;
  EXPECT_TRUE(c.active_for(2));
}

TEST(Selection, RecoversDominantCoordinates) {
  const ModelSpec spec = ModelSpec::linear_family(10, 1.0, 1000, 0.01);
  int recovered = 0;
  for (int seed = 1; seed <= 50; ++seed) {
    RngStream rng(seed, 1);
    const SubspaceSelection s = select_important(batch_for(spec, 2.8e-5, 1000, rng), DimredConfig{});
    recovered += std::count_if(s.indices.begin(), s.indices.end(), [](std::size_t i) { return i < 10; }) == 10;
    EXPECT_LE(s.size(), 200u);
  }
  EXPECT_GE(recovered, 48);
}

TEST(Selection, DeterministicForABatch) {
  const ModelSpec spec = ModelSpec::linear_family(10, 1.0, 300, 0.01);
  RngStream rng(2, 1);
  const WeightedBatch b = batch_for(spec, 1e-4, 1000, rng);
  EXPECT_EQ(select_important(b, DimredConfig{}).indices, select_important(b, DimredConfig{}).indices);
}

TEST(Subspace, AllCoordinatesMatchesFullSolver) {
  const ModelSpec spec = ModelSpec::linear_family(3, 1.0, 2, 0.3);
  RngStream rng(3, 1);
  const WeightedBatch b = batch_for(spec, 1e-3, 1000, rng);
  SubspaceSelection all{{0, 1, 2, 3, 4}, 5};
  const ShiftSolution full = solve_optimal_shift(b, ShiftVector::Zero(5));
  const ShiftSolution sub = solve_shift_in_subspace(b, all);
  EXPECT_LE((full.theta - sub.theta).norm(), 1e-7);
}

TEST(Subspace, OffSelectionIsExactlyZeroAndNeverBeatsFull) {
  const ModelSpec spec = ModelSpec::linear_family(3, 1.0, 20, 0.1);
  RngStream rng(4, 1);
  const WeightedBatch b = batch_for(spec, 1e-3, 1000, rng);
  SubspaceSelection sel{{0, 1, 2}, 23};
  const ShiftSolution sub = solve_shift_in_subspace(b, sel);
  for (Eigen::Index i = 3; i < 23; ++i) EXPECT_EQ(sub.theta(i), 0.0);
  const ShiftSolution full = solve_optimal_shift(b, ShiftVector::Zero(23));
  EXPECT_GE(v_criterion(sub.theta, b), v_criterion(full.theta, b) * (1 - 1e-10));
}

TEST(Subspace, FirstCoordinateMatchesOneDimensionalSolver) {
  RngStream rng(5, 1);
  PointMatrix x = sample_std_normal_batch(rng, 5000, 3);
  std::vector<double> r(5000);
  for (int j = 0; j < 5000; ++j) r[j] = x(j, 0);
  const WeightedBatch b3 = WeightedBatch::make(x, r, 1.5, ShiftVector::Zero(3));
  PointMatrix x1 = x.col(0);
  const WeightedBatch b1 = WeightedBatch::make(x1, r, 1.5, ShiftVector::Zero(1));
  const ShiftSolution sub = solve_shift_in_subspace(b3, SubspaceSelection{{0}, 3});
  EXPECT_NEAR(sub.theta(0), solve_optimal_shift(b1, ShiftVector::Zero(1)).theta(0), 1e-9);
}

TEST(Subspace, LadderReportsSelection) {
  const ModelSpec spec = ModelSpec::linear_family(10, 1.0, 600, 0.01);
  Model model(spec);
  RngStream rng(6, 1);
  LadderConfig config;
  config.gamma = *analytic_threshold(spec, 1e-5);
  const LadderResult r = run_ladder(model, config, rng);
  ASSERT_FALSE(r.trace.selected.empty());
  for (Eigen::Index i = 0; i < r.theta.size(); ++i) {
    if (!std::binary_search(r.trace.selected.begin(), r.trace.selected.end(), static_cast<std::size_t>(i)))
      EXPECT_EQ(r.theta(i), 0.0);
  }
}

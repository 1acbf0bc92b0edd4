#include "rareis/dimred.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rareis/errors.hpp"

namespace rareis {

ShiftVector SubspaceSelection::embed(const Vector& reduced) const {
  if (static_cast<std::size_t>(reduced.size()) != indices.size())
    throw DomainError("embed: reduced vector size differs from selection size");
  ShiftVector full = ShiftVector::Zero(static_cast<Eigen::Index>(dim));
  for (std::size_t k = 0; k < indices.size(); ++k)
    full(static_cast<Eigen::Index>(indices[k])) = reduced(static_cast<Eigen::Index>(k));
  return full;
}

Vector SubspaceSelection::project(const ShiftVector& full) const {
  if (static_cast<std::size_t>(full.size()) != dim) throw DomainError("project: dimension mismatch");
  Vector reduced(static_cast<Eigen::Index>(indices.size()));
  for (std::size_t k = 0; k < indices.size(); ++k)
    reduced(static_cast<Eigen::Index>(k)) = full(static_cast<Eigen::Index>(indices[k]));
  return reduced;
}

SubspaceSelection select_important(const Vector& magnitudes, std::size_t max_selected, double energy_threshold) {
  const auto d = static_cast<std::size_t>(magnitudes.size());
  if (d == 0) throw DomainError("select_important: empty statistics");
  if (max_selected == 0) throw DomainError("select_important: max_selected must be >= 1");
  if (!(energy_threshold > 0.0 && energy_threshold <= 1.0))
    throw DomainError("select_important: energy threshold must lie in (0, 1]");

  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(magnitudes(static_cast<Eigen::Index>(a))) > std::abs(magnitudes(static_cast<Eigen::Index>(b)));
  });

  const double total = magnitudes.squaredNorm();
  SubspaceSelection selection;
  selection.dim = d;
  double mass = 0.0;
  for (std::size_t k = 0; k < d && selection.indices.size() < max_selected; ++k) {
    const double m = magnitudes(static_cast<Eigen::Index>(order[k]));
    if (!selection.indices.empty() && m == 0.0) break;
    selection.indices.push_back(order[k]);
    mass += m * m;
    if (mass >= energy_threshold * total) break;
  }
  std::sort(selection.indices.begin(), selection.indices.end());
  return selection;
}

SubspaceSelection select_important(const WeightedBatch& batch, const DimredConfig& config) {
  Vector magnitudes = survivor_weighted_mean(batch).cwiseAbs();
  if (config.min_z > 0.0) {
    const Vector stderr_ = survivor_weighted_mean_stderr(batch);
    for (Eigen::Index i = 0; i < magnitudes.size(); ++i)
      if (magnitudes(i) < config.min_z * stderr_(i)) magnitudes(i) = 0.0;
  }
  return select_important(magnitudes, config.max_selected, config.energy_threshold);
}

ShiftSolution solve_shift_in_subspace(const WeightedBatch& batch, const SubspaceSelection& selection,
                                      const ShiftVector& theta_init, const NewtonSettings& settings) {
  if (selection.dim != batch.dim()) throw DomainError("selection dimension differs from batch dimension");
  return solve_optimal_shift_on(batch, selection.indices, theta_init, settings);
}

ShiftSolution solve_shift_in_subspace(const WeightedBatch& batch, const SubspaceSelection& selection,
                                      const NewtonSettings& settings) {
  return solve_shift_in_subspace(batch, selection, ShiftVector::Zero(static_cast<Eigen::Index>(batch.dim())),
                                 settings);
}

}  // namespace rareis

#pragma once

#include <cstddef>
#include <vector>

#include "rareis/gaussian_is.hpp"

namespace rareis {

/// theta in R^{d'} embeds as A theta in R^d, A the identity columns listed in
/// `indices` (ascending, distinct).
struct SubspaceSelection {
  std::vector<std::size_t> indices;
  std::size_t dim = 0;

  std::size_t size() const noexcept { return indices.size(); }
  ShiftVector embed(const Vector& reduced) const;
  Vector project(const ShiftVector& full) const;
};

enum class DimredMode { kAuto, kOn, kOff };

struct DimredConfig {
  DimredMode mode = DimredMode::kAuto;
  std::size_t activate_above = 500;  // kAuto engages when d > activate_above
  double energy_threshold = 0.99;
  std::size_t max_selected = 200;
  /// Coordinates whose |mean| / stderr falls below this are not ranked.
  /// 0 ranks every coordinate.
  double min_z = 2.5;

  bool active_for(std::size_t dim) const noexcept {
    return mode == DimredMode::kOn || (mode == DimredMode::kAuto && dim > activate_above);
  }
};

/// Ranks coordinates by `magnitudes` (descending, lower index first on ties)
/// and adds them until the selected squared mass reaches
/// `energy_threshold` of the total or `max_selected` is hit. At least one
/// coordinate is always selected.
SubspaceSelection select_important(const Vector& magnitudes, std::size_t max_selected, double energy_threshold);

/// Ranking statistic from a batch: |survivor-weighted mean| per coordinate,
/// zeroed where |mean| / stderr < config.min_z. Throws NoSurvivors.
SubspaceSelection select_important(const WeightedBatch& batch, const DimredConfig& config);

/// Minimizes u over the selected coordinates only; the result is exactly
/// zero off the selection.
ShiftSolution solve_shift_in_subspace(const WeightedBatch& batch, const SubspaceSelection& selection,
                                      const NewtonSettings& settings = {});
ShiftSolution solve_shift_in_subspace(const WeightedBatch& batch, const SubspaceSelection& selection,
                                      const ShiftVector& theta_init, const NewtonSettings& settings = {});

}  // namespace rareis

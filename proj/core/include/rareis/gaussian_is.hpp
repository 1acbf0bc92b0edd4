#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "rareis/errors.hpp"
#include "rareis/types.hpp"

namespace rareis {

/// n points drawn from N(theta_prev, I_d), their oriented responses and the
/// survivor flags (response >= threshold).
struct WeightedBatch {
  PointMatrix points;
  std::vector<double> responses;
  std::vector<std::uint8_t> survivors;
  ShiftVector theta_prev;
  double threshold = 0.0;

  /// Flags survivors against `threshold`. Validates shapes.
  static WeightedBatch make(PointMatrix points, std::vector<double> responses, double threshold,
                            ShiftVector theta_prev);

  std::size_t size() const noexcept { return responses.size(); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(points.cols()); }
  std::size_t survivor_count() const noexcept;

  /// Same points and responses, survivors re-flagged at another threshold.
  WeightedBatch with_threshold(double new_threshold) const;
};

/// f(x; theta_from) / f(x; theta_to) for the unit-covariance Gaussian family:
/// exp((theta_from - theta_to).x + (|theta_to|^2 - |theta_from|^2) / 2).
double likelihood_ratio(const Point& x, const ShiftVector& theta_from, const ShiftVector& theta_to);

/// Empirical second moment of the indicator IS estimator that would use
/// shift theta, estimated from a batch drawn under theta_prev:
///   v_n(theta) = (1/n) sum_j 1{surv_j} exp(-(theta + theta_prev).Y_j + (|theta|^2 + |theta_prev|^2)/2).
/// With theta_prev = 0 this is the single-level criterion. Throws NoSurvivors.
double v_criterion(const ShiftVector& theta, const WeightedBatch& batch);
Vector v_gradient(const ShiftVector& theta, const WeightedBatch& batch);
Eigen::MatrixXd v_hessian(const ShiftVector& theta, const WeightedBatch& batch);

/// Log-convexified criterion u_n = log v_n - |theta_prev|^2 / 2:
///   u(theta) = |theta|^2/2 + log((1/n) sum_j 1{surv_j} exp(-(theta + theta_prev).Y_j)),
///   grad u = theta - mean_w(Y),  hess u = I + Cov_w(Y) >= I,
/// where w_j is proportional to 1{surv_j} exp(-(theta + theta_prev).Y_j).
struct UObjective {
  double value = 0.0;
  Vector gradient;
  Eigen::MatrixXd hessian;
};
UObjective u_objective(const ShiftVector& theta, const WeightedBatch& batch);

struct NewtonSettings {
  double tolerance = 1e-8;  // on |grad u|
  int max_iterations = 50;
  double cg_relative_tolerance = 1e-10;
  double armijo_slope = 1e-4;
  double backtrack_factor = 0.5;
};

struct ShiftSolution {
  ShiftVector theta;
  double v_at_theta = 0.0;
  /// Online variance estimate of v_n at the solution:
  /// (1/n) sum_j t_j^2 - v_n^2 with t_j the summands of v_n.
  double gamma_n_sq = 0.0;
  int iterations = 0;
  double gradient_norm = 0.0;
  bool converged = false;
};

class NotConverged : public Error {
 public:
  explicit NotConverged(ShiftSolution best)
      : Error("Newton solver did not reach the gradient tolerance"), best_(std::move(best)) {}
  const ShiftSolution& best() const noexcept { return best_; }

 private:
  ShiftSolution best_;
};

/// Minimizes u_n by Newton's method; each step solves hess u . delta = -grad u
/// with matrix-free conjugate gradients and is damped by Armijo backtracking.
/// Throws NoSurvivors, or NotConverged carrying the best iterate.
ShiftSolution solve_optimal_shift(const WeightedBatch& batch, const ShiftVector& theta_init,
                                  const NewtonSettings& settings = {});

/// Same problem restricted to theta = A vartheta, A the identity columns in
/// `coordinates`. The returned shift is full-dimensional with exact zeros off
/// the selected coordinates.
ShiftSolution solve_optimal_shift_on(const WeightedBatch& batch, std::span<const std::size_t> coordinates,
                                     const ShiftVector& theta_init, const NewtonSettings& settings = {});

/// Survivor-weighted mean of each coordinate with weights w_j at theta = 0,
/// i.e. the shift after a single gradient step from the origin.
Vector survivor_weighted_mean(const WeightedBatch& batch);

/// Standard error of each entry of survivor_weighted_mean, using the
/// effective sample size of the weights.
Vector survivor_weighted_mean_stderr(const WeightedBatch& batch);

}  // namespace rareis

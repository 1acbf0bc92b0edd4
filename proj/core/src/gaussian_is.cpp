#include "rareis/gaussian_is.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rareis/stats.hpp"

namespace rareis {
namespace {

// u restricted to a coordinate subset. Only survivor rows are kept; the
// contribution of the (fixed) previous shift enters through `base_`.
class RestrictedObjective {
 public:
  RestrictedObjective(const WeightedBatch& batch, std::span<const std::size_t> coordinates)
      : n_(static_cast<double>(batch.size())), theta_prev_sq_(batch.theta_prev.squaredNorm()) {
    const std::size_t survivors = batch.survivor_count();
    if (survivors == 0) throw NoSurvivors();
    const auto k = static_cast<Eigen::Index>(coordinates.size());
    rows_.resize(static_cast<Eigen::Index>(survivors), k);
    base_.resize(static_cast<Eigen::Index>(survivors));
    Eigen::Index r = 0;
    for (std::size_t j = 0; j < batch.size(); ++j) {
      if (!batch.survivors[j]) continue;
      const auto row = batch.points.row(static_cast<Eigen::Index>(j));
      for (Eigen::Index c = 0; c < k; ++c) rows_(r, c) = row(static_cast<Eigen::Index>(coordinates[c]));
      base_(r) = -row.dot(batch.theta_prev.transpose());
      ++r;
    }
  }

  Eigen::Index dim() const noexcept { return rows_.cols(); }

  // Sets the evaluation point; fills value, gradient, normalized weights, mean.
  void evaluate(const Vector& theta) {
    theta_ = theta;
    log_weights_ = base_ - rows_ * theta;
    log_sum_ = log_sum_exp(std::span<const double>(log_weights_.data(), static_cast<std::size_t>(log_weights_.size())));
    weights_ = (log_weights_.array() - log_sum_).exp().matrix();
    mean_ = rows_.transpose() * weights_;
    value_ = 0.5 * theta.squaredNorm() + log_sum_ - std::log(n_);
    gradient_ = theta - mean_;
  }

  // Cheap evaluation of u only (for line search).
  double value_at(const Vector& theta) const {
    const Vector lw = base_ - rows_ * theta;
    return 0.5 * theta.squaredNorm() +
           log_sum_exp(std::span<const double>(lw.data(), static_cast<std::size_t>(lw.size()))) - std::log(n_);
  }

  double value() const noexcept { return value_; }
  const Vector& gradient() const noexcept { return gradient_; }

  // (I + Cov_w) v without forming the matrix.
  Vector hessian_apply(const Vector& v) const {
    const Vector centered = rows_ * v - Vector::Constant(rows_.rows(), mean_.dot(v));
    const Vector weighted = weights_.cwiseProduct(centered);
    return v + rows_.transpose() * weighted - mean_ * weighted.sum();
  }

  Eigen::MatrixXd hessian() const {
    const Eigen::MatrixXd centered = rows_.rowwise() - mean_.transpose();
    Eigen::MatrixXd h = centered.transpose() * weights_.asDiagonal() * centered;
    h.diagonal().array() += 1.0;
    return h;
  }

  // v_n = exp(u + |theta_prev|^2 / 2) at the current point.
  double criterion() const { return std::exp(value_ + 0.5 * theta_prev_sq_); }

  double criterion_variance(double theta_sq) const {
    const Vector doubled = 2.0 * log_weights_;
    const double log_second =
        log_sum_exp(std::span<const double>(doubled.data(), static_cast<std::size_t>(doubled.size()))) -
        std::log(n_) + theta_sq + theta_prev_sq_;
    const double v = criterion();
    return std::max(0.0, std::exp(log_second) - v * v);
  }

  const Vector& mean() const noexcept { return mean_; }

 private:
  double n_;
  double theta_prev_sq_;
  Eigen::MatrixXd rows_;
  Vector base_;

  Vector theta_;
  Vector log_weights_;
  double log_sum_ = 0.0;
  Vector weights_;
  Vector mean_;
  double value_ = 0.0;
  Vector gradient_;
};

std::vector<std::size_t> all_coordinates(std::size_t d) {
  std::vector<std::size_t> idx(d);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

Vector conjugate_gradient(const RestrictedObjective& objective, const Vector& rhs, double relative_tolerance,
                          Eigen::Index max_iterations) {
  Vector x = Vector::Zero(rhs.size());
  Vector r = rhs;
  Vector p = r;
  double rr = r.squaredNorm();
  const double stop = relative_tolerance * relative_tolerance * rr;
  for (Eigen::Index it = 0; it < max_iterations && rr > stop; ++it) {
    const Vector hp = objective.hessian_apply(p);
    const double alpha = rr / p.dot(hp);
    x += alpha * p;
    r -= alpha * hp;
    const double rr_next = r.squaredNorm();
    p = r + (rr_next / rr) * p;
    rr = rr_next;
  }
  return x;
}

ShiftVector embed(const Vector& restricted, std::span<const std::size_t> coordinates, std::size_t dim) {
  ShiftVector full = ShiftVector::Zero(static_cast<Eigen::Index>(dim));
  for (std::size_t c = 0; c < coordinates.size(); ++c)
    full(static_cast<Eigen::Index>(coordinates[c])) = restricted(static_cast<Eigen::Index>(c));
  return full;
}

void check_shift(const ShiftVector& theta, const WeightedBatch& batch) {
  if (static_cast<std::size_t>(theta.size()) != batch.dim())
    throw DomainError("shift dimension differs from batch dimension");
}

}  // namespace

WeightedBatch WeightedBatch::make(PointMatrix points, std::vector<double> responses, double threshold,
                                  ShiftVector theta_prev) {
  if (static_cast<std::size_t>(points.rows()) != responses.size())
    throw DomainError("batch: point and response counts differ");
  if (responses.empty()) throw DomainError("batch must be non-empty");
  if (theta_prev.size() != points.cols()) throw DomainError("batch: base shift dimension differs");
  WeightedBatch batch;
  batch.points = std::move(points);
  batch.responses = std::move(responses);
  batch.theta_prev = std::move(theta_prev);
  batch.threshold = threshold;
  batch.survivors.resize(batch.responses.size());
  for (std::size_t j = 0; j < batch.responses.size(); ++j) batch.survivors[j] = batch.responses[j] >= threshold;
  return batch;
}

std::size_t WeightedBatch::survivor_count() const noexcept {
  return static_cast<std::size_t>(std::count(survivors.begin(), survivors.end(), std::uint8_t{1}));
}

WeightedBatch WeightedBatch::with_threshold(double new_threshold) const {
  WeightedBatch out = *this;
  out.threshold = new_threshold;
  for (std::size_t j = 0; j < out.responses.size(); ++j) out.survivors[j] = out.responses[j] >= new_threshold;
  return out;
}

double likelihood_ratio(const Point& x, const ShiftVector& theta_from, const ShiftVector& theta_to) {
  if (x.size() != theta_from.size() || x.size() != theta_to.size())
    throw DomainError("likelihood_ratio: dimension mismatch");
  return std::exp((theta_from - theta_to).dot(x) + 0.5 * (theta_to.squaredNorm() - theta_from.squaredNorm()));
}

double v_criterion(const ShiftVector& theta, const WeightedBatch& batch) {
  check_shift(theta, batch);
  const auto coords = all_coordinates(batch.dim());
  RestrictedObjective objective(batch, coords);
  objective.evaluate(theta);
  return objective.criterion();
}

Vector v_gradient(const ShiftVector& theta, const WeightedBatch& batch) {
  check_shift(theta, batch);
  const auto coords = all_coordinates(batch.dim());
  RestrictedObjective objective(batch, coords);
  objective.evaluate(theta);
  return objective.criterion() * objective.gradient();
}

Eigen::MatrixXd v_hessian(const ShiftVector& theta, const WeightedBatch& batch) {
  check_shift(theta, batch);
  const auto coords = all_coordinates(batch.dim());
  RestrictedObjective objective(batch, coords);
  objective.evaluate(theta);
  // E_w[(theta - Y)(theta - Y)'] = Cov_w(Y) + g g' with g = theta - mean_w(Y).
  const Vector& g = objective.gradient();
  Eigen::MatrixXd h = objective.hessian() + g * g.transpose();
  return objective.criterion() * h;
}

UObjective u_objective(const ShiftVector& theta, const WeightedBatch& batch) {
  check_shift(theta, batch);
  const auto coords = all_coordinates(batch.dim());
  RestrictedObjective objective(batch, coords);
  objective.evaluate(theta);
  return UObjective{objective.value(), objective.gradient(), objective.hessian()};
}

ShiftSolution solve_optimal_shift_on(const WeightedBatch& batch, std::span<const std::size_t> coordinates,
                                     const ShiftVector& theta_init, const NewtonSettings& settings) {
  check_shift(theta_init, batch);
  if (coordinates.empty()) throw DomainError("empty coordinate subset");
  for (std::size_t c : coordinates)
    if (c >= batch.dim()) throw DomainError("coordinate index out of range");

  RestrictedObjective objective(batch, coordinates);
  Vector theta(static_cast<Eigen::Index>(coordinates.size()));
  for (std::size_t c = 0; c < coordinates.size(); ++c)
    theta(static_cast<Eigen::Index>(c)) = theta_init(static_cast<Eigen::Index>(coordinates[c]));
  objective.evaluate(theta);

  ShiftSolution solution;
  int iteration = 0;
  for (; iteration < settings.max_iterations; ++iteration) {
    if (objective.gradient().norm() <= settings.tolerance) break;

    const Vector step = conjugate_gradient(objective, -objective.gradient(), settings.cg_relative_tolerance,
                                           std::max<Eigen::Index>(objective.dim(), 1));
    const double slope = objective.gradient().dot(step);
    const double current = objective.value();
    double alpha = 1.0;
    bool accepted = false;
    // Once the predicted decrease is below the rounding noise of u the Armijo
    // test compares noise; the full Newton step is then taken as is.
    if (-slope <= 1e-13 * (1.0 + std::abs(current))) {
      theta += step;
      accepted = true;
    }
    for (int trial = 0; !accepted && trial < 60; ++trial, alpha *= settings.backtrack_factor) {
      const Vector candidate = theta + alpha * step;
      if (objective.value_at(candidate) <= current + settings.armijo_slope * alpha * slope) {
        theta = candidate;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;  // no further decrease representable
    objective.evaluate(theta);
  }

  solution.theta = embed(theta, coordinates, batch.dim());
  solution.iterations = iteration;
  solution.gradient_norm = objective.gradient().norm();
  solution.converged = solution.gradient_norm <= settings.tolerance;
  const double theta_sq = solution.theta.squaredNorm();
  solution.v_at_theta = objective.criterion();
  solution.gamma_n_sq = objective.criterion_variance(theta_sq);
  if (!solution.converged) throw NotConverged(solution);
  return solution;
}

ShiftSolution solve_optimal_shift(const WeightedBatch& batch, const ShiftVector& theta_init,
                                  const NewtonSettings& settings) {
  const auto coords = all_coordinates(batch.dim());
  return solve_optimal_shift_on(batch, coords, theta_init, settings);
}

Vector survivor_weighted_mean(const WeightedBatch& batch) {
  const auto coords = all_coordinates(batch.dim());
  RestrictedObjective objective(batch, coords);
  objective.evaluate(Vector::Zero(static_cast<Eigen::Index>(batch.dim())));
  return objective.mean();
}

Vector survivor_weighted_mean_stderr(const WeightedBatch& batch) {
  if (batch.survivor_count() == 0) throw NoSurvivors();
  std::vector<double> log_w;
  std::vector<std::size_t> rows;
  for (std::size_t j = 0; j < batch.size(); ++j) {
    if (!batch.survivors[j]) continue;
    rows.push_back(j);
    log_w.push_back(-batch.points.row(static_cast<Eigen::Index>(j)).dot(batch.theta_prev.transpose()));
  }
  const double lse = log_sum_exp(log_w);
  const Vector mean = survivor_weighted_mean(batch);
  Vector var = Vector::Zero(mean.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const double w = std::exp(log_w[r] - lse);
    const auto diff = batch.points.row(static_cast<Eigen::Index>(rows[r])).transpose() - mean;
    var += (w * w) * diff.cwiseAbs2();
  }
  return var.cwiseSqrt();
}

}  // namespace rareis

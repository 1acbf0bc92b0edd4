#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rareis/types.hpp"

namespace rareis {

enum class ModelKind { kLinear, kIdentity, kSkewed, kExternal };

/// Closed form P(c.X >= gamma) = Phi(-gamma / |c|) for Gaussian-linear
/// responses.
struct TailOracle {
  double coefficient_norm = 1.0;
};

/// Black-box scalar response h over R^d plus its tail orientation.
struct ModelSpec {
  ModelKind kind = ModelKind::kIdentity;
  std::size_t dim = 1;
  Tail tail = Tail::kRight;

  /// kLinear: stacked coefficients (a over the important block, then b).
  Vector coefficients;
  /// kLinear: size of the important block, kept as metadata only.
  std::size_t important_count = 0;
  /// kExternal: executable (and whitespace-separated arguments).
  std::string command;

  std::optional<TailOracle> oracle;

  /// h(x) = a . x_A + b . x_B with x = (x_A, x_B).
  static ModelSpec linear(const Vector& a, const Vector& b, Tail tail = Tail::kRight);
  /// Constant-coefficient linear family: a_count coordinates weighted a,
  /// b_count coordinates weighted b.
  static ModelSpec linear_family(std::size_t a_count, double a, std::size_t b_count, double b,
                                 Tail tail = Tail::kRight);
  /// h(x) = x_1; the remaining coordinates are ignored.
  static ModelSpec identity(std::size_t dim = 1, Tail tail = Tail::kRight);
  /// h(x) = x_1 + 0.25 (x_1^2 - 1) + 0.1 x_1^3 + 0.05 sum_{i>1} (x_i^2 - 1):
  /// monotone increasing in x_1, right-skewed.
  static ModelSpec skewed(std::size_t dim = 1, Tail tail = Tail::kRight);
  static ModelSpec external(std::string command, std::size_t dim, Tail tail = Tail::kRight);
};

struct EvalRecord {
  Point point;
  double value = 0.0;  // model units
  std::size_t index = 0;
};

class ExternalProcess;

/// Evaluation handle for a ModelSpec. Builtin models are pure; an external
/// model owns one child process per worker.
class Model {
 public:
  explicit Model(ModelSpec spec, std::size_t workers = 1);
  ~Model();
  Model(Model&&) noexcept;
  Model& operator=(Model&&) noexcept;

  const ModelSpec& spec() const noexcept { return spec_; }
  std::size_t dim() const noexcept { return spec_.dim; }
  std::size_t workers() const noexcept { return workers_; }

  /// One raw response per row, in row order. Throws SimulatorError.
  std::vector<double> evaluate(const PointMatrix& points);

  /// Total number of points evaluated through this handle.
  std::size_t evaluations() const noexcept { return evaluations_; }

 private:
  double evaluate_builtin(const double* x) const;

  ModelSpec spec_;
  std::size_t workers_;
  std::size_t evaluations_ = 0;
  std::vector<std::unique_ptr<ExternalProcess>> processes_;
};

/// Order-preserving evaluation returning full records.
std::vector<EvalRecord> evaluate_batch(Model& model, const PointMatrix& points);

/// value for right tails, -value for left tails.
double oriented_response(const ModelSpec& model, double value) noexcept;

/// The threshold in oriented units, so that every tail becomes {oriented >= gamma'}.
double oriented_threshold(const ModelSpec& model, double gamma) noexcept;

/// Maps an oriented quantity back to model units (same sign flip).
inline double from_oriented(const ModelSpec& model, double oriented) noexcept {
  return oriented_response(model, oriented);
}

/// Exact tail probability (right: P(h >= gamma), left: P(h <= gamma)) when the
/// model carries an oracle.
std::optional<double> analytic_tail_prob(const ModelSpec& model, double gamma);

/// Threshold gamma (model units) whose exact tail probability is p.
std::optional<double> analytic_threshold(const ModelSpec& model, double p);

}  // namespace rareis

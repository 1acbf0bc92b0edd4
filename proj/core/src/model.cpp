#include "rareis/model.hpp"

#include <cmath>
#include <utility>

#include "rareis/errors.hpp"
#include "rareis/external_process.hpp"
#include "rareis/normal.hpp"
#include "rareis/parallel.hpp"

namespace rareis {

ModelSpec ModelSpec::linear(const Vector& a, const Vector& b, Tail tail) {
  if (a.size() + b.size() < 1) throw DomainError("linear model needs at least one coefficient");
  ModelSpec spec;
  spec.kind = ModelKind::kLinear;
  spec.dim = static_cast<std::size_t>(a.size() + b.size());
  spec.tail = tail;
  spec.coefficients.resize(a.size() + b.size());
  spec.coefficients << a, b;
  spec.important_count = static_cast<std::size_t>(a.size());
  spec.oracle = TailOracle{spec.coefficients.norm()};
  return spec;
}

ModelSpec ModelSpec::linear_family(std::size_t a_count, double a, std::size_t b_count, double b,
                                   Tail tail) {
  return linear(Vector::Constant(static_cast<Eigen::Index>(a_count), a),
                Vector::Constant(static_cast<Eigen::Index>(b_count), b), tail);
}

ModelSpec ModelSpec::identity(std::size_t dim, Tail tail) {
  if (dim < 1) throw DomainError("model dimension must be >= 1");
  ModelSpec spec;
  spec.kind = ModelKind::kIdentity;
  spec.dim = dim;
  spec.tail = tail;
  spec.oracle = TailOracle{1.0};
  return spec;
}

ModelSpec ModelSpec::skewed(std::size_t dim, Tail tail) {
  if (dim < 1) throw DomainError("model dimension must be >= 1");
  ModelSpec spec;
  spec.kind = ModelKind::kSkewed;
  spec.dim = dim;
  spec.tail = tail;
  return spec;
}

ModelSpec ModelSpec::external(std::string command, std::size_t dim, Tail tail) {
  if (dim < 1) throw DomainError("model dimension must be >= 1");
  ModelSpec spec;
  spec.kind = ModelKind::kExternal;
  spec.dim = dim;
  spec.tail = tail;
  spec.command = std::move(command);
  return spec;
}

Model::Model(ModelSpec spec, std::size_t workers)
    : spec_(std::move(spec)), workers_(workers == 0 ? 1 : workers) {
  if (spec_.dim < 1) throw DomainError("model dimension must be >= 1");
  if (spec_.kind == ModelKind::kLinear && static_cast<std::size_t>(spec_.coefficients.size()) != spec_.dim)
    throw DomainError("linear model: coefficient count differs from dimension");
  if (spec_.kind == ModelKind::kExternal) {
    for (std::size_t w = 0; w < workers_; ++w)
      processes_.push_back(std::make_unique<ExternalProcess>(spec_.command));
  }
}

Model::~Model() = default;
Model::Model(Model&&) noexcept = default;
Model& Model::operator=(Model&&) noexcept = default;

double Model::evaluate_builtin(const double* x) const {
  switch (spec_.kind) {
    case ModelKind::kLinear: {
      const Eigen::Map<const Vector> point(x, static_cast<Eigen::Index>(spec_.dim));
      return spec_.coefficients.dot(point);
    }
    case ModelKind::kIdentity:
      return x[0];
    case ModelKind::kSkewed: {
      const double x1 = x[0];
      double noise = 0.0;
      for (std::size_t i = 1; i < spec_.dim; ++i) noise += x[i] * x[i] - 1.0;
      return x1 + 0.25 * (x1 * x1 - 1.0) + 0.1 * x1 * x1 * x1 + 0.05 * noise;
    }
    case ModelKind::kExternal:
      break;
  }
  throw Error("evaluate_builtin called on an external model");
}

std::vector<double> Model::evaluate(const PointMatrix& points) {
  if (static_cast<std::size_t>(points.cols()) != spec_.dim)
    throw DomainError("point dimension " + std::to_string(points.cols()) + " differs from model dimension " +
                      std::to_string(spec_.dim));
  const auto n = static_cast<std::size_t>(points.rows());
  std::vector<double> values(n);
  if (n == 0) return values;

  if (spec_.kind == ModelKind::kExternal) {
    parallel_chunks(n, processes_.size(), [&](std::size_t chunk, std::size_t begin, std::size_t end) {
      const auto part = processes_[chunk]->evaluate(points, begin, end);
      std::copy(part.begin(), part.end(), values.begin() + static_cast<std::ptrdiff_t>(begin));
    });
  } else {
    parallel_for(n, workers_, [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i)
        values[i] = evaluate_builtin(points.row(static_cast<Eigen::Index>(i)).data());
    });
  }
  evaluations_ += n;
  return values;
}

std::vector<EvalRecord> evaluate_batch(Model& model, const PointMatrix& points) {
  const auto values = model.evaluate(points);
  std::vector<EvalRecord> records;
  records.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    records.push_back(EvalRecord{points.row(static_cast<Eigen::Index>(i)).transpose(), values[i], i});
  return records;
}

double oriented_response(const ModelSpec& model, double value) noexcept {
  return model.tail == Tail::kRight ? value : -value;
}

double oriented_threshold(const ModelSpec& model, double gamma) noexcept {
  return oriented_response(model, gamma);
}

std::optional<double> analytic_tail_prob(const ModelSpec& model, double gamma) {
  if (!model.oracle) return std::nullopt;
  const double oriented = oriented_threshold(model, gamma);
  if (oriented == -INFINITY) return 1.0;
  return std_normal_sf(oriented / model.oracle->coefficient_norm);
}

std::optional<double> analytic_threshold(const ModelSpec& model, double p) {
  if (!model.oracle) return std::nullopt;
  const double oriented = -std_normal_quantile(p) * model.oracle->coefficient_norm;
  return from_oriented(model, oriented);
}

}  // namespace rareis

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <numeric>
#include <utility>
#include <vector>

#include "qrisk/extended.hpp"

namespace qrisk {

/// Finite scenario space (Omega, P). Every scenario carries strictly positive
/// probability, so almost-sure statements coincide with pointwise ones.
class FiniteProbabilitySpace {
 public:
  explicit FiniteProbabilitySpace(std::vector<double> probs) : probs_(std::move(probs)) {
    if (probs_.empty()) throw Error(ErrorCode::DomainError, "probability space needs at least one scenario");
    double sum = 0.0;
    for (double p : probs_) {
      if (!(p > 0.0)) throw Error(ErrorCode::DomainError, "scenario probabilities must be strictly positive");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-12)
      throw Error(ErrorCode::DomainError, "scenario probabilities must sum to 1");
  }

  std::size_t size() const { return probs_.size(); }
  double prob(std::size_t w) const { return probs_[w]; }
  const std::vector<double>& probs() const { return probs_; }

  bool operator==(const FiniteProbabilitySpace& other) const { return probs_ == other.probs_; }

 private:
  std::vector<double> probs_;
};

using SpacePtr = std::shared_ptr<const FiniteProbabilitySpace>;

inline SpacePtr make_space(std::vector<double> probs) {
  return std::make_shared<const FiniteProbabilitySpace>(std::move(probs));
}

inline SpacePtr uniform_space(std::size_t scenarios) {
  return make_space(std::vector<double>(scenarios, 1.0 / static_cast<double>(scenarios)));
}

inline bool same_space(const SpacePtr& a, const SpacePtr& b) {
  return a == b || (a && b && *a == *b);
}

/// Element of L^p(R^n) on a finite space: a |Omega| x n matrix of finite
/// reals, scenario-major. n = 1 doubles as the scalar space L^p(R); dual
/// elements reuse the same type.
class RandomVector {
 public:
  RandomVector(SpacePtr space, std::size_t entities, std::vector<double> values)
      : space_(std::move(space)), entities_(entities), values_(std::move(values)) {
    if (!space_) throw Error(ErrorCode::ShapeMismatch, "random vector needs a probability space");
    if (entities_ == 0) throw Error(ErrorCode::ShapeMismatch, "random vector needs at least one entity");
    if (values_.size() != space_->size() * entities_)
      throw Error(ErrorCode::ShapeMismatch, "value matrix does not match |Omega| x n");
    for (double v : values_)
      if (!std::isfinite(v)) throw Error(ErrorCode::DomainError, "random vector entries must be finite");
  }

  static RandomVector constant(SpacePtr space, std::size_t entities, double value) {
    std::size_t total = space->size() * entities;
    return RandomVector(std::move(space), entities, std::vector<double>(total, value));
  }

  static RandomVector zero(SpacePtr space, std::size_t entities) {
    return constant(std::move(space), entities, 0.0);
  }

  /// Scalar random variable from per-scenario values.
  static RandomVector scalar(SpacePtr space, std::vector<double> values) {
    return RandomVector(std::move(space), 1, std::move(values));
  }

  std::size_t scenarios() const { return space_->size(); }
  std::size_t entities() const { return entities_; }
  const SpacePtr& space() const { return space_; }

  double operator()(std::size_t w, std::size_t i) const { return values_[w * entities_ + i]; }
  double scalar_at(std::size_t w) const { return values_[w * entities_]; }
  void set(std::size_t w, std::size_t i, double v) { values_[w * entities_ + i] = v; }

  const std::vector<double>& values() const { return values_; }

  bool is_zero(double tol = 0.0) const {
    return std::all_of(values_.begin(), values_.end(), [tol](double v) { return std::abs(v) <= tol; });
  }

  RandomVector scaled(double a) const {
    RandomVector out = *this;
    for (double& v : out.values_) v *= a;
    return out;
  }

 private:
  SpacePtr space_;
  std::size_t entities_;
  std::vector<double> values_;
};

/// Radon-Nikodym derivative dQ/dP: nonnegative scenario vector with unit
/// P-expectation.
class Density {
 public:
  Density(SpacePtr space, std::vector<double> values) : space_(std::move(space)), values_(std::move(values)) {
    if (!space_ || values_.size() != space_->size())
      throw Error(ErrorCode::ShapeMismatch, "density length must equal |Omega|");
    double mean = 0.0;
    for (std::size_t w = 0; w < values_.size(); ++w) {
      if (values_[w] < 0.0) throw Error(ErrorCode::ConeMembership, "density entries must be nonnegative");
      mean += space_->prob(w) * values_[w];
    }
    if (std::abs(mean - 1.0) > 1e-10)
      throw Error(ErrorCode::DomainError, "density must have unit expectation");
  }

  std::size_t scenarios() const { return space_->size(); }
  const SpacePtr& space() const { return space_; }
  double operator()(std::size_t w) const { return values_[w]; }
  const std::vector<double>& values() const { return values_; }

  bool has_zero_atom() const {
    return std::any_of(values_.begin(), values_.end(), [](double v) { return v <= kStrictPositive; });
  }

  RandomVector as_random_vector() const { return RandomVector(space_, 1, values_); }

 private:
  SpacePtr space_;
  std::vector<double> values_;
};

/// dP/dP, the density of P itself.
inline Density unit_density(SpacePtr space) {
  std::size_t n = space->size();
  return Density(std::move(space), std::vector<double>(n, 1.0));
}

/// The ordering data for C = L^p(R^n_+): dimension and the strictly positive
/// normalization element pi used to slice the dual cone. Always the scenario-wise
/// nonnegative orthant here.
struct ConeSpec {
  std::size_t dimension;
  RandomVector pi;

  ConeSpec(std::size_t dim, RandomVector pi_element) : dimension(dim), pi(std::move(pi_element)) {
    if (pi.entities() != dimension) throw Error(ErrorCode::ShapeMismatch, "pi dimension mismatch");
    for (double v : pi.values())
      if (!(v > kStrictPositive))
        throw Error(ErrorCode::ConeMembership, "pi must be strictly positive in every scenario and coordinate");
  }

  static ConeSpec orthant(SpacePtr space, std::size_t dim) {
    return ConeSpec(dim, RandomVector::constant(std::move(space), dim, 1.0));
  }
};

inline void require_same_shape(const RandomVector& a, const RandomVector& b, const char* what) {
  if (!same_space(a.space(), b.space()) || a.entities() != b.entities())
    throw Error(ErrorCode::ShapeMismatch, std::string("shape mismatch in ") + what);
}

/// <x*, x> = sum_w p_w sum_i x*_i(w) x_i(w).
inline double pairing(const RandomVector& xstar, const RandomVector& x) {
  require_same_shape(xstar, x, "pairing");
  double acc = 0.0;
  const std::size_t n = x.entities();
  for (std::size_t w = 0; w < x.scenarios(); ++w) {
    double inner = 0.0;
    for (std::size_t i = 0; i < n; ++i) inner += xstar(w, i) * x(w, i);
    acc += x.space()->prob(w) * inner;
  }
  return acc;
}

/// ||X||_p = (E[||X(w)||^p])^{1/p} with the Euclidean norm scenario-wise;
/// p = inf is the maximum over scenarios. Values p in (0,1) are accepted as
/// the pseudo-norm used by the power loss.
inline double norm_p(const RandomVector& x, double p) {
  if (!(p > 0.0)) throw Error(ErrorCode::DomainError, "norm_p needs p > 0 or p = inf");
  const std::size_t n = x.entities();
  double acc = 0.0;
  double worst = 0.0;
  for (std::size_t w = 0; w < x.scenarios(); ++w) {
    double sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) sq += x(w, i) * x(w, i);
    double nw = std::sqrt(sq);
    if (std::isinf(p)) {
      worst = std::max(worst, nw);
    } else {
      acc += x.space()->prob(w) * std::pow(nw, p);
    }
  }
  return std::isinf(p) ? worst : std::pow(acc, 1.0 / p);
}

struct DualDecomposition {
  double scale;
  RandomVector unit;
};

/// Splits x* in C^+ \ {0} as scale * unit with
/// <unit, pi> = 1.
inline DualDecomposition normalize_dual(const RandomVector& xstar, const ConeSpec& cone) {
  require_same_shape(xstar, cone.pi, "normalize_dual");
  for (double v : xstar.values())
    if (v < 0.0) throw Error(ErrorCode::ConeMembership, "x* must lie in the nonnegative dual cone");
  if (xstar.is_zero()) throw Error(ErrorCode::DomainError, "x* = 0 cannot be normalized");
  double scale = pairing(xstar, cone.pi);
  if (!(scale > 0.0)) throw Error(ErrorCode::Internal, "pairing with pi must be positive");
  return DualDecomposition{scale, xstar.scaled(1.0 / scale)};
}

/// Membership of y* in the support set of x* (the set T_{X*}): wherever some
/// coordinate of x* is nonzero, y* must be strictly positive.
inline bool support_compatible(const RandomVector& xstar, const RandomVector& ystar) {
  if (ystar.entities() != 1) throw Error(ErrorCode::ShapeMismatch, "y* must be scalar-valued");
  if (!same_space(xstar.space(), ystar.space()))
    throw Error(ErrorCode::ShapeMismatch, "support_compatible needs a common space");
  for (std::size_t w = 0; w < xstar.scenarios(); ++w) {
    bool x_nonzero = false;
    for (std::size_t i = 0; i < xstar.entities(); ++i)
      if (std::abs(xstar(w, i)) > kStrictPositive) x_nonzero = true;
    if (x_nonzero && !(ystar.scalar_at(w) > kStrictPositive)) return false;
  }
  return true;
}

inline double expectation(const RandomVector& x) {
  if (x.entities() != 1) throw Error(ErrorCode::ShapeMismatch, "expectation needs a scalar variable");
  double acc = 0.0;
  for (std::size_t w = 0; w < x.scenarios(); ++w) acc += x.space()->prob(w) * x.scalar_at(w);
  return acc;
}

}  // namespace qrisk

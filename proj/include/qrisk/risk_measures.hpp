#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>

#include "qrisk/extended.hpp"
#include "qrisk/prob_core.hpp"

namespace qrisk::risk {

enum class LossKind { Quadratic, Logarithmic, Power, IndexLogarithmic };

/// One of the four loss functions, with its analytic inverse and the right
/// inverse h of its derivative.
struct LossSpec {
  LossKind kind = LossKind::Quadratic;
  double gamma = 0.5;  // Power only, in (0,1)
  double c0 = 1.0;     // IndexLogarithmic only, > 0

  void validate() const {
    if (kind == LossKind::Power && !(gamma > 0.0 && gamma < 1.0))
      throw Error(ErrorCode::DomainError, "power loss needs gamma in (0,1)");
    if (kind == LossKind::IndexLogarithmic && !(c0 > 0.0))
      throw Error(ErrorCode::DomainError, "index loss needs c0 > 0");
  }

  double p() const { return kind == LossKind::Quadratic ? 2.0 : 1.0; }

  double value(double s) const {
    switch (kind) {
      case LossKind::Quadratic: return s >= -1.0 ? s * s / 2 + s : -0.5;
      case LossKind::Logarithmic: return s < 0.0 ? -std::log(-s) : kInf;
      case LossKind::Power: return s <= 0.0 ? -std::pow(-s, 1.0 - gamma) / (1.0 - gamma) : kInf;
      case LossKind::IndexLogarithmic: return s < 1.0 ? -std::log(1.0 - s) : kInf;
    }
    return kInf;
  }

  /// Inverse of the increasing branch; all four losses admit one in closed form.
  double inverse(double v) const {
    switch (kind) {
      case LossKind::Quadratic:
        if (v < -0.5 - 1e-12) throw Error(ErrorCode::DomainError, "quadratic loss never goes below -1/2");
        return -1.0 + std::sqrt(std::max(1.0 + 2.0 * v, 0.0));
      case LossKind::Logarithmic: return -std::exp(-v);
      case LossKind::Power:
        if (v > 0.0) throw Error(ErrorCode::DomainError, "power loss is nonpositive on its domain");
        return -std::pow((1.0 - gamma) * (-v), 1.0 / (1.0 - gamma));
      case LossKind::IndexLogarithmic: return 1.0 - std::exp(-v);
    }
    return 0.0;
  }

  /// Right inverse h of the derivative l'. For the quadratic loss the affine
  /// branch extends to all of R, which the beta-equation's m < -1 branch uses.
  double h(double t) const {
    switch (kind) {
      case LossKind::Quadratic: return t - 1.0;
      case LossKind::Logarithmic: return t > 0.0 ? -1.0 / t : -kInf;
      case LossKind::Power: return t > 0.0 ? -std::pow(t, -1.0 / gamma) : -kInf;
      case LossKind::IndexLogarithmic: return t > 0.0 ? 1.0 - 1.0 / t : -kInf;
    }
    return 0.0;
  }
};

enum class RiskForm { CertaintyEquivalent, EconomicIndex };

struct RiskMeasureSpec {
  RiskForm form = RiskForm::CertaintyEquivalent;
  LossSpec loss;

  void validate() const {
    loss.validate();
    if (form == RiskForm::EconomicIndex &&
        (loss.kind == LossKind::Logarithmic || loss.kind == LossKind::Power))
      throw Error(ErrorCode::DomainError,
                  "economic index needs a superlinear loss (index-logarithmic or quadratic)");
    if (form == RiskForm::CertaintyEquivalent && loss.kind == LossKind::IndexLogarithmic)
      throw Error(ErrorCode::DomainError, "the index-logarithmic loss pairs with the economic index");
  }

  /// The tabulated penalty formulas exist for the certainty equivalents of
  /// the first three losses and for the index-logarithmic economic index;
  /// the index with a quadratic loss is primal-evaluation only.
  bool has_closed_forms() const {
    if (form == RiskForm::CertaintyEquivalent) return loss.kind != LossKind::IndexLogarithmic;
    return loss.kind == LossKind::IndexLogarithmic;
  }
};

namespace detail {

inline double log_moment(const Density& d) {
  double acc = 0.0;
  for (std::size_t w = 0; w < d.scenarios(); ++w) {
    if (d(w) <= 0.0) return -kInf;
    acc += d.space()->prob(w) * std::log(d(w));
  }
  return acc;
}

inline double l2_norm(const Density& d) {
  double acc = 0.0;
  for (std::size_t w = 0; w < d.scenarios(); ++w) acc += d.space()->prob(w) * d(w) * d(w);
  return std::sqrt(acc);
}

/// (E[d^a])^{1/a} for a != 0. For a < 0 a zero atom pushes E[d^a] to +inf and
/// the result to 0, which matches the degenerate-density limit conventions.
inline double moment_norm(const Density& d, double a) {
  double acc = 0.0;
  for (std::size_t w = 0; w < d.scenarios(); ++w) {
    double v = d(w);
    if (v <= 0.0 && a < 0.0) return 0.0;
    acc += d.space()->prob(w) * std::pow(v, a);
  }
  return std::pow(acc, 1.0 / a);
}

inline double power_exponent(const LossSpec& loss) { return (loss.gamma - 1.0) / loss.gamma; }

}  // namespace detail

// ---------------------------------------------------------------------------
// Primal evaluation

/// rho(Y): certainty equivalent l^{-1}(E[l(-Y)]) or the economic index of
/// riskiness 1/sup{lambda > 0 : E[l(-lambda Y)] <= c0}.
inline double rho_eval(const RiskMeasureSpec& spec, const RandomVector& y) {
  spec.validate();
  if (y.entities() != 1) throw Error(ErrorCode::ShapeMismatch, "rho_eval needs a scalar variable");

  if (spec.form == RiskForm::CertaintyEquivalent) {
    double acc = 0.0;
    for (std::size_t w = 0; w < y.scenarios(); ++w) {
      double lv = spec.loss.value(-y.scalar_at(w));
      if (lv == kInf) return kInf;  // domain violation, e.g. Y <= 0 under the log loss
      acc += y.space()->prob(w) * lv;
    }
    return spec.loss.inverse(acc);
  }

  // Economic index: the feasible lambda set is an interval (0, lambda*];
  // bisect its boundary on a log scale.
  double c0 = spec.loss.c0;
  auto feasible = [&](double lam) {
    double acc = 0.0;
    for (std::size_t w = 0; w < y.scenarios(); ++w) {
      double lv = spec.loss.value(-lam * y.scalar_at(w));
      if (lv == kInf) return false;
      acc += y.space()->prob(w) * lv;
    }
    return acc <= c0;
  };
  double lo = std::log(1e-13), hi = std::log(1e13);
  if (feasible(std::exp(hi))) return 0.0;  // sup lambda = +inf
  if (!feasible(std::exp(lo))) return kInf;  // no feasible lambda at resolution
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    (feasible(std::exp(mid)) ? lo : hi) = mid;
    if (hi - lo < 1e-14) break;
  }
  return 1.0 / std::exp(lo);
}

// ---------------------------------------------------------------------------
// Tabulated closed forms (the published formulas, on their stated ranges)

struct ClosedFormValue {
  double value = 0.0;
  Verdict verdict = Verdict::Ok;
  bool degenerate_density = false;
};

/// Tabulated penalty alpha_rho(dQ/dP, m). Outside the stated m-range the
/// quadratic branch extends to -1; the others report OutOfRange.
inline ClosedFormValue penalty_closed_form(const RiskMeasureSpec& spec, const Density& q, double m) {
  spec.validate();
  ClosedFormValue out;
  out.degenerate_density = q.has_zero_atom();
  if (!spec.has_closed_forms()) {
    out.verdict = Verdict::OutOfRange;
    return out;
  }
  switch (spec.loss.kind) {
    case LossKind::Quadratic:
      out.value = m < -1.0 ? (1.0 + m) * detail::l2_norm(q) - 1.0 : -1.0;
      return out;
    case LossKind::Logarithmic:
      if (m < 0.0) {
        out.value = m * std::exp(detail::log_moment(q));
        return out;
      }
      break;
    case LossKind::Power:
      if (m < 0.0) {
        out.value = m / detail::moment_norm(q, detail::power_exponent(spec.loss));
        return out;
      }
      break;
    case LossKind::IndexLogarithmic:
      if (m < 0.0) {
        out.value = m * (1.0 - std::exp(detail::log_moment(q) - spec.loss.c0));
        return out;
      }
      break;
  }
  out.verdict = Verdict::OutOfRange;
  return out;
}

/// Tabulated left inverse alpha_rho^{-l}(dQ/dP, s) on its stated s-range.
inline ClosedFormValue penalty_left_inverse_closed_form(const RiskMeasureSpec& spec, const Density& q,
                                                        double s) {
  spec.validate();
  ClosedFormValue out;
  out.degenerate_density = q.has_zero_atom();
  if (!spec.has_closed_forms()) {
    out.verdict = Verdict::OutOfRange;
    return out;
  }
  switch (spec.loss.kind) {
    case LossKind::Quadratic:
      if (s < -1.0) {
        out.value = (s + 1.0) / detail::l2_norm(q) - 1.0;
        return out;
      }
      break;
    case LossKind::Logarithmic:
      if (s < 0.0) {
        out.value = s * std::exp(-detail::log_moment(q));
        return out;
      }
      break;
    case LossKind::Power:
      if (s < 0.0) {
        out.value = s * detail::moment_norm(q, detail::power_exponent(spec.loss));
        return out;
      }
      break;
    case LossKind::IndexLogarithmic:
      if (s < 0.0) {
        out.value = s / (1.0 - std::exp(detail::log_moment(q) - spec.loss.c0));
        return out;
      }
      break;
  }
  out.verdict = Verdict::OutOfRange;
  return out;
}

// ---------------------------------------------------------------------------
// Dual-representation surface: the defining sublevel-set supremum evaluated for the
// actual rho above, total in the level argument. These are the forms the
// duality engine composes; each pair is Galois-consistent and satisfies
// weak duality against rho_eval.

inline double penalty_dual(const RiskMeasureSpec& spec, const Density& q, double m) {
  spec.validate();
  if (!spec.has_closed_forms())
    throw Error(ErrorCode::DomainError, "no penalty closed form for this loss/form pairing");
  switch (spec.loss.kind) {
    case LossKind::Quadratic:
      return m >= -1.0 ? (1.0 + m) * detail::l2_norm(q) - 1.0 : -kInf;
    case LossKind::Logarithmic:
      return m < 0.0 ? m * std::exp(detail::log_moment(q)) : 0.0;
    case LossKind::Power:
      return m < 0.0 ? m * detail::moment_norm(q, detail::power_exponent(spec.loss)) : 0.0;
    case LossKind::IndexLogarithmic:
      if (m > 0.0) return m * (1.0 - std::exp(detail::log_moment(q) - spec.loss.c0));
      return m == 0.0 ? 0.0 : -kInf;
  }
  return -kInf;
}

inline double penalty_left_inverse_dual(const RiskMeasureSpec& spec, const Density& q, double s) {
  spec.validate();
  if (!spec.has_closed_forms())
    throw Error(ErrorCode::DomainError, "no penalty closed form for this loss/form pairing");
  // guard band around 0 absorbs optimizer round-off before the +inf branch
  constexpr double kZeroBand = 1e-12;
  switch (spec.loss.kind) {
    case LossKind::Quadratic:
      return std::max(s + 1.0, 0.0) / detail::l2_norm(q) - 1.0;
    case LossKind::Logarithmic: {
      if (s < 0.0) {
        double lm = detail::log_moment(q);
        return lm == -kInf ? -kInf : s * std::exp(-lm);
      }
      return s <= kZeroBand ? 0.0 : kInf;
    }
    case LossKind::Power: {
      if (s < 0.0) {
        double nrm = detail::moment_norm(q, detail::power_exponent(spec.loss));
        return nrm == 0.0 ? -kInf : s / nrm;
      }
      return s <= kZeroBand ? 0.0 : kInf;
    }
    case LossKind::IndexLogarithmic: {
      if (s > kZeroBand) return s / (1.0 - std::exp(detail::log_moment(q) - spec.loss.c0));
      return 0.0;
    }
  }
  return -kInf;
}

// ---------------------------------------------------------------------------
// The beta-equation E[l(h(beta dQ/dP))] = l(m) and the resulting penalty
// E_Q[h(beta dQ/dP)].

struct BetaSolution {
  double beta = 0.0;
  double alpha = 0.0;
  bool skipped = false;
  std::optional<std::string> diagnostic;
};

namespace detail {

inline double expectation_q(const Density& q, const std::function<double(double)>& g) {
  // E_Q[g(q)] = E_P[q g(q)]
  double acc = 0.0;
  for (std::size_t w = 0; w < q.scenarios(); ++w) acc += q.space()->prob(w) * q(w) * g(q(w));
  return acc;
}

/// Root of a strictly monotone residual on [lo, hi] (log or linear scale is
/// the caller's choice), bisected to 1e-10 relative width.
template <typename F>
double bisect_root(F&& residual, double lo, double hi) {
  double rlo = residual(lo), rhi = residual(hi);
  if (rlo == 0.0) return lo;
  if (rhi == 0.0) return hi;
  if ((rlo > 0.0) == (rhi > 0.0))
    throw Error(ErrorCode::Convergence, "beta residual has no sign change in bracket");
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    double rm = residual(mid);
    if ((rm > 0.0) == (rlo > 0.0)) {
      lo = mid;
      rlo = rm;
    } else {
      hi = mid;
    }
    if (hi - lo <= 1e-10 * (1.0 + std::abs(lo) + std::abs(hi))) break;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

/// Solves the beta-equation for the penalty at (Q, m) and returns both beta
/// and the penalty value it induces; reproduces the tabulated closed forms
/// wherever those are pinned (all Q for quadratic/logarithmic/index, Q = P
/// for the power loss).
inline BetaSolution solve_beta(const RiskMeasureSpec& spec, const Density& q, double m) {
  spec.validate();
  BetaSolution out;
  const LossSpec& loss = spec.loss;

  if (spec.form == RiskForm::EconomicIndex) {
    if (loss.kind != LossKind::IndexLogarithmic)
      throw Error(ErrorCode::DomainError, "beta machinery for the economic index needs the index-log loss");
    if (m >= 0.0) {
      out.diagnostic = "no solution: index penalty equation posed for m < 0";
      return out;
    }
    double lm = detail::log_moment(q);
    if (lm == -kInf) {
      out.diagnostic = "degenerate density";
      out.alpha = m;  // limit of m (1 - exp(-inf - c0))
      return out;
    }
    // E[l(h(m beta q))] = c0 with l(h(t)) = ln t: solve in u = ln(m beta).
    auto residual = [&](double u) { return u + lm - loss.c0; };
    double u = detail::bisect_root(residual, -80.0, 80.0);
    double mb = std::exp(u);
    out.beta = mb / m;
    out.alpha = detail::expectation_q(q, [&](double d) { return m * loss.h(mb * d); });
    return out;
  }

  switch (loss.kind) {
    case LossKind::Quadratic: {
      if (m >= -1.0) {
        out.skipped = true;
        out.alpha = -1.0;  // tabulated degenerate branch
        return out;
      }
      // Un-truncated branch: E[(beta q)^2]/2 - 1/2 = m^2/2 + m, signed root.
      double l2 = detail::l2_norm(q);
      auto residual = [&](double beta) {
        double acc = 0.0;
        for (std::size_t w = 0; w < q.scenarios(); ++w) {
          double t = beta * q(w);
          acc += q.space()->prob(w) * (t * t / 2 - 0.5);
        }
        return acc - (m * m / 2 + m);
      };
      double hi_mag = 2.0 * (std::abs(m) + 1.0) / std::max(l2, 1e-6) + 10.0;
      double beta = detail::bisect_root(residual, -hi_mag, 0.0);
      out.beta = beta;
      out.alpha = detail::expectation_q(q, [&](double d) { return loss.h(beta * d); });
      return out;
    }
    case LossKind::Logarithmic: {
      if (m >= 0.0) {
        out.diagnostic = "no solution: log-loss penalty equation posed for m < 0";
        return out;
      }
      double lm = detail::log_moment(q);
      if (lm == -kInf) {
        out.diagnostic = "degenerate density";
        out.alpha = 0.0;  // limit: beta -> inf, alpha -> 0
        return out;
      }
      // E[l(h(beta q))] = l(m) with l(h(t)) = ln t: u + lm = -ln(-m).
      auto residual = [&](double u) { return u + lm + std::log(-m); };
      double u = detail::bisect_root(residual, -80.0, 80.0);
      out.beta = std::exp(u);
      out.alpha = detail::expectation_q(q, [&](double d) { return loss.h(out.beta * d); });
      return out;
    }
    case LossKind::Power: {
      if (m >= 0.0) {
        out.diagnostic = "no solution: power-loss penalty equation posed for m < 0";
        return out;
      }
      double a = detail::power_exponent(loss);
      double ea = 0.0;
      for (std::size_t w = 0; w < q.scenarios(); ++w) {
        if (q(w) <= 0.0) {
          out.diagnostic = "degenerate density";
          out.alpha = 0.0;  // E[d^a] -> inf forces beta -> inf and alpha -> 0
          return out;
        }
        ea += q.space()->prob(w) * std::pow(q(w), a);
      }
      // E[l(h(beta q))] = l(m): a u + ln E[d^a] = (1-gamma) ln(-m).
      auto residual = [&](double u) { return a * u + std::log(ea) - (1.0 - loss.gamma) * std::log(-m); };
      double u = detail::bisect_root(residual, -80.0, 80.0);
      out.beta = std::exp(u);
      out.alpha = detail::expectation_q(q, [&](double d) { return loss.h(out.beta * d); });
      return out;
    }
    case LossKind::IndexLogarithmic:
      throw Error(ErrorCode::DomainError, "index-log loss pairs with the economic index form");
  }
  return out;
}

}  // namespace qrisk::risk

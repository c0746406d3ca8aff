#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <variant>
#include <vector>

#include "qrisk/extended.hpp"
#include "qrisk/lp_solver.hpp"
#include "qrisk/prob_core.hpp"

namespace qrisk::convex {

/// Axis-aligned box over the flattened (scenario-major) coordinates of a
/// RandomVector.
struct Box {
  std::vector<double> lo, hi;

  static Box cube(std::size_t dim, double l, double h) {
    return Box{std::vector<double>(dim, l), std::vector<double>(dim, h)};
  }
  std::size_t dim() const { return lo.size(); }
};

enum class Convexity { Convex, Quasiconvex, Unknown };
enum class Monotonicity { Decreasing, Increasing, None };

/// Extended-real function on random vectors, with caller-asserted shape tags.
/// The evaluator must return +inf outside its domain.
struct ScalarFunctionSpec {
  std::function<double(const RandomVector&)> evaluator;
  SpacePtr space;
  std::size_t entities = 1;
  Convexity convexity = Convexity::Unknown;
  Monotonicity monotonicity = Monotonicity::None;

  double operator()(const RandomVector& x) const { return evaluator(x); }
  RandomVector from_flat(const std::vector<double>& coords) const {
    return RandomVector(space, entities, coords);
  }
};

struct PenaltyValue {
  double value = -kInf;
  std::optional<RandomVector> attained_at;
  enum class Method { Bruteforce, ConvexDual, ClosedForm } method = Method::Bruteforce;
  bool hit_box_boundary = false;
  Verdict verdict = Verdict::Ok;
};

namespace detail {

inline int auto_points(std::size_t dim) {
  if (dim <= 2) return 41;
  if (dim == 3) return 21;
  return 15;
}

/// Visit every point of a uniform grid over `box`, flat coordinates handed to
/// the callback.
template <typename F>
void scan_grid(const Box& box, int pts, F&& visit) {
  const std::size_t d = box.dim();
  std::vector<int> idx(d, 0);
  std::vector<double> coords(d);
  while (true) {
    for (std::size_t k = 0; k < d; ++k) {
      double t = pts == 1 ? 0.5 : static_cast<double>(idx[k]) / (pts - 1);
      coords[k] = box.lo[k] + t * (box.hi[k] - box.lo[k]);
    }
    visit(coords);
    std::size_t k = 0;
    while (k < d && ++idx[k] == pts) idx[k++] = 0;
    if (k == d) break;
  }
}

inline Box shrink_around(const Box& outer, const Box& clamp, const std::vector<double>& center,
                         double halfwidth_frac) {
  Box b = outer;
  for (std::size_t k = 0; k < b.dim(); ++k) {
    double hw = halfwidth_frac * (outer.hi[k] - outer.lo[k]);
    b.lo[k] = std::max(clamp.lo[k], center[k] - hw);
    b.hi[k] = std::min(clamp.hi[k], center[k] + hw);
  }
  return b;
}

inline int auto_rounds(std::size_t dim) {
  if (dim <= 2) return 4;
  if (dim == 3) return 6;
  return 8;
}

/// Shrinking window refinement from an already-located incumbent. The window
/// recenters while the incumbent sits on its edge, so a maximizer can travel
/// along a curved feasibility boundary. `consider` must keep `best_pt` up to
/// date.
template <typename Consider>
void refine_search(const Box& outer, int pts, int rounds, std::vector<double>& best_pt,
                   Consider&& consider) {
  if (best_pt.empty()) return;
  Box window = outer;
  const double frac = std::min(6.0 / (pts - 1), 0.25);
  for (int r = 0; r < rounds; ++r) {
    Box w2 = shrink_around(window, outer, best_pt, frac);
    scan_grid(w2, pts, consider);
    for (int attempt = 0; attempt < 6; ++attempt) {
      bool edge = false;
      for (std::size_t k = 0; k < w2.dim(); ++k) {
        double span = w2.hi[k] - w2.lo[k];
        double tol = 1e-9 * (1.0 + span);
        bool at_lo = best_pt[k] <= w2.lo[k] + tol && w2.lo[k] > outer.lo[k] + tol;
        bool at_hi = best_pt[k] >= w2.hi[k] - tol && w2.hi[k] < outer.hi[k] - tol;
        if (at_lo || at_hi) edge = true;
      }
      if (!edge) break;
      w2 = shrink_around(window, outer, best_pt, frac);
      scan_grid(w2, pts, consider);
    }
    window = w2;
  }
}

/// Coarse scan plus shrinking window refinement.
template <typename Consider>
void two_stage_search(const Box& outer, int pts, int rounds, std::vector<double>& best_pt,
                      Consider&& consider) {
  scan_grid(outer, pts, consider);
  refine_search(outer, pts, rounds, best_pt, consider);
}

/// inf{m : P(m) true} for a monotone (false then true) predicate, with outward
/// bracket doubling capped at 2^60 before declaring +-inf.
template <typename Pred>
double monotone_predicate_inf(Pred&& pred) {
  const double cap = std::ldexp(1.0, 60);
  double lo = -1.0, hi = 1.0;
  while (!pred(hi)) {
    if (hi >= cap) return kInf;
    hi *= 2.0;
  }
  while (pred(lo)) {
    if (lo <= -cap) return -kInf;
    lo *= 2.0;
  }
  // invariant: pred(lo) false, pred(hi) true
  while (hi - lo > 1e-9) {
    double mid = 0.5 * (lo + hi);
    if (pred(mid))
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

/// Golden-section minimization of a unimodal-ish function on [a, b], seeded by
/// a coarse scan so plateaus and +-inf regions do not trap it.
template <typename F>
double scan_golden_min(F&& f, double a, double b, int scan_pts = 81, int iters = 80) {
  double best_x = a, best_v = kInf;
  for (int i = 0; i < scan_pts; ++i) {
    double x = a + (b - a) * i / (scan_pts - 1);
    double v = f(x);
    if (v < best_v) {
      best_v = v;
      best_x = x;
    }
  }
  double step = (b - a) / (scan_pts - 1);
  double lo = std::max(a, best_x - step), hi = std::min(b, best_x + step);
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
  double f1 = f(x1), f2 = f(x2);
  for (int i = 0; i < iters; ++i) {
    if (f1 <= f2) {
      hi = x2; x2 = x1; f2 = f1;
      x1 = hi - gr * (hi - lo);
      f1 = f(x1);
    } else {
      lo = x1; x1 = x2; f1 = f2;
      x2 = lo + gr * (hi - lo);
      f2 = f(x2);
    }
  }
  return std::min({best_v, f1, f2});
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Support functions

struct VertexSet {
  std::vector<RandomVector> vertices;
};
struct LpRegion {
  lp::LinearProgram program;  // feasible region over flattened coordinates; objective ignored
};
using SetOracle = std::variant<VertexSet, Box, LpRegion>;

/// sup_{x in A} <x*, x> for an LP-representable A. +inf in unbounded
/// directions, -inf for the empty set.
inline double support_function(const SetOracle& set, const RandomVector& xstar) {
  const auto& probs = xstar.space()->probs();
  const std::size_t n = xstar.entities();
  auto weight = [&](std::size_t flat) { return probs[flat / n]; };

  if (const auto* vs = std::get_if<VertexSet>(&set)) {
    double best = -kInf;
    for (const auto& v : vs->vertices) best = std::max(best, pairing(xstar, v));
    return best;
  }
  if (const auto* box = std::get_if<Box>(&set)) {
    if (box->dim() != xstar.values().size())
      throw Error(ErrorCode::ShapeMismatch, "support_function box dimension mismatch");
    double acc = 0.0;
    for (std::size_t c = 0; c < box->dim(); ++c) {
      double a = weight(c) * xstar.values()[c];
      if (a > kStrictPositive) {
        if (!std::isfinite(box->hi[c])) return kInf;
        acc += a * box->hi[c];
      } else if (a < -kStrictPositive) {
        if (!std::isfinite(box->lo[c])) return kInf;
        acc += a * box->lo[c];
      }
    }
    return acc;
  }
  const auto& region = std::get<LpRegion>(set);
  lp::LinearProgram prog = region.program;
  if (prog.num_vars != xstar.values().size())
    throw Error(ErrorCode::ShapeMismatch, "support_function LP dimension mismatch");
  for (std::size_t c = 0; c < prog.num_vars; ++c) prog.objective[c] = weight(c) * xstar.values()[c];
  auto sol = lp::solve(prog);
  switch (sol.status) {
    case lp::LpStatus::Optimal: return sol.objective;
    case lp::LpStatus::Unbounded: return kInf;
    case lp::LpStatus::Infeasible: return -kInf;
  }
  return -kInf;
}

/// Membership-only set descriptions cannot be maximized over.
inline double support_function(const std::function<bool(const RandomVector&)>&, const RandomVector&) {
  throw Error(ErrorCode::UnsupportedSet, "membership-only set description is not LP-representable");
}

// ---------------------------------------------------------------------------
// Conjugates and penalties

struct ConjugateValue {
  double value = -kInf;
  bool exact = false;
};

/// Grid lower bound on f*(x*) = sup_x (<x*,x> - f(x)) over a finite box, one
/// refinement pass around the incumbent. Exactness flag per first-order check
/// when f is declared convex and the maximizer is interior.
inline ConjugateValue conjugate_numeric(const ScalarFunctionSpec& f, const RandomVector& xstar,
                                        const Box& search_box, int points_per_axis = 0) {
  int pts = points_per_axis > 0 ? points_per_axis : detail::auto_points(search_box.dim());
  double best = -kInf;
  std::vector<double> best_pt;
  auto objective = [&](const std::vector<double>& coords) {
    RandomVector x = f.from_flat(coords);
    double fv = f(x);
    if (fv == kInf) return -kInf;
    return pairing(xstar, x) - fv;
  };
  detail::two_stage_search(search_box, pts, detail::auto_rounds(search_box.dim()), best_pt,
                           [&](const std::vector<double>& coords) {
                             double v = objective(coords);
                             if (v > best) {
                               best = v;
                               best_pt = coords;
                             }
                           });
  if (best_pt.empty()) return ConjugateValue{-kInf, false};

  ConjugateValue out{best, false};
  if (f.convexity == Convexity::Convex && std::isfinite(best)) {
    bool interior = true;
    double scale = 0.0;
    for (std::size_t k = 0; k < search_box.dim(); ++k) {
      double w = search_box.hi[k] - search_box.lo[k];
      scale = std::max(scale, w);
      if (best_pt[k] < search_box.lo[k] + 0.02 * w || best_pt[k] > search_box.hi[k] - 0.02 * w)
        interior = false;
    }
    if (interior) {
      double h = 1e-5 * scale;
      double grad_norm = 0.0;
      for (std::size_t k = 0; k < search_box.dim(); ++k) {
        auto shifted = best_pt;
        shifted[k] += h;
        double up = objective(shifted);
        shifted[k] -= 2 * h;
        double dn = objective(shifted);
        grad_norm = std::max(grad_norm, std::abs(up - dn) / (2 * h));
      }
      out.exact = grad_norm < 1e-3 * (1.0 + norm_p(xstar, 2.0));
    }
  }
  return out;
}

/// Def.-2.8 oracle: maximize <x*,-x> over grid points of {f <= m}.
inline PenaltyValue penalty_bruteforce(const ScalarFunctionSpec& f, const RandomVector& xstar, double m,
                                       const Box& search_box, int points_per_axis = 0, int refine_rounds = 0) {
  PenaltyValue out;
  out.method = PenaltyValue::Method::Bruteforce;
  if (m == kInf) {
    // supremum over the whole space
    out.value = xstar.is_zero() ? 0.0 : kInf;
    return out;
  }
  if (m == -kInf) {
    out.value = -kInf;  // supremum over the empty set
    return out;
  }

  int pts = points_per_axis > 0 ? points_per_axis : detail::auto_points(search_box.dim());
  int rounds = refine_rounds > 0 ? refine_rounds : detail::auto_rounds(search_box.dim());
  const RandomVector neg = xstar.scaled(-1.0);
  double best = -kInf;
  std::vector<double> best_pt;
  auto consider = [&](const std::vector<double>& coords) {
    RandomVector x = f.from_flat(coords);
    if (f(x) > m + 1e-12) return;
    double v = pairing(neg, x);
    if (v > best) {
      best = v;
      best_pt = coords;
    }
  };
  detail::two_stage_search(search_box, pts, rounds, best_pt, consider);
  if (best_pt.empty()) {
    out.value = -kInf;  // no feasible grid point
    return out;
  }
  out.value = best;
  out.attained_at = f.from_flat(best_pt);
  for (std::size_t k = 0; k < search_box.dim(); ++k) {
    double w = search_box.hi[k] - search_box.lo[k];
    if (best_pt[k] < search_box.lo[k] + 1e-9 * w || best_pt[k] > search_box.hi[k] - 1e-9 * w)
      out.hit_box_boundary = true;
  }
  return out;
}

/// Convex fast path: alpha_f(x*, m) = inf_{lambda>0} (lambda m + lambda f*(-x*/lambda)).
/// Requires a strict Slater point in {f < m}; verified by sampling.
inline PenaltyValue penalty_convex(const ScalarFunctionSpec& f, const RandomVector& xstar, double m,
                                   const Box& search_box) {
  if (f.convexity != Convexity::Convex)
    throw Error(ErrorCode::Precondition, "penalty_convex needs a convex-tagged function");
  bool slater = false;
  bool any_feasible = false;
  detail::scan_grid(search_box, detail::auto_points(search_box.dim()), [&](const std::vector<double>& c) {
    double v = f(f.from_flat(c));
    if (v < m - 1e-9) slater = true;
    if (v <= m + 1e-9) any_feasible = true;
  });
  if (!slater) {
    if (!any_feasible) {
      // empty sublevel set: the Lagrangian dual runs to -inf with lambda
      PenaltyValue out;
      out.value = -kInf;
      out.method = PenaltyValue::Method::ConvexDual;
      return out;
    }
    throw Error(ErrorCode::Precondition, "penalty_convex: no strict sublevel point found (Slater check)");
  }

  auto dual_value = [&](double loglam) {
    double lam = std::exp(loglam);
    auto conj = conjugate_numeric(f, xstar.scaled(-1.0 / lam), search_box);
    return lam * m + lam * conj.value;
  };
  double v = detail::scan_golden_min(dual_value, std::log(1e-8), std::log(1e8), 97, 60);
  PenaltyValue out;
  out.value = v;
  out.method = PenaltyValue::Method::ConvexDual;
  return out;
}

// ---------------------------------------------------------------------------
// Left inverses (pseudo-inverse in the level argument)

struct BisectPolicy {
  double probe_span = 8.0;  // window for monotonicity spot checks
};

/// inf{m : alpha(m) >= s} for nondecreasing alpha, bracket [-1,1] doubled
/// outward to 2^60 before declaring +-inf. Ties on a flat segment resolve to
/// the left endpoint. Spot-checks monotonicity and throws on violation.
inline double left_inverse_bisect(const std::function<double(double)>& alpha, double s,
                                  const BisectPolicy& policy = {}) {
  double a = -policy.probe_span / 2, b = policy.probe_span / 2;
  double va = alpha(a), vb = alpha(b);
  if (va > vb + 1e-7)
    throw Error(ErrorCode::ContractViolation, "left_inverse_bisect: alpha is not nondecreasing");
  if (s == -kInf) return -kInf;
  return detail::monotone_predicate_inf([&](double m) { return alpha(m) >= s; });
}

/// Convex fast path (the conjugate form of the left inverse):
/// alpha_f^{-l}(x*, s) = sup_{gamma>=0} (gamma s - f*(-gamma x*)), with the
/// gamma = 0 endpoint equal to inf f.
inline double left_inverse_convex(const ScalarFunctionSpec& f, const RandomVector& xstar, double s,
                                  const Box& search_box) {
  if (f.convexity != Convexity::Convex)
    throw Error(ErrorCode::Precondition, "left_inverse_convex needs a convex-tagged function");
  double at_zero = -conjugate_numeric(f, RandomVector::zero(f.space, f.entities), search_box).value;
  if (s == -kInf) return at_zero;
  auto value = [&](double loggam) {
    double gam = std::exp(loggam);
    auto conj = conjugate_numeric(f, xstar.scaled(-gam), search_box);
    return -(gam * s - conj.value);  // minimize the negative
  };
  double best = -detail::scan_golden_min(value, std::log(1e-8), std::log(1e8), 97, 60);
  return std::max(at_zero, best);
}

// ---------------------------------------------------------------------------
// Monotone inf/sup swap

struct SwapDiagnostic {
  bool ok = false;
  double lhs = 0.0;
  double rhs = 0.0;
};

/// Checks inf{m : forall a, r(a) <= alpha_a(m)} = sup_a alpha_a^{-l}(r(a)) on
/// a finite family of nondecreasing maps.
inline SwapDiagnostic monotone_swap_check(const std::vector<std::function<double(double)>>& alphas,
                                          const std::vector<double>& r) {
  if (alphas.size() != r.size() || alphas.empty())
    throw Error(ErrorCode::ShapeMismatch, "monotone_swap_check needs matching nonempty families");
  double lhs = detail::monotone_predicate_inf([&](double m) {
    for (std::size_t a = 0; a < alphas.size(); ++a)
      if (!(alphas[a](m) >= r[a])) return false;
    return true;
  });
  double rhs = -kInf;
  for (std::size_t a = 0; a < alphas.size(); ++a) rhs = std::max(rhs, left_inverse_bisect(alphas[a], r[a]));
  SwapDiagnostic d;
  d.lhs = lhs;
  d.rhs = rhs;
  d.ok = (lhs == rhs) || std::abs(lhs - rhs) <= 1e-7;
  return d;
}

}  // namespace qrisk::convex

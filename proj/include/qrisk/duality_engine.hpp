#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "qrisk/aggregation.hpp"
#include "qrisk/convex_kit.hpp"
#include "qrisk/extended.hpp"
#include "qrisk/prob_core.hpp"
#include "qrisk/risk_measures.hpp"

namespace qrisk::dual {

/// One dual candidate: bank weights w, bank measures dS_i/dP, society's
/// measure dQ/dP, and the scale lambda (usually absorbed into w).
struct DualVariables {
  std::vector<double> w;
  std::vector<Density> s_densities;
  Density q_density;
  double lambda = 1.0;
};

struct OptimizerSettings {
  int starts = 20;
  int iterations = 500;
  std::uint64_t seed = 0;
  double gap_abs = 1e-3;
  double gap_rel = 1e-3;
};

struct DualReport {
  double primal = 0.0;
  double dual_bound = -kInf;
  double gap = kInf;
  std::optional<DualVariables> best;
  int starts_used = 0;
  long iterations = 0;
  long rejected_candidates = 0;  // NaN or infeasible evaluations
  bool gap_ok = false;
  bool weak_duality_ok = true;
};

struct MinimaxProbe {
  double lhs = -kInf;  // sup_x inf_y*
  double rhs = -kInf;  // inf_y* sup_x
  double difference = 0.0;
  bool minimax_ok = false;
  std::optional<RandomVector> lhs_witness;
  std::optional<Density> rhs_witness;
};

struct ProbeReport {
  int trials = 0;
  int quasiconvexity_violations = 0;
  int monotonicity_violations = 0;
  int scalarization_violations = 0;
  int finite_samples = 0;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Projection onto the weighted simplex {u >= 0, sum_w p_w u_w = 1} done in
/// mass coordinates mu_w = p_w u_w (standard simplex there).
inline void project_density(const std::vector<double>& probs, std::vector<double>& u) {
  const std::size_t n = u.size();
  std::vector<double> mu(n);
  for (std::size_t i = 0; i < n; ++i) mu[i] = probs[i] * u[i];
  std::vector<double> sorted = mu;
  std::sort(sorted.begin(), sorted.end(), std::greater<double>());
  double cum = 0.0, tau = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    cum += sorted[k];
    double t = (cum - 1.0) / static_cast<double>(k + 1);
    if (sorted[k] - t > 0.0) tau = t;
  }
  for (std::size_t i = 0; i < n; ++i) {
    mu[i] = std::max(mu[i] - tau, 0.0);
    u[i] = mu[i] / probs[i];
  }
  // renormalize residual rounding
  double mass = 0.0;
  for (std::size_t i = 0; i < n; ++i) mass += probs[i] * u[i];
  if (mass > 0) {
    for (double& v : u) v /= mass;
  } else {
    for (std::size_t i = 0; i < n; ++i) u[i] = 1.0;
  }
}

inline Density make_density_clamped(const SpacePtr& sp, std::vector<double> u) {
  project_density(sp->probs(), u);
  return Density(sp, std::move(u));
}

/// Projected-gradient ascent with finite-difference gradients and Armijo
/// backtracking. `project` must restore feasibility in place; `evaluate`
/// returns -inf for rejected candidates.
template <typename Eval, typename Project>
double pga_maximize(std::vector<double>& u, Eval&& evaluate, Project&& project, int iterations,
                    long& iter_count) {
  project(u);
  double fu = evaluate(u);
  const double h = 1e-6;
  for (int it = 0; it < iterations; ++it) {
    ++iter_count;
    if (fu == -kInf) break;  // nothing to climb from
    std::vector<double> grad(u.size(), 0.0);
    double gnorm2 = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
      std::vector<double> up = u, dn = u;
      up[k] += h;
      dn[k] -= h;
      project(up);
      project(dn);
      double fup = evaluate(up), fdn = evaluate(dn);
      if (fup == -kInf && fdn == -kInf) continue;
      if (fup == -kInf) fup = fu;
      if (fdn == -kInf) fdn = fu;
      grad[k] = (fup - fdn) / (2 * h);
      gnorm2 += grad[k] * grad[k];
    }
    if (gnorm2 < 1e-18) break;
    double step = 0.5;
    bool moved = false;
    for (int bt = 0; bt < 30; ++bt) {
      std::vector<double> cand = u;
      for (std::size_t k = 0; k < u.size(); ++k) cand[k] += step * grad[k];
      project(cand);
      double fc = evaluate(cand);
      if (fc > fu + 1e-4 * step * gnorm2) {
        u = std::move(cand);
        fu = fc;
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;
  }
  return fu;
}


}  // namespace detail

// ---------------------------------------------------------------------------
// Primal side

/// R(X) = rho(Lambda(X)).
inline double primal_risk(const risk::RiskMeasureSpec& rho, const agg::AggregatorSpec& spec,
                          const RandomVector& x) {
  return risk::rho_eval(rho, agg::aggregate(spec, x));
}

// ---------------------------------------------------------------------------
// Scalarization penalty alpha_{-h_{Y*}}(X*, level)

/// inf_{lambda>0} (lambda level + sum_w p_w [lambda y*_w Phi~(x*_w/(lambda y*_w))])
/// restricted to {y* > 0}; +inf off the support-compatibility set. The
/// level = +-inf conventions require x* != 0; x* = 0 there is undefined.
inline ExtValue scalarization_penalty(const agg::AggregatorSpec& spec, const RandomVector& ystar,
                                      const RandomVector& xstar, double level) {
  if (!support_compatible(xstar, ystar)) return {kInf, Verdict::Ok};
  const bool xstar_zero = xstar.is_zero(kStrictPositive);
  if (level == kInf || level == -kInf) {
    if (xstar_zero) return {0.0, Verdict::Undefined};
    return {level, Verdict::Ok};  // sup over the whole space / the empty set
  }

  const auto& probs = xstar.space()->probs();
  const std::size_t n = xstar.entities();
  std::vector<std::size_t> live;  // scenarios with y* > 0
  double ymass = 0.0;
  for (std::size_t w = 0; w < xstar.scenarios(); ++w) {
    if (ystar.scalar_at(w) > kStrictPositive) {
      live.push_back(w);
      ymass += probs[w] * ystar.scalar_at(w);
    }
  }
  if (xstar_zero) {
    // sup of the zero functional: 0 on a nonempty sublevel, -inf on an empty
    // one; the sublevel is nonempty iff level >= inf(-h) = -Phi(0) E[y*]
    if (spec.kind == agg::AggKind::Sum) return {0.0, Verdict::Ok};
    double phi0 = agg::conjugate_phi(spec, std::vector<double>(n, 0.0));
    bool nonempty = phi0 == kInf || level + phi0 * ymass >= -1e-12;
    return {nonempty ? 0.0 : -kInf, Verdict::Ok};
  }
  if (live.empty()) return {level >= 0.0 ? 0.0 : -kInf, Verdict::Ok};

  if (spec.kind == agg::AggKind::Sum) {
    // finite only when x* = lambda y* 1 scenario-wise, for a positive lambda
    std::optional<double> lambda;
    for (std::size_t w : live) {
      for (std::size_t i = 0; i < n; ++i) {
        double ratio = xstar(w, i) / ystar.scalar_at(w);
        if (!lambda)
          lambda = ratio;
        else if (std::abs(ratio - *lambda) > 1e-9 * (1.0 + std::abs(*lambda)))
          return {kInf, Verdict::Ok};
      }
    }
    if (std::abs(*lambda) <= kStrictPositive) return {level >= 0.0 ? 0.0 : -kInf, Verdict::Ok};
    if (*lambda < 0.0) return {kInf, Verdict::Ok};
    return {*lambda * level, Verdict::Ok};
  }

  double phi0 = agg::conjugate_phi(spec, std::vector<double>(n, 0.0));
  if (level + phi0 * ymass < -1e-12) return {-kInf, Verdict::Ok};  // objective diverges as lambda grows

  std::vector<double> row(n);
  auto value_at = [&](double loglam) {
    double lam = std::exp(loglam);
    double acc = lam * level;
    for (std::size_t w : live) {
      for (std::size_t i = 0; i < n; ++i) row[i] = xstar(w, i);
      double term = agg::phi_perspective(spec, row, lam * ystar.scalar_at(w));
      if (term == kInf) return kInf;
      acc += probs[w] * term;
    }
    return acc;
  };
  double best = convex::detail::scan_golden_min(value_at, std::log(1e-9), std::log(1e9), 121, 80);
  return {best, Verdict::Ok};
}

// ---------------------------------------------------------------------------
// Composition penalty (the nested inf over scalarizing densities, specialized and optimized)

namespace detail {

/// Extracts the Sum-structure decomposition x* = Y* 1: the common scalar
/// column, or nothing when the columns differ.
inline std::optional<std::vector<double>> common_column(const RandomVector& xstar) {
  std::vector<double> col(xstar.scenarios());
  for (std::size_t w = 0; w < xstar.scenarios(); ++w) {
    col[w] = xstar(w, 0);
    for (std::size_t i = 1; i < xstar.entities(); ++i)
      if (std::abs(xstar(w, i) - col[w]) > 1e-9 * (1.0 + std::abs(col[w]))) return std::nullopt;
  }
  return col;
}

/// Rough feasibility probe for {R <= m}: walks the positive diagonal ray,
/// where a decreasing R is smallest.
inline bool sublevel_nonempty(const risk::RiskMeasureSpec& rho, const agg::AggregatorSpec& spec,
                              double m) {
  auto sp = uniform_space(1);
  for (double c : {0.0, 1.0, 10.0, 1e3, 1e6}) {
    RandomVector x = RandomVector::constant(sp, spec.dimension(), c);
    if (primal_risk(rho, spec, x) <= m) return true;
  }
  return false;
}

template <typename F>
double multistart_minimize_density(const SpacePtr& sp, F&& objective, const OptimizerSettings& opt,
                                   long& iters) {
  const auto& probs = sp->probs();
  std::uint64_t seedstate = opt.seed ^ 0x51a5f00dULL;
  double best = kInf;
  auto project = [&](std::vector<double>& u) { detail::project_density(probs, u); };
  auto eval_neg = [&](const std::vector<double>& u) {
    double v = objective(u);
    return v == kInf ? -kInf : -v;
  };
  for (int s = 0; s < opt.starts; ++s) {
    std::mt19937_64 rng(detail::splitmix64(seedstate));
    std::vector<double> u(probs.size(), 1.0);
    if (s > 0) {
      std::normal_distribution<double> g(0.0, 1.0);
      for (double& v : u) v = std::exp(g(rng));
    }
    double got = detail::pga_maximize(u, eval_neg, project, opt.iterations, iters);
    if (got != -kInf) best = std::min(best, -got);
    // pairwise mass-transfer refinement
    if (got != -kInf && probs.size() >= 2) {
      for (int sweep = 0; sweep < 2; ++sweep) {
        for (std::size_t a = 0; a + 1 < probs.size(); ++a) {
          std::size_t b = a + 1;
          auto try_shift = [&](double t) {
            std::vector<double> cand = u;
            cand[a] += t / probs[a];
            cand[b] -= t / probs[b];
            if (cand[a] < 0 || cand[b] < 0) return kInf;
            double v = objective(cand);
            return v;
          };
          double span = std::min(probs[a] * u[a], probs[b] * u[b]) + 0.2;
          double t = convex::detail::scan_golden_min(try_shift, -span, span, 41, 40);
          if (t < best) best = t;
        }
      }
      double cur = objective(u);
      best = std::min(best, cur);
    }
  }
  return best;
}

}  // namespace detail

/// alpha_{rho o Lambda}(x*, m): infimum over normalized densities of the
/// perspective divergence plus the scaled risk penalty. Eisenberg-Noe
/// aggregators take the leading cap at zero.
inline double composition_penalty(const risk::RiskMeasureSpec& rho, const agg::AggregatorSpec& spec,
                                  const RandomVector& xstar, double m,
                                  const OptimizerSettings& opt = {}) {
  for (double v : xstar.values())
    if (v < 0.0) throw Error(ErrorCode::ConeMembership, "x* must lie in the nonnegative dual cone");
  const SpacePtr& sp = xstar.space();

  if (xstar.is_zero(kStrictPositive))
    return detail::sublevel_nonempty(rho, spec, m) ? 0.0 : -kInf;

  if (spec.kind == agg::AggKind::Sum) {
    auto col = detail::common_column(xstar);
    if (!col) return kInf;  // no Y* matches the Sum structure
    double lambda = 0.0;
    for (std::size_t w = 0; w < sp->size(); ++w) lambda += sp->prob(w) * (*col)[w];
    if (!(lambda > 0.0)) return detail::sublevel_nonempty(rho, spec, m) ? 0.0 : -kInf;
    std::vector<double> d = *col;
    for (double& v : d) v /= lambda;
    return lambda * risk::penalty_dual(rho, Density(sp, d), m);
  }

  // Factor the scale out of x* so positive homogeneity holds exactly: the
  // optimizer sees one representative per ray.
  double scale = 0.0;
  for (double v : xstar.values()) scale = std::max(scale, std::abs(v));
  RandomVector unit = xstar.scaled(1.0 / scale);

  long iters = 0;
  auto objective = [&](const std::vector<double>& u) {
    Density d = detail::make_density_clamped(sp, u);
    double level = risk::penalty_dual(rho, d, m);
    ExtValue v = scalarization_penalty(spec, d.as_random_vector(), unit, level);
    if (v.verdict != Verdict::Ok) return kInf;
    return v.value == -kInf ? -1e300 : v.value;  // keep the descent finite
  };
  double value = detail::multistart_minimize_density(sp, objective, opt, iters);
  if (value <= -1e299) return -kInf;
  if (spec.kind == agg::AggKind::EisenbergNoe) value = std::min(0.0, value);
  return scale * value;
}

/// alpha_{rho o Lambda}^{-l}(x*, s) via the two-branch supremum; the branch
/// over Phi(0) exists only for aggregators bounded from above.
inline double composition_left_inverse(const risk::RiskMeasureSpec& rho, const agg::AggregatorSpec& spec,
                                       const RandomVector& xstar, double s,
                                       const OptimizerSettings& opt = {}) {
  for (double v : xstar.values())
    if (v < 0.0) throw Error(ErrorCode::ConeMembership, "x* must lie in the nonnegative dual cone");
  const SpacePtr& sp = xstar.space();

  if (spec.kind == agg::AggKind::EisenbergNoe && s > 1e-12) return kInf;  // the penalty is capped at 0

  if (spec.kind == agg::AggKind::Sum) {
    auto col = detail::common_column(xstar);
    if (!col) {
      // alpha(x*, .) jumps from -inf to +inf; the crossing point is the
      // limit-of-left-inverse value at -inf
      return risk::penalty_left_inverse_dual(rho, unit_density(sp), -kInf);
    }
    double lambda = 0.0;
    for (std::size_t w = 0; w < sp->size(); ++w) lambda += sp->prob(w) * (*col)[w];
    if (!(lambda > 0.0)) return risk::penalty_left_inverse_dual(rho, unit_density(sp), -kInf);
    std::vector<double> d = *col;
    for (double& v : d) v /= lambda;
    return risk::penalty_left_inverse_dual(rho, Density(sp, d), s / lambda);
  }

  const std::size_t n = xstar.entities();
  double phi0 = agg::conjugate_phi(spec, std::vector<double>(n, 0.0));
  long iters = 0;

  // branch over Phi(0)
  double branch_a = -kInf;
  if (phi0 < kInf) {
    auto obj_a = [&](const std::vector<double>& u) {
      double v = risk::penalty_left_inverse_dual(rho, detail::make_density_clamped(sp, u), -phi0);
      return v == kInf ? kInf : -v;
    };
    double neg = detail::multistart_minimize_density(sp, obj_a, opt, iters);
    branch_a = neg == kInf ? -kInf : -neg;
  }

  // branch over T_{X*}: sup over (d, lambda) of the perspective-adjusted level
  std::vector<double> row(n);
  auto obj_b = [&](const std::vector<double>& u) {
    Density d = detail::make_density_clamped(sp, u);
    auto level_at = [&](double loglam) {
      double lam = std::exp(loglam);
      double acc = s / lam;
      for (std::size_t w = 0; w < sp->size(); ++w) {
        double dq = d(w);
        if (dq <= kStrictPositive) {
          for (std::size_t i = 0; i < n; ++i)
            if (std::abs(xstar(w, i)) > kStrictPositive) return kInf;  // leaves T_{X*}
          continue;
        }
        for (std::size_t i = 0; i < n; ++i) row[i] = xstar(w, i) / (lam * dq);
        double phi = agg::conjugate_phi(spec, row);
        if (phi == kInf) return kInf;
        acc -= sp->prob(w) * dq * phi;
      }
      return -acc;  // minimize the negative level
    };
    double neg_level = convex::detail::scan_golden_min(level_at, std::log(1e-9), std::log(1e9), 121, 80);
    double level = neg_level == kInf ? -kInf : -neg_level;
    // lambda -> inf limit joins the Phi(0) branch
    if (phi0 < kInf) level = std::max(level, -phi0);
    double v = risk::penalty_left_inverse_dual(rho, d, level);
    return v == kInf ? kInf : -v;
  };
  double neg_b = detail::multistart_minimize_density(sp, obj_b, opt, iters);
  double branch_b = neg_b == kInf ? -kInf : -neg_b;
  return std::max(branch_a, branch_b);
}

// ---------------------------------------------------------------------------
// The full dual representation

/// Objective of one dual candidate in the representation
/// R(X) = sup alpha_rho^{-l}(dQ/dP, -E_Q[Phi(w dS/dQ)] - w'E_S[X]).
inline double dual_objective(const risk::RiskMeasureSpec& rho, const agg::AggregatorSpec& spec,
                             const RandomVector& x, const DualVariables& dv) {
  const SpacePtr& sp = x.space();
  const std::size_t n = spec.dimension();
  if (dv.w.size() != n || dv.s_densities.size() != n)
    throw Error(ErrorCode::ShapeMismatch, "dual variables dimension mismatch");
  double divergence = 0.0;
  std::vector<double> z(n);
  for (std::size_t w = 0; w < sp->size(); ++w) {
    double dq = dv.q_density(w);
    if (dq <= kStrictPositive) {
      for (std::size_t i = 0; i < n; ++i)
        if (dv.w[i] * dv.s_densities[i](w) > kStrictPositive) return -kInf;  // w_i S_i not << Q
      continue;
    }
    for (std::size_t i = 0; i < n; ++i) z[i] = dv.w[i] * dv.s_densities[i](w) / dq;
    double phi = agg::conjugate_phi(spec, z);
    if (std::isnan(phi)) return -kInf;
    if (phi == kInf) {
      divergence = kInf;
      break;
    }
    divergence += sp->prob(w) * dq * phi;
  }
  double linear = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double es = 0.0;
    for (std::size_t w = 0; w < sp->size(); ++w) es += sp->prob(w) * dv.s_densities[i](w) * x(w, i);
    linear += dv.w[i] * es;
  }
  double arg = divergence == kInf ? -kInf : -divergence - linear;
  return risk::penalty_left_inverse_dual(rho, dv.q_density, arg);
}

namespace detail {

struct CandidateLayout {
  // [q_free | theta | s_1 .. s_n | w] for general aggregators; [q] for Sum
  std::size_t scenarios = 0;
  std::size_t n = 0;
  bool sum_reduced = false;

  std::size_t size() const {
    return sum_reduced ? scenarios : scenarios + 1 + n * scenarios + n;
  }
};

inline DualVariables unpack(const CandidateLayout& lay, const SpacePtr& sp,
                            const agg::AggregatorSpec& spec, std::vector<double> u) {
  const auto& probs = sp->probs();
  const std::size_t S = lay.scenarios;
  if (lay.sum_reduced) {
    project_density(probs, u);
    Density q(sp, u);
    DualVariables dv{std::vector<double>(lay.n, 1.0), {}, q, 1.0};
    dv.s_densities.assign(lay.n, q);
    return dv;
  }
  std::vector<double> qf(u.begin(), u.begin() + S);
  project_density(probs, qf);
  double theta = std::clamp(u[S], 0.05, 0.95);
  std::vector<Density> s;
  s.reserve(lay.n);
  for (std::size_t i = 0; i < lay.n; ++i) {
    std::vector<double> si(u.begin() + S + 1 + i * S, u.begin() + S + 1 + (i + 1) * S);
    project_density(probs, si);
    s.emplace_back(sp, si);
  }
  std::vector<double> q(S, 0.0);
  for (std::size_t w = 0; w < S; ++w) {
    double mix = 0.0;
    for (const auto& si : s) mix += si(w);
    q[w] = theta * mix / static_cast<double>(lay.n) + (1.0 - theta) * qf[w];
  }
  std::vector<double> wts(u.end() - static_cast<long>(lay.n), u.end());
  for (double& v : wts) v = std::max(v, 0.0);
  // TotalLoss: scale weights into the conjugate's box so candidates stay finite
  if (spec.kind == agg::AggKind::TotalLoss) {
    for (std::size_t i = 0; i < lay.n; ++i) {
      double cap = kInf;
      for (std::size_t w = 0; w < S; ++w)
        if (s[i](w) > kStrictPositive) cap = std::min(cap, q[w] / s[i](w));
      if (cap < kInf) wts[i] = std::min(wts[i], cap);
    }
  }
  return DualVariables{std::move(wts), std::move(s), Density(sp, std::move(q)), 1.0};
}

}  // namespace detail

/// Draws a random structurally-feasible dual candidate (densities on the
/// weighted simplex, nonnegative weights, aggregator-specific repairs).
inline DualVariables sample_dual_variables(const agg::AggregatorSpec& spec, const SpacePtr& sp,
                                           std::mt19937_64& rng) {
  detail::CandidateLayout lay;
  lay.scenarios = sp->size();
  lay.n = spec.dimension();
  lay.sum_reduced = spec.kind == agg::AggKind::Sum;
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> u(lay.size());
  for (double& v : u) v = std::exp(g(rng));
  return detail::unpack(lay, sp, spec, std::move(u));
}

/// Maximizes the dual objective by seeded multi-start projected gradient and
/// reports the certified-from-inside bound next to the primal value.
inline DualReport dual_risk(const risk::RiskMeasureSpec& rho, const agg::AggregatorSpec& spec,
                            const RandomVector& x, const OptimizerSettings& opt = {}) {
  DualReport report;
  report.primal = primal_risk(rho, spec, x);
  const SpacePtr& sp = x.space();

  detail::CandidateLayout lay;
  lay.scenarios = sp->size();
  lay.n = spec.dimension();
  lay.sum_reduced = spec.kind == agg::AggKind::Sum;

  auto evaluate_u = [&](const std::vector<double>& u) {
    DualVariables dv = detail::unpack(lay, sp, spec, u);
    double v = dual_objective(rho, spec, x, dv);
    if (std::isnan(v)) {
      ++report.rejected_candidates;
      return -kInf;
    }
    if (v > report.dual_bound) {
      report.dual_bound = v;
      report.best = dv;
    }
    return v;
  };
  auto project = [&](std::vector<double>& u) {
    for (double& v : u)
      if (!std::isfinite(v)) v = 0.0;
  };

  std::uint64_t seedstate = opt.seed ^ 0xd1a1ULL;
  for (int s = 0; s < opt.starts; ++s) {
    std::mt19937_64 rng(detail::splitmix64(seedstate));
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> u(lay.size(), 1.0);
    if (s > 0)
      for (double& v : u) v = std::exp(0.7 * g(rng));
    if (!lay.sum_reduced) u[lay.scenarios] = 0.1 + 0.8 * std::generate_canonical<double, 53>(rng);
    detail::pga_maximize(u, evaluate_u, project, opt.iterations, report.iterations);
    ++report.starts_used;
  }

  // Chain-rule candidates: pair the univariate representation's densities at
  // Y = Lambda(X) with (w, S) built from scenario-wise supergradients of the
  // aggregation function, for which Fenchel-Young holds with equality. Every
  // candidate is still scored through dual_objective, so the bound stays
  // certified from inside.
  if (report.primal < kInf) {
    RandomVector y = agg::aggregate(spec, x);
    auto grads = agg::supergradients(spec, x);
    const std::size_t n = lay.n;
    auto chain_evaluate = [&](const std::vector<double>& u) {
      Density d = detail::make_density_clamped(sp, u);
      std::vector<double> w(n, 0.0);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < sp->size(); ++k) w[i] += sp->prob(k) * d(k) * grads[k][i];
      std::vector<Density> s;
      s.reserve(n);
      for (std::size_t i = 0; i < n; ++i) {
        if (w[i] > kStrictPositive) {
          std::vector<double> si(sp->size());
          for (std::size_t k = 0; k < sp->size(); ++k) si[k] = d(k) * grads[k][i] / w[i];
          s.push_back(detail::make_density_clamped(sp, std::move(si)));
        } else {
          w[i] = 0.0;
          s.push_back(d);
        }
      }
      DualVariables dv{std::move(w), std::move(s), d, 1.0};
      double v = dual_objective(rho, spec, x, dv);
      if (std::isnan(v)) {
        ++report.rejected_candidates;
        return -kInf;
      }
      if (v > report.dual_bound) {
        report.dual_bound = v;
        report.best = dv;
      }
      return v;
    };

    std::vector<std::vector<double>> seeds;
    seeds.emplace_back(sp->size(), 1.0);
    bool y_positive = true;
    for (std::size_t k = 0; k < sp->size(); ++k)
      if (!(y.scalar_at(k) > kStrictPositive)) y_positive = false;
    if (y_positive) {
      // the log-measure argmax d* proportional to 1/Y
      std::vector<double> inv(sp->size());
      for (std::size_t k = 0; k < sp->size(); ++k) inv[k] = 1.0 / y.scalar_at(k);
      seeds.push_back(std::move(inv));
    }
    std::uint64_t chainseed = opt.seed ^ 0xc4a17ULL;
    int chain_starts = std::max(2, opt.starts / 4);
    for (int s = 0; s < chain_starts; ++s) {
      std::mt19937_64 rng(detail::splitmix64(chainseed));
      std::normal_distribution<double> g(0.0, 1.0);
      std::vector<double> u(sp->size());
      for (double& v : u) v = std::exp(0.7 * g(rng));
      seeds.push_back(std::move(u));
    }
    for (auto& seed : seeds)
      detail::pga_maximize(seed, chain_evaluate, project, opt.iterations, report.iterations);
  }

  report.gap = report.primal - report.dual_bound;
  if (report.primal == kInf && report.dual_bound == kInf) report.gap = 0.0;
  report.weak_duality_ok = !(report.dual_bound > report.primal + 1e-6);
  report.gap_ok = report.weak_duality_ok &&
                  report.gap <= std::max(opt.gap_abs, opt.gap_rel * std::abs(report.primal));
  return report;
}

// ---------------------------------------------------------------------------
// Minimax probe

struct MinimaxBudget {
  int x_points = 0;       // 0: auto by dimension
  int density_points = 41;
  double x_lo = -6.0;
  double x_hi = 6.0;
};

/// Compares sup_x inf_y* and inf_y* sup_x of K^m_{x*}(x, y*) on finite grids;
/// the y*-grid ranges over normalized densities.
inline MinimaxProbe verify_minimax(const risk::RiskMeasureSpec& rho, const agg::AggregatorSpec& spec,
                                   const RandomVector& xstar, double m, const MinimaxBudget& budget = {}) {
  const SpacePtr& sp = xstar.space();
  const std::size_t S = sp->size();
  const std::size_t n = spec.dimension();
  if (S > 3 || n > 2)
    throw Error(ErrorCode::Precondition, "minimax probe is for |Omega| <= 3, n <= 2 instances");

  // density grid on the weighted simplex
  std::vector<Density> grid;
  const int dp = budget.density_points;
  const double eps = 1e-6;
  if (S == 1) {
    grid.emplace_back(sp, std::vector<double>{1.0});
  } else if (S == 2) {
    double p1 = sp->prob(0);
    for (int i = 0; i < dp; ++i) {
      double t = eps + (1.0 - 2 * eps) * i / (dp - 1);
      double d1 = t / p1;
      double d2 = (1.0 - t) / sp->prob(1);
      grid.emplace_back(sp, std::vector<double>{d1, d2});
    }
  } else {
    int side = std::max(4, dp / 4);
    for (int i = 0; i <= side; ++i)
      for (int j = 0; j + i <= side; ++j) {
        double t1 = eps + (1.0 - 3 * eps) * i / side;
        double t2 = eps + (1.0 - 3 * eps) * j / side;
        double t3 = 1.0 - t1 - t2;
        if (t3 < eps / 2) continue;
        grid.emplace_back(sp, std::vector<double>{t1 / sp->prob(0), t2 / sp->prob(1), t3 / sp->prob(2)});
      }
  }
  {
    // the density direction implied by x* itself; for linear aggregators the
    // infimum concentrates there and generic grids would miss it
    std::vector<double> prof(S, 0.0);
    double mass = 0.0;
    for (std::size_t w = 0; w < S; ++w) {
      for (std::size_t i = 0; i < n; ++i) prof[w] += xstar(w, i);
      prof[w] /= static_cast<double>(n);
      mass += sp->prob(w) * prof[w];
    }
    if (mass > kStrictPositive) {
      for (double& v : prof) v /= mass;
      grid.emplace_back(sp, prof);
    }
  }

  std::vector<double> levels(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) levels[k] = risk::penalty_dual(rho, grid[k], m);

  const std::size_t dim = S * n;
  int pts = budget.x_points > 0 ? budget.x_points : convex::detail::auto_points(dim);
  double lo = spec.nonneg_domain() ? 0.0 : budget.x_lo;
  convex::Box box = convex::Box::cube(dim, lo, budget.x_hi);

  // Membership in A^m_{y*_k} is E[-y* Lambda(X)] <= level_k. The aggregation
  // values are computed once per grid point and shared across the density
  // grid; the coarse scan is likewise shared between the two sides.
  std::vector<double> lam_rows(S);
  std::vector<double> xrow(n);
  auto eval_rows = [&](const std::vector<double>& coords) {
    for (std::size_t w = 0; w < S; ++w) {
      for (std::size_t i = 0; i < n; ++i) xrow[i] = coords[w * n + i];
      lam_rows[w] = agg::aggregate_point(spec, xrow);
    }
  };
  auto in_constraint_set = [&](std::size_t k) {
    double acc = 0.0;
    for (std::size_t w = 0; w < S; ++w) acc += sp->prob(w) * grid[k](w) * lam_rows[w];
    return -acc <= levels[k];
  };
  auto pair_neg = [&](const std::vector<double>& coords) {
    double acc = 0.0;
    for (std::size_t w = 0; w < S; ++w)
      for (std::size_t i = 0; i < n; ++i) acc -= sp->prob(w) * xstar(w, i) * coords[w * n + i];
    return acc;
  };

  struct Incumbent {
    double value = -kInf;
    std::vector<double> pt;
  };
  Incumbent lhs;
  std::vector<Incumbent> rhs(grid.size());

  const int rounds = convex::detail::auto_rounds(dim);
  convex::detail::scan_grid(box, pts, [&](const std::vector<double>& coords) {
    eval_rows(coords);
    double v = pair_neg(coords);
    bool everywhere = true;
    for (std::size_t k = 0; k < grid.size(); ++k) {
      if (in_constraint_set(k)) {
        if (v > rhs[k].value) rhs[k] = {v, coords};
      } else {
        everywhere = false;
      }
    }
    if (everywhere && v > lhs.value) lhs = {v, coords};
  });

  auto refine_one = [&](Incumbent& inc, auto&& member) {
    auto consider = [&](const std::vector<double>& coords) {
      eval_rows(coords);
      if (!member()) return;
      double v = pair_neg(coords);
      if (v > inc.value) inc = {v, coords};
    };
    convex::detail::refine_search(box, pts, rounds, inc.pt, consider);
  };

  refine_one(lhs, [&]() {
    for (std::size_t k = 0; k < grid.size(); ++k)
      if (!in_constraint_set(k)) return false;
    return true;
  });
  for (std::size_t k = 0; k < grid.size(); ++k)
    refine_one(rhs[k], [&]() { return in_constraint_set(k); });

  MinimaxProbe probe;
  probe.lhs = lhs.value;
  if (!lhs.pt.empty()) probe.lhs_witness = RandomVector(sp, n, lhs.pt);
  probe.rhs = kInf;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (rhs[k].value < probe.rhs) {
      probe.rhs = rhs[k].value;
      probe.rhs_witness = grid[k];
    }
  }

  if (probe.lhs == probe.rhs)
    probe.difference = 0.0;  // covers the mutually infinite cases
  else
    probe.difference = std::abs(probe.lhs - probe.rhs);
  probe.minimax_ok = probe.difference <= std::max(2e-2, 1e-2 * std::abs(probe.rhs));
  return probe;
}

// ---------------------------------------------------------------------------
// Randomized shape probes

struct ProbeDomain {
  double lo = -3.0;
  double hi = 3.0;
};

/// Samples mixtures and monotone pairs for a scalar risk functional composed
/// with an aggregator; also probes quasiconcavity of the scalarizations of
/// Lambda. Violations are counted, not thrown.
inline ProbeReport quasiconvexity_probe(const std::function<double(const RandomVector&)>& risk_of_shock,
                                        const agg::AggregatorSpec& spec, const SpacePtr& sp, int trials,
                                        std::uint64_t seed, ProbeDomain domain = {}) {
  ProbeReport report;
  report.trials = trials;
  if (spec.nonneg_domain()) domain.lo = std::max(domain.lo, 0.0);
  std::mt19937_64 rng(seed ^ 0xabcdef12ULL);
  std::uniform_real_distribution<double> coord(domain.lo, domain.hi);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t n = spec.dimension();
  const std::size_t S = sp->size();

  auto sample = [&]() {
    std::vector<double> v(S * n);
    for (double& e : v) e = coord(rng);
    return RandomVector(sp, n, v);
  };

  for (int t = 0; t < trials; ++t) {
    RandomVector x1 = sample(), x2 = sample();
    double lamb = unit(rng);
    std::vector<double> mixv(S * n);
    for (std::size_t k = 0; k < mixv.size(); ++k)
      mixv[k] = lamb * x1.values()[k] + (1 - lamb) * x2.values()[k];
    RandomVector mix(sp, n, mixv);

    double r1 = risk_of_shock(x1), r2 = risk_of_shock(x2), rm = risk_of_shock(mix);
    if (std::isfinite(r1) && std::isfinite(r2)) ++report.finite_samples;
    double bound = std::max(r1, r2);
    if (rm > bound + 1e-8) ++report.quasiconvexity_violations;

    // monotone pair: x2 = x1 + nonnegative bump
    std::vector<double> bumped = x1.values();
    for (double& e : bumped) e += unit(rng);
    double rb = risk_of_shock(RandomVector(sp, n, bumped));
    if (rb > r1 + 1e-9) ++report.monotonicity_violations;

    // scalarization quasiconcavity of Lambda for a sampled density
    std::vector<double> draw(S);
    for (double& e : draw) e = std::exp(0.5 * coord(rng) / (domain.hi - domain.lo + 1));
    detail::project_density(sp->probs(), draw);
    Density y(sp, draw);
    auto h = [&](const RandomVector& x) {
      double acc = 0.0;
      std::vector<double> row(n);
      for (std::size_t w = 0; w < S; ++w) {
        for (std::size_t i = 0; i < n; ++i) row[i] = x(w, i);
        acc += sp->prob(w) * y(w) * agg::aggregate_point(spec, row);
      }
      return acc;
    };
    if (h(mix) < std::min(h(x1), h(x2)) - 1e-8) ++report.scalarization_violations;
  }
  return report;
}

inline std::function<double(const RandomVector&)> primal_functional(const risk::RiskMeasureSpec& rho,
                                                                    const agg::AggregatorSpec& spec) {
  return [rho, spec](const RandomVector& x) { return primal_risk(rho, spec, x); };
}

}  // namespace qrisk::dual

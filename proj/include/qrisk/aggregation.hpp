#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "qrisk/extended.hpp"
#include "qrisk/lp_solver.hpp"
#include "qrisk/prob_core.hpp"

namespace qrisk::agg {

/// Interbank liability network. Node 0 is society; nodes 1..n are banks.
struct Network {
  std::size_t n = 0;
  std::vector<std::vector<double>> liabilities;  // (n+1) x (n+1) nominal matrix
  std::vector<double> pbar;                      // total liabilities per bank, index 1..n stored 0..n-1
  std::vector<std::vector<double>> rel;          // relative liabilities a_ij over all nodes

  static Network from_liabilities(std::vector<std::vector<double>> ell) {
    Network net;
    if (ell.empty() || ell.size() != ell.front().size())
      throw Error(ErrorCode::DomainError, "liability matrix must be square (n+1) x (n+1)");
    const std::size_t nodes = ell.size();
    if (nodes < 2) throw Error(ErrorCode::DomainError, "network needs at least one bank");
    net.n = nodes - 1;
    for (std::size_t i = 0; i < nodes; ++i) {
      if (ell[i].size() != nodes) throw Error(ErrorCode::DomainError, "ragged liability matrix");
      for (double v : ell[i])
        if (!(v >= 0.0)) throw Error(ErrorCode::DomainError, "liabilities must be nonnegative");
      if (ell[i][i] != 0.0) throw Error(ErrorCode::DomainError, "self-liabilities must be zero");
    }
    for (std::size_t j = 0; j < nodes; ++j)
      if (ell[0][j] != 0.0) throw Error(ErrorCode::DomainError, "society has no liabilities to banks");
    for (std::size_t i = 1; i < nodes; ++i)
      if (!(ell[i][0] > 0.0))
        throw Error(ErrorCode::DomainError, "every bank needs nonzero liability to society");

    net.liabilities = std::move(ell);
    net.pbar.resize(net.n);
    net.rel.assign(nodes, std::vector<double>(nodes, 0.0));
    for (std::size_t i = 1; i < nodes; ++i) {
      double total = 0.0;
      for (std::size_t j = 0; j < nodes; ++j) total += net.liabilities[i][j];
      net.pbar[i - 1] = total;
      for (std::size_t j = 0; j < nodes; ++j) net.rel[i][j] = net.liabilities[i][j] / total;
    }
    return net;
  }

  double a(std::size_t i, std::size_t j) const { return rel[i][j]; }
  double society_bound() const {
    double b = 0.0;
    for (std::size_t i = 1; i <= n; ++i) b += rel[i][0] * pbar[i - 1];
    return b;
  }
};

enum class AggKind { Sum, TotalLoss, Exponential, EisenbergNoe };

struct AggregatorSpec {
  AggKind kind = AggKind::Sum;
  std::size_t n = 1;  // ignored for EisenbergNoe, which carries its own size
  std::optional<Network> network;

  static AggregatorSpec simple(AggKind k, std::size_t dim) {
    if (k == AggKind::EisenbergNoe) throw Error(ErrorCode::DomainError, "Eisenberg-Noe needs a network");
    AggregatorSpec s;
    s.kind = k;
    s.n = dim;
    return s;
  }
  static AggregatorSpec eisenberg_noe(Network net) {
    AggregatorSpec s;
    s.kind = AggKind::EisenbergNoe;
    s.n = net.n;
    s.network = std::move(net);
    return s;
  }

  std::size_t dimension() const { return kind == AggKind::EisenbergNoe ? network->n : n; }
  bool nonneg_domain() const { return kind == AggKind::EisenbergNoe; }
  /// Phi(0) < +inf, i.e. Lambda bounded from above.
  bool bounded_above() const { return kind != AggKind::Sum; }
};

struct ClearingResult {
  std::vector<double> payments;
  double lambda_value = 0.0;
  enum class Method { FixedPoint, Lp } method = Method::FixedPoint;
  int iterations = 0;
};

/// Greatest clearing vector by Picard iteration from full payment.
inline ClearingResult clearing_fixed_point(const Network& net, std::span<const double> x) {
  if (x.size() != net.n) throw Error(ErrorCode::ShapeMismatch, "shock dimension mismatch");
  for (double v : x)
    if (!(v >= 0.0)) throw Error(ErrorCode::DomainError, "Eisenberg-Noe shocks must be nonnegative");
  std::vector<double> p = net.pbar;
  std::vector<double> next(net.n);
  int it = 0;
  for (; it < 1000000; ++it) {
    double diff = 0.0;
    for (std::size_t i = 1; i <= net.n; ++i) {
      double inflow = x[i - 1];
      for (std::size_t j = 1; j <= net.n; ++j) inflow += net.a(j, i) * p[j - 1];
      next[i - 1] = std::min(net.pbar[i - 1], inflow);
      diff = std::max(diff, std::abs(next[i - 1] - p[i - 1]));
    }
    p = next;
    if (diff <= 1e-12) break;
  }
  if (it >= 1000000) throw Error(ErrorCode::Convergence, "clearing iteration did not converge");
  ClearingResult out;
  out.payments = p;
  out.method = ClearingResult::Method::FixedPoint;
  out.iterations = it + 1;
  out.lambda_value = 0.0;
  for (std::size_t i = 1; i <= net.n; ++i) out.lambda_value += net.a(i, 0) * p[i - 1];
  return out;
}

/// Clearing via the payment-maximization LP; the objective is the payment to
/// society and agrees with the fixed point even when payments are non-unique.
inline ClearingResult clearing_lp(const Network& net, std::span<const double> x) {
  if (x.size() != net.n) throw Error(ErrorCode::ShapeMismatch, "shock dimension mismatch");
  for (double v : x)
    if (!(v >= 0.0)) throw Error(ErrorCode::DomainError, "Eisenberg-Noe shocks must be nonnegative");
  lp::LinearProgram prog(net.n);
  for (std::size_t i = 1; i <= net.n; ++i) {
    prog.objective[i - 1] = net.a(i, 0);
    prog.upper[i - 1] = net.pbar[i - 1];
    std::vector<double> row(net.n, 0.0);
    row[i - 1] = 1.0;
    for (std::size_t j = 1; j <= net.n; ++j) row[j - 1] -= net.a(j, i);
    prog.add_row(std::move(row), lp::RowSense::LessEqual, x[i - 1]);
  }
  auto sol = lp::solve(prog);
  if (sol.status != lp::LpStatus::Optimal)
    throw Error(ErrorCode::Internal, "clearing LP must be feasible and bounded");
  ClearingResult out;
  out.payments = sol.x;
  out.method = ClearingResult::Method::Lp;
  out.iterations = sol.pivots;
  out.lambda_value = sol.objective;
  return out;
}

/// Shadow prices of the bank assets in the clearing LP: a supergradient of
/// Lambda~ at x.
inline std::vector<double> clearing_shadow_prices(const Network& net, std::span<const double> x) {
  if (x.size() != net.n) throw Error(ErrorCode::ShapeMismatch, "shock dimension mismatch");
  lp::LinearProgram prog(net.n);
  for (std::size_t i = 1; i <= net.n; ++i) {
    prog.objective[i - 1] = net.a(i, 0);
    prog.upper[i - 1] = net.pbar[i - 1];
    std::vector<double> row(net.n, 0.0);
    row[i - 1] = 1.0;
    for (std::size_t j = 1; j <= net.n; ++j) row[j - 1] -= net.a(j, i);
    prog.add_row(std::move(row), lp::RowSense::LessEqual, x[i - 1]);
  }
  auto sol = lp::solve(prog);
  if (sol.status != lp::LpStatus::Optimal)
    throw Error(ErrorCode::Internal, "clearing LP must be feasible and bounded");
  for (double& y : sol.row_duals) y = std::max(y, 0.0);
  return sol.row_duals;
}

/// Scenario-wise supergradient rows z(w) of the (concave) aggregation
/// function at X(w), satisfying Fenchel-Young with equality:
/// Phi~(z) = Lambda~(X(w)) - z'X(w).
inline std::vector<std::vector<double>> supergradients(const AggregatorSpec& spec, const RandomVector& x) {
  const std::size_t n = x.entities();
  std::vector<std::vector<double>> out(x.scenarios(), std::vector<double>(n, 0.0));
  std::vector<double> row(n);
  for (std::size_t w = 0; w < x.scenarios(); ++w) {
    for (std::size_t i = 0; i < n; ++i) row[i] = x(w, i);
    switch (spec.kind) {
      case AggKind::Sum:
        out[w].assign(n, 1.0);
        break;
      case AggKind::TotalLoss:
        for (std::size_t i = 0; i < n; ++i) out[w][i] = row[i] <= 0.0 ? 1.0 : 0.0;
        break;
      case AggKind::Exponential:
        for (std::size_t i = 0; i < n; ++i) out[w][i] = std::exp(-row[i] - 1.0);
        break;
      case AggKind::EisenbergNoe:
        out[w] = clearing_shadow_prices(*spec.network, row);
        break;
    }
  }
  return out;
}

/// Pointwise aggregation Lambda~(x).
inline double aggregate_point(const AggregatorSpec& spec, std::span<const double> x) {
  if (x.size() != spec.dimension()) throw Error(ErrorCode::ShapeMismatch, "aggregate dimension mismatch");
  switch (spec.kind) {
    case AggKind::Sum: {
      double acc = 0.0;
      for (double v : x) acc += v;
      return acc;
    }
    case AggKind::TotalLoss: {
      double acc = 0.0;
      for (double v : x) acc -= std::max(-v, 0.0);
      return acc;
    }
    case AggKind::Exponential: {
      double acc = 0.0;
      for (double v : x) acc -= std::exp(-v - 1.0);
      return acc;
    }
    case AggKind::EisenbergNoe:
      return clearing_fixed_point(*spec.network, x).lambda_value;
  }
  return 0.0;
}

/// Scenario-wise lift Lambda(X).
inline RandomVector aggregate(const AggregatorSpec& spec, const RandomVector& x) {
  if (x.entities() != spec.dimension())
    throw Error(ErrorCode::ShapeMismatch, "aggregate entity count mismatch");
  std::vector<double> out(x.scenarios());
  std::vector<double> row(x.entities());
  for (std::size_t w = 0; w < x.scenarios(); ++w) {
    for (std::size_t i = 0; i < x.entities(); ++i) row[i] = x(w, i);
    out[w] = aggregate_point(spec, row);
  }
  return RandomVector::scalar(x.space(), std::move(out));
}

/// Conjugate Phi~(x*) = sup_x (Lambda~(x) - x*'x), over R^n_+ for
/// Eisenberg-Noe and over R^n otherwise.
inline double conjugate_phi(const AggregatorSpec& spec, std::span<const double> xstar) {
  if (xstar.size() != spec.dimension())
    throw Error(ErrorCode::ShapeMismatch, "conjugate dimension mismatch");
  switch (spec.kind) {
    case AggKind::Sum: {
      for (double v : xstar)
        if (std::abs(v - 1.0) > 1e-9) return kInf;
      return 0.0;
    }
    case AggKind::TotalLoss: {
      for (double v : xstar)
        if (v < -1e-12 || v > 1.0 + 1e-9) return kInf;
      return 0.0;
    }
    case AggKind::Exponential: {
      double acc = 0.0;
      for (double v : xstar) {
        if (v < 0.0) return kInf;
        if (v > 0.0) acc += v * std::log(v);  // 0 ln 0 = 0
      }
      return acc;
    }
    case AggKind::EisenbergNoe: {
      for (double v : xstar)
        if (v < 0.0) return kInf;  // payments can grow without x*-cost otherwise
      const Network& net = *spec.network;
      // variables: payments p_i and epigraph t_i >= (p_i - sum_j a_ji p_j)^+
      lp::LinearProgram prog(2 * net.n);
      for (std::size_t i = 1; i <= net.n; ++i) {
        prog.objective[i - 1] = net.a(i, 0);
        prog.objective[net.n + i - 1] = -xstar[i - 1];
        prog.upper[i - 1] = net.pbar[i - 1];
        prog.upper[net.n + i - 1] = net.pbar[i - 1];  // valid cap keeps zero-cost t bounded
        std::vector<double> row(2 * net.n, 0.0);
        row[i - 1] = 1.0;
        for (std::size_t j = 1; j <= net.n; ++j) row[j - 1] -= net.a(j, i);
        row[net.n + i - 1] = -1.0;
        prog.add_row(std::move(row), lp::RowSense::LessEqual, 0.0);
      }
      auto sol = lp::solve(prog);
      if (sol.status != lp::LpStatus::Optimal)
        throw Error(ErrorCode::Internal, "Eisenberg-Noe conjugate LP must solve");
      return sol.objective;
    }
  }
  return kInf;
}

/// Perspective y* Phi~(x*/y*) for y* > 0 (the y* = 0 branches live with the
/// caller via support compatibility).
inline double phi_perspective(const AggregatorSpec& spec, std::span<const double> xstar_row,
                              double ystar_scalar) {
  if (!(ystar_scalar > 0.0)) throw Error(ErrorCode::DomainError, "phi_perspective needs y* > 0");
  std::vector<double> scaled(xstar_row.begin(), xstar_row.end());
  for (double& v : scaled) v /= ystar_scalar;
  return ystar_scalar * conjugate_phi(spec, scaled);
}

}  // namespace qrisk::agg

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "qrisk/extended.hpp"

namespace qrisk::lp {

enum class RowSense { LessEqual, Equal, GreaterEqual };

/// max c'x subject to row constraints and variable bounds (+-inf allowed).
struct LinearProgram {
  std::size_t num_vars = 0;
  std::vector<double> objective;
  std::vector<std::vector<double>> rows;
  std::vector<RowSense> senses;
  std::vector<double> rhs;
  std::vector<double> lower;
  std::vector<double> upper;

  explicit LinearProgram(std::size_t n)
      : num_vars(n), objective(n, 0.0), lower(n, 0.0), upper(n, kInf) {}

  void add_row(std::vector<double> coeffs, RowSense sense, double b) {
    if (coeffs.size() != num_vars) throw Error(ErrorCode::ShapeMismatch, "LP row length mismatch");
    rows.push_back(std::move(coeffs));
    senses.push_back(sense);
    rhs.push_back(b);
  }
};

enum class LpStatus { Optimal, Unbounded, Infeasible };

struct LpSolution {
  LpStatus status = LpStatus::Optimal;
  double objective = 0.0;
  std::vector<double> x;          // structural variables
  std::vector<double> row_duals;  // prices y, one per row
  int pivots = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double complementarity = 0.0;
  double duality_gap = 0.0;
};

namespace detail {

inline constexpr double kPivotTol = 1e-10;
inline constexpr double kFeasTol = 1e-9;
inline constexpr double kCostTol = 1e-9;

enum class VarState { Basic, AtLower, AtUpper, FreeZero };

/// Dense tableau simplex over bounded variables. Columns are structural
/// variables, then one slack per row, then one artificial per row; the
/// artificials form the initial basis.
class Simplex {
 public:
  explicit Simplex(const LinearProgram& lp)
      : m_(lp.rows.size()), n_(lp.num_vars), ncols_(lp.num_vars + 2 * lp.rows.size()) {
    lo_.assign(ncols_, 0.0);
    hi_.assign(ncols_, kInf);
    cost_.assign(ncols_, 0.0);
    state_.assign(ncols_, VarState::AtLower);
    for (std::size_t j = 0; j < n_; ++j) {
      lo_[j] = lp.lower[j];
      hi_[j] = lp.upper[j];
      cost_[j] = lp.objective[j];
      if (lo_[j] > hi_[j]) throw Error(ErrorCode::DomainError, "LP bound lo > hi");
      if (std::isfinite(lo_[j]))
        state_[j] = VarState::AtLower;
      else if (std::isfinite(hi_[j]))
        state_[j] = VarState::AtUpper;
      else
        state_[j] = VarState::FreeZero;
    }
    for (std::size_t i = 0; i < m_; ++i) {
      std::size_t s = slack_col(i);
      switch (lp.senses[i]) {
        case RowSense::LessEqual: lo_[s] = 0.0; hi_[s] = kInf; break;
        case RowSense::GreaterEqual: lo_[s] = -kInf; hi_[s] = 0.0; break;
        case RowSense::Equal: lo_[s] = 0.0; hi_[s] = 0.0; break;
      }
      state_[s] = (lp.senses[i] == RowSense::GreaterEqual) ? VarState::AtUpper : VarState::AtLower;
    }

    tab_.assign(m_, std::vector<double>(ncols_, 0.0));
    basis_.resize(m_);
    beta_.assign(m_, 0.0);
    art_sign_.assign(m_, 1.0);
    rhs_ = lp.rhs;

    for (std::size_t i = 0; i < m_; ++i) {
      for (std::size_t j = 0; j < n_; ++j) tab_[i][j] = lp.rows[i][j];
      tab_[i][slack_col(i)] = 1.0;
      double residual = rhs_[i] - row_activity(lp, i);
      art_sign_[i] = (residual >= 0.0) ? 1.0 : -1.0;
      if (art_sign_[i] < 0.0)
        for (std::size_t j = 0; j < n_ + m_; ++j) tab_[i][j] = -tab_[i][j];
      tab_[i][art_col(i)] = 1.0;  // basis starts as the identity in tableau coordinates
      basis_[i] = art_col(i);
      state_[art_col(i)] = VarState::Basic;
      beta_[i] = std::abs(residual);
    }
  }

  LpSolution run(const LinearProgram& lp) {
    LpSolution sol;

    // Phase 1: drive total artificial mass to zero.
    std::vector<double> phase1(ncols_, 0.0);
    for (std::size_t i = 0; i < m_; ++i) phase1[art_col(i)] = -1.0;
    cost_.swap(phase1);
    LpStatus st = iterate(false);
    cost_.swap(phase1);
    if (st != LpStatus::Optimal) throw Error(ErrorCode::Internal, "phase-1 simplex cannot be unbounded");
    double infeas = 0.0;
    for (std::size_t i = 0; i < m_; ++i)
      if (basis_[i] >= art_col(0)) infeas += std::abs(beta_[i]);
    if (infeas > 1e-7) {
      sol.status = LpStatus::Infeasible;
      sol.pivots = pivots_;
      return sol;
    }
    expel_artificials();
    for (std::size_t i = 0; i < m_; ++i) {
      lo_[art_col(i)] = hi_[art_col(i)] = 0.0;
      if (state_[art_col(i)] != VarState::Basic) state_[art_col(i)] = VarState::AtLower;
    }
    refresh_beta();

    // Phase 2: the real objective.
    st = iterate(true);
    refresh_beta();
    sol.status = st;
    sol.pivots = pivots_;
    if (st != LpStatus::Optimal) return sol;

    sol.x.assign(n_, 0.0);
    for (std::size_t j = 0; j < n_; ++j) sol.x[j] = value_of(j);
    sol.objective = 0.0;
    for (std::size_t j = 0; j < n_; ++j) sol.objective += lp.objective[j] * sol.x[j];
    sol.row_duals = row_duals();
    certify(lp, sol);
    return sol;
  }

 private:
  std::size_t slack_col(std::size_t i) const { return n_ + i; }
  std::size_t art_col(std::size_t i) const { return n_ + m_ + i; }

  double row_activity(const LinearProgram& lp, std::size_t i) const {
    double acc = 0.0;
    for (std::size_t j = 0; j < n_; ++j) acc += lp.rows[i][j] * value_of(j);
    acc += value_of(slack_col(i));
    return acc;
  }

  double value_of(std::size_t j) const {
    switch (state_[j]) {
      case VarState::AtLower: return lo_[j];
      case VarState::AtUpper: return hi_[j];
      case VarState::FreeZero: return 0.0;
      case VarState::Basic:
        for (std::size_t i = 0; i < m_; ++i)
          if (basis_[i] == j) return beta_[i];
        throw Error(ErrorCode::Internal, "basic variable not found");
    }
    return 0.0;
  }

  // B^{-1} e_i read off the artificial columns, which started as sign * e_i.
  double binv(std::size_t row, std::size_t i) const { return art_sign_[i] * tab_[row][art_col(i)]; }

  void refresh_beta() {
    for (std::size_t i = 0; i < m_; ++i) {
      double acc = 0.0;
      for (std::size_t k = 0; k < m_; ++k) acc += binv(i, k) * rhs_[k];
      for (std::size_t j = 0; j < ncols_; ++j) {
        if (state_[j] == VarState::Basic) continue;
        double v = value_of(j);
        if (v != 0.0) acc -= tab_[i][j] * v;
      }
      beta_[i] = acc;
    }
  }

  std::vector<double> reduced_costs() const {
    std::vector<double> d(ncols_, 0.0);
    std::vector<double> cb(m_);
    for (std::size_t i = 0; i < m_; ++i) cb[i] = cost_[basis_[i]];
    for (std::size_t j = 0; j < ncols_; ++j) {
      if (state_[j] == VarState::Basic) continue;
      double acc = cost_[j];
      for (std::size_t i = 0; i < m_; ++i) acc -= cb[i] * tab_[i][j];
      d[j] = acc;
    }
    return d;
  }

  LpStatus iterate(bool detect_unbounded) {
    const long bland_after = 10 * static_cast<long>(m_ + ncols_);
    const long cap = 200 * static_cast<long>(m_ + ncols_) + 2000;
    long local = 0;
    while (true) {
      if (++local > cap) throw Error(ErrorCode::Convergence, "simplex pivot cap exceeded");
      bool bland = local > bland_after;
      std::vector<double> d = reduced_costs();

      std::size_t enter = ncols_;
      double best = kCostTol;
      int dir = +1;
      for (std::size_t j = 0; j < ncols_; ++j) {
        if (state_[j] == VarState::Basic) continue;
        if (lo_[j] == hi_[j] && std::isfinite(lo_[j])) continue;  // fixed
        double score = 0.0;
        int cand_dir = 0;
        if (state_[j] == VarState::AtLower && d[j] > kCostTol) { score = d[j]; cand_dir = +1; }
        else if (state_[j] == VarState::AtUpper && d[j] < -kCostTol) { score = -d[j]; cand_dir = -1; }
        else if (state_[j] == VarState::FreeZero && std::abs(d[j]) > kCostTol) {
          score = std::abs(d[j]);
          cand_dir = d[j] > 0 ? +1 : -1;
        }
        if (cand_dir == 0) continue;
        if (bland) { enter = j; dir = cand_dir; break; }
        if (score > best) { best = score; enter = j; dir = cand_dir; }
      }
      if (enter == ncols_) return LpStatus::Optimal;

      // Ratio test: largest step before the entering variable or a basic
      // variable hits a bound. Ties break toward the lowest basis index,
      // which also serves the Bland fallback.
      double own_range = kInf;
      if (state_[enter] != VarState::FreeZero && std::isfinite(lo_[enter]) && std::isfinite(hi_[enter]))
        own_range = hi_[enter] - lo_[enter];
      double delta = own_range;
      std::size_t leave_row = m_;
      int leave_to = 0;  // -1: leaving basic goes to lower, +1: to upper
      for (std::size_t i = 0; i < m_; ++i) {
        double g = tab_[i][enter] * dir;
        std::size_t bj = basis_[i];
        double step;
        int to;
        if (g > kPivotTol && std::isfinite(lo_[bj])) {
          step = std::max((beta_[i] - lo_[bj]) / g, 0.0);
          to = -1;
        } else if (g < -kPivotTol && std::isfinite(hi_[bj])) {
          step = std::max((hi_[bj] - beta_[i]) / (-g), 0.0);
          to = +1;
        } else {
          continue;
        }
        bool better = step < delta - kPivotTol;
        bool tie = std::abs(step - delta) <= kPivotTol && leave_row != m_ && bj < basis_[leave_row];
        if (better || tie) {
          delta = std::min(delta, step);
          leave_row = i;
          leave_to = to;
        } else if (step <= delta + kPivotTol && leave_row == m_) {
          delta = std::min(delta, step);
          leave_row = i;
          leave_to = to;
        }
      }

      if (!std::isfinite(delta) && leave_row == m_) {
        if (detect_unbounded) return LpStatus::Unbounded;
        throw Error(ErrorCode::Internal, "phase-1 ray");
      }

      if (leave_row == m_) {
        // Bound flip: the entering variable traverses its whole range.
        for (std::size_t i = 0; i < m_; ++i) beta_[i] -= tab_[i][enter] * dir * delta;
        state_[enter] = (state_[enter] == VarState::AtLower) ? VarState::AtUpper : VarState::AtLower;
        ++pivots_;
        continue;
      }

      pivot(leave_row, enter, dir, delta, leave_to);
      ++pivots_;
    }
  }

  void pivot(std::size_t r, std::size_t enter, int dir, double delta, int leave_to) {
    double enter_value = value_of(enter) + dir * delta;
    std::size_t leaving = basis_[r];

    for (std::size_t i = 0; i < m_; ++i)
      if (i != r) beta_[i] -= tab_[i][enter] * dir * delta;

    double piv = tab_[r][enter];
    for (std::size_t j = 0; j < ncols_; ++j) tab_[r][j] /= piv;
    for (std::size_t i = 0; i < m_; ++i) {
      if (i == r) continue;
      double f = tab_[i][enter];
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < ncols_; ++j) tab_[i][j] -= f * tab_[r][j];
    }

    basis_[r] = enter;
    state_[enter] = VarState::Basic;
    beta_[r] = enter_value;
    state_[leaving] = (leave_to >= 0 && std::isfinite(hi_[leaving])) ? VarState::AtUpper : VarState::AtLower;
    if (!std::isfinite(lo_[leaving]) && !std::isfinite(hi_[leaving])) state_[leaving] = VarState::FreeZero;
  }

  /// Pivot leftover zero-valued artificials out of the basis where possible;
  /// redundant rows keep their artificial basic at zero.
  void expel_artificials() {
    for (std::size_t i = 0; i < m_; ++i) {
      if (basis_[i] < art_col(0)) continue;
      std::size_t target = ncols_;
      for (std::size_t j = 0; j < n_ + m_; ++j) {
        if (state_[j] == VarState::Basic) continue;
        if (std::abs(tab_[i][j]) > 1e-8) { target = j; break; }
      }
      if (target == ncols_) continue;
      pivot(i, target, +1, 0.0, -1);  // zero-step basis swap
    }
  }

  std::vector<double> row_duals() const {
    std::vector<double> y(m_, 0.0);
    std::vector<double> cb(m_);
    for (std::size_t i = 0; i < m_; ++i) cb[i] = cost_[basis_[i]];
    for (std::size_t i = 0; i < m_; ++i) {
      double acc = 0.0;
      for (std::size_t k = 0; k < m_; ++k) acc += cb[k] * binv(k, i);
      y[i] = acc;
    }
    return y;
  }

  void certify(const LinearProgram& lp, LpSolution& sol) const {
    double pres = 0.0;
    for (std::size_t i = 0; i < m_; ++i) {
      double act = 0.0;
      for (std::size_t j = 0; j < n_; ++j) act += lp.rows[i][j] * sol.x[j];
      double viol = 0.0;
      switch (lp.senses[i]) {
        case RowSense::LessEqual: viol = std::max(0.0, act - lp.rhs[i]); break;
        case RowSense::GreaterEqual: viol = std::max(0.0, lp.rhs[i] - act); break;
        case RowSense::Equal: viol = std::abs(act - lp.rhs[i]); break;
      }
      pres = std::max(pres, viol);
    }
    for (std::size_t j = 0; j < n_; ++j) {
      if (std::isfinite(lp.lower[j])) pres = std::max(pres, lp.lower[j] - sol.x[j]);
      if (std::isfinite(lp.upper[j])) pres = std::max(pres, sol.x[j] - lp.upper[j]);
    }
    sol.primal_residual = pres;

    // Reduced costs of structural variables under the returned prices.
    double dres = 0.0, comp = 0.0;
    double dual_obj = 0.0;
    for (std::size_t i = 0; i < m_; ++i) {
      dual_obj += sol.row_duals[i] * lp.rhs[i];
      double y = sol.row_duals[i];
      if (lp.senses[i] == RowSense::LessEqual) dres = std::max(dres, -y);
      if (lp.senses[i] == RowSense::GreaterEqual) dres = std::max(dres, y);
    }
    for (std::size_t j = 0; j < n_; ++j) {
      double d = lp.objective[j];
      for (std::size_t i = 0; i < m_; ++i) d -= sol.row_duals[i] * lp.rows[i][j];
      double contrib = 0.0;
      if (d > kCostTol) {
        if (std::isfinite(lp.upper[j])) contrib = d * lp.upper[j];
        else dres = std::max(dres, d);
      } else if (d < -kCostTol) {
        if (std::isfinite(lp.lower[j])) contrib = d * lp.lower[j];
        else dres = std::max(dres, -d);
      }
      dual_obj += contrib;
      bool interior = sol.x[j] > lp.lower[j] + kFeasTol && sol.x[j] < lp.upper[j] - kFeasTol;
      if (interior) comp = std::max(comp, std::abs(d));
      if (d > kCostTol && std::isfinite(lp.upper[j]))
        comp = std::max(comp, std::abs(d * (lp.upper[j] - sol.x[j])));
      if (d < -kCostTol && std::isfinite(lp.lower[j]))
        comp = std::max(comp, std::abs(d * (sol.x[j] - lp.lower[j])));
    }
    sol.dual_residual = dres;
    sol.complementarity = comp;
    double scale = 1.0 + std::abs(sol.objective);
    sol.duality_gap = std::abs(dual_obj - sol.objective) / scale;
  }

  std::size_t m_, n_, ncols_;
  std::vector<std::vector<double>> tab_;
  std::vector<std::size_t> basis_;
  std::vector<double> beta_;
  std::vector<double> lo_, hi_, cost_;
  std::vector<VarState> state_;
  std::vector<double> art_sign_;
  std::vector<double> rhs_;
  int pivots_ = 0;
};

}  // namespace detail

inline LpSolution solve(const LinearProgram& lp) {
  for (double c : lp.objective) reject_nan(c, "lp objective");
  for (const auto& row : lp.rows)
    for (double a : row) reject_nan(a, "lp row");
  detail::Simplex s(lp);
  return s.run(lp);
}

}  // namespace qrisk::lp

#pragma once

#include <chrono>
#include <random>
#include <string>

#include "qrisk/duality_engine.hpp"
#include "qrisk/instance.hpp"
#include "qrisk/report.hpp"

namespace qrisk::io {

/// Commands of the operational surface. `verify` and `selftest` populate the
/// property-check list; their failures are reported, not thrown.
inline RunReport run_command(const std::string& cmd, const InstanceFile& inst,
                             const std::string& instance_path = "") {
  auto t0 = std::chrono::steady_clock::now();
  RunReport report;
  report.command = cmd;
  report.instance_path = instance_path;
  report.seed = inst.optimizer.seed;

  const auto& rho = inst.risk_measure;
  const auto& ag = inst.aggregator;
  const auto& x = inst.shock;

  auto elapsed = [&]() {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  };

  if (cmd == "clear") {
    if (ag.kind != agg::AggKind::EisenbergNoe)
      throw Error(ErrorCode::DomainError, "clear needs an Eisenberg-Noe instance");
    std::vector<double> row(x.entities());
    for (std::size_t w = 0; w < x.scenarios(); ++w) {
      for (std::size_t i = 0; i < x.entities(); ++i) row[i] = x(w, i);
      auto res = agg::clearing_fixed_point(*ag.network, row);
      report.clearing_payments.push_back(res.payments);
      report.clearing_lambda.push_back(res.lambda_value);
    }
  } else if (cmd == "evaluate") {
    report.primal = dual::primal_risk(rho, ag, x);
  } else if (cmd == "penalty") {
    if (!inst.query_xstar || !inst.query_m)
      throw Error(ErrorCode::Parse, "penalty needs query.xstar and query.m in the instance");
    report.penalty_value = dual::composition_penalty(rho, ag, *inst.query_xstar, *inst.query_m,
                                                     inst.optimizer);
  } else if (cmd == "left-inverse") {
    if (!inst.query_xstar || !inst.query_s)
      throw Error(ErrorCode::Parse, "left-inverse needs query.xstar and query.s in the instance");
    report.left_inverse_value = dual::composition_left_inverse(rho, ag, *inst.query_xstar,
                                                               *inst.query_s, inst.optimizer);
  } else if (cmd == "dual") {
    auto rep = dual::dual_risk(rho, ag, x, inst.optimizer);
    report.primal = rep.primal;
    report.dual_bound = rep.dual_bound;
    report.gap = rep.gap;
    report.best = rep.best;
    report.checks.push_back({"weak_duality", rep.weak_duality_ok, ""});
    report.checks.push_back({"gap_within_tolerance", rep.gap_ok, ""});
  } else if (cmd == "verify") {
    auto probe = dual::quasiconvexity_probe(dual::primal_functional(rho, ag), ag, inst.space, 500,
                                            inst.optimizer.seed);
    report.checks.push_back({"quasiconvexity",
                             probe.quasiconvexity_violations == 0,
                             std::to_string(probe.quasiconvexity_violations) + " violations"});
    report.checks.push_back({"monotonicity",
                             probe.monotonicity_violations == 0,
                             std::to_string(probe.monotonicity_violations) + " violations"});
    report.checks.push_back({"scalarization_quasiconcavity",
                             probe.scalarization_violations == 0,
                             std::to_string(probe.scalarization_violations) + " violations"});
    if (inst.space->size() <= 3 && ag.dimension() <= 2 && inst.query_xstar && inst.query_m) {
      auto mm = dual::verify_minimax(rho, ag, *inst.query_xstar, *inst.query_m);
      report.checks.push_back({"minimax_grid_equality", mm.minimax_ok,
                               "|sup-inf - inf-sup| = " + detail::fmt12(mm.difference)});
    } else {
      report.checks.push_back({"minimax_grid_equality", true,
                               "skipped: needs |Omega| <= 3, n <= 2 and a query block"});
    }
  } else if (cmd == "selftest") {
    double primal = dual::primal_risk(rho, ag, x);
    report.primal = primal;

    std::mt19937_64 rng(inst.optimizer.seed ^ 0x5e1fULL);
    bool weak_ok = true;
    double worst = -kInf;
    for (int t = 0; t < 200; ++t) {
      auto dv = dual::sample_dual_variables(ag, inst.space, rng);
      double obj = dual::dual_objective(rho, ag, x, dv);
      worst = std::max(worst, obj - primal);
      if (obj > primal + 1e-6) weak_ok = false;
    }
    report.checks.push_back({"weak_duality_sampled", weak_ok, "max objective - primal = " + detail::fmt12(worst)});

    auto probe = dual::quasiconvexity_probe(dual::primal_functional(rho, ag), ag, inst.space, 200,
                                            inst.optimizer.seed);
    report.checks.push_back({"quasiconvexity", probe.quasiconvexity_violations == 0, ""});
    report.checks.push_back({"monotonicity", probe.monotonicity_violations == 0, ""});

    if (ag.kind == agg::AggKind::EisenbergNoe) {
      bool agree = true;
      std::vector<double> row(x.entities());
      for (std::size_t w = 0; w < x.scenarios(); ++w) {
        for (std::size_t i = 0; i < x.entities(); ++i) row[i] = x(w, i);
        auto fp = agg::clearing_fixed_point(*ag.network, row);
        auto sol = agg::clearing_lp(*ag.network, row);
        if (std::abs(fp.lambda_value - sol.lambda_value) > 1e-8) agree = false;
      }
      report.checks.push_back({"clearing_lp_fixed_point_agreement", agree, ""});
    }

    // tabulated closed forms vs their bisected Galois inverses
    if (rho.loss.kind != risk::LossKind::Power) {
      auto q = unit_density(inst.space);
      bool galois_ok = true;
      for (double s : {-2.5, -1.6}) {
        auto direct = risk::penalty_left_inverse_closed_form(rho, q, s);
        if (direct.verdict != Verdict::Ok) continue;
        auto alpha = [&](double m) {
          auto v = risk::penalty_closed_form(rho, q, m);
          return v.verdict == Verdict::Ok ? v.value : 0.0;
        };
        double bis = convex::left_inverse_bisect(alpha, s);
        if (std::abs(bis - direct.value) > 1e-7) galois_ok = false;
      }
      report.checks.push_back({"closed_form_galois", galois_ok, ""});
    }

    // structured report round-trip: parse back and re-emit
    RunReport probe_report = report;
    probe_report.command = "selftest";
    std::string once = emit_report(probe_report, ReportFormat::Structured);
    auto parsed = nlohmann::json::parse(once);
    std::string twice = parsed.dump(2) + "\n";
    report.checks.push_back({"report_round_trip", once == twice, ""});
  } else {
    throw Error(ErrorCode::Parse, "unknown command '" + cmd + "'");
  }

  report.wall_ms = elapsed();
  return report;
}

}  // namespace qrisk::io

#pragma once

#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qrisk/duality_engine.hpp"
#include "qrisk/extended.hpp"

namespace qrisk::io {

struct PropertyCheck {
  std::string name;
  bool pass = false;
  std::string detail;
};

/// Everything a run emits. The structured rendering is byte-reproducible for
/// a fixed instance and seed; wall time therefore only appears in the table
/// rendering.
struct RunReport {
  std::string command;
  std::string instance_path;
  std::uint64_t seed = 0;
  std::optional<double> primal;
  std::optional<double> dual_bound;
  std::optional<double> gap;
  std::optional<dual::DualVariables> best;
  std::optional<double> penalty_value;
  std::optional<double> left_inverse_value;
  std::vector<std::vector<double>> clearing_payments;  // one row per scenario
  std::vector<double> clearing_lambda;
  std::vector<PropertyCheck> checks;
  double wall_ms = 0.0;

  bool all_checks_pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
};

enum class ReportFormat { Structured, Table };

namespace detail {

/// Extended reals as JSON: finite doubles natively (lossless round-trip),
/// +-inf as the documented string tokens.
inline nlohmann::json ext_json(double v) {
  if (v == kInf) return "inf";
  if (v == -kInf) return "-inf";
  return v;
}

inline std::string fmt12(double v) {
  if (v == kInf) return "inf";
  if (v == -kInf) return "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

}  // namespace detail

inline nlohmann::json report_json(const RunReport& r) {
  nlohmann::json j;
  j["command"] = r.command;
  j["instance"] = r.instance_path;
  j["seed"] = r.seed;
  if (r.primal) j["primal"] = detail::ext_json(*r.primal);
  if (r.dual_bound) j["dual_bound"] = detail::ext_json(*r.dual_bound);
  if (r.gap) j["gap"] = detail::ext_json(*r.gap);
  if (r.penalty_value) j["penalty"] = detail::ext_json(*r.penalty_value);
  if (r.left_inverse_value) j["left_inverse"] = detail::ext_json(*r.left_inverse_value);
  if (r.best) {
    nlohmann::json b;
    b["w"] = r.best->w;
    b["lambda"] = r.best->lambda;
    b["q_density"] = r.best->q_density.values();
    nlohmann::json s = nlohmann::json::array();
    for (const auto& d : r.best->s_densities) s.push_back(d.values());
    b["s_densities"] = s;
    j["best_dual"] = b;
  }
  if (!r.clearing_payments.empty()) {
    j["clearing"] = nlohmann::json::array();
    for (std::size_t w = 0; w < r.clearing_payments.size(); ++w) {
      nlohmann::json row;
      row["payments"] = r.clearing_payments[w];
      row["lambda"] = r.clearing_lambda[w];
      j["clearing"].push_back(row);
    }
  }
  j["checks"] = nlohmann::json::array();
  for (const auto& c : r.checks) {
    nlohmann::json cj;
    cj["name"] = c.name;
    cj["pass"] = c.pass;
    cj["detail"] = c.detail;
    j["checks"].push_back(cj);
  }
  return j;
}

/// Deterministic bytes for a report. Structured output is JSON with sorted
/// keys; the table is a fixed-width human view with 12 significant digits.
inline std::string emit_report(const RunReport& r, ReportFormat format) {
  if (format == ReportFormat::Structured) return report_json(r).dump(2) + "\n";

  std::string out;
  auto line = [&out](const std::string& k, const std::string& v) {
    out += k;
    out.append(k.size() < 18 ? 18 - k.size() : 1, ' ');
    out += v;
    out += '\n';
  };
  line("command", r.command);
  line("instance", r.instance_path);
  line("seed", std::to_string(r.seed));
  if (r.primal) line("primal", detail::fmt12(*r.primal));
  if (r.dual_bound) line("dual bound", detail::fmt12(*r.dual_bound));
  if (r.gap) line("gap", detail::fmt12(*r.gap));
  if (r.penalty_value) line("penalty", detail::fmt12(*r.penalty_value));
  if (r.left_inverse_value) line("left inverse", detail::fmt12(*r.left_inverse_value));
  if (r.best) {
    std::string w;
    for (double v : r.best->w) w += detail::fmt12(v) + " ";
    line("best w", w);
    std::string q;
    for (double v : r.best->q_density.values()) q += detail::fmt12(v) + " ";
    line("best dQ/dP", q);
    for (std::size_t i = 0; i < r.best->s_densities.size(); ++i) {
      std::string s;
      for (double v : r.best->s_densities[i].values()) s += detail::fmt12(v) + " ";
      line("best dS" + std::to_string(i + 1) + "/dP", s);
    }
  }
  for (std::size_t w = 0; w < r.clearing_payments.size(); ++w) {
    std::string p;
    for (double v : r.clearing_payments[w]) p += detail::fmt12(v) + " ";
    line("payments[" + std::to_string(w) + "]", p + " | Lambda " + detail::fmt12(r.clearing_lambda[w]));
  }
  for (const auto& c : r.checks)
    line(c.pass ? "check PASS" : "check FAIL", c.name + (c.detail.empty() ? "" : " (" + c.detail + ")"));
  line("wall ms", detail::fmt12(r.wall_ms));
  return out;
}

}  // namespace qrisk::io

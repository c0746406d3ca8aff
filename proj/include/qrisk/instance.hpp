#pragma once

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qrisk/aggregation.hpp"
#include "qrisk/duality_engine.hpp"
#include "qrisk/extended.hpp"
#include "qrisk/prob_core.hpp"
#include "qrisk/risk_measures.hpp"

namespace qrisk::io {

using nlohmann::json;

/// A fully validated run instance: probability space, shock matrix, risk
/// measure, aggregator, optimizer settings, and the optional dual query.
struct InstanceFile {
  SpacePtr space;
  RandomVector shock;
  risk::RiskMeasureSpec risk_measure;
  agg::AggregatorSpec aggregator;
  dual::OptimizerSettings optimizer;
  std::optional<RandomVector> query_xstar;
  std::optional<double> query_m;
  std::optional<double> query_s;

  InstanceFile(SpacePtr sp, RandomVector x, risk::RiskMeasureSpec rm, agg::AggregatorSpec ag)
      : space(std::move(sp)), shock(std::move(x)), risk_measure(rm), aggregator(std::move(ag)) {}
};

namespace detail {

[[noreturn]] inline void fail(const std::string& field, const std::string& what,
                              ErrorCode code = ErrorCode::Parse) {
  throw Error(code, field + ": " + what);
}

inline const json& need(const json& j, const char* key, const std::string& path) {
  auto it = j.find(key);
  if (it == j.end()) fail(path + "." + key, "missing required field");
  return *it;
}

inline double number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  return j.get<double>();
}

inline std::vector<double> number_list(const json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

inline std::vector<std::vector<double>> matrix(const json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected a matrix (array of rows)");
  std::vector<std::vector<double>> out;
  for (std::size_t i = 0; i < j.size(); ++i)
    out.push_back(number_list(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

inline risk::RiskMeasureSpec parse_risk_measure(const json& j) {
  risk::RiskMeasureSpec spec;
  std::string form = need(j, "form", "risk_measure").get<std::string>();
  if (form == "certainty_equivalent")
    spec.form = risk::RiskForm::CertaintyEquivalent;
  else if (form == "economic_index")
    spec.form = risk::RiskForm::EconomicIndex;
  else
    fail("risk_measure.form", "unknown form '" + form + "'", ErrorCode::ParseUnknownKind);

  const json& loss = need(j, "loss", "risk_measure");
  std::string kind = need(loss, "kind", "risk_measure.loss").get<std::string>();
  if (kind == "quadratic")
    spec.loss.kind = risk::LossKind::Quadratic;
  else if (kind == "logarithmic")
    spec.loss.kind = risk::LossKind::Logarithmic;
  else if (kind == "power")
    spec.loss.kind = risk::LossKind::Power;
  else if (kind == "index_logarithmic")
    spec.loss.kind = risk::LossKind::IndexLogarithmic;
  else
    fail("risk_measure.loss.kind", "unknown loss kind '" + kind + "'", ErrorCode::ParseUnknownKind);
  if (loss.contains("gamma")) spec.loss.gamma = number(loss["gamma"], "risk_measure.loss.gamma");
  if (loss.contains("c0")) spec.loss.c0 = number(loss["c0"], "risk_measure.loss.c0");
  try {
    spec.validate();
  } catch (const Error& e) {
    fail("risk_measure", e.what());
  }
  return spec;
}

inline agg::AggregatorSpec parse_aggregator(const json& j, std::size_t n) {
  std::string kind = need(j, "kind", "aggregator").get<std::string>();
  if (kind == "sum") return agg::AggregatorSpec::simple(agg::AggKind::Sum, n);
  if (kind == "total_loss") return agg::AggregatorSpec::simple(agg::AggKind::TotalLoss, n);
  if (kind == "exponential") return agg::AggregatorSpec::simple(agg::AggKind::Exponential, n);
  if (kind == "eisenberg_noe") {
    agg::Network net;
    try {
      net = agg::Network::from_liabilities(
          matrix(need(j, "liabilities", "aggregator"), "aggregator.liabilities"));
    } catch (const Error& e) {
      if (e.code() == ErrorCode::Parse) throw;
      fail("aggregator.liabilities", e.what(), ErrorCode::ParseNetwork);
    }
    if (net.n != n)
      fail("aggregator.liabilities", "network size does not match the shock width",
           ErrorCode::ParseNetwork);
    return agg::AggregatorSpec::eisenberg_noe(std::move(net));
  }
  fail("aggregator.kind", "unknown aggregator kind '" + kind + "'", ErrorCode::ParseUnknownKind);
}

}  // namespace detail

inline InstanceFile parse_instance_json(const json& j) {
  using detail::fail;
  using detail::need;

  const json& space_j = need(j, "space", "instance");
  std::vector<double> probs = detail::number_list(need(space_j, "probs", "space"), "space.probs");
  SpacePtr space;
  try {
    space = make_space(probs);
  } catch (const Error& e) {
    fail("space.probs", e.what(), ErrorCode::ParseProbability);
  }

  auto shock_rows = detail::matrix(need(j, "shock", "instance"), "shock");
  if (shock_rows.size() != space->size()) fail("shock", "row count must equal the number of scenarios");
  std::size_t n = shock_rows.front().size();
  if (n == 0) fail("shock", "needs at least one entity column");
  std::vector<double> flat;
  for (std::size_t w = 0; w < shock_rows.size(); ++w) {
    if (shock_rows[w].size() != n) fail("shock", "ragged rows");
    for (double v : shock_rows[w]) flat.push_back(v);
  }
  RandomVector shock(space, n, std::move(flat));

  auto rm = detail::parse_risk_measure(need(j, "risk_measure", "instance"));
  auto ag = detail::parse_aggregator(need(j, "aggregator", "instance"), n);
  if (ag.nonneg_domain())
    for (double v : shock.values())
      if (v < 0.0) fail("shock", "Eisenberg-Noe shocks must be nonnegative");

  InstanceFile inst(space, std::move(shock), rm, std::move(ag));

  if (j.contains("optimizer")) {
    const json& opt = j["optimizer"];
    if (opt.contains("starts")) inst.optimizer.starts = opt["starts"].get<int>();
    if (opt.contains("iterations")) inst.optimizer.iterations = opt["iterations"].get<int>();
    if (opt.contains("seed")) inst.optimizer.seed = opt["seed"].get<std::uint64_t>();
    if (opt.contains("gap_abs")) inst.optimizer.gap_abs = detail::number(opt["gap_abs"], "optimizer.gap_abs");
    if (opt.contains("gap_rel")) inst.optimizer.gap_rel = detail::number(opt["gap_rel"], "optimizer.gap_rel");
    if (inst.optimizer.starts <= 0 || inst.optimizer.iterations <= 0)
      fail("optimizer", "starts and iterations must be positive");
  }

  if (j.contains("query")) {
    const json& q = j["query"];
    if (q.contains("xstar")) {
      auto rows = detail::matrix(q["xstar"], "query.xstar");
      if (rows.size() != space->size()) fail("query.xstar", "row count must equal the number of scenarios");
      std::vector<double> qflat;
      for (const auto& r : rows) {
        if (r.size() != n) fail("query.xstar", "ragged rows");
        for (double v : r) qflat.push_back(v);
      }
      inst.query_xstar = RandomVector(space, n, std::move(qflat));
    }
    if (q.contains("m")) inst.query_m = detail::number(q["m"], "query.m");
    if (q.contains("s")) inst.query_s = detail::number(q["s"], "query.s");
  }
  return inst;
}

inline InstanceFile parse_instance(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Parse, "cannot open instance file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("invalid JSON: ") + e.what());
  }
  return parse_instance_json(j);
}

}  // namespace qrisk::io

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "qrisk/commands.hpp"
#include "qrisk/instance.hpp"
#include "qrisk/report.hpp"

using namespace qrisk;
using namespace qrisk::io;

namespace {

const std::string kRoot = QRISK_SOURCE_DIR;

json minimal_instance() {
  return json::parse(R"({
    "space": {"probs": [1.0]},
    "shock": [[0.5, 0.5]],
    "risk_measure": {"form": "certainty_equivalent", "loss": {"kind": "quadratic"}},
    "aggregator": {"kind": "sum"}
  })");
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("parse_instance accepts the minimal instance") {
  auto inst = parse_instance_json(minimal_instance());
  CHECK(inst.space->size() == 1);
  CHECK(inst.shock.entities() == 2);
  CHECK(inst.risk_measure.loss.kind == risk::LossKind::Quadratic);
  CHECK(inst.aggregator.kind == agg::AggKind::Sum);
  CHECK(inst.optimizer.starts == 20);  // defaults
  CHECK(inst.optimizer.seed == 0);
}

TEST_CASE("parse errors carry field-anchored messages") {
  SECTION("probabilities must sum to 1") {
    auto j = minimal_instance();
    j["space"]["probs"] = {0.5, 0.6};
    j["shock"] = {{0.5, 0.5}, {0.5, 0.5}};
    try {
      parse_instance_json(j);
      FAIL("expected a parse error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ParseProbability);
      CHECK(std::string(e.what()).find("sum to 1") != std::string::npos);
    }
  }

  SECTION("unknown risk measure kind") {
    auto j = minimal_instance();
    j["risk_measure"]["loss"]["kind"] = "entropic";
    try {
      parse_instance_json(j);
      FAIL("expected a parse error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ParseUnknownKind);
      CHECK(std::string(e.what()).find("loss.kind") != std::string::npos);
    }
  }

  SECTION("Eisenberg-Noe network without society liability") {
    auto j = minimal_instance();
    j["aggregator"] = {{"kind", "eisenberg_noe"},
                       {"liabilities", {{0.0, 0.0, 0.0}, {0.0, 0.0, 1.0}, {1.0, 1.0, 0.0}}}};
    try {
      parse_instance_json(j);
      FAIL("expected a parse error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ParseNetwork);
      CHECK(std::string(e.what()).find("society") != std::string::npos);
    }
  }

  SECTION("negative shock under Eisenberg-Noe") {
    auto j = minimal_instance();
    j["aggregator"] = {{"kind", "eisenberg_noe"},
                       {"liabilities", {{0.0, 0.0, 0.0}, {1.0, 0.0, 1.0}, {1.0, 1.0, 0.0}}}};
    j["shock"] = {{-0.5, 0.5}};
    CHECK_THROWS_AS(parse_instance_json(j), Error);
  }

  SECTION("shock row count mismatch") {
    auto j = minimal_instance();
    j["shock"] = {{0.5, 0.5}, {0.1, 0.1}};
    CHECK_THROWS_AS(parse_instance_json(j), Error);
  }
}

TEST_CASE("all shipped instances parse") {
  for (const auto& entry : std::filesystem::directory_iterator(kRoot + "/instances")) {
    INFO(entry.path().string());
    CHECK_NOTHROW(parse_instance(entry.path().string()));
  }
}

TEST_CASE("run_command clear on the two-bank cycle") {
  auto inst = parse_instance(kRoot + "/instances/en_two_bank_log.json");
  auto report = run_command("clear", inst, "en_two_bank_log.json");
  REQUIRE(report.clearing_payments.size() == 1);
  CHECK_THAT(report.clearing_payments[0][0], Catch::Matchers::WithinAbs(4.0 / 3.0, 1e-10));
  CHECK_THAT(report.clearing_payments[0][1], Catch::Matchers::WithinAbs(2.0 / 3.0, 1e-10));
  CHECK_THAT(report.clearing_lambda[0], Catch::Matchers::WithinAbs(1.0, 1e-10));
}

TEST_CASE("run_command evaluate") {
  auto inst = parse_instance(kRoot + "/instances/sum_log_deterministic.json");
  auto report = run_command("evaluate", inst);
  REQUIRE(report.primal.has_value());
  CHECK_THAT(*report.primal, Catch::Matchers::WithinAbs(-5.0, 1e-12));
}

TEST_CASE("run_command rejects unusable combinations") {
  auto inst = parse_instance_json(minimal_instance());
  CHECK_THROWS_AS(run_command("clear", inst), Error);        // not an EN instance
  CHECK_THROWS_AS(run_command("penalty", inst), Error);      // no query block
  CHECK_THROWS_AS(run_command("left-inverse", inst), Error);
  CHECK_THROWS_AS(run_command("frobnicate", inst), Error);
}

TEST_CASE("structured reports are deterministic for a fixed seed") {
  auto inst = parse_instance(kRoot + "/instances/total_loss_quadratic_zero.json");
  inst.optimizer.starts = 4;
  inst.optimizer.iterations = 60;
  auto r1 = run_command("dual", inst, "i");
  auto r2 = run_command("dual", inst, "i");
  CHECK(emit_report(r1, ReportFormat::Structured) == emit_report(r2, ReportFormat::Structured));
}

TEST_CASE("report rendering") {
  RunReport r;
  r.command = "evaluate";
  r.instance_path = "x.json";
  r.primal = kInf;

  SECTION("infinities render as tokens") {
    auto j = report_json(r);
    CHECK(j["primal"] == "inf");
    r.primal = -kInf;
    CHECK(report_json(r)["primal"] == "-inf");
  }

  SECTION("empty check list is a valid document") {
    auto bytes = emit_report(r, ReportFormat::Structured);
    auto parsed = json::parse(bytes);
    CHECK(parsed["checks"].is_array());
    CHECK(parsed["checks"].empty());
  }

  SECTION("table renders 12 significant digits") {
    r.primal = 1.0 / 3.0;
    auto table = emit_report(r, ReportFormat::Table);
    CHECK(table.find("0.333333333333") != std::string::npos);
  }

  SECTION("structured round-trip is lossless bit for bit") {
    r.primal = 0.1 + 0.2;  // not exactly representable decimal
    auto j = report_json(r);
    double back = j["primal"].get<double>();
    CHECK(back == *r.primal);
  }
}

TEST_CASE("golden file: clear on the two-bank cycle") {
  auto inst = parse_instance(kRoot + "/instances/en_two_bank_log.json");
  auto report = run_command("clear", inst, "instances/en_two_bank_log.json");
  auto bytes = emit_report(report, ReportFormat::Structured);
  auto golden = slurp(kRoot + "/tests/golden/clear_two_bank.json");
  CHECK(bytes == golden);
}

TEST_CASE("selftest command passes on a small instance") {
  auto inst = parse_instance(kRoot + "/instances/en_two_bank_log.json");
  auto report = run_command("selftest", inst);
  for (const auto& c : report.checks) {
    INFO(c.name << " " << c.detail);
    CHECK(c.pass);
  }
}

TEST_CASE("verify command runs the probes") {
  auto inst = parse_instance(kRoot + "/instances/sum_log_deterministic.json");
  auto report = run_command("verify", inst);
  CHECK(report.all_checks_pass());
  bool saw_minimax = false;
  for (const auto& c : report.checks)
    if (c.name == "minimax_grid_equality") saw_minimax = true;
  CHECK(saw_minimax);
}

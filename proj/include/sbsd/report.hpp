#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "sbsd/speculator.hpp"

namespace sbsd::report {

using speculator::PredictionMetrics;

// One program run under one predictor configuration.
struct Row {
  std::string program;
  std::string kind;
  std::string config;  // "full", "no_pc", "no_gpr", "no_mem", "abstain", "cap<N>"
  unsigned p = 1;
  unsigned capacity = 0;
  std::uint64_t instructions = 0;
  std::uint64_t single_cycles = 0;
  std::uint64_t cycles = 0;
  double cpi_single = 0;
  double cpi = 0;
  double speedup = 0;
  double run_coverage = 0;  // share of instructions issued early via a prediction
  std::array<PredictionMetrics, 3> metrics{};
  std::array<std::uint64_t, 4> stalls{};  // gpr_raw, mem_raw, control, structural
  std::string equivalence = "ok";         // "ok", or the diffs / error text

  friend bool operator==(const Row&, const Row&) = default;
};

struct SweepPoint {
  unsigned capacity = 0;
  std::array<double, 3> reusability{};
  std::array<PredictionMetrics, 3> metrics{};  // summed over the suite
  std::uint64_t cycles = 0;                    // summed over the suite
  std::uint64_t instructions = 0;

  double coverage() const;  // all targets pooled
  double cpi() const { return instructions == 0 ? 0.0 : static_cast<double>(cycles) / static_cast<double>(instructions); }
  friend bool operator==(const SweepPoint&, const SweepPoint&) = default;
};

struct Report {
  nlohmann::json config;
  std::vector<Row> rows;
  std::vector<SweepPoint> sweep;
  std::array<std::vector<double>, 3> anneal_best;  // best energy per iteration, per target

  friend bool operator==(const Report&, const Report&) = default;
};

// Shortest round-trip decimal; integral values keep a ".0".
std::string format_double(double v);

std::vector<std::string> csv_header();
void write_csv(std::ostream& os, const Report& r);
nlohmann::json to_json(const Report& r);
Report report_from_json(const nlohmann::json& j);

// Throws IoFailure.
void export_csv(const std::string& path, const Report& r);
void export_json(const std::string& path, const Report& r);

}  // namespace sbsd::report

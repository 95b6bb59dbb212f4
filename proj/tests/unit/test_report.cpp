#include <doctest.h>

#include <sstream>

#include "sbsd/error.hpp"
#include "sbsd/report.hpp"

using namespace sbsd;
using namespace sbsd::report;

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  for (std::string cell; std::getline(ss, cell, ',');) out.push_back(cell);
  return out;
}

Report sample() {
  Report r;
  r.config = {{"seed", 3}};
  Row row;
  row.program = "fib_0";
  row.kind = "fib";
  row.config = "full";
  row.p = 2;
  row.instructions = 100;
  row.single_cycles = 120;
  row.cycles = 80;
  row.cpi_single = 1.2;
  row.cpi = 0.8;
  row.speedup = 1.5;
  row.run_coverage = 0.25;
  row.metrics[1] = {30, 0, 5, 10};
  row.stalls = {4, 0, 7, 1};
  r.rows.push_back(row);
  row.config = "no_gpr";
  row.metrics[1] = {};
  row.equivalence = "r1: 2 vs 3, pc";
  r.rows.push_back(row);
  SweepPoint sp;
  sp.capacity = 4;
  sp.reusability = {0.5, 0.75, 0.0};
  sp.metrics[0] = {3, 0, 1, 0};
  sp.cycles = 10;
  sp.instructions = 20;
  r.sweep.push_back(sp);
  r.anneal_best = {std::vector<double>{1.0, 0.5}, {}, {0.25}};
  return r;
}

}  // namespace

TEST_CASE("format_double") {
  CHECK(format_double(1.0) == "1.0");
  CHECK(format_double(0.0) == "0.0");
  CHECK(format_double(0.75) == "0.75");
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1.0 / 3.0) == "0.3333333333333333");
  CHECK(format_double(1e21) == "1e+21");
}

TEST_CASE("CSV layout") {
  std::ostringstream empty;
  write_csv(empty, Report{});
  const auto header = csv_header();
  CHECK(empty.str() == [&] {
    std::string s;
    for (std::size_t i = 0; i < header.size(); ++i) s += (i ? "," : "") + header[i];
    return s + "\n";
  }());

  std::ostringstream os;
  write_csv(os, sample());
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  std::getline(in, line);
  const auto cells = split(line);
  REQUIRE(cells.size() == header.size());
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i].ends_with("_precision")) CHECK(cells[i] == "1.0");
    if (header[i] == "gpr_coverage") CHECK(cells[i] == "0.6666666666666666");
    if (header[i] == "gpr_recall") CHECK(cells[i] == "0.75");
    if (header[i] == "speedup") CHECK(cells[i] == "1.5");
  }
  // Commas inside a field are quoted.
  std::getline(in, line);
  CHECK(line.ends_with("\"r1: 2 vs 3, pc\""));
}

TEST_CASE("report JSON round trip") {
  const Report r = sample();
  const Report back = report_from_json(nlohmann::json::parse(to_json(r).dump()));
  CHECK(back == r);
  CHECK(back.sweep[0].coverage() == 0.75);
  CHECK(back.sweep[0].cpi() == 0.5);
  CHECK_THROWS_AS(report_from_json(nlohmann::json{{"rows", 3}}), Error);
  CHECK_THROWS_AS(export_json("/nonexistent-dir/x.json", r), Error);
}

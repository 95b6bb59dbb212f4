#include "sbsd/report.hpp"

#include <charconv>
#include <fstream>
#include <ostream>

#include "sbsd/error.hpp"

namespace sbsd::report {

using nlohmann::json;

double SweepPoint::coverage() const {
  PredictionMetrics all;
  for (const auto& m : metrics) all += m;
  return all.coverage();
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, res.ptr);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

namespace {

constexpr const char* kTargetNames[] = {"pc", "gpr", "mem"};
constexpr const char* kStallNames[] = {"gpr_raw", "mem_raw", "control", "structural"};

json metrics_json(const PredictionMetrics& m) { return {{"tp", m.tp}, {"fp", m.fp}, {"tn", m.tn}, {"fn", m.fn}}; }

PredictionMetrics metrics_from(const json& j) {
  return {j.at("tp").get<std::uint64_t>(), j.at("fp").get<std::uint64_t>(), j.at("tn").get<std::uint64_t>(),
          j.at("fn").get<std::uint64_t>()};
}

}  // namespace

std::vector<std::string> csv_header() {
  std::vector<std::string> h = {"program", "kind",       "config", "p",         "capacity",     "instructions",
                                "single_cycles", "cycles", "cpi_single", "cpi", "speedup", "run_coverage"};
  for (const char* t : kTargetNames) {
    for (const char* f : {"coverage", "precision", "recall"}) h.push_back(std::string(t) + "_" + f);
  }
  for (const char* s : kStallNames) h.push_back(std::string("stall_") + s);
  h.push_back("equivalence");
  return h;
}

void write_csv(std::ostream& os, const Report& r) {
  const auto header = csv_header();
  for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
  os << '\n';
  const auto quote = [](const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  };
  for (const auto& row : r.rows) {
    os << quote(row.program) << ',' << row.kind << ',' << row.config << ',' << row.p << ',' << row.capacity << ','
       << row.instructions << ',' << row.single_cycles << ',' << row.cycles << ',' << format_double(row.cpi_single)
       << ',' << format_double(row.cpi) << ',' << format_double(row.speedup) << ','
       << format_double(row.run_coverage);
    for (const auto& m : row.metrics) {
      os << ',' << format_double(m.coverage()) << ',' << format_double(m.precision()) << ','
         << format_double(m.recall());
    }
    for (auto s : row.stalls) os << ',' << s;
    os << ',' << quote(row.equivalence) << '\n';
  }
}

json to_json(const Report& r) {
  json rows = json::array();
  for (const auto& row : r.rows) {
    json metrics = json::object();
    for (std::size_t t = 0; t < 3; ++t) metrics[kTargetNames[t]] = metrics_json(row.metrics[t]);
    json stalls = json::object();
    for (std::size_t s = 0; s < 4; ++s) stalls[kStallNames[s]] = row.stalls[s];
    rows.push_back({{"program", row.program},
                    {"kind", row.kind},
                    {"config", row.config},
                    {"p", row.p},
                    {"capacity", row.capacity},
                    {"instructions", row.instructions},
                    {"single_cycles", row.single_cycles},
                    {"cycles", row.cycles},
                    {"cpi_single", row.cpi_single},
                    {"cpi", row.cpi},
                    {"speedup", row.speedup},
                    {"run_coverage", row.run_coverage},
                    {"metrics", metrics},
                    {"stalls", stalls},
                    {"equivalence", row.equivalence}});
  }
  json sweep = json::array();
  for (const auto& pt : r.sweep) {
    json reuse = json::object(), metrics = json::object();
    for (std::size_t t = 0; t < 3; ++t) {
      reuse[kTargetNames[t]] = pt.reusability[t];
      metrics[kTargetNames[t]] = metrics_json(pt.metrics[t]);
    }
    sweep.push_back({{"capacity", pt.capacity},
                     {"reusability", reuse},
                     {"metrics", metrics},
                     {"cycles", pt.cycles},
                     {"instructions", pt.instructions},
                     {"coverage", pt.coverage()},
                     {"cpi", pt.cpi()}});
  }
  json anneal = json::object();
  for (std::size_t t = 0; t < 3; ++t) anneal[kTargetNames[t]] = r.anneal_best[t];
  return {{"config", r.config}, {"rows", rows}, {"sweep", sweep}, {"anneal_best_energy", anneal}};
}

Report report_from_json(const json& j) {
  try {
    Report r;
    r.config = j.at("config");
    for (const auto& jr : j.at("rows")) {
      Row row;
      row.program = jr.at("program").get<std::string>();
      row.kind = jr.at("kind").get<std::string>();
      row.config = jr.at("config").get<std::string>();
      row.p = jr.at("p").get<unsigned>();
      row.capacity = jr.at("capacity").get<unsigned>();
      row.instructions = jr.at("instructions").get<std::uint64_t>();
      row.single_cycles = jr.at("single_cycles").get<std::uint64_t>();
      row.cycles = jr.at("cycles").get<std::uint64_t>();
      row.cpi_single = jr.at("cpi_single").get<double>();
      row.cpi = jr.at("cpi").get<double>();
      row.speedup = jr.at("speedup").get<double>();
      row.run_coverage = jr.at("run_coverage").get<double>();
      for (std::size_t t = 0; t < 3; ++t) row.metrics[t] = metrics_from(jr.at("metrics").at(kTargetNames[t]));
      for (std::size_t s = 0; s < 4; ++s) row.stalls[s] = jr.at("stalls").at(kStallNames[s]).get<std::uint64_t>();
      row.equivalence = jr.at("equivalence").get<std::string>();
      r.rows.push_back(std::move(row));
    }
    for (const auto& js : j.at("sweep")) {
      SweepPoint pt;
      pt.capacity = js.at("capacity").get<unsigned>();
      for (std::size_t t = 0; t < 3; ++t) {
        pt.reusability[t] = js.at("reusability").at(kTargetNames[t]).get<double>();
        pt.metrics[t] = metrics_from(js.at("metrics").at(kTargetNames[t]));
      }
      pt.cycles = js.at("cycles").get<std::uint64_t>();
      pt.instructions = js.at("instructions").get<std::uint64_t>();
      r.sweep.push_back(pt);
    }
    for (std::size_t t = 0; t < 3; ++t) {
      r.anneal_best[t] = j.at("anneal_best_energy").at(kTargetNames[t]).get<std::vector<double>>();
    }
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedArtifact, e.what());
  }
}

void export_csv(const std::string& path, const Report& r) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::IoFailure, "cannot write " + path);
  write_csv(os, r);
  if (!os) throw Error(ErrorCode::IoFailure, "write failed: " + path);
}

void export_json(const std::string& path, const Report& r) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::IoFailure, "cannot write " + path);
  os << to_json(r).dump(1) << '\n';
  if (!os) throw Error(ErrorCode::IoFailure, "write failed: " + path);
}

}  // namespace sbsd::report

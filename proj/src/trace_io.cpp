#include "sbsd/trace_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "sbsd/assembler.hpp"
#include "sbsd/error.hpp"

namespace sbsd::isa {

using nlohmann::json;

std::string trace_record_to_json(const TraceRecord& rec) {
  char hex[5];
  std::snprintf(hex, sizeof hex, "%04x", rec.inst.bits);
  json j;
  j["step"] = rec.step;
  j["pc"] = rec.pc_before;
  j["inst"] = hex;
  j["rw"] = rec.reg_write ? json::array({rec.reg_write->first, rec.reg_write->second}) : json(nullptr);
  j["mw"] = rec.mem_write ? json::array({rec.mem_write->first, rec.mem_write->second}) : json(nullptr);
  j["npc"] = rec.next_pc;
  j["lat"] = rec.latency;
  return j.dump();
}

TraceRecord trace_record_from_json(const std::string& line) {
  try {
    const json j = json::parse(line);
    TraceRecord rec;
    rec.step = j.at("step").get<std::uint64_t>();
    rec.pc_before = j.at("pc").get<Word>();
    const std::string hex = j.at("inst").get<std::string>();
    if (hex.size() != 4) throw Error(ErrorCode::CorruptTrace, "inst must be 4 hex digits");
    rec.inst.bits = static_cast<std::uint16_t>(std::stoul(hex, nullptr, 16));
    if (!j.at("rw").is_null()) {
      rec.reg_write = std::make_pair(j.at("rw").at(0).get<std::uint8_t>(), j.at("rw").at(1).get<Word>());
    }
    if (!j.at("mw").is_null()) {
      rec.mem_write = std::make_pair(j.at("mw").at(0).get<Word>(), j.at("mw").at(1).get<Word>());
    }
    rec.next_pc = j.at("npc").get<Word>();
    rec.latency = j.at("lat").get<unsigned>();
    return rec;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptTrace, e.what());
  } catch (const std::invalid_argument& e) {
    throw Error(ErrorCode::CorruptTrace, e.what());
  }
}

void write_trace(std::ostream& os, const std::vector<TraceRecord>& trace) {
  for (const auto& rec : trace) os << trace_record_to_json(rec) << '\n';
}

std::vector<TraceRecord> read_trace(std::istream& is) {
  std::vector<TraceRecord> out;
  for (std::string line; std::getline(is, line);) {
    if (line.empty()) continue;
    out.push_back(trace_record_from_json(line));
  }
  return out;
}

void save_trace(const std::string& path, const std::vector<TraceRecord>& trace) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::IoFailure, "cannot write " + path);
  write_trace(os, trace);
}

std::vector<TraceRecord> load_trace(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::IoFailure, "cannot read " + path);
  return read_trace(is);
}

Program load_program(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::IoFailure, "cannot read " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return assemble(ss.str());
}

void save_program(const std::string& path, const Program& p) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::IoFailure, "cannot write " + path);
  os << to_assembly(p);
}

}  // namespace sbsd::isa

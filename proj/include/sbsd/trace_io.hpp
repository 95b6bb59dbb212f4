#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "sbsd/isa.hpp"

namespace sbsd::isa {

// JSON-lines trace: {"step","pc","inst":"6205","rw":[idx,val]|null,"mw":[addr,val]|null,"npc","lat"}
std::string trace_record_to_json(const TraceRecord& rec);
TraceRecord trace_record_from_json(const std::string& line);

void write_trace(std::ostream& os, const std::vector<TraceRecord>& trace);
std::vector<TraceRecord> read_trace(std::istream& is);

void save_trace(const std::string& path, const std::vector<TraceRecord>& trace);
std::vector<TraceRecord> load_trace(const std::string& path);

Program load_program(const std::string& path);
void save_program(const std::string& path, const Program& p);

}  // namespace sbsd::isa

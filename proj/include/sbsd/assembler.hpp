#pragma once

// Assembly text for MiniRV-16.
//
//   ; comment
//   loop:  ADDI r1, r1, -1
//          LW   r2, 3(r1)
//          BNE  r1, r0, loop
//          HALT
//   .data 16 42
//
// Branch and JAL targets are either labels or signed pc-relative offsets.

#include <string>
#include <string_view>

#include "sbsd/isa.hpp"

namespace sbsd::isa {

Program assemble(std::string_view source);

// Emits text that assembles back to an identical Program (numeric offsets).
std::string to_assembly(const Program& p);

}  // namespace sbsd::isa

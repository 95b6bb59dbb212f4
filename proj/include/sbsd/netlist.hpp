#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sbsd/bsd.hpp"

namespace sbsd::bsd {

enum class GateKind { Const0, Const1, Mux };

// Mux: out = input[select] ? hi : lo, where lo/hi index earlier gates.
struct Gate {
  GateKind kind = GateKind::Const0;
  unsigned select = 0;
  std::uint32_t lo = 0;
  std::uint32_t hi = 0;
};

struct Netlist {
  unsigned inputs = 0;
  std::vector<Gate> gates;  // topologically ordered; the last gate drives the output

  std::size_t mux_count() const;
  bool simulate(std::uint32_t input) const;
  std::string to_blif(const std::string& model = "bsd") const;
};

// One mux per decision node and one constant per leaf.
Netlist to_netlist(const Bsd& b);

}  // namespace sbsd::bsd

#include "sbsd/netlist.hpp"

#include <algorithm>
#include <sstream>

namespace sbsd::bsd {

std::size_t Netlist::mux_count() const {
  return static_cast<std::size_t>(
      std::count_if(gates.begin(), gates.end(), [](const Gate& g) { return g.kind == GateKind::Mux; }));
}

bool Netlist::simulate(std::uint32_t input) const {
  std::vector<std::uint8_t> value(gates.size(), 0);
  for (std::size_t i = 0; i < gates.size(); ++i) {
    const Gate& g = gates[i];
    switch (g.kind) {
      case GateKind::Const0: value[i] = 0; break;
      case GateKind::Const1: value[i] = 1; break;
      case GateKind::Mux: value[i] = ((input >> g.select) & 1u) ? value[g.hi] : value[g.lo]; break;
    }
  }
  return !value.empty() && value.back();
}

std::string Netlist::to_blif(const std::string& model) const {
  std::ostringstream os;
  os << ".model " << model << "\n.inputs";
  for (unsigned i = 0; i < inputs; ++i) os << " x" << i;
  os << "\n.outputs y\n";
  const auto name = [&](std::size_t i) { return i + 1 == gates.size() ? std::string("y") : "n" + std::to_string(i); };
  for (std::size_t i = 0; i < gates.size(); ++i) {
    const Gate& g = gates[i];
    switch (g.kind) {
      case GateKind::Const0: os << ".names " << name(i) << "\n"; break;
      case GateKind::Const1: os << ".names " << name(i) << "\n1\n"; break;
      case GateKind::Mux:
        os << ".names x" << g.select << ' ' << name(g.lo) << ' ' << name(g.hi) << ' ' << name(i) << "\n01- 1\n1-1 1\n";
        break;
    }
  }
  os << ".end\n";
  return os.str();
}

Netlist to_netlist(const Bsd& b) {
  Netlist n;
  n.inputs = b.input_width();
  const auto& nodes = b.nodes();
  std::vector<std::int64_t> gate_of(nodes.size(), -1);
  // Post-order DFS so children precede parents; shared nodes map to one gate.
  std::vector<std::pair<NodeRef, bool>> stack{{b.root(), false}};
  while (!stack.empty()) {
    auto [node, children_done] = stack.back();
    stack.pop_back();
    if (gate_of[node] >= 0) continue;
    if (const auto* d = std::get_if<Decision>(&nodes[node])) {
      if (!children_done) {
        stack.emplace_back(node, true);
        stack.emplace_back(d->hi, false);
        stack.emplace_back(d->lo, false);
        continue;
      }
      n.gates.push_back({GateKind::Mux, d->var, static_cast<std::uint32_t>(gate_of[d->lo]),
                         static_cast<std::uint32_t>(gate_of[d->hi])});
    } else {
      const auto& s = std::get<Speculation>(nodes[node]);
      n.gates.push_back({s.guess ? GateKind::Const1 : GateKind::Const0, 0, 0, 0});
    }
    gate_of[node] = static_cast<std::int64_t>(n.gates.size() - 1);
  }
  return n;
}

}  // namespace sbsd::bsd

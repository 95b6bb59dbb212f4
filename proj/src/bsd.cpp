#include "sbsd/bsd.hpp"

#include <algorithm>
#include <set>
#include <tuple>
#include <unordered_map>

namespace sbsd::bsd {

using nlohmann::json;

ExampleSet::ExampleSet(unsigned width) : width_(width) {
  if (width > kMaxWidth) throw Error(ErrorCode::WidthMismatch, "width above 32");
}

void ExampleSet::add(std::uint32_t input, bool output) {
  if (width_ < 32 && (input >> width_) != 0) throw Error(ErrorCode::WidthMismatch, "input wider than set");
  rows_.push_back({input, static_cast<std::uint8_t>(output)});
}

void ExampleSet::add(const BitVector& input, bool output) {
  if (input.width != width_) throw Error(ErrorCode::WidthMismatch, "example width");
  add(input.bits, output);
}

bool ExampleSet::consistent() const {
  std::unordered_map<std::uint32_t, std::uint8_t> seen;
  for (const auto& r : rows_) {
    auto [it, fresh] = seen.emplace(r.input, r.output);
    if (!fresh && it->second != r.output) return false;
  }
  return true;
}

namespace {

std::uint8_t majority(std::uint64_t zeros, std::uint64_t ones) { return ones > zeros ? 1 : 0; }

}  // namespace

Bsd::Bsd(unsigned input_width, std::uint8_t guess) : width_(input_width) {
  if (input_width > kMaxWidth) throw Error(ErrorCode::WidthMismatch, "width above 32");
  nodes_.push_back(Speculation{guess, false, 0, 0});
}

Bsd Bsd::new_root(const ExampleSet& examples) {
  if (examples.empty()) throw Error(ErrorCode::EmptyExamples, "new_root");
  std::uint64_t ones = 0;
  for (const auto& r : examples.rows()) ones += r.output;
  const std::uint64_t zeros = examples.size() - ones;
  const std::uint8_t g = majority(zeros, ones);
  Bsd b(examples.width(), g);
  auto& root = b.leaf_mut(0);
  root.seen = examples.size();
  root.matching = g ? ones : zeros;
  return b;
}

Bsd Bsd::from_nodes(unsigned input_width, std::vector<Node> nodes) {
  const auto bad = [](const std::string& why) { throw Error(ErrorCode::MalformedArtifact, why); };
  if (input_width > kMaxWidth) bad("width above 32");
  if (nodes.empty()) bad("no nodes");
  const auto n = nodes.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (const auto* d = std::get_if<Decision>(&nodes[i])) {
      if (d->lo >= n || d->hi >= n) bad("node " + std::to_string(i) + " child ref out of range");
      if (d->var >= input_width) bad("node " + std::to_string(i) + " var out of range");
    }
  }
  // Iterative DFS with colors: 0 unvisited, 1 on stack, 2 done.
  std::vector<std::uint8_t> color(n, 0);
  std::vector<std::pair<NodeRef, int>> stack{{0, 0}};
  color[0] = 1;
  while (!stack.empty()) {
    auto& [node, child] = stack.back();
    const auto* d = std::get_if<Decision>(&nodes[node]);
    if (!d || child == 2) {
      color[node] = 2;
      stack.pop_back();
      continue;
    }
    const NodeRef next = child == 0 ? d->lo : d->hi;
    ++child;
    if (color[next] == 1) bad("cycle through node " + std::to_string(next));
    if (color[next] == 0) {
      color[next] = 1;
      stack.emplace_back(next, 0);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (color[i] != 2) bad("node " + std::to_string(i) + " unreachable from root");
  }
  Bsd b(input_width);
  b.nodes_ = std::move(nodes);
  return b;
}

bool Bsd::is_leaf(NodeRef n) const { return std::holds_alternative<Speculation>(nodes_.at(n)); }

const Speculation& Bsd::leaf(NodeRef n) const {
  if (!is_leaf(n)) throw Error(ErrorCode::NotALeaf, "node " + std::to_string(n));
  return std::get<Speculation>(nodes_[n]);
}

Speculation& Bsd::leaf_mut(NodeRef n) {
  if (!is_leaf(n)) throw Error(ErrorCode::NotALeaf, "node " + std::to_string(n));
  return std::get<Speculation>(nodes_[n]);
}

const Decision& Bsd::decision(NodeRef n) const {
  if (is_leaf(n)) throw Error(ErrorCode::Precondition, "node " + std::to_string(n) + " is a leaf");
  return std::get<Decision>(nodes_[n]);
}

std::size_t Bsd::decision_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return std::holds_alternative<Decision>(n); }));
}

std::size_t Bsd::leaf_count() const { return nodes_.size() - decision_count(); }

NodeRef Bsd::reach(std::uint32_t input) const {
  NodeRef n = 0;
  while (const auto* d = std::get_if<Decision>(&nodes_[n])) n = ((input >> d->var) & 1u) ? d->hi : d->lo;
  return n;
}

std::pair<bool, NodeRef> Bsd::evaluate(const BitVector& x) const {
  if (x.width != width_) {
    throw Error(ErrorCode::WidthMismatch, "input width " + std::to_string(x.width) + " vs " + std::to_string(width_));
  }
  const NodeRef n = reach(x.bits);
  return {std::get<Speculation>(nodes_[n]).guess != 0, n};
}

std::uint64_t Bsd::vars_above(NodeRef target) const {
  // Union over all root-to-target paths; the diagram is acyclic.
  std::vector<std::uint64_t> mask(nodes_.size(), 0);
  std::vector<bool> reached(nodes_.size(), false);
  std::vector<NodeRef> order;
  {
    // Topological order by DFS post-order, reversed.
    std::vector<std::uint8_t> state(nodes_.size(), 0);
    std::vector<std::pair<NodeRef, int>> stack{{0, 0}};
    state[0] = 1;
    while (!stack.empty()) {
      auto& [node, child] = stack.back();
      const auto* d = std::get_if<Decision>(&nodes_[node]);
      if (!d || child == 2) {
        order.push_back(node);
        stack.pop_back();
        continue;
      }
      const NodeRef next = child == 0 ? d->lo : d->hi;
      ++child;
      if (state[next] == 0) {
        state[next] = 1;
        stack.emplace_back(next, 0);
      }
    }
    std::reverse(order.begin(), order.end());
  }
  reached[0] = true;
  for (NodeRef node : order) {
    if (!reached[node]) continue;
    if (const auto* d = std::get_if<Decision>(&nodes_[node])) {
      const std::uint64_t m = mask[node] | (std::uint64_t{1} << d->var);
      for (NodeRef c : {d->lo, d->hi}) {
        mask[c] |= m;
        reached[c] = true;
      }
    }
  }
  return mask.at(target);
}

void Bsd::split(NodeRef leaf_ref, unsigned var, const std::uint64_t (&counts)[2][2]) {
  const Speculation parent = leaf(leaf_ref);
  const auto lo = static_cast<NodeRef>(nodes_.size());
  const auto hi = lo + 1;
  for (int side = 0; side < 2; ++side) {
    const std::uint64_t zeros = counts[side][0];
    const std::uint64_t ones = counts[side][1];
    Speculation child;
    child.guess = zeros + ones == 0 ? parent.guess : majority(zeros, ones);
    child.seen = zeros + ones;
    child.matching = child.guess ? ones : zeros;
    nodes_.push_back(child);
  }
  nodes_[leaf_ref] = Decision{var, lo, hi};
  log_.push_back({leaf_ref, var});
}

void Bsd::expand(NodeRef leaf_ref, unsigned var, const ExampleSet& examples) {
  if (leaf_ref >= nodes_.size() || !is_leaf(leaf_ref)) {
    throw Error(ErrorCode::NotALeaf, "node " + std::to_string(leaf_ref));
  }
  if (examples.width() != width_) throw Error(ErrorCode::WidthMismatch, "examples width");
  if (var >= width_) throw Error(ErrorCode::VarAlreadyUsed, "var " + std::to_string(var) + " outside input width");
  if ((vars_above(leaf_ref) >> var) & 1u) {
    throw Error(ErrorCode::VarAlreadyUsed, "var " + std::to_string(var) + " already decided above node " +
                                               std::to_string(leaf_ref));
  }
  std::uint64_t counts[2][2] = {{0, 0}, {0, 0}};
  for (const auto& r : examples.rows()) {
    if (reach(r.input) == leaf_ref) ++counts[(r.input >> var) & 1u][r.output];
  }
  split(leaf_ref, var, counts);
}

void Bsd::set_abstain(NodeRef leaf_ref, bool abstain) { leaf_mut(leaf_ref).abstain = abstain; }

void Bsd::refresh_support(const ExampleSet& examples) {
  if (examples.width() != width_) throw Error(ErrorCode::WidthMismatch, "examples width");
  for (auto& n : nodes_) {
    if (auto* s = std::get_if<Speculation>(&n)) s->seen = s->matching = 0;
  }
  for (const auto& r : examples.rows()) {
    auto& s = std::get<Speculation>(nodes_[reach(r.input)]);
    ++s.seen;
    if (s.guess == r.output) ++s.matching;
  }
}

bool structurally_equal(const Bsd& a, const Bsd& b) {
  if (a.width_ != b.width_ || a.nodes_.size() != b.nodes_.size()) return false;
  for (std::size_t i = 0; i < a.nodes_.size(); ++i) {
    const auto* da = std::get_if<Decision>(&a.nodes_[i]);
    const auto* db = std::get_if<Decision>(&b.nodes_[i]);
    if ((da == nullptr) != (db == nullptr)) return false;
    if (da) {
      if (da->var != db->var || da->lo != db->lo || da->hi != db->hi) return false;
    } else {
      const auto& sa = std::get<Speculation>(a.nodes_[i]);
      const auto& sb = std::get<Speculation>(b.nodes_[i]);
      if (sa.guess != sb.guess || sa.abstain != sb.abstain) return false;
    }
  }
  return true;
}

Bsd new_root(const ExampleSet& examples) { return Bsd::new_root(examples); }

Bsd expand(Bsd b, NodeRef leaf, unsigned var, const ExampleSet& examples) {
  b.expand(leaf, var, examples);
  return b;
}

std::pair<bool, NodeRef> evaluate(const Bsd& b, const BitVector& x) { return b.evaluate(x); }

Fraction accuracy(const Bsd& b, const ExampleSet& eval_set) {
  if (eval_set.width() != b.input_width()) throw Error(ErrorCode::WidthMismatch, "accuracy");
  if (eval_set.empty()) throw Error(ErrorCode::EmptyExamples, "accuracy");
  std::uint64_t hits = 0;
  for (const auto& r : eval_set.rows()) {
    hits += std::get<Speculation>(b.nodes()[b.reach(r.input)]).guess == r.output;
  }
  return {hits, eval_set.size()};
}

namespace {

// Weighted Gini impurity of a split, kept as an exact fraction num/den.
struct Impurity {
  unsigned __int128 num = 0;
  unsigned __int128 den = 1;

  friend bool operator<(const Impurity& a, const Impurity& b) { return a.num * b.den < b.num * a.den; }
};

struct Candidate {
  std::int64_t gain = 0;
  Impurity impurity;  // zero unless TieBreak::Impurity
  NodeRef leaf = 0;
  unsigned var = 0;

  // Best first: larger gain, then lower impurity, then lower leaf, then lower var.
  friend bool operator<(const Candidate& a, const Candidate& b) {
    if (a.gain != b.gain) return a.gain > b.gain;
    if (a.impurity < b.impurity) return true;
    if (b.impurity < a.impurity) return false;
    return std::make_pair(a.leaf, a.var) < std::make_pair(b.leaf, b.var);
  }
};

// Best expansion of one leaf given the rows reaching it, or nothing when the
// rows are pure or every var is used.
std::optional<Candidate> best_for_leaf(const ExampleSet& examples, const std::vector<std::uint32_t>& rows,
                                       NodeRef leaf, std::uint8_t guess, std::uint64_t used, unsigned width,
                                       TieBreak tie) {
  std::uint64_t ones = 0;
  for (auto i : rows) ones += examples.rows()[i].output;
  if (ones == 0 || ones == rows.size()) return std::nullopt;
  const auto before = static_cast<std::int64_t>(guess ? ones : rows.size() - ones);

  std::vector<std::uint64_t> ones_hi(width, 0), count_hi(width, 0);
  for (auto i : rows) {
    const auto& r = examples.rows()[i];
    for (unsigned v = 0; v < width; ++v) {
      if ((r.input >> v) & 1u) {
        ++count_hi[v];
        ones_hi[v] += r.output;
      }
    }
  }
  std::optional<Candidate> best;
  for (unsigned v = 0; v < width; ++v) {
    if ((used >> v) & 1u) continue;
    const std::uint64_t n_hi = count_hi[v];
    const std::uint64_t n_lo = rows.size() - n_hi;
    const std::uint64_t o_hi = ones_hi[v];
    const std::uint64_t o_lo = ones - o_hi;
    const auto side_correct = [&](std::uint64_t n, std::uint64_t o) -> std::uint64_t {
      if (n == 0) return 0;
      const std::uint8_t g = majority(n - o, o);
      return g ? o : n - o;
    };
    const auto after = static_cast<std::int64_t>(side_correct(n_lo, o_lo) + side_correct(n_hi, o_hi));
    Candidate c{after - before, {}, leaf, v};
    if (tie == TieBreak::Impurity) {
      // o(n-o)/n per side; an empty side contributes nothing.
      const auto side = [](std::uint64_t n, std::uint64_t o) -> Impurity {
        if (n == 0) return {0, 1};
        return {static_cast<unsigned __int128>(o) * (n - o), n};
      };
      const Impurity a = side(n_lo, o_lo), b = side(n_hi, o_hi);
      c.impurity = {a.num * b.den + b.num * a.den, a.den * b.den};
    }
    if (!best || c < *best) best = c;
  }
  return best;
}

}  // namespace

std::optional<Expansion> choose_expansion(const Bsd& b, const ExampleSet& examples) {
  if (examples.width() != b.input_width()) throw Error(ErrorCode::WidthMismatch, "choose_expansion");
  std::unordered_map<NodeRef, std::vector<std::uint32_t>> by_leaf;
  for (std::uint32_t i = 0; i < examples.size(); ++i) by_leaf[b.reach(examples.rows()[i].input)].push_back(i);
  std::optional<Candidate> best;
  for (const auto& [leaf, rows] : by_leaf) {
    auto c = best_for_leaf(examples, rows, leaf, b.leaf(leaf).guess, b.vars_above(leaf), b.input_width(),
                            TieBreak::Lowest);
    if (c && (!best || *c < *best)) best = c;
  }
  if (!best) return std::nullopt;
  return Expansion{best->leaf, best->var};
}

GrowResult grow(const ExampleSet& examples, Fraction target_accuracy, std::size_t max_nodes, TieBreak tie) {
  if (examples.empty()) throw Error(ErrorCode::EmptyExamples, "train");
  if (max_nodes < 1) throw Error(ErrorCode::Precondition, "max_nodes must be >= 1");
  if (target_accuracy.num == 0 || target_accuracy.num > target_accuracy.den) {
    throw Error(ErrorCode::Precondition, "target accuracy must lie in (0, 1]");
  }
  const unsigned width = examples.width();
  GrowResult out{Bsd::new_root(examples), false};
  Bsd& b = out.bsd;

  // Rows reaching each leaf and vars used above it, indexed by node.
  std::vector<std::vector<std::uint32_t>> rows_at(1);
  std::vector<std::uint64_t> used(1, 0);
  rows_at[0].resize(examples.size());
  for (std::uint32_t i = 0; i < examples.size(); ++i) rows_at[0][i] = i;

  std::set<Candidate> queue;
  const auto consider = [&](NodeRef leaf) {
    if (auto c = best_for_leaf(examples, rows_at[leaf], leaf, b.leaf(leaf).guess, used[leaf], width, tie)) {
      queue.insert(*c);
    }
  };
  consider(0);

  std::uint64_t correct = b.leaf(0).matching;
  for (;;) {
    if (Fraction{correct, examples.size()} >= target_accuracy) {
      out.reached_target = true;
      break;
    }
    if (queue.empty() || b.nodes().size() + 2 > max_nodes) break;
    const Candidate c = *queue.begin();
    queue.erase(queue.begin());

    std::uint64_t counts[2][2] = {{0, 0}, {0, 0}};
    std::vector<std::uint32_t> side_rows[2];
    for (auto i : rows_at[c.leaf]) {
      const auto& r = examples.rows()[i];
      const unsigned side = (r.input >> c.var) & 1u;
      ++counts[side][r.output];
      side_rows[side].push_back(i);
    }
    correct -= b.leaf(c.leaf).matching;
    b.split(c.leaf, c.var, counts);
    const auto& d = b.decision(c.leaf);
    rows_at.resize(b.nodes().size());
    used.resize(b.nodes().size());
    rows_at[c.leaf].clear();
    rows_at[c.leaf].shrink_to_fit();
    rows_at[d.lo] = std::move(side_rows[0]);
    rows_at[d.hi] = std::move(side_rows[1]);
    used[d.lo] = used[d.hi] = used[c.leaf] | (std::uint64_t{1} << c.var);
    correct += b.leaf(d.lo).matching + b.leaf(d.hi).matching;
    consider(d.lo);
    consider(d.hi);
  }
  return out;
}

Bsd train(const ExampleSet& examples, Fraction target_accuracy, std::size_t max_nodes) {
  GrowResult r = grow(examples, target_accuracy, max_nodes);
  if (!r.reached_target) {
    const Fraction reached = accuracy(r.bsd, examples);
    throw BudgetExhausted(std::move(r.bsd), reached);
  }
  return std::move(r.bsd);
}

json to_json(const Bsd& b) {
  json nodes = json::array();
  for (const auto& n : b.nodes()) {
    if (const auto* d = std::get_if<Decision>(&n)) {
      nodes.push_back({{"t", "d"}, {"v", d->var}, {"lo", d->lo}, {"hi", d->hi}});
    } else {
      const auto& s = std::get<Speculation>(n);
      nodes.push_back({{"t", "s"}, {"g", s.guess}, {"a", s.abstain}});
    }
  }
  return {{"width", b.input_width()}, {"root", b.root()}, {"nodes", std::move(nodes)}};
}

Bsd bsd_from_json(const json& j) {
  try {
    if (!j.is_object()) throw Error(ErrorCode::MalformedArtifact, "BSD artifact must be an object");
    if (j.at("root").get<std::int64_t>() != 0) throw Error(ErrorCode::MalformedArtifact, "root must be 0");
    const auto width = j.at("width").get<unsigned>();
    std::vector<Node> nodes;
    for (const auto& n : j.at("nodes")) {
      const std::string tag = n.at("t").get<std::string>();
      if (tag == "d") {
        const auto var = n.at("v").get<std::int64_t>();
        const auto lo = n.at("lo").get<std::int64_t>();
        const auto hi = n.at("hi").get<std::int64_t>();
        if (var < 0 || lo < 0 || hi < 0) throw Error(ErrorCode::MalformedArtifact, "negative field");
        nodes.emplace_back(Decision{static_cast<unsigned>(var), static_cast<NodeRef>(lo), static_cast<NodeRef>(hi)});
      } else if (tag == "s") {
        const auto g = n.at("g").get<int>();
        if (g != 0 && g != 1) throw Error(ErrorCode::MalformedArtifact, "guess must be 0 or 1");
        nodes.emplace_back(Speculation{static_cast<std::uint8_t>(g), n.at("a").get<bool>(), 0, 0});
      } else {
        throw Error(ErrorCode::MalformedArtifact, "unknown node tag '" + tag + "'");
      }
    }
    return Bsd::from_nodes(width, std::move(nodes));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedArtifact, e.what());
  }
}

std::string serialize(const Bsd& b) { return to_json(b).dump(); }

Bsd deserialize(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedArtifact, e.what());
  }
  return bsd_from_json(j);
}

}  // namespace sbsd::bsd

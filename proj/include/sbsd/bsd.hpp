#pragma once

// Binary Speculation Diagrams: rooted DAGs of decision nodes (tests on one
// input bit) and speculation leaves (constant guesses), refined from
// input-output examples by Boole/Shannon expansion of one leaf at a time.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "sbsd/error.hpp"
#include "sbsd/fraction.hpp"

namespace sbsd::bsd {

inline constexpr unsigned kMaxWidth = 32;

struct BitVector {
  std::uint32_t bits = 0;
  unsigned width = 0;

  bool operator[](unsigned i) const { return (bits >> i) & 1u; }
  friend bool operator==(const BitVector&, const BitVector&) = default;
};

struct Example {
  std::uint32_t input = 0;
  std::uint8_t output = 0;
};

// Multiset of (input, output) rows sharing one width.
class ExampleSet {
 public:
  explicit ExampleSet(unsigned width);

  void add(std::uint32_t input, bool output);
  void add(const BitVector& input, bool output);

  unsigned width() const { return width_; }
  std::size_t size() const { return rows_.size(); }
  bool empty() const { return rows_.empty(); }
  const std::vector<Example>& rows() const { return rows_; }

  // No input appears with both outputs.
  bool consistent() const;

  // All 2^width rows of `fn`.
  template <typename Fn>
  static ExampleSet exhaustive(unsigned width, Fn&& fn) {
    ExampleSet set(width);
    for (std::uint64_t x = 0; x < (std::uint64_t{1} << width); ++x) {
      set.add(static_cast<std::uint32_t>(x), fn(static_cast<std::uint32_t>(x)));
    }
    return set;
  }

 private:
  unsigned width_;
  std::vector<Example> rows_;
};

using NodeRef = std::uint32_t;

struct GrowResult;
class Bsd;
enum class TieBreak { Lowest, Impurity };
GrowResult grow(const ExampleSet& examples, Fraction target_accuracy, std::size_t max_nodes,
                TieBreak tie = TieBreak::Lowest);

struct Decision {
  unsigned var = 0;
  NodeRef lo = 0;
  NodeRef hi = 0;
};

struct Speculation {
  std::uint8_t guess = 0;
  bool abstain = false;
  std::uint64_t seen = 0;      // examples reaching this leaf when last trained
  std::uint64_t matching = 0;  // of which agree with `guess`

  bool pure() const { return seen > 0 && matching == seen; }
};

using Node = std::variant<Decision, Speculation>;

struct Expansion {
  NodeRef leaf = 0;
  unsigned var = 0;
  friend bool operator==(const Expansion&, const Expansion&) = default;
};

class Bsd {
 public:
  // A single speculation root guessing `guess`.
  explicit Bsd(unsigned input_width, std::uint8_t guess = 0);

  // Root guess = majority output, ties to 0.
  static Bsd new_root(const ExampleSet& examples);

  // Builds from a raw arena; validates refs, reachability and acyclicity.
  static Bsd from_nodes(unsigned input_width, std::vector<Node> nodes);

  NodeRef root() const { return 0; }
  unsigned input_width() const { return width_; }
  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<Expansion>& expansion_log() const { return log_; }

  bool is_leaf(NodeRef n) const;
  const Speculation& leaf(NodeRef n) const;
  const Decision& decision(NodeRef n) const;
  std::size_t decision_count() const;
  std::size_t leaf_count() const;

  // Leaf reached by the input; the hot path used by speculators.
  NodeRef reach(std::uint32_t input) const;
  std::pair<bool, NodeRef> evaluate(const BitVector& x) const;

  // Vars tested on some path from the root to `n`.
  std::uint64_t vars_above(NodeRef n) const;

  // Replaces `leaf` by Decision{var} over two fresh leaves whose guesses are
  // the majority of the examples reaching them (empty side inherits).
  void expand(NodeRef leaf, unsigned var, const ExampleSet& examples);

  void set_abstain(NodeRef leaf, bool abstain);
  // Recomputes every leaf's support counts against `examples`.
  void refresh_support(const ExampleSet& examples);

  friend bool structurally_equal(const Bsd& a, const Bsd& b);
  friend GrowResult grow(const ExampleSet& examples, Fraction target_accuracy, std::size_t max_nodes, TieBreak tie);

 private:
  // counts[side][output] of the examples reaching `leaf`.
  void split(NodeRef leaf, unsigned var, const std::uint64_t (&counts)[2][2]);
  Speculation& leaf_mut(NodeRef n);

  unsigned width_;
  std::vector<Node> nodes_;
  std::vector<Expansion> log_;
};

Bsd new_root(const ExampleSet& examples);
Bsd expand(Bsd b, NodeRef leaf, unsigned var, const ExampleSet& examples);
std::pair<bool, NodeRef> evaluate(const Bsd& b, const BitVector& x);
Fraction accuracy(const Bsd& b, const ExampleSet& eval_set);

// Greedy: the (impure leaf, unused var) pair with the largest accuracy gain on
// `examples`; ties go to the lowest leaf id, then the lowest var.
std::optional<Expansion> choose_expansion(const Bsd& b, const ExampleSet& examples);

struct GrowResult {
  Bsd bsd;
  bool reached_target = false;
};

// Applies choose_expansion until accuracy >= target, no candidate remains, or
// another expansion would exceed max_nodes. TieBreak::Impurity ranks equal-gain
// candidates by the Gini impurity of the split before the leaf/var order.
GrowResult grow(const ExampleSet& examples, Fraction target_accuracy, std::size_t max_nodes, TieBreak tie);
class BudgetExhausted : public Error {
 public:
  BudgetExhausted(Bsd best, Fraction reached)
      : Error(ErrorCode::BudgetExhausted, "accuracy " + std::to_string(reached.num) + "/" + std::to_string(reached.den)),
        best_(std::move(best)),
        reached_(reached) {}

  const Bsd& best() const { return best_; }
  Fraction reached() const { return reached_; }

 private:
  Bsd best_;
  Fraction reached_;
};

// Like grow() but throws BudgetExhausted (carrying the best diagram) when the
// target is not reached.
Bsd train(const ExampleSet& examples, Fraction target_accuracy, std::size_t max_nodes);

// {width, root, nodes:[{"t":"d","v","lo","hi"} | {"t":"s","g","a"}]}
nlohmann::json to_json(const Bsd& b);
Bsd bsd_from_json(const nlohmann::json& j);
std::string serialize(const Bsd& b);
Bsd deserialize(std::string_view text);

}  // namespace sbsd::bsd

#include <doctest.h>

#include "sbsd/bsd.hpp"
#include "sbsd/netlist.hpp"
#include "sbsd/rng.hpp"

using namespace sbsd;
using namespace sbsd::bsd;

namespace {

const auto kXor2 = [](std::uint32_t x) { return ((x ^ (x >> 1)) & 1u) != 0; };
const auto kAnd2 = [](std::uint32_t x) { return (x & 3u) == 3u; };

// Reference for choose_expansion: try every (leaf, unused var), keep the best
// accuracy, ties to the lowest leaf then var.
std::optional<Expansion> brute_choice(const Bsd& b, const ExampleSet& ex) {
  std::optional<Expansion> best;
  Fraction best_acc;
  for (NodeRef n = 0; n < b.nodes().size(); ++n) {
    if (!b.is_leaf(n)) continue;
    bool seen0 = false, seen1 = false;
    for (const auto& r : ex.rows()) {
      if (b.reach(r.input) != n) continue;
      (r.output ? seen1 : seen0) = true;
    }
    if (!(seen0 && seen1)) continue;
    for (unsigned v = 0; v < b.input_width(); ++v) {
      if ((b.vars_above(n) >> v) & 1u) continue;
      Bsd c = b;
      c.expand(n, v, ex);
      const Fraction acc = accuracy(c, ex);
      if (!best || acc > best_acc) {
        best = Expansion{n, v};
        best_acc = acc;
      }
    }
  }
  return best;
}

Bsd random_tree(unsigned width, Rng& rng, unsigned expansions, const ExampleSet& ex) {
  Bsd b = Bsd::new_root(ex);
  for (unsigned k = 0; k < expansions; ++k) {
    std::vector<std::pair<NodeRef, unsigned>> legal;
    for (NodeRef n = 0; n < b.nodes().size(); ++n) {
      if (!b.is_leaf(n)) continue;
      for (unsigned v = 0; v < width; ++v) {
        if (!((b.vars_above(n) >> v) & 1u)) legal.emplace_back(n, v);
      }
    }
    if (legal.empty()) break;
    const auto [n, v] = legal[uniform_index(rng, legal.size())];
    b.expand(n, v, ex);
  }
  return b;
}

}  // namespace

TEST_CASE("new_root takes the majority, ties to 0") {
  const auto zeros = ExampleSet::exhaustive(3, [](std::uint32_t) { return false; });
  const Bsd z = Bsd::new_root(zeros);
  CHECK(z.leaf(0).guess == 0);
  CHECK(accuracy(z, zeros) == Fraction{1, 1});

  const auto x = ExampleSet::exhaustive(2, kXor2);
  CHECK(Bsd::new_root(x).leaf(0).guess == 0);
  CHECK(accuracy(Bsd::new_root(x), x) == Fraction{1, 2});

  const auto a = ExampleSet::exhaustive(2, kAnd2);
  CHECK(Bsd::new_root(a).leaf(0).guess == 0);
  CHECK(accuracy(Bsd::new_root(a), a) == Fraction{3, 4});

  CHECK_THROWS_AS(Bsd::new_root(ExampleSet(4)), Error);
  CHECK_THROWS_AS(ExampleSet(33), Error);
}

TEST_CASE("expand: XOR2 needs both vars") {
  const auto x = ExampleSet::exhaustive(2, kXor2);
  Bsd b = Bsd::new_root(x);
  b.expand(0, 0, x);
  const auto& d = b.decision(0);
  CHECK(b.leaf(d.lo).guess == 0);
  CHECK(b.leaf(d.hi).guess == 0);
  CHECK(accuracy(b, x) == Fraction{1, 2});
  const NodeRef lo = d.lo, hi = d.hi;
  b.expand(lo, 1, x);
  b.expand(hi, 1, x);
  CHECK(accuracy(b, x) == Fraction{1, 1});
  CHECK(b.evaluate({0b01, 2}).first == true);
  CHECK(b.evaluate({0b11, 2}).first == false);
  CHECK(b.expansion_log().size() == 3);

  try {
    b.expand(0, 1, x);
    FAIL("expected NotALeaf");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotALeaf);
  }
  Bsd c = Bsd::new_root(x);
  c.expand(0, 0, x);
  try {
    c.expand(c.decision(0).lo, 0, x);
    FAIL("expected VarAlreadyUsed");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::VarAlreadyUsed);
  }
}

TEST_CASE("expand: empty side inherits the parent guess") {
  ExampleSet ex(3);
  ex.add(0b000, true);
  ex.add(0b010, true);
  Bsd b = Bsd::new_root(ex);
  REQUIRE(b.leaf(0).guess == 1);
  b.expand(0, 0, ex);
  CHECK(b.leaf(b.decision(0).hi).guess == 1);
  CHECK(b.leaf(b.decision(0).hi).seen == 0);
}

TEST_CASE("evaluate and accuracy on hand-built diagrams") {
  const Bsd d = Bsd::from_nodes(1, {Decision{0, 1, 2}, Speculation{0}, Speculation{1}});
  CHECK(d.evaluate({1, 1}).first == true);
  CHECK(d.evaluate({0, 1}).first == false);
  for (std::uint8_t g : {0, 1}) {
    const Bsd c(5, g);
    for (std::uint32_t x = 0; x < 32; ++x) CHECK(c.evaluate({x, 5}).first == (g == 1));
  }
  CHECK(accuracy(Bsd(2, 0), ExampleSet::exhaustive(2, kXor2)) == Fraction{1, 2});
  CHECK_THROWS_AS(d.evaluate({0, 3}), Error);
}

TEST_CASE("choose_expansion matches brute force") {
  const auto x = ExampleSet::exhaustive(2, kXor2);
  CHECK(choose_expansion(Bsd::new_root(x), x) == Expansion{0, 0});
  const auto a = ExampleSet::exhaustive(2, kAnd2);
  CHECK(choose_expansion(Bsd::new_root(a), a) == brute_choice(Bsd::new_root(a), a));

  const auto zeros = ExampleSet::exhaustive(3, [](std::uint32_t) { return false; });
  CHECK_FALSE(choose_expansion(Bsd::new_root(zeros), zeros).has_value());

  Rng rng(11);
  for (int trial = 0; trial < 60; ++trial) {
    const unsigned w = 3 + static_cast<unsigned>(uniform_index(rng, 4));
    const std::uint64_t table = rng();
    const auto ex = ExampleSet::exhaustive(w, [&](std::uint32_t i) { return ((table >> (i % 64)) & 1u) != 0; });
    Bsd b = random_tree(w, rng, static_cast<unsigned>(uniform_index(rng, 5)), ex);
    CHECK(choose_expansion(b, ex) == brute_choice(b, ex));
  }
}

TEST_CASE("grow equals repeated choose_expansion") {
  Rng rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    const unsigned w = 3 + static_cast<unsigned>(uniform_index(rng, 4));
    ExampleSet ex(w);
    for (int k = 0; k < 40; ++k) ex.add(static_cast<std::uint32_t>(uniform_index(rng, 1u << w)), rng() & 1u);
    const auto g = grow(ex, {1, 1}, 1 << 16);
    Bsd ref = Bsd::new_root(ex);
    while (accuracy(ref, ex) < Fraction{1, 1}) {
      const auto c = choose_expansion(ref, ex);
      if (!c) break;
      ref.expand(c->leaf, c->var, ex);
    }
    CHECK(structurally_equal(g.bsd, ref));
    CHECK(g.bsd.expansion_log() == ref.expansion_log());
  }
}

TEST_CASE("train: targets and budgets") {
  const auto zeros = ExampleSet::exhaustive(4, [](std::uint32_t) { return false; });
  const Bsd z = train(zeros, {1, 1}, 100);
  CHECK(z.nodes().size() == 1);

  const auto x3 = ExampleSet::exhaustive(3, [](std::uint32_t v) { return (std::popcount(v) & 1) != 0; });
  const Bsd t = train(x3, {1, 1}, 1000);
  CHECK(accuracy(t, x3) == Fraction{1, 1});
  CHECK(t.decision_count() <= 7);

  const auto x2 = ExampleSet::exhaustive(2, kXor2);
  try {
    train(x2, {1, 1}, 1);
    FAIL("expected BudgetExhausted");
  } catch (const BudgetExhausted& e) {
    CHECK(e.reached() == Fraction{1, 2});
    CHECK(e.best().nodes().size() == 1);
  }
  CHECK_THROWS_AS(train(ExampleSet(3), {1, 1}, 10), Error);
}

TEST_CASE("impurity tie-break keeps accuracy and finds compact splits") {
  // x5 AND x6: every first split has zero accuracy gain, so lowest-var order
  // starts with irrelevant vars.
  const auto ex = ExampleSet::exhaustive(8, [](std::uint32_t x) { return ((x >> 5) & (x >> 6) & 1u) != 0; });
  const auto lowest = grow(ex, {1, 1}, 1 << 12, TieBreak::Lowest);
  const auto gini = grow(ex, {1, 1}, 1 << 12, TieBreak::Impurity);
  CHECK(lowest.reached_target);
  CHECK(gini.reached_target);
  CHECK(gini.bsd.decision_count() == 2);
  CHECK(lowest.bsd.decision_count() > 2);
}

TEST_CASE("serialization round trip and malformed artifacts") {
  const auto ex = ExampleSet::exhaustive(6, [](std::uint32_t i) { return (i * 2654435761u >> 7) & 1u; });
  Bsd b = train(ex, {1, 1}, 1 << 12);
  b.set_abstain(b.reach(5), true);
  const Bsd back = deserialize(serialize(b));
  CHECK(structurally_equal(b, back));
  CHECK(back.leaf(back.reach(5)).abstain);

  CHECK_THROWS_AS(deserialize(R"({"width":1,"root":0,"nodes":[{"t":"d","v":0,"lo":1,"hi":9},{"t":"s","g":0,"a":false}]})"),
                  Error);
  CHECK_THROWS_AS(
      deserialize(R"({"width":1,"root":0,"nodes":[{"t":"d","v":0,"lo":0,"hi":1},{"t":"s","g":0,"a":false}]})"), Error);
  CHECK_THROWS_AS(deserialize("not json"), Error);
}

TEST_CASE("netlist: constants, single mux, exhaustive cross-check") {
  const Netlist c0 = to_netlist(Bsd(3, 0));
  CHECK(c0.mux_count() == 0);
  CHECK(c0.gates.back().kind == GateKind::Const0);
  CHECK_FALSE(c0.simulate(5));

  const Netlist m = to_netlist(Bsd::from_nodes(1, {Decision{0, 1, 2}, Speculation{0}, Speculation{1}}));
  CHECK(m.mux_count() == 1);
  CHECK(m.gates.size() == 3);

  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const std::uint64_t t0 = rng(), t1 = rng(), t2 = rng(), t3 = rng();
    const std::uint64_t tab[4] = {t0, t1, t2, t3};
    const auto ex = ExampleSet::exhaustive(8, [&](std::uint32_t i) { return (tab[i / 64] >> (i % 64)) & 1u; });
    const Bsd b = random_tree(8, rng, 30, ex);
    const Netlist n = to_netlist(b);
    CHECK(n.mux_count() == b.decision_count());
    for (std::uint32_t x = 0; x < 256; ++x) REQUIRE(n.simulate(x) == b.evaluate({x, 8}).first);
  }
  const std::string blif = m.to_blif("demo");
  CHECK(blif.find(".model demo") != std::string::npos);
  CHECK(blif.find(".end") != std::string::npos);
}

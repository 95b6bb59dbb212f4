#include <doctest.h>

#include <cmath>

#include "sbsd/assembler.hpp"
#include "sbsd/error.hpp"
#include "sbsd/selector.hpp"

using namespace sbsd;
using namespace sbsd::selector;

namespace {

std::vector<DependencyEvent> events_for(std::string_view src, std::size_t max_steps = 10000) {
  const auto p = isa::assemble(src);
  return extract_dependencies(isa::run_single(p, max_steps).trace, p);
}

DependencyEvent event_with(ElementMask m) {
  DependencyEvent e;
  e.matching = m;
  e.valid = kFullPool;
  return e;
}

ElementMask bit(ElementId id) { return ElementMask{1} << id; }

// Best reusability over every set of exactly `k` pool elements.
Fraction brute_best(const std::vector<DependencyEvent>& ev, unsigned k) {
  Fraction best{0, 1};
  for (ElementMask m = 0; m <= kFullPool; ++m) {
    if (static_cast<unsigned>(std::popcount(m)) != k) continue;
    const Fraction f = reusability({m, k}, ev);
    if (f > best) best = f;
  }
  return best;
}

}  // namespace

TEST_CASE("element names round trip") {
  for (ElementId id = 0; id < kPoolSize; ++id) CHECK(element_from_name(element_name(id)) == id);
  CHECK(element_name(kPc) == "PC");
  CHECK(element_name(gpr(3)) == "GPR3");
  CHECK(element_name(last_load(1)) == "LASTLOAD1");
  CHECK(element_name(last_store(0)) == "LASTSTOREADDR0");
  CHECK(element_name(kLastBranch) == "LASTBRANCH");
  CHECK_FALSE(element_from_name("GPR9").has_value());
  for (Target t : kTargets) CHECK(target_from_name(target_name(t)) == t);
}

TEST_CASE("extract_dependencies: GPR events") {
  auto ev = filter_kind(events_for("ADDI r1, r0, 5\nADD r2, r1, r1\nHALT\n"), Target::GPR);
  REQUIRE(ev.size() == 1);
  CHECK(ev[0].consumer_step == 1);
  CHECK(ev[0].producer_step == 0);
  CHECK(ev[0].needed_value == 5);
  // Nothing in the pool held 5 before the ADDI ran.
  CHECK_FALSE(ev[0].producing_element().has_value());

  // The copy's value was already in r1 when the copy executed.
  ev = filter_kind(events_for("ADDI r1, r0, 5\nADD r2, r1, r0\nADD r3, r2, r0\nHALT\n"), Target::GPR);
  REQUIRE(ev.size() == 2);
  CHECK(ev[1].producing_element() == gpr(1));
  CHECK((ev[1].matching & bit(gpr(2))) == 0);

  CHECK(filter_kind(events_for("ADDI r1, r0, 1\nADDI r2, r0, 2\nADDI r3, r0, 3\nHALT\n"), Target::GPR).empty());
}

TEST_CASE("extract_dependencies: MEM and PC events") {
  auto ev = events_for("ADDI r1, r0, 9\nSW r1, 0(r0)\nLW r2, 0(r0)\nHALT\n");
  const auto mem = filter_kind(ev, Target::MEM);
  REQUIRE(mem.size() == 1);
  CHECK(mem[0].producer_step == 1);
  CHECK(mem[0].needed_value == 9);
  CHECK((mem[0].matching & bit(gpr(1))) != 0);

  // JAL is a static transfer: PC counts as matching even though pc != target.
  ev = filter_kind(events_for("JAL r0, 2\nADDI r1, r0, 1\nHALT\n"), Target::PC);
  REQUIRE(ev.size() == 1);
  CHECK(ev[0].needed_value == 2);
  CHECK((ev[0].matching & bit(kPc)) != 0);

  // A data-dependent branch is not.
  ev = filter_kind(events_for("ADDI r1, r0, 1\nBEQ r1, r0, 1\nHALT\nHALT\n"), Target::PC);
  REQUIRE(ev.size() == 1);
  CHECK((ev[0].matching & bit(kPc)) == 0);
}

TEST_CASE("extract_dependencies rejects a corrupt trace") {
  const auto p = isa::assemble("ADDI r1, r0, 5\nHALT\n");
  auto trace = isa::run_single(p, 10).trace;
  trace[0].next_pc = 7;
  CHECK_THROWS_AS(extract_dependencies(trace, p), Error);
}

TEST_CASE("reusability counts") {
  const std::vector<DependencyEvent> ev = {event_with(bit(gpr(1))), event_with(bit(gpr(1))),
                                           event_with(bit(gpr(2))), event_with(0)};
  CHECK(reusability({bit(gpr(1)), 1}, ev) == Fraction{2, 4});
  CHECK(reusability({0, 4}, ev) == Fraction{0, 1});
  CHECK(reusability({kFullPool, 18}, ev) == Fraction{3, 4});
  CHECK_THROWS_AS(reusability({kFullPool, 18}, {}), Error);

  const std::vector<DependencyEvent> three = {event_with(bit(gpr(1))), event_with(bit(gpr(1))),
                                              event_with(bit(gpr(2)))};
  CHECK(reusability({bit(gpr(1)), 1}, three) == Fraction{2, 3});
}

TEST_CASE("neighbor swaps exactly one element") {
  Rng rng(4);
  const SelectedStateSet s = random_set(4, rng);
  CHECK(s.size() == 4);
  for (int i = 0; i < 100; ++i) {
    const auto n = neighbor(s, rng);
    CHECK(n.size() == 4);
    CHECK(std::popcount(n.members ^ s.members) == 2);
  }
  Rng a(9), b(9);
  CHECK(neighbor(s, a) == neighbor(s, b));
  CHECK_THROWS_AS(neighbor({kFullPool, 18}, rng), Error);
}

TEST_CASE("acceptance probability") {
  CHECK(acceptance_probability(-0.1, 0.5) == 1.0);
  CHECK(acceptance_probability(0.1, 0.1) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  CHECK(acceptance_probability(0.1, 0.1) == doctest::Approx(0.367879).epsilon(1e-6));
}

TEST_CASE("anneal finds the unique singleton optimum") {
  std::vector<DependencyEvent> ev(20, event_with(bit(gpr(3))));
  // Exhaustive check that {GPR3} is the only zero-energy singleton.
  unsigned zero = 0;
  for (ElementId id = 0; id < kPoolSize; ++id) zero += reusability({bit(id), 1}, ev) == Fraction{1, 1};
  REQUIRE(zero == 1);
  const auto r = anneal(ev, 1, {});
  CHECK(r.best.members == bit(gpr(3)));
  CHECK(r.best_energy == 0.0);
}

TEST_CASE("anneal: histories, determinism, optimum on small instances") {
  Rng rng(21);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<DependencyEvent> ev;
    for (int i = 0; i < 60; ++i) {
      ElementMask m = 0;
      for (int k = 0; k < 2; ++k) m |= bit(static_cast<ElementId>(uniform_index(rng, 8)));
      ev.push_back(event_with(uniform_index(rng, 5) == 0 ? 0 : m));
    }
    AnnealSchedule sched;
    sched.seed = 100 + trial;
    const auto r = anneal(ev, 2, sched);
    for (std::size_t i = 1; i < r.best_history.size(); ++i) CHECK(r.best_history[i] <= r.best_history[i - 1]);
    CHECK(r.best_energy == doctest::Approx(1.0 - reusability(r.best, ev).to_double()));
    CHECK(r.best_energy == doctest::Approx(1.0 - brute_best(ev, 2).to_double()));
    const auto again = anneal(ev, 2, sched);
    CHECK(again.best == r.best);
    CHECK(again.energy_history == r.energy_history);
  }
  CHECK_THROWS_AS(anneal({event_with(1)}, 0, {}), Error);
  CHECK(anneal({event_with(1)}, 40, {}).best.members == kFullPool);
}

TEST_CASE("nested sets grow monotonically") {
  Rng rng(2);
  std::vector<DependencyEvent> ev;
  for (int i = 0; i < 200; ++i) ev.push_back(event_with(bit(static_cast<ElementId>(uniform_index(rng, kPoolSize)))));
  const auto base = anneal(ev, 2, {}).best;
  const auto sets = nested_sets(ev, base, {2, 4, 8, 16, 32});
  REQUIRE(sets.size() == 5);
  CHECK(sets[0].members == base.members);
  for (std::size_t i = 1; i < sets.size(); ++i) {
    CHECK((sets[i].members & sets[i - 1].members) == sets[i - 1].members);
    CHECK(reusability(sets[i], ev) >= reusability(sets[i - 1], ev));
  }
  CHECK(sets[3].size() == 16);
  CHECK(sets[4].size() == kPoolSize);
  CHECK(sets[4].capacity == 32);
}

TEST_CASE("selector artifact JSON") {
  SelectorArtifact a;
  a.target = Target::MEM;
  a.set = {bit(gpr(2)) | bit(last_load(1)), 4};
  a.energy = 0.25;
  a.seed = 7;
  const auto back = selector_from_json(to_json(a));
  CHECK(back.target == Target::MEM);
  CHECK(back.set == a.set);
  CHECK(back.energy == 0.25);
  auto j = to_json(a);
  j["members"].push_back("NOPE");
  CHECK_THROWS_AS(selector_from_json(j), Error);
}

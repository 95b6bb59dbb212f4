#include "sbsd/selector.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "sbsd/error.hpp"

namespace sbsd::selector {

using nlohmann::json;

std::string element_name(ElementId id) {
  if (id == kPc) return "PC";
  if (id <= gpr(7)) return "GPR" + std::to_string(id - gpr(0));
  if (id <= last_load(3)) return "LASTLOAD" + std::to_string(id - last_load(0));
  if (id <= last_store(3)) return "LASTSTOREADDR" + std::to_string(id - last_store(0));
  if (id == kLastBranch) return "LASTBRANCH";
  throw Error(ErrorCode::Precondition, "element id " + std::to_string(id) + " outside pool");
}

std::optional<ElementId> element_from_name(const std::string& name) {
  for (ElementId id = 0; id < kPoolSize; ++id) {
    if (element_name(id) == name) return id;
  }
  return std::nullopt;
}

const char* target_name(Target t) {
  switch (t) {
    case Target::PC: return "pc";
    case Target::GPR: return "gpr";
    case Target::MEM: return "mem";
  }
  return "?";
}

Target target_from_name(const std::string& name) {
  for (Target t : kTargets) {
    if (name == target_name(t)) return t;
  }
  throw Error(ErrorCode::MalformedArtifact, "unknown target '" + name + "'");
}

ElementState ElementState::initial(const isa::ProcessorState& s) {
  ElementState e;
  e.value[kPc] = s.pc;
  for (unsigned k = 0; k < isa::kNumRegs; ++k) e.value[gpr(k)] = s.regs[k];
  e.valid = (ElementMask{1} << (1 + isa::kNumRegs)) - 1;
  return e;
}

void ElementState::commit(const isa::Instruction& inst, const isa::StepEffects& fx, const isa::ProcessorState& after) {
  value[kPc] = after.pc;
  for (unsigned k = 0; k < isa::kNumRegs; ++k) value[gpr(k)] = after.regs[k];
  const auto shift_in = [&](ElementId first, Word v) {
    for (unsigned j = kHistorySlots - 1; j > 0; --j) {
      value[first + j] = value[first + j - 1];
      if ((valid >> (first + j - 1)) & 1u) valid |= ElementMask{1} << (first + j);
    }
    value[first] = v;
    valid |= ElementMask{1} << first;
  };
  if (fx.loaded) shift_in(last_load(0), *fx.loaded);
  if (fx.mem_write) {
    for (unsigned j = kHistorySlots - 1; j > 0; --j) store_addr[j] = store_addr[j - 1];
    store_addr[0] = fx.mem_write->first;
    shift_in(last_store(0), fx.mem_write->second);
  }
  if (isa::is_control(inst.op)) {
    value[kLastBranch] = fx.next_pc;
    valid |= ElementMask{1} << kLastBranch;
  }
}

ElementMask ElementState::matching(Word v) const {
  ElementMask m = 0;
  for (ElementId id = 0; id < kPoolSize; ++id) {
    if (((valid >> id) & 1u) && value[id] == v) m |= ElementMask{1} << id;
  }
  return m;
}

std::optional<ElementId> DependencyEvent::producing_element() const {
  if (matching == 0) return std::nullopt;
  return static_cast<ElementId>(std::countr_zero(matching));
}

namespace {

// The next pc is fixed by the instruction and its own pc.
bool static_transfer(const isa::Instruction& inst) {
  using isa::Opcode;
  return inst.op == Opcode::JAL || ((inst.op == Opcode::BEQ || inst.op == Opcode::BNE) && inst.rs1 == inst.rs2);
}

struct Writer {
  std::uint64_t step = 0;
  Word pc = 0;
  isa::EncodedInstruction inst;
  Word value = 0;
  ElementMask matching = 0;
  ElementMask valid = 0;

  DependencyEvent event(std::uint64_t consumer, Target kind) const {
    return {consumer, kind, step, pc, inst, value, matching, valid};
  }
};

}  // namespace

std::vector<DependencyEvent> extract_dependencies(const std::vector<isa::TraceRecord>& trace,
                                                  const isa::Program& program) {
  isa::replay(program, trace);  // throws CorruptTrace

  std::vector<DependencyEvent> out;
  isa::ProcessorState s = program.initial_state();
  ElementState elems = ElementState::initial(s);
  std::array<std::optional<Writer>, isa::kNumRegs> reg_writer;
  std::array<std::optional<Writer>, isa::kMemWords> mem_writer;
  Writer last_control;
  bool after_control = false;

  for (const auto& rec : trace) {
    const isa::Instruction inst = isa::decode(rec.inst);
    const isa::StepEffects fx = isa::effects(s, inst);

    if (after_control) {
      out.push_back(last_control.event(rec.step, Target::PC));
      after_control = false;
    }
    const Writer* gpr_producer = nullptr;
    for (auto r : isa::source_registers(inst)) {
      if (r == 0 || !reg_writer[r]) continue;
      if (!gpr_producer || reg_writer[r]->step > gpr_producer->step) gpr_producer = &*reg_writer[r];
    }
    if (gpr_producer) {
      out.push_back(gpr_producer->event(rec.step, Target::GPR));
    }
    if (inst.op == isa::Opcode::LW) {
      const Word addr = static_cast<Word>(s.regs[inst.rs1] + inst.imm);
      if (const auto& w = mem_writer[addr]) {
        out.push_back(w->event(rec.step, Target::MEM));
      }
    }

    if (fx.reg_write) {
      reg_writer[fx.reg_write->first] =
          Writer{rec.step, s.pc, rec.inst, fx.reg_write->second, elems.matching(fx.reg_write->second), elems.valid};
    }
    if (fx.mem_write) {
      mem_writer[fx.mem_write->first] =
          Writer{rec.step, s.pc, rec.inst, fx.mem_write->second, elems.matching(fx.mem_write->second), elems.valid};
    }
    if (isa::is_control(inst.op)) {
      ElementMask m = elems.matching(fx.next_pc);
      if (static_transfer(inst)) m |= ElementMask{1} << kPc;
      last_control = Writer{rec.step, s.pc, rec.inst, fx.next_pc, m, elems.valid};
      after_control = true;
    }
    isa::apply(s, fx);
    elems.commit(inst, fx, s);
  }
  return out;
}

std::vector<DependencyEvent> filter_kind(const std::vector<DependencyEvent>& events, Target kind) {
  std::vector<DependencyEvent> out;
  std::copy_if(events.begin(), events.end(), std::back_inserter(out),
               [kind](const DependencyEvent& e) { return e.kind == kind; });
  return out;
}

std::size_t SelectedStateSet::size() const { return static_cast<std::size_t>(std::popcount(members)); }

std::vector<ElementId> SelectedStateSet::sorted_members() const {
  std::vector<ElementId> out;
  for (ElementId id = 0; id < kPoolSize; ++id) {
    if (contains(id)) out.push_back(id);
  }
  return out;
}

Fraction reusability(const SelectedStateSet& s, const std::vector<DependencyEvent>& events) {
  if (events.empty()) throw Error(ErrorCode::NoDependencies, "no dependency events");
  std::uint64_t hits = 0;
  for (const auto& e : events) hits += (e.matching & s.members) != 0;
  return {hits, events.size()};
}

SelectedStateSet neighbor(const SelectedStateSet& s, Rng& rng) {
  const auto members = s.sorted_members();
  std::vector<ElementId> others;
  for (ElementId id = 0; id < kPoolSize; ++id) {
    if (!s.contains(id)) others.push_back(id);
  }
  if (others.empty()) throw Error(ErrorCode::PoolExhausted, "every pool element is already selected");
  if (members.empty()) throw Error(ErrorCode::Precondition, "neighbor of an empty set");
  const ElementId out = members[uniform_index(rng, members.size())];
  const ElementId in = others[uniform_index(rng, others.size())];
  SelectedStateSet next = s;
  next.members = (next.members & ~(ElementMask{1} << out)) | (ElementMask{1} << in);
  return next;
}

SelectedStateSet random_set(unsigned capacity, Rng& rng) {
  const unsigned k = std::min<unsigned>(capacity, kPoolSize);
  std::array<ElementId, kPoolSize> ids{};
  for (ElementId i = 0; i < kPoolSize; ++i) ids[i] = i;
  // Partial Fisher-Yates.
  SelectedStateSet s{0, capacity};
  for (unsigned i = 0; i < k; ++i) {
    const auto j = i + uniform_index(rng, kPoolSize - i);
    std::swap(ids[i], ids[j]);
    s.members |= ElementMask{1} << ids[i];
  }
  return s;
}

double acceptance_probability(double delta_e, double temperature) {
  if (delta_e <= 0) return 1.0;
  return std::exp(-delta_e / temperature);
}

AnnealResult anneal(const std::vector<DependencyEvent>& events, unsigned capacity, const AnnealSchedule& sched) {
  if (capacity < 1) throw Error(ErrorCode::Precondition, "capacity must be >= 1");
  if (!(sched.t0 > 0) || !(sched.alpha > 0 && sched.alpha < 1) || sched.resample_threshold == 0 ||
      sched.max_iters == 0) {
    throw Error(ErrorCode::Precondition, "invalid anneal schedule");
  }
  const auto energy = [&](const SelectedStateSet& s) { return 1.0 - reusability(s, events).to_double(); };
  Rng rng(sched.seed);
  AnnealResult r;
  if (capacity >= kPoolSize) {
    r.initial = r.best = {kFullPool, capacity};
    r.best_energy = energy(r.best);
    r.energy_history = r.best_history = {r.best_energy};
    return r;
  }
  SelectedStateSet current = random_set(capacity, rng);
  double e_cur = energy(current);
  r.initial = r.best = current;
  r.best_energy = e_cur;
  double t = sched.t0;
  std::uint64_t rejected = 0;
  while (r.iterations < sched.max_iters && rejected < sched.resample_threshold) {
    ++r.iterations;
    const SelectedStateSet cand = neighbor(current, rng);
    const double e_cand = energy(cand);
    const double u = uniform_unit(rng);
    if (u < acceptance_probability(e_cand - e_cur, t)) {
      current = cand;
      e_cur = e_cand;
      t *= sched.alpha;
      rejected = 0;
      if (e_cur < r.best_energy) {
        r.best_energy = e_cur;
        r.best = current;
      }
    } else {
      ++rejected;
    }
    r.energy_history.push_back(e_cur);
    r.best_history.push_back(r.best_energy);
  }
  return r;
}

std::vector<SelectedStateSet> nested_sets(const std::vector<DependencyEvent>& events, const SelectedStateSet& base,
                                          const std::vector<unsigned>& capacities) {
  std::vector<SelectedStateSet> out;
  SelectedStateSet cur = base;
  for (unsigned cap : capacities) {
    const std::size_t want = std::min<std::size_t>(cap, kPoolSize);
    while (cur.size() < want) {
      std::optional<ElementId> pick;
      std::uint64_t pick_hits = 0;
      for (ElementId id = 0; id < kPoolSize; ++id) {
        if (cur.contains(id)) continue;
        const ElementMask m = cur.members | (ElementMask{1} << id);
        std::uint64_t hits = 0;
        for (const auto& e : events) hits += (e.matching & m) != 0;
        if (!pick || hits > pick_hits) {
          pick = id;
          pick_hits = hits;
        }
      }
      cur.members |= ElementMask{1} << *pick;
    }
    cur.capacity = std::max<unsigned>(cur.capacity, cap);
    out.push_back(cur);
  }
  return out;
}

json schedule_to_json(const AnnealSchedule& s) {
  return {{"t0", s.t0}, {"alpha", s.alpha}, {"resample_threshold", s.resample_threshold},
          {"max_iters", s.max_iters}, {"seed", s.seed}};
}

AnnealSchedule schedule_from_json(const json& j) {
  AnnealSchedule s;
  s.t0 = j.value("t0", s.t0);
  s.alpha = j.value("alpha", s.alpha);
  s.resample_threshold = j.value("resample_threshold", s.resample_threshold);
  s.max_iters = j.value("max_iters", s.max_iters);
  s.seed = j.value("seed", s.seed);
  return s;
}

json to_json(const SelectorArtifact& a) {
  json members = json::array();
  for (auto id : a.set.sorted_members()) members.push_back(element_name(id));
  return {{"target", target_name(a.target)}, {"capacity", a.set.capacity},  {"members", members},
          {"energy", a.energy},              {"seed", a.seed},              {"schedule", schedule_to_json(a.schedule)}};
}

SelectorArtifact selector_from_json(const json& j) {
  try {
    SelectorArtifact a;
    a.target = target_from_name(j.at("target").get<std::string>());
    a.set.capacity = j.at("capacity").get<unsigned>();
    for (const auto& m : j.at("members")) {
      const auto id = element_from_name(m.get<std::string>());
      if (!id) throw Error(ErrorCode::MalformedArtifact, "unknown element " + m.dump());
      a.set.members |= ElementMask{1} << *id;
    }
    if (a.set.size() > a.set.capacity) throw Error(ErrorCode::MalformedArtifact, "more members than capacity");
    a.energy = j.at("energy").get<double>();
    a.seed = j.at("seed").get<std::uint64_t>();
    a.schedule = schedule_from_json(j.at("schedule"));
    return a;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedArtifact, e.what());
  }
}

}  // namespace sbsd::selector

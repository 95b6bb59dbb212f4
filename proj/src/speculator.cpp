#include "sbsd/speculator.hpp"

#include <algorithm>
#include <bit>
#include <set>

#include "sbsd/error.hpp"
#include "sbsd/rng.hpp"

namespace sbsd::speculator {

using nlohmann::json;
using oracle::kInputWidth;

const char* mode_name(Mode m) { return m == Mode::Factored ? "factored" : "direct"; }

Mode default_mode(Target t) { return t == Target::PC ? Mode::Direct : Mode::Factored; }

namespace {

unsigned output_bits(Mode mode, std::size_t slot_count) {
  if (mode == Mode::Direct) return 16;
  return std::max(1u, static_cast<unsigned>(std::bit_width(slot_count > 0 ? slot_count - 1 : 0)));
}

bsd::Bsd abstain_root() {
  bsd::Bsd b(kInputWidth, 0);
  b.set_abstain(0, true);
  return b;
}

// Grows toward the target and marks every leaf without unanimous support.
bsd::Bsd fit(const bsd::ExampleSet& examples, const TrainConfig& cfg) {
  if (examples.empty()) return abstain_root();
  bsd::Bsd b = bsd::grow(examples, cfg.target_accuracy, cfg.max_nodes, bsd::TieBreak::Impurity).bsd;
  for (bsd::NodeRef n = 0; n < b.nodes().size(); ++n) {
    if (b.is_leaf(n) && !b.leaf(n).pure()) b.set_abstain(n, true);
  }
  return b;
}

// Output label of a predictable input.
std::uint32_t label(const Speculator& s, const std::vector<ElementId>& slots, const oracle::Truth& t) {
  if (s.mode == Mode::Direct) return *t.offset;
  for (std::uint32_t i = 0; i < slots.size(); ++i) {
    if ((t.mask >> slots[i]) & 1u) return i;
  }
  throw Error(ErrorCode::Precondition, "label of an unpredictable input");
}

}  // namespace

Speculator abstain_everywhere(Target t, const SelectedStateSet& members) {
  Speculator s;
  s.target = t;
  s.mode = default_mode(t);
  s.members = members;
  s.valid = abstain_root();
  const unsigned n = output_bits(s.mode, members.size());
  s.bits.assign(n, abstain_root());
  return s;
}

Speculator train_speculator(const OracleTable& table, const SelectedStateSet& members, const TrainConfig& cfg) {
  if (table.empty()) throw Error(ErrorCode::EmptyExamples, "oracle table is empty");
  Speculator s = abstain_everywhere(table.target(), members);
  const auto slots = s.slots();

  bsd::ExampleSet valid_rows(kInputWidth);
  std::vector<std::pair<std::uint16_t, std::uint32_t>> labelled;
  for (const auto& [input, entry] : table.entries()) {
    const oracle::Truth t = *table.lookup(input);
    const bool ok = oracle::predictable(s.target, t, members);
    valid_rows.add(input, ok);
    if (ok) labelled.emplace_back(input, label(s, slots, t));
  }
  if (labelled.empty()) return s;

  s.valid = fit(valid_rows, cfg);
  for (unsigned b = 0; b < s.bits.size(); ++b) {
    bsd::ExampleSet rows(kInputWidth);
    for (const auto& [input, value] : labelled) rows.add(input, (value >> b) & 1u);
    s.bits[b] = fit(rows, cfg);
  }
  return s;
}

std::optional<std::uint32_t> decide(const Speculator& s, std::uint16_t input) {
  const auto& v = s.valid.leaf(s.valid.reach(input));
  if (v.abstain || v.guess == 0) return std::nullopt;
  std::uint32_t out = 0;
  for (unsigned b = 0; b < s.bits.size(); ++b) {
    const auto& leaf = s.bits[b].leaf(s.bits[b].reach(input));
    if (leaf.abstain) return std::nullopt;
    out |= std::uint32_t{leaf.guess} << b;
  }
  if (s.mode == Mode::Factored && out >= s.members.size()) return std::nullopt;
  return out;
}

StateBuffer StateBuffer::mirror(const ElementState& elems, const SelectedStateSet& members) {
  StateBuffer b;
  b.slots = members.sorted_members();
  for (auto id : b.slots) {
    b.value.push_back(elems.value[id]);
    b.valid.push_back((elems.valid >> id) & 1u);
  }
  return b;
}

Prediction predict(const Speculator& s, std::uint16_t input, const StateBuffer& buffer, Word producer_pc) {
  Prediction p;
  const auto d = decide(s, input);
  if (!d) return p;
  if (s.mode == Mode::Direct) {
    if (!s.members.contains(selector::kPc)) return p;
    p.abstain = false;
    p.data = static_cast<Word>(producer_pc + *d);
    return p;
  }
  if (buffer.slots != s.slots()) throw Error(ErrorCode::LayoutMismatch, "buffer slots differ from speculator");
  if (!buffer.valid[*d]) return p;
  p.abstain = false;
  p.data = buffer.value[*d];
  p.element = buffer.slots[*d];
  return p;
}

Prediction predict(const Speculator& s, const bsd::BitVector& input, const StateBuffer& buffer, Word producer_pc) {
  if (input.width != kInputWidth) {
    throw Error(ErrorCode::LayoutMismatch, "expected 16 instruction bits, got width " + std::to_string(input.width));
  }
  return predict(s, static_cast<std::uint16_t>(input.bits), buffer, producer_pc);
}

bool sound_on(const Speculator& s, std::uint16_t input, const oracle::Truth& truth) {
  const auto d = decide(s, input);
  if (!d) return true;
  if (s.mode == Mode::Direct) {
    return s.members.contains(selector::kPc) && truth.offset && *truth.offset == *d;
  }
  return (truth.mask >> s.slots()[*d]) & 1u;
}

VerifyResult verify_speculator(const Speculator& s, const Oracle& truth, const DomainSpec& domain,
                               std::size_t cap) {
  if (domain.kind == DomainSpec::Kind::Exhaustive && domain.width > kMaxExhaustiveWidth) {
    throw Error(ErrorCode::DomainTooLarge, "exhaustive verification of width " + std::to_string(domain.width));
  }
  if (domain.width != kInputWidth) {
    throw Error(ErrorCode::LayoutMismatch, "speculator input width is 16, domain width " +
                                               std::to_string(domain.width));
  }
  VerifyResult r;
  std::set<std::uint16_t> bad;
  const auto check = [&](std::uint16_t x) {
    ++r.checked;
    const auto t = truth.lookup(x);
    // A prediction the oracle cannot confirm counts against the speculator.
    const bool ok = t ? sound_on(s, x, *t) : !decide(s, x).has_value();
    if (!ok) bad.insert(x);
  };
  if (domain.kind == DomainSpec::Kind::Exhaustive) {
    for (std::uint32_t x = 0; x < oracle::kDomainSize; ++x) check(static_cast<std::uint16_t>(x));
  } else {
    if (domain.samples < 1'000'000) throw Error(ErrorCode::Precondition, "sampled verification needs >= 10^6 samples");
    Rng rng(domain.seed);
    for (std::uint64_t i = 0; i < domain.samples; ++i) {
      check(static_cast<std::uint16_t>(uniform_index(rng, oracle::kDomainSize)));
    }
  }
  r.verified = bad.empty();
  for (auto x : bad) {
    if (r.counterexamples.size() >= cap) break;
    r.counterexamples.push_back(x);
  }
  return r;
}

Speculator refine(const Speculator& s, const std::vector<std::uint16_t>& counterexamples, OracleTable& table,
                  const Oracle& truth, RefineStrategy strategy, const TrainConfig& cfg) {
  if (counterexamples.empty()) throw Error(ErrorCode::Precondition, "refine needs counterexamples");
  if (strategy == RefineStrategy::ForceAbstain) {
    Speculator out = s;
    for (auto x : counterexamples) out.valid.set_abstain(out.valid.reach(x), true);
    return out;
  }
  for (auto x : counterexamples) table.set_truth(x, truth.lookup(x).value_or(oracle::Truth{}));
  Speculator out = train_speculator(table, s.members, cfg);
  out.verification = s.verification;
  return out;
}

Speculator verify_and_refine(Speculator s, OracleTable& table, const Oracle& truth, const DomainSpec& domain,
                             const TrainConfig& cfg, unsigned max_retrain) {
  unsigned rounds = 0;
  VerifyResult r = verify_speculator(s, truth, domain);
  while (!r.verified) {
    const auto strategy = rounds < max_retrain ? RefineStrategy::Retrain : RefineStrategy::ForceAbstain;
    s = refine(s, r.counterexamples, table, truth, strategy, cfg);
    ++rounds;
    r = verify_speculator(s, truth, domain);
    if (strategy == RefineStrategy::ForceAbstain) break;
  }
  s.verification.mode = domain.kind == DomainSpec::Kind::Exhaustive ? "exhaustive" : "sampled";
  s.verification.width = domain.width;
  s.verification.samples = domain.kind == DomainSpec::Kind::Sampled ? domain.samples : 0;
  s.verification.seed = domain.kind == DomainSpec::Kind::Sampled ? domain.seed : 0;
  s.verification.status = r.verified ? "verified" : "failed";
  s.verification.counterexample_rounds = rounds;
  return s;
}

double PredictionMetrics::precision() const {
  return tp + fp == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
}

double PredictionMetrics::recall() const {
  return tp + fn == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
}

double PredictionMetrics::coverage() const {
  return total() == 0 ? 0.0 : static_cast<double>(tp + fp) / static_cast<double>(total());
}

PredictionMetrics& PredictionMetrics::operator+=(const PredictionMetrics& o) {
  tp += o.tp;
  fp += o.fp;
  tn += o.tn;
  fn += o.fn;
  return *this;
}

PredictionMetrics measure(const Speculator& s, const std::vector<selector::DependencyEvent>& events,
                          const Oracle& truth) {
  PredictionMetrics m;
  const auto slots = s.slots();
  for (const auto& ev : events) {
    if (ev.kind != s.target) continue;
    const auto t = truth.lookup(ev.producer_inst.bits);
    if (!t) {
      throw Error(ErrorCode::MissingOracleEntry, "no oracle entry for producer " + std::to_string(ev.producer_inst.bits));
    }
    const auto d = decide(s, ev.producer_inst.bits);
    bool positive = d.has_value();
    bool correct = false;
    if (positive && s.mode == Mode::Factored) {
      const ElementId e = slots[*d];
      positive = (ev.valid >> e) & 1u;
      correct = (ev.matching >> e) & 1u;
    } else if (positive) {
      correct = static_cast<Word>(ev.producer_pc + *d) == ev.needed_value;
    }
    if (positive) {
      ++(correct ? m.tp : m.fp);
    } else {
      ++(oracle::predictable(s.target, *t, s.members) ? m.fn : m.tn);
    }
  }
  return m;
}

json to_json(const Speculator& s) {
  json bits = json::array();
  for (const auto& b : s.bits) bits.push_back(bsd::to_json(b));
  json members = json::array();
  for (auto id : s.slots()) members.push_back(selector::element_name(id));
  json ver = {{"mode", s.verification.mode},
              {"status", s.verification.status},
              {"seed", s.verification.seed},
              {"counterexample_rounds", s.verification.counterexample_rounds}};
  if (s.verification.mode == "sampled") {
    ver["samples"] = s.verification.samples;
  } else {
    ver["width"] = s.verification.width;
  }
  json j = {{"target", selector::target_name(s.target)},
            {"mode", mode_name(s.mode)},
            {"capacity", s.members.capacity},
            {"members", members},
            {"layout", {{"inst", {0, kInputWidth}}}},
            {"valid_bsd", bsd::to_json(s.valid)},
            {"abstain", "leaf"},
            {"verification", ver}};
  j[s.mode == Mode::Factored ? "slot_bsds" : "data_bsds"] = std::move(bits);
  return j;
}

Speculator speculator_from_json(const json& j) {
  try {
    Speculator s;
    s.target = selector::target_from_name(j.at("target").get<std::string>());
    const std::string mode = j.at("mode").get<std::string>();
    if (mode != "factored" && mode != "direct") throw Error(ErrorCode::MalformedArtifact, "unknown mode " + mode);
    s.mode = mode == "factored" ? Mode::Factored : Mode::Direct;
    s.members.capacity = j.at("capacity").get<unsigned>();
    for (const auto& m : j.at("members")) {
      const auto id = selector::element_from_name(m.get<std::string>());
      if (!id) throw Error(ErrorCode::MalformedArtifact, "unknown element " + m.dump());
      s.members.members |= selector::ElementMask{1} << *id;
    }
    if (j.at("layout") != json{{"inst", {0, kInputWidth}}}) {
      throw Error(ErrorCode::LayoutMismatch, "unsupported input layout " + j.at("layout").dump());
    }
    s.valid = bsd::bsd_from_json(j.at("valid_bsd"));
    for (const auto& b : j.at(s.mode == Mode::Factored ? "slot_bsds" : "data_bsds")) {
      s.bits.push_back(bsd::bsd_from_json(b));
    }
    if (s.bits.size() != output_bits(s.mode, s.members.size())) {
      throw Error(ErrorCode::MalformedArtifact, "wrong number of output diagrams");
    }
    if (s.valid.input_width() != kInputWidth) throw Error(ErrorCode::LayoutMismatch, "diagram width");
    for (const auto& b : s.bits) {
      if (b.input_width() != kInputWidth) throw Error(ErrorCode::LayoutMismatch, "diagram width");
    }
    const auto& v = j.at("verification");
    s.verification.mode = v.at("mode").get<std::string>();
    s.verification.status = v.at("status").get<std::string>();
    s.verification.seed = v.at("seed").get<std::uint64_t>();
    s.verification.counterexample_rounds = v.at("counterexample_rounds").get<unsigned>();
    s.verification.samples = v.value("samples", std::uint64_t{0});
    s.verification.width = v.value("width", kInputWidth);
    return s;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedArtifact, e.what());
  }
}

}  // namespace sbsd::speculator

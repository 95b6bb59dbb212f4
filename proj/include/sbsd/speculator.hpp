#pragma once

// Abstaining dependent-data predictors. A speculator is a "valid" diagram
// deciding whether to predict plus one diagram per output bit. FACTORED mode
// outputs a buffer slot whose live value is the prediction; DIRECT mode
// outputs the value itself (here: the next-pc offset).

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "sbsd/bsd.hpp"
#include "sbsd/oracle.hpp"
#include "sbsd/selector.hpp"

namespace sbsd::speculator {

using isa::Word;
using oracle::Oracle;
using oracle::OracleTable;
using selector::ElementId;
using selector::ElementState;
using selector::SelectedStateSet;
using selector::Target;

enum class Mode { Factored, Direct };
const char* mode_name(Mode m);

struct Verification {
  std::string mode = "none";  // "exhaustive" | "sampled" | "none"
  unsigned width = oracle::kInputWidth;
  std::uint64_t samples = 0;
  std::uint64_t seed = 0;
  std::string status = "unverified";  // "verified" | "failed" | "unverified"
  unsigned counterexample_rounds = 0;

  friend bool operator==(const Verification&, const Verification&) = default;
};

struct Speculator {
  Target target = Target::GPR;
  Mode mode = Mode::Factored;
  SelectedStateSet members;
  bsd::Bsd valid{oracle::kInputWidth};
  std::vector<bsd::Bsd> bits;  // slot bits (FACTORED) or offset bits (DIRECT), LSB first
  Verification verification;

  std::vector<ElementId> slots() const { return members.sorted_members(); }
};

Mode default_mode(Target t);

// Never predicts. Always sound.
Speculator abstain_everywhere(Target t, const SelectedStateSet& members);

struct TrainConfig {
  Fraction target_accuracy{1, 1};  // 1 - epsilon, per diagram
  std::size_t max_nodes = std::size_t{1} << 20;
};

// Trains on the table's rows. Leaves whose examples were impure or empty are
// marked abstain, so on the training rows every non-abstaining output agrees
// with the table.
Speculator train_speculator(const OracleTable& table, const SelectedStateSet& members, const TrainConfig& cfg);

// The buffer-independent part of a prediction: the slot (FACTORED) or the
// offset (DIRECT), or nothing when some reached leaf abstains.
std::optional<std::uint32_t> decide(const Speculator& s, std::uint16_t input);

// Live values of the selected elements, one per slot.
struct StateBuffer {
  std::vector<ElementId> slots;
  std::vector<Word> value;
  std::vector<bool> valid;

  static StateBuffer mirror(const ElementState& elems, const SelectedStateSet& members);
};

struct Prediction {
  bool abstain = true;
  Word data = 0;
  std::optional<ElementId> element;  // FACTORED: the element read
};

// `producer_pc` anchors DIRECT (pc-relative) predictions.
Prediction predict(const Speculator& s, std::uint16_t input, const StateBuffer& buffer, Word producer_pc);
// Checks the input layout (16 instruction bits).
Prediction predict(const Speculator& s, const bsd::BitVector& input, const StateBuffer& buffer, Word producer_pc);

// Whether a non-abstaining prediction for `input` agrees with the truth.
bool sound_on(const Speculator& s, std::uint16_t input, const oracle::Truth& truth);

struct DomainSpec {
  enum class Kind { Exhaustive, Sampled } kind = Kind::Exhaustive;
  unsigned width = oracle::kInputWidth;
  std::uint64_t samples = 1'000'000;
  std::uint64_t seed = 1;
};

inline constexpr unsigned kMaxExhaustiveWidth = 24;

struct VerifyResult {
  bool verified = false;
  std::vector<std::uint16_t> counterexamples;  // ascending, capped
  std::uint64_t checked = 0;
};

VerifyResult verify_speculator(const Speculator& s, const Oracle& truth, const DomainSpec& domain,
                               std::size_t cap = oracle::kDomainSize);

enum class RefineStrategy { Retrain, ForceAbstain };

// Retrain: writes the counterexamples' exact truth into the table and
// retrains. ForceAbstain: marks the valid-diagram leaf reached by each
// counterexample as abstaining.
Speculator refine(const Speculator& s, const std::vector<std::uint16_t>& counterexamples, OracleTable& table,
                  const Oracle& truth, RefineStrategy strategy, const TrainConfig& cfg);

// verify -> refine until verified: up to max_retrain Retrain rounds, then
// ForceAbstain. Records the outcome in the returned speculator.
Speculator verify_and_refine(Speculator s, OracleTable& table, const Oracle& truth, const DomainSpec& domain,
                             const TrainConfig& cfg, unsigned max_retrain);

struct PredictionMetrics {
  std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::uint64_t total() const { return tp + fp + tn + fn; }
  double precision() const;
  double recall() const;
  double coverage() const;
  PredictionMetrics& operator+=(const PredictionMetrics& o);
  friend bool operator==(const PredictionMetrics&, const PredictionMetrics&) = default;
};

// Scores the events of the speculator's target kind. An event is positive
// when the speculator predicts with a valid slot, true when the predicted
// value equals the needed value (positive) or the oracle deems the input
// unpredictable (negative).
PredictionMetrics measure(const Speculator& s, const std::vector<selector::DependencyEvent>& events,
                          const Oracle& truth);

nlohmann::json to_json(const Speculator& s);
Speculator speculator_from_json(const nlohmann::json& j);

}  // namespace sbsd::speculator

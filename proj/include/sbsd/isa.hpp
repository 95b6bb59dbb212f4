#pragma once

// MiniRV-16: a 16-bit, 8-register, word-addressed toy RISC ISA with separate
// 256-word instruction and data memories, plus its single-cycle reference
// processor.

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace sbsd::isa {

using Word = std::uint16_t;

inline constexpr std::size_t kNumRegs = 8;
inline constexpr std::size_t kMemWords = 256;
inline constexpr std::size_t kMaxProgramLength = 256;
inline constexpr int kImm6Min = -32;
inline constexpr int kImm6Max = 31;
inline constexpr int kImm9Min = -256;
inline constexpr int kImm9Max = 255;

enum class Opcode : std::uint8_t {
  ADD = 0,
  SUB = 1,
  AND = 2,
  OR = 3,
  XOR = 4,
  SLT = 5,
  ADDI = 6,
  LW = 7,
  SW = 8,
  BEQ = 9,
  BNE = 10,
  JAL = 11,
  MUL = 12,
  HALT = 13,
};

inline constexpr int kNumOpcodes = 14;

enum class Format { R, I, S, B, J, Halt };

Format format_of(Opcode op);
const char* mnemonic(Opcode op);
std::optional<Opcode> opcode_from_mnemonic(const std::string& name);

bool is_control(Opcode op);       // BEQ, BNE, JAL
bool is_memory(Opcode op);        // LW, SW
bool writes_register(Opcode op);  // R-format, ADDI, LW, JAL

struct EncodedInstruction {
  std::uint16_t bits = 0;

  Opcode opcode_unchecked() const { return static_cast<Opcode>(bits >> 12); }
  friend auto operator<=>(const EncodedInstruction&, const EncodedInstruction&) = default;
};

// Decoded form. Fields unused by the format are zero. `reserved` holds the
// don't-care bits of R-format ([2:0]) and HALT ([11:0]) so that decoding is
// lossless; the semantics ignore it.
struct Instruction {
  Opcode op = Opcode::ADD;
  std::uint8_t rd = 0;
  std::uint8_t rs1 = 0;
  std::uint8_t rs2 = 0;
  std::int16_t imm = 0;
  std::uint16_t reserved = 0;

  friend bool operator==(const Instruction&, const Instruction&) = default;
};

Instruction decode(EncodedInstruction e);
EncodedInstruction encode(const Instruction& inst);
std::string disassemble(const Instruction& inst);

// Registers read by the instruction (r0 reads included; callers filter).
std::vector<std::uint8_t> source_registers(const Instruction& inst);
// Destination register when the instruction writes one and it is not r0.
std::optional<std::uint8_t> destination_register(const Instruction& inst);

struct ProcessorState {
  Word pc = 0;
  std::array<Word, kNumRegs> regs{};
  std::array<Word, kMemWords> mem{};
  bool halted = false;

  friend bool operator==(const ProcessorState&, const ProcessorState&) = default;
};

struct Program {
  std::vector<EncodedInstruction> instructions;
  std::vector<std::pair<Word, Word>> data_init;  // (address, value)
  Word entry_pc = 0;

  ProcessorState initial_state() const;
  EncodedInstruction fetch(Word pc) const;  // throws PcOutOfRange
  void validate() const;

  friend bool operator==(const Program&, const Program&) = default;
};

// Architectural side effects of one instruction, computed without applying.
struct StepEffects {
  std::optional<std::pair<std::uint8_t, Word>> reg_write;  // never targets r0
  std::optional<std::pair<Word, Word>> mem_write;          // (address, value)
  std::optional<Word> loaded;                              // LW result
  Word next_pc = 0;
  bool halts = false;
  // Value computed for rd before the r0 discard (R-format, ADDI, LW, JAL).
  std::optional<Word> result;
};

StepEffects effects(const ProcessorState& s, const Instruction& inst);
void apply(ProcessorState& s, const StepEffects& fx);

// The single-cycle transition Processor: state x instruction -> state.
ProcessorState step(ProcessorState s, EncodedInstruction e);

unsigned latency(Opcode op);
unsigned latency(const ProcessorState& s, EncodedInstruction e);

struct TraceRecord {
  std::uint64_t step = 0;
  Word pc_before = 0;
  EncodedInstruction inst;
  std::optional<std::pair<std::uint8_t, Word>> reg_write;
  std::optional<std::pair<Word, Word>> mem_write;
  Word next_pc = 0;
  unsigned latency = 1;

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

struct SingleRun {
  ProcessorState final_state;
  std::vector<TraceRecord> trace;
  std::uint64_t latency_sum = 0;
  std::uint64_t retired = 0;
  bool step_limit_exceeded = false;

  double cpi() const { return retired == 0 ? 0.0 : static_cast<double>(latency_sum) / static_cast<double>(retired); }
};

// Executes until HALT (which retires) or max_steps. Hitting the limit is
// reported through step_limit_exceeded with the partial trace kept.
SingleRun run_single(const Program& p, std::size_t max_steps);

// Re-executes `trace` from the program's initial state; returns the final state
// or throws CorruptTrace on the first mismatching record.
ProcessorState replay(const Program& p, const std::vector<TraceRecord>& trace);

}  // namespace sbsd::isa

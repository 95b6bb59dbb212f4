#include "sbsd/isa.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "sbsd/error.hpp"

namespace sbsd::isa {

namespace {

constexpr std::array<const char*, kNumOpcodes> kMnemonics = {
    "ADD", "SUB", "AND", "OR", "XOR", "SLT", "ADDI", "LW", "SW", "BEQ", "BNE", "JAL", "MUL", "HALT"};

std::int16_t sign_extend(unsigned value, unsigned bits) {
  const unsigned sign = 1u << (bits - 1);
  const int v = static_cast<int>(value & ((1u << bits) - 1));
  return static_cast<std::int16_t>((value & sign) ? v - (1 << bits) : v);
}

void require_reg(std::uint8_t r, const char* field) {
  if (r >= kNumRegs) {
    throw Error(ErrorCode::FieldOutOfRange, std::string(field) + " register index " + std::to_string(r) + " > 7");
  }
}

void require_imm(int imm, int lo, int hi) {
  if (imm < lo || imm > hi) {
    throw Error(ErrorCode::FieldOutOfRange,
                "immediate " + std::to_string(imm) + " outside [" + std::to_string(lo) + "," + std::to_string(hi) + "]");
  }
}

Word checked_address(Word base, std::int16_t imm) {
  const Word addr = static_cast<Word>(base + static_cast<Word>(imm));
  if (addr >= kMemWords) {
    throw Error(ErrorCode::MemOutOfRange, "effective address " + std::to_string(addr));
  }
  return addr;
}

}  // namespace

Format format_of(Opcode op) {
  switch (op) {
    case Opcode::ADD:
    case Opcode::SUB:
    case Opcode::AND:
    case Opcode::OR:
    case Opcode::XOR:
    case Opcode::SLT:
    case Opcode::MUL:
      return Format::R;
    case Opcode::ADDI:
    case Opcode::LW:
      return Format::I;
    case Opcode::SW:
      return Format::S;
    case Opcode::BEQ:
    case Opcode::BNE:
      return Format::B;
    case Opcode::JAL:
      return Format::J;
    case Opcode::HALT:
      return Format::Halt;
  }
  return Format::Halt;
}

const char* mnemonic(Opcode op) { return kMnemonics[static_cast<std::size_t>(op)]; }

std::optional<Opcode> opcode_from_mnemonic(const std::string& name) {
  std::string upper(name);
  std::transform(upper.begin(), upper.end(), upper.begin(), [](unsigned char c) { return std::toupper(c); });
  for (int i = 0; i < kNumOpcodes; ++i) {
    if (upper == kMnemonics[static_cast<std::size_t>(i)]) return static_cast<Opcode>(i);
  }
  return std::nullopt;
}

bool is_control(Opcode op) { return op == Opcode::BEQ || op == Opcode::BNE || op == Opcode::JAL; }

bool is_memory(Opcode op) { return op == Opcode::LW || op == Opcode::SW; }

bool writes_register(Opcode op) {
  const Format f = format_of(op);
  return f == Format::R || op == Opcode::ADDI || op == Opcode::LW || op == Opcode::JAL;
}

Instruction decode(EncodedInstruction e) {
  const unsigned bits = e.bits;
  const unsigned opc = bits >> 12;
  if (opc >= kNumOpcodes) {
    throw Error(ErrorCode::InvalidOpcode, "opcode " + std::to_string(opc));
  }
  Instruction inst;
  inst.op = static_cast<Opcode>(opc);
  const auto f11_9 = static_cast<std::uint8_t>((bits >> 9) & 7);
  const auto f8_6 = static_cast<std::uint8_t>((bits >> 6) & 7);
  switch (format_of(inst.op)) {
    case Format::R:
      inst.rd = f11_9;
      inst.rs1 = f8_6;
      inst.rs2 = static_cast<std::uint8_t>((bits >> 3) & 7);
      inst.reserved = static_cast<std::uint16_t>(bits & 7);
      break;
    case Format::I:
      inst.rd = f11_9;
      inst.rs1 = f8_6;
      inst.imm = sign_extend(bits, 6);
      break;
    case Format::S:
      inst.rs2 = f11_9;
      inst.rs1 = f8_6;
      inst.imm = sign_extend(bits, 6);
      break;
    case Format::B:
      inst.rs1 = f11_9;
      inst.rs2 = f8_6;
      inst.imm = sign_extend(bits, 6);
      break;
    case Format::J:
      inst.rd = f11_9;
      inst.imm = sign_extend(bits, 9);
      break;
    case Format::Halt:
      inst.reserved = static_cast<std::uint16_t>(bits & 0x0FFF);
      break;
  }
  return inst;
}

EncodedInstruction encode(const Instruction& inst) {
  const auto opc = static_cast<unsigned>(inst.op);
  if (opc >= kNumOpcodes) throw Error(ErrorCode::InvalidOpcode, "opcode " + std::to_string(opc));
  unsigned bits = opc << 12;
  switch (format_of(inst.op)) {
    case Format::R:
      require_reg(inst.rd, "rd");
      require_reg(inst.rs1, "rs1");
      require_reg(inst.rs2, "rs2");
      if (inst.reserved > 7) throw Error(ErrorCode::FieldOutOfRange, "R-format reserved bits");
      bits |= (inst.rd << 9) | (inst.rs1 << 6) | (inst.rs2 << 3) | inst.reserved;
      break;
    case Format::I:
      require_reg(inst.rd, "rd");
      require_reg(inst.rs1, "rs1");
      require_imm(inst.imm, kImm6Min, kImm6Max);
      bits |= (inst.rd << 9) | (inst.rs1 << 6) | (static_cast<unsigned>(inst.imm) & 0x3F);
      break;
    case Format::S:
      require_reg(inst.rs2, "rs2");
      require_reg(inst.rs1, "rs1");
      require_imm(inst.imm, kImm6Min, kImm6Max);
      bits |= (inst.rs2 << 9) | (inst.rs1 << 6) | (static_cast<unsigned>(inst.imm) & 0x3F);
      break;
    case Format::B:
      require_reg(inst.rs1, "rs1");
      require_reg(inst.rs2, "rs2");
      require_imm(inst.imm, kImm6Min, kImm6Max);
      bits |= (inst.rs1 << 9) | (inst.rs2 << 6) | (static_cast<unsigned>(inst.imm) & 0x3F);
      break;
    case Format::J:
      require_reg(inst.rd, "rd");
      require_imm(inst.imm, kImm9Min, kImm9Max);
      bits |= (inst.rd << 9) | (static_cast<unsigned>(inst.imm) & 0x1FF);
      break;
    case Format::Halt:
      if (inst.reserved > 0x0FFF) throw Error(ErrorCode::FieldOutOfRange, "HALT reserved bits");
      bits |= inst.reserved;
      break;
  }
  return EncodedInstruction{static_cast<std::uint16_t>(bits)};
}

std::string disassemble(const Instruction& inst) {
  std::ostringstream os;
  os << mnemonic(inst.op);
  const auto r = [](unsigned idx) { return "r" + std::to_string(idx); };
  switch (format_of(inst.op)) {
    case Format::R:
      os << ' ' << r(inst.rd) << ", " << r(inst.rs1) << ", " << r(inst.rs2);
      break;
    case Format::I:
      if (inst.op == Opcode::LW) {
        os << ' ' << r(inst.rd) << ", " << inst.imm << '(' << r(inst.rs1) << ')';
      } else {
        os << ' ' << r(inst.rd) << ", " << r(inst.rs1) << ", " << inst.imm;
      }
      break;
    case Format::S:
      os << ' ' << r(inst.rs2) << ", " << inst.imm << '(' << r(inst.rs1) << ')';
      break;
    case Format::B:
      os << ' ' << r(inst.rs1) << ", " << r(inst.rs2) << ", " << inst.imm;
      break;
    case Format::J:
      os << ' ' << r(inst.rd) << ", " << inst.imm;
      break;
    case Format::Halt:
      break;
  }
  return os.str();
}

std::vector<std::uint8_t> source_registers(const Instruction& inst) {
  switch (format_of(inst.op)) {
    case Format::R:
    case Format::S:
    case Format::B:
      return {inst.rs1, inst.rs2};
    case Format::I:
      return {inst.rs1};
    case Format::J:
    case Format::Halt:
      return {};
  }
  return {};
}

std::optional<std::uint8_t> destination_register(const Instruction& inst) {
  if (!writes_register(inst.op) || inst.rd == 0) return std::nullopt;
  return inst.rd;
}

ProcessorState Program::initial_state() const {
  validate();
  ProcessorState s;
  s.pc = entry_pc;
  for (const auto& [addr, value] : data_init) s.mem[addr] = value;
  return s;
}

EncodedInstruction Program::fetch(Word pc) const {
  if (pc >= instructions.size()) {
    throw Error(ErrorCode::PcOutOfRange, "pc " + std::to_string(pc) + " beyond program of " +
                                             std::to_string(instructions.size()));
  }
  return instructions[pc];
}

void Program::validate() const {
  if (instructions.size() > kMaxProgramLength) {
    throw Error(ErrorCode::Precondition, "program longer than 256 instructions");
  }
  for (const auto& [addr, value] : data_init) {
    (void)value;
    if (addr >= kMemWords) throw Error(ErrorCode::MemOutOfRange, "data address " + std::to_string(addr));
  }
}

StepEffects effects(const ProcessorState& s, const Instruction& inst) {
  StepEffects fx;
  fx.next_pc = static_cast<Word>(s.pc + 1);
  const Word a = s.regs[inst.rs1];
  const Word b = s.regs[inst.rs2];
  std::optional<Word> value;
  switch (inst.op) {
    case Opcode::ADD: value = static_cast<Word>(a + b); break;
    case Opcode::SUB: value = static_cast<Word>(a - b); break;
    case Opcode::AND: value = static_cast<Word>(a & b); break;
    case Opcode::OR: value = static_cast<Word>(a | b); break;
    case Opcode::XOR: value = static_cast<Word>(a ^ b); break;
    case Opcode::SLT:
      value = static_cast<Word>(static_cast<std::int16_t>(a) < static_cast<std::int16_t>(b) ? 1 : 0);
      break;
    case Opcode::MUL: value = static_cast<Word>(static_cast<std::uint32_t>(a) * b); break;
    case Opcode::ADDI: value = static_cast<Word>(a + static_cast<Word>(inst.imm)); break;
    case Opcode::LW: {
      const Word addr = checked_address(a, inst.imm);
      value = s.mem[addr];
      fx.loaded = value;
      break;
    }
    case Opcode::SW: {
      const Word addr = checked_address(a, inst.imm);
      fx.mem_write = std::make_pair(addr, s.regs[inst.rs2]);
      break;
    }
    case Opcode::BEQ:
      if (s.regs[inst.rs1] == s.regs[inst.rs2]) fx.next_pc = static_cast<Word>(s.pc + static_cast<Word>(inst.imm));
      break;
    case Opcode::BNE:
      if (s.regs[inst.rs1] != s.regs[inst.rs2]) fx.next_pc = static_cast<Word>(s.pc + static_cast<Word>(inst.imm));
      break;
    case Opcode::JAL:
      value = static_cast<Word>(s.pc + 1);
      fx.next_pc = static_cast<Word>(s.pc + static_cast<Word>(inst.imm));
      break;
    case Opcode::HALT:
      fx.next_pc = s.pc;
      fx.halts = true;
      break;
  }
  fx.result = value;
  if (value && inst.rd != 0) fx.reg_write = std::make_pair(inst.rd, *value);
  return fx;
}

void apply(ProcessorState& s, const StepEffects& fx) {
  if (fx.reg_write) s.regs[fx.reg_write->first] = fx.reg_write->second;
  if (fx.mem_write) s.mem[fx.mem_write->first] = fx.mem_write->second;
  s.pc = fx.next_pc;
  if (fx.halts) s.halted = true;
  s.regs[0] = 0;
}

ProcessorState step(ProcessorState s, EncodedInstruction e) {
  if (s.halted) throw Error(ErrorCode::Precondition, "step on a halted state");
  const Instruction inst = decode(e);
  apply(s, effects(s, inst));
  return s;
}

unsigned latency(Opcode op) {
  switch (op) {
    case Opcode::LW:
    case Opcode::SW:
      return 2;
    case Opcode::MUL:
      return 3;
    default:
      return 1;
  }
}

unsigned latency(const ProcessorState& /*s*/, EncodedInstruction e) { return latency(decode(e).op); }

SingleRun run_single(const Program& p, std::size_t max_steps) {
  if (max_steps == 0) throw Error(ErrorCode::Precondition, "max_steps must be positive");
  SingleRun run;
  ProcessorState s = p.initial_state();
  while (!s.halted) {
    if (run.retired >= max_steps) {
      run.step_limit_exceeded = true;
      break;
    }
    const EncodedInstruction e = p.fetch(s.pc);
    const Instruction inst = decode(e);
    const StepEffects fx = effects(s, inst);
    TraceRecord rec;
    rec.step = run.retired;
    rec.pc_before = s.pc;
    rec.inst = e;
    rec.reg_write = fx.reg_write;
    rec.mem_write = fx.mem_write;
    rec.next_pc = fx.next_pc;
    rec.latency = latency(inst.op);
    apply(s, fx);
    run.latency_sum += rec.latency;
    ++run.retired;
    run.trace.push_back(rec);
  }
  run.final_state = s;
  return run;
}

ProcessorState replay(const Program& p, const std::vector<TraceRecord>& trace) {
  ProcessorState s = p.initial_state();
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const TraceRecord& rec = trace[i];
    const auto fail = [&](const std::string& why) {
      throw Error(ErrorCode::CorruptTrace, "record " + std::to_string(i) + ": " + why);
    };
    if (s.halted) fail("record after HALT");
    if (rec.step != i) fail("step index out of sequence");
    if (rec.pc_before != s.pc) fail("pc mismatch");
    if (s.pc >= p.instructions.size() || p.instructions[s.pc] != rec.inst) fail("instruction mismatch");
    StepEffects fx;
    Instruction inst;
    try {
      inst = decode(rec.inst);
      fx = effects(s, inst);
    } catch (const Error& err) {
      fail(err.what());
    }
    if (fx.reg_write != rec.reg_write || fx.mem_write != rec.mem_write || fx.next_pc != rec.next_pc ||
        latency(inst.op) != rec.latency) {
      fail("effects differ from re-execution");
    }
    apply(s, fx);
  }
  return s;
}

}  // namespace sbsd::isa

#include "sbsd/assembler.hpp"

#include <cctype>
#include <map>
#include <optional>
#include <sstream>
#include <vector>

#include "sbsd/error.hpp"

namespace sbsd::isa {

namespace {

struct SourceLine {
  std::size_t number;
  std::string text;
};

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

[[noreturn]] void parse_fail(std::size_t line, const std::string& why) {
  throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + why);
}

std::optional<long> parse_number(const std::string& tok) {
  if (tok.empty()) return std::nullopt;
  try {
    std::size_t used = 0;
    const long v = std::stol(tok, &used, 0);
    if (used != tok.size()) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

bool is_identifier(const std::string& s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_' || s[0] == '.')) return false;
  for (char c : s) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.')) return false;
  }
  return true;
}

std::vector<std::string> split_operands(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!trim(cur).empty() || !out.empty()) out.push_back(trim(cur));
  return out;
}

class Parser {
 public:
  Parser(std::size_t line, const std::map<std::string, std::size_t>& labels, std::size_t pc)
      : line_(line), labels_(labels), pc_(pc) {}

  std::uint8_t reg(const std::string& tok) const {
    if (tok.size() == 2 && (tok[0] == 'r' || tok[0] == 'R') && tok[1] >= '0' && tok[1] <= '7') {
      return static_cast<std::uint8_t>(tok[1] - '0');
    }
    parse_fail(line_, "expected register r0-r7, got '" + tok + "'");
  }

  long imm(const std::string& tok) const {
    if (auto v = parse_number(tok)) return *v;
    parse_fail(line_, "expected immediate, got '" + tok + "'");
  }

  long target(const std::string& tok) const {
    if (auto v = parse_number(tok)) return *v;
    auto it = labels_.find(tok);
    if (it == labels_.end()) parse_fail(line_, "unknown label '" + tok + "'");
    return static_cast<long>(it->second) - static_cast<long>(pc_);
  }

  // "imm(rS)"
  std::pair<long, std::uint8_t> mem_operand(const std::string& tok) const {
    const auto open = tok.find('(');
    const auto close = tok.find(')');
    if (open == std::string::npos || close == std::string::npos || close < open || close + 1 != tok.size()) {
      parse_fail(line_, "expected imm(rS), got '" + tok + "'");
    }
    const std::string off = trim(tok.substr(0, open));
    return {off.empty() ? 0 : imm(off), reg(trim(tok.substr(open + 1, close - open - 1)))};
  }

  void arity(const std::vector<std::string>& ops, std::size_t n) const {
    if (ops.size() != n) parse_fail(line_, "expected " + std::to_string(n) + " operands");
  }

 private:
  std::size_t line_;
  const std::map<std::string, std::size_t>& labels_;
  std::size_t pc_;
};

std::int16_t to_imm(long v, std::size_t line) {
  if (v < -32768 || v > 32767) parse_fail(line, "immediate out of range");
  return static_cast<std::int16_t>(v);
}

}  // namespace

Program assemble(std::string_view source) {
  std::vector<SourceLine> lines;
  {
    std::istringstream is{std::string(source)};
    std::string raw;
    std::size_t n = 0;
    while (std::getline(is, raw)) {
      ++n;
      if (auto semi = raw.find(';'); semi != std::string::npos) raw.resize(semi);
      lines.push_back({n, trim(raw)});
    }
  }

  // Pass 1: peel labels and record their instruction index.
  std::map<std::string, std::size_t> labels;
  std::vector<SourceLine> body;
  std::size_t pc = 0;
  for (auto& ln : lines) {
    std::string text = ln.text;
    for (;;) {
      const auto colon = text.find(':');
      if (colon == std::string::npos) break;
      const std::string name = trim(text.substr(0, colon));
      if (!is_identifier(name)) parse_fail(ln.number, "bad label '" + name + "'");
      if (!labels.emplace(name, pc).second) parse_fail(ln.number, "duplicate label '" + name + "'");
      text = trim(text.substr(colon + 1));
    }
    if (text.empty()) continue;
    body.push_back({ln.number, text});
    if (text[0] != '.') ++pc;
  }

  Program prog;
  pc = 0;
  for (const auto& ln : body) {
    const auto space = ln.text.find_first_of(" \t");
    const std::string head = ln.text.substr(0, space);
    const std::string rest = space == std::string::npos ? "" : trim(ln.text.substr(space));

    if (head == ".data" || head == ".entry") {
      std::istringstream is(rest);
      std::vector<std::string> toks;
      for (std::string t; is >> t;) toks.push_back(t);
      if (head == ".data") {
        if (toks.size() != 2) parse_fail(ln.number, ".data expects <addr> <value>");
        const auto addr = parse_number(toks[0]);
        const auto value = parse_number(toks[1]);
        if (!addr || !value) parse_fail(ln.number, "bad .data operands");
        if (*addr < 0 || *addr >= static_cast<long>(kMemWords)) parse_fail(ln.number, ".data address out of range");
        prog.data_init.emplace_back(static_cast<Word>(*addr), static_cast<Word>(*value));
      } else {
        if (toks.size() != 1) parse_fail(ln.number, ".entry expects <pc>");
        const auto entry = parse_number(toks[0]);
        if (!entry || *entry < 0) parse_fail(ln.number, "bad .entry operand");
        prog.entry_pc = static_cast<Word>(*entry);
      }
      continue;
    }

    const auto op = opcode_from_mnemonic(head);
    if (!op) parse_fail(ln.number, "unknown mnemonic '" + head + "'");
    const auto ops = split_operands(rest);
    Parser p(ln.number, labels, pc);
    Instruction inst;
    inst.op = *op;
    switch (format_of(*op)) {
      case Format::R:
        p.arity(ops, 3);
        inst.rd = p.reg(ops[0]);
        inst.rs1 = p.reg(ops[1]);
        inst.rs2 = p.reg(ops[2]);
        break;
      case Format::I:
        if (*op == Opcode::LW) {
          p.arity(ops, 2);
          inst.rd = p.reg(ops[0]);
          auto [off, base] = p.mem_operand(ops[1]);
          inst.imm = to_imm(off, ln.number);
          inst.rs1 = base;
        } else {
          p.arity(ops, 3);
          inst.rd = p.reg(ops[0]);
          inst.rs1 = p.reg(ops[1]);
          inst.imm = to_imm(p.imm(ops[2]), ln.number);
        }
        break;
      case Format::S: {
        p.arity(ops, 2);
        inst.rs2 = p.reg(ops[0]);
        auto [off, base] = p.mem_operand(ops[1]);
        inst.imm = to_imm(off, ln.number);
        inst.rs1 = base;
        break;
      }
      case Format::B:
        p.arity(ops, 3);
        inst.rs1 = p.reg(ops[0]);
        inst.rs2 = p.reg(ops[1]);
        inst.imm = to_imm(p.target(ops[2]), ln.number);
        break;
      case Format::J:
        p.arity(ops, 2);
        inst.rd = p.reg(ops[0]);
        inst.imm = to_imm(p.target(ops[1]), ln.number);
        break;
      case Format::Halt:
        if (!rest.empty()) parse_fail(ln.number, "HALT takes no operands");
        break;
    }
    try {
      prog.instructions.push_back(encode(inst));
    } catch (const Error& e) {
      parse_fail(ln.number, e.what());
    }
    ++pc;
  }
  if (prog.instructions.size() > kMaxProgramLength) {
    throw Error(ErrorCode::ParseError, "program exceeds 256 instructions");
  }
  return prog;
}

std::string to_assembly(const Program& p) {
  std::ostringstream os;
  if (p.entry_pc != 0) os << ".entry " << p.entry_pc << '\n';
  for (std::size_t i = 0; i < p.instructions.size(); ++i) {
    const Instruction inst = decode(p.instructions[i]);
    os << disassemble(inst);
    if (inst.reserved != 0) {
      // Non-canonical encodings have no assembly spelling.
      throw Error(ErrorCode::Precondition, "instruction " + std::to_string(i) + " has reserved bits set");
    }
    os << '\n';
  }
  for (const auto& [addr, value] : p.data_init) os << ".data " << addr << ' ' << value << '\n';
  return os.str();
}

}  // namespace sbsd::isa

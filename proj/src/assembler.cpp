#include "taibai/assembler.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <optional>
#include <sstream>
#include <vector>

namespace taibai {

namespace {

struct Line {
  int number;
  std::string label;
  std::string mnemonic;
  std::vector<std::string> operands;
  bool directive = false;
};

std::string trim(std::string s) {
  const auto issp = [](unsigned char c) { return std::isspace(c); };
  while (!s.empty() && issp(s.front())) s.erase(s.begin());
  while (!s.empty() && issp(s.back())) s.pop_back();
  return s;
}

std::string upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::toupper(c); });
  return s;
}

std::optional<int> parse_reg(const std::string& tok) {
  const std::string t = upper(tok);
  for (int r = 0; r < kNumRegs; r++) {
    if (t == reg_name(r)) return r;
  }
  return std::nullopt;
}

uint16_t parse_imm(const std::string& tok, int line) {
  std::string t = trim(tok);
  if (t.empty() || t[0] != '#') throw AsmError(line, "expected immediate, got '" + tok + "'");
  t = t.substr(1);
  bool neg = false;
  if (!t.empty() && t[0] == '-') {
    neg = true;
    t = t.substr(1);
  }
  int base = 10;
  if (t.size() > 2 && t[0] == '0' && (t[1] == 'x' || t[1] == 'X')) {
    base = 16;
    t = t.substr(2);
  }
  uint32_t v = 0;
  const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v, base);
  if (ec != std::errc() || p != t.data() + t.size())
    throw AsmError(line, "bad immediate '" + tok + "'");
  if (neg) {
    if (v > 0x8000u) throw AsmError(line, "immediate out of 16-bit range: " + tok);
    return static_cast<uint16_t>(-static_cast<int32_t>(v));
  }
  if (v > 0xFFFFu) throw AsmError(line, "immediate out of 16-bit range: " + tok);
  return static_cast<uint16_t>(v);
}

int parse_gp(const std::string& tok, int line) {
  const auto r = parse_reg(tok);
  if (!r) throw AsmError(line, "expected register, got '" + tok + "'");
  if (*r >= kNumGpRegs)
    throw AsmError(line, "event register " + upper(tok) + " is read-only here");
  return *r;
}

// Memory operand: [Rb + #off], [Rb] or [#abs]. Returns (uses_imm, field).
std::pair<bool, uint16_t> parse_mem(const std::string& tok, int line) {
  std::string t = trim(tok);
  if (t.size() < 3 || t.front() != '[' || t.back() != ']')
    throw AsmError(line, "expected memory operand, got '" + tok + "'");
  t = trim(t.substr(1, t.size() - 2));
  if (!t.empty() && t[0] == '#') return {true, parse_imm(t, line)};
  std::string base = t, off = "#0";
  const auto plus = t.find('+');
  if (plus != std::string::npos) {
    base = trim(t.substr(0, plus));
    off = trim(t.substr(plus + 1));
  }
  const auto r = parse_reg(base);
  if (!r) throw AsmError(line, "bad memory base register '" + base + "'");
  const uint16_t o = parse_imm(off, line);
  if (o > 0x7FFu) throw AsmError(line, "memory offset out of 11-bit range");
  return {false, static_cast<uint16_t>((*r << 11) | o)};
}

std::vector<Line> tokenize(const std::string& source) {
  std::vector<Line> lines;
  std::istringstream in(source);
  std::string raw;
  int number = 0;
  while (std::getline(in, raw)) {
    number++;
    auto cut = raw.find(';');
    if (cut != std::string::npos) raw = raw.substr(0, cut);
    cut = raw.find("//");
    if (cut != std::string::npos) raw = raw.substr(0, cut);
    std::string s = trim(raw);
    if (s.empty()) continue;
    Line ln;
    ln.number = number;
    const auto colon = s.find(':');
    if (colon != std::string::npos) {
      const std::string head = trim(s.substr(0, colon));
      const bool ident =
          !head.empty() &&
          std::all_of(head.begin(), head.end(), [](unsigned char c) {
            return std::isalnum(c) || c == '_';
          });
      if (ident) {
        ln.label = head;
        s = trim(s.substr(colon + 1));
      }
    }
    if (!s.empty()) {
      const auto sp = s.find_first_of(" \t");
      ln.mnemonic = upper(s.substr(0, sp));
      if (sp != std::string::npos) {
        std::string rest = trim(s.substr(sp));
        std::string cur;
        for (char c : rest) {
          if (c == ',') {
            ln.operands.push_back(trim(cur));
            cur.clear();
          } else {
            cur += c;
          }
        }
        if (!trim(cur).empty()) ln.operands.push_back(trim(cur));
      }
      ln.directive = !ln.mnemonic.empty() && ln.mnemonic[0] == '.';
    }
    lines.push_back(ln);
  }
  return lines;
}

struct MnemonicInfo {
  Opcode op;
  DType dtype = DType::FP16;
  Rel rel = Rel::EQ;
  bool has_rel = false;
};

MnemonicInfo parse_mnemonic(const std::string& m, int line) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : m) {
    if (c == '.') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  parts.push_back(cur);
  MnemonicInfo info;
  bool found = false;
  for (int i = 0; i < kNumOpcodes; i++) {
    if (parts[0] == opcode_name(static_cast<Opcode>(i))) {
      info.op = static_cast<Opcode>(i);
      found = true;
      break;
    }
  }
  if (!found) throw AsmError(line, "unknown mnemonic '" + parts[0] + "'");
  for (size_t i = 1; i < parts.size(); i++) {
    const std::string& p = parts[i];
    if (p == "F") {
      info.dtype = DType::FP16;
    } else if (p == "I") {
      info.dtype = DType::INT16;
    } else if (p == "EQ" || p == "NE" || p == "LT" || p == "GE") {
      if (info.op != Opcode::CMP)
        throw AsmError(line, "relation suffix only valid on CMP");
      info.has_rel = true;
      info.rel = p == "EQ"   ? Rel::EQ
                 : p == "NE" ? Rel::NE
                 : p == "LT" ? Rel::LT
                             : Rel::GE;
    } else {
      throw AsmError(line, "unknown mnemonic suffix '." + p + "'");
    }
  }
  return info;
}

// Opcodes whose dtype bit is meaningless; forced to FP16 so that encodings
// are canonical and the text round-trip is bit-stable.
bool dtype_fixed(Opcode op) {
  switch (op) {
    case Opcode::RECV:
    case Opcode::SEND:
    case Opcode::FINDIDX:
    case Opcode::DIFF:
    case Opcode::AND:
    case Opcode::OR:
    case Opcode::XOR:
    case Opcode::LD:
    case Opcode::ST:
    case Opcode::B:
    case Opcode::BC:
      return true;
    default:
      return false;
  }
}

}  // namespace

Assembly assemble(const std::string& source) {
  const auto lines = tokenize(source);
  Assembly out;
  // segment: -1 none, 0 integ, 1 fire
  int segment = -1;
  bool saw_integ = false, saw_fire = false;
  std::vector<Instruction>* segs[2] = {&out.program.integ, &out.program.fire};
  struct Fixup {
    int segment;
    uint32_t index;
    std::string label;
    int line;
  };
  std::vector<Fixup> fixups;

  for (const auto& ln : lines) {
    if (!ln.label.empty()) {
      if (segment < 0) throw AsmError(ln.number, "label before segment marker");
      if (out.labels.count(ln.label))
        throw AsmError(ln.number, "duplicate label '" + ln.label + "'");
      out.labels[ln.label] = {segment,
                              static_cast<uint32_t>(segs[segment]->size())};
    }
    if (ln.mnemonic.empty()) continue;
    if (ln.directive) {
      if (ln.mnemonic == ".INTEG") {
        if (saw_integ) throw AsmError(ln.number, "duplicate .integ");
        segment = 0;
        saw_integ = true;
      } else if (ln.mnemonic == ".FIRE") {
        if (saw_fire) throw AsmError(ln.number, "duplicate .fire");
        segment = 1;
        saw_fire = true;
      } else {
        throw AsmError(ln.number, "unknown directive " + ln.mnemonic);
      }
      continue;
    }
    if (segment < 0)
      throw AsmError(ln.number, "instruction before segment marker");

    const auto info = parse_mnemonic(ln.mnemonic, ln.number);
    Instruction ins;
    ins.op = info.op;
    ins.dtype = dtype_fixed(info.op) ? DType::FP16 : info.dtype;
    const auto& ops = ln.operands;
    const auto need = [&](size_t lo, size_t hi) {
      if (ops.size() < lo || ops.size() > hi)
        throw AsmError(ln.number, std::string(opcode_name(info.op)) +
                                      ": wrong operand count");
    };
    switch (info.op) {
      case Opcode::RECV:
        need(0, 0);
        break;
      case Opcode::SEND:
        need(1, 2);
        ins.dst = static_cast<uint8_t>(parse_gp(ops[0], ln.number));
        ins.uses_imm = true;
        ins.field = ops.size() == 2 ? parse_imm(ops[1], ln.number) : 0;
        break;
      case Opcode::FINDIDX: {
        need(2, 3);
        ins.dst = static_cast<uint8_t>(parse_gp(ops[0], ln.number));
        const auto g = parse_reg(ops[1]);
        if (!g) throw AsmError(ln.number, "FINDIDX: bad g register");
        const uint16_t hdr =
            ops.size() == 3 ? parse_imm(ops[2], ln.number) : 0;
        if (hdr > 0x7FFu) throw AsmError(ln.number, "FINDIDX: header offset out of range");
        ins.field = static_cast<uint16_t>((*g << 11) | hdr);
        break;
      }
      case Opcode::LOCACC:
      case Opcode::ST: {
        need(2, 2);
        ins.dst = static_cast<uint8_t>(parse_gp(ops[0], ln.number));
        const auto [ui, f] = parse_mem(ops[1], ln.number);
        ins.uses_imm = ui;
        ins.field = f;
        break;
      }
      case Opcode::DIFF:
      case Opcode::LD: {
        need(2, 2);
        ins.dst = static_cast<uint8_t>(parse_gp(ops[0], ln.number));
        const auto [ui, f] = parse_mem(ops[1], ln.number);
        ins.uses_imm = ui;
        ins.field = f;
        break;
      }
      case Opcode::ADD:
      case Opcode::SUB:
      case Opcode::MUL:
      case Opcode::ADDC:
      case Opcode::SUBC:
      case Opcode::MULC:
      case Opcode::AND:
      case Opcode::OR:
      case Opcode::XOR: {
        need(3, 3);
        ins.dst = static_cast<uint8_t>(parse_gp(ops[0], ln.number));
        ins.src1 = static_cast<uint8_t>(parse_gp(ops[1], ln.number));
        if (const auto r = parse_reg(ops[2])) {
          ins.field = static_cast<uint16_t>(*r);
        } else {
          ins.uses_imm = true;
          ins.field = parse_imm(ops[2], ln.number);
        }
        break;
      }
      case Opcode::CMP: {
        need(2, 2);
        ins.dst = static_cast<uint8_t>(info.rel);
        ins.src1 = static_cast<uint8_t>(parse_gp(ops[0], ln.number));
        if (const auto r = parse_reg(ops[1])) {
          ins.field = static_cast<uint16_t>(*r);
        } else {
          ins.uses_imm = true;
          ins.field = parse_imm(ops[1], ln.number);
        }
        break;
      }
      case Opcode::MOV: {
        need(2, 2);
        ins.dst = static_cast<uint8_t>(parse_gp(ops[0], ln.number));
        if (const auto r = parse_reg(ops[1])) {
          ins.field = static_cast<uint16_t>(*r);
        } else {
          ins.uses_imm = true;
          ins.field = parse_imm(ops[1], ln.number);
        }
        break;
      }
      case Opcode::B:
      case Opcode::BC: {
        need(1, 1);
        ins.uses_imm = true;
        if (ops[0][0] == '#') {
          ins.field = parse_imm(ops[0], ln.number);
        } else {
          fixups.push_back({segment,
                            static_cast<uint32_t>(segs[segment]->size()),
                            ops[0], ln.number});
        }
        break;
      }
    }
    segs[segment]->push_back(ins);
  }

  if (!saw_integ || !saw_fire)
    throw AsmError(0, "source must contain both .integ and .fire segments");

  for (const auto& fx : fixups) {
    const auto it = out.labels.find(fx.label);
    if (it == out.labels.end())
      throw AsmError(fx.line, "undefined label '" + fx.label + "'");
    if (it->second.first != fx.segment)
      throw AsmError(fx.line, "branch target '" + fx.label +
                                  "' is in the other segment");
    (*segs[fx.segment])[fx.index].field =
        static_cast<uint16_t>(it->second.second);
  }
  for (int s = 0; s < 2; s++) {
    for (const auto& ins : *segs[s]) {
      if ((ins.op == Opcode::B || ins.op == Opcode::BC) &&
          ins.field > segs[s]->size())
        throw AsmError(0, "branch target out of segment");
    }
  }
  return out;
}

namespace {

std::string hex16(uint16_t v) {
  char buf[8];
  snprintf(buf, sizeof buf, "0x%X", v);
  return buf;
}

std::string mem_str(const Instruction& ins) {
  if (ins.uses_imm) return "[#" + hex16(ins.field) + "]";
  return std::string("[") + reg_name(ins.mem_base()) + " + #" +
         hex16(ins.mem_off()) + "]";
}

}  // namespace

std::string disassemble_one(const Instruction& ins) {
  std::string m = opcode_name(ins.op);
  if (ins.op == Opcode::CMP) m += std::string(".") + rel_name(static_cast<Rel>(ins.dst & 3));
  if (!dtype_fixed(ins.op) && ins.dtype == DType::INT16) m += ".I";
  const std::string dst = reg_name(ins.dst);
  const std::string src1 = reg_name(ins.src1);
  const std::string s2 = ins.uses_imm ? "#" + hex16(ins.field)
                                      : reg_name(static_cast<int>(ins.field));
  switch (ins.op) {
    case Opcode::RECV:
      return m;
    case Opcode::SEND:
      return m + " " + dst + ", #" + hex16(ins.field);
    case Opcode::FINDIDX:
      return m + " " + dst + ", " + reg_name(ins.mem_base()) + ", #" +
             hex16(ins.mem_off());
    case Opcode::LOCACC:
    case Opcode::ST:
    case Opcode::DIFF:
    case Opcode::LD:
      return m + " " + dst + ", " + mem_str(ins);
    case Opcode::ADD:
    case Opcode::SUB:
    case Opcode::MUL:
    case Opcode::ADDC:
    case Opcode::SUBC:
    case Opcode::MULC:
    case Opcode::AND:
    case Opcode::OR:
    case Opcode::XOR:
      return m + " " + dst + ", " + src1 + ", " + s2;
    case Opcode::CMP:
      return m + " " + src1 + ", " + s2;
    case Opcode::MOV:
      return m + " " + dst + ", " + s2;
    case Opcode::B:
    case Opcode::BC:
      return m + " #" + hex16(ins.field);
  }
  return m;
}

std::string disassemble(const Program& p) {
  std::string out = ".integ\n";
  for (const auto& ins : p.integ) out += "  " + disassemble_one(ins) + "\n";
  out += ".fire\n";
  for (const auto& ins : p.fire) out += "  " + disassemble_one(ins) + "\n";
  return out;
}

}  // namespace taibai

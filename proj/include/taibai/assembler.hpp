#pragma once

#include <map>
#include <string>

#include "taibai/isa.hpp"

// Assembly text format, one instruction per line:
//
//   .integ                          segment markers; .integ must precede .fire
//   loop:                           label (instruction offset in its segment)
//     RECV
//     FINDIDX R1, EAXG, #6          g register, weight-header offset
//     LOCACC  R1, [NBASE + #2]      memory operand: [base + #off] or [#abs]
//     B       loop
//   .fire
//     LD      R1, [NBASE + #0]
//     DIFF    R1, [NBASE + #1]
//     CMP.GE  R1, R2                relation suffix on CMP; .I selects INT16
//     SEND    R1, #0
//     MULC.I  R1, R1, #0
//     ST      R1, [NBASE + #0]
//
// `;` and `//` start comments. Immediates are decimal or 0x hex and must fit
// in 16 bits. Branch targets are labels or `#offset` within the same segment.

namespace taibai {

class AsmError : public std::runtime_error {
 public:
  AsmError(int line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

struct Assembly {
  Program program;
  // label -> (segment 0=integ 1=fire, instruction offset)
  std::map<std::string, std::pair<int, uint32_t>> labels;
};

Assembly assemble(const std::string& source);
std::string disassemble(const Program& p);
std::string disassemble_one(const Instruction& ins);

}  // namespace taibai

#include "taibai/neuron_core.hpp"

#include <string>

namespace taibai {

NeuronCore::NeuronCore(size_t data_words, size_t buffer_cap)
    : data_(data_words, 0), buffer_cap_(buffer_cap) {}

void NeuronCore::load_program(const Program& p) {
  program_ = p;
  for (const auto& ins : program_.fire) {
    if (ins.op == Opcode::RECV)
      throw SimError("RECV is only valid in the integ segment");
  }
}

void NeuronCore::set_neurons_hosted(uint16_t n) {
  if (n > kMaxNeurons) throw SimError("neurons_hosted exceeds 256");
  neurons_hosted_ = n;
}

bool NeuronCore::enqueue(const InputEvent& ev) {
  if (ev.target >= neurons_hosted_)
    throw SimError("event targets non-hosted neuron " +
                   std::to_string(ev.target));
  if (buffer_.size() >= buffer_cap_) return false;
  buffer_.push_back(ev);
  return true;
}

void NeuronCore::deliver_intra_core(const InputEvent& ev) {
  if (!enqueue(ev)) throw SimError("intra-core event buffer overflow");
}

uint16_t NeuronCore::read_reg(int r) const {
  if (r < kNumGpRegs) return regs_[r];
  switch (r) {
    case kRegEnid: return ev_enid_;
    case kRegEaxg: return ev_eaxg_;
    case kRegEaxl: return ev_eaxl_;
    case kRegEdata: return ev_edata_;
    case kRegNbase: return ev_nbase_;
    default: throw SimError("bad register id " + std::to_string(r));
  }
}

uint32_t NeuronCore::effective_addr(const Instruction& ins) const {
  if (ins.uses_imm) return ins.field;
  return static_cast<uint32_t>(read_reg(ins.mem_base())) + ins.mem_off();
}

uint16_t NeuronCore::mem_read(uint32_t addr) const {
  if (addr >= data_.size())
    throw SimError("data memory read out of range: " + std::to_string(addr));
  return data_[addr];
}

void NeuronCore::mem_write(uint32_t addr, uint16_t v) {
  if (addr >= data_.size())
    throw SimError("data memory write out of range: " + std::to_string(addr));
  data_[addr] = v;
}

// Executes one segment until it falls off the end (fire) or suspends at a
// RECV with an empty FIFO (integ). Returns cycles consumed.
uint64_t NeuronCore::run_segment(const std::vector<Instruction>& seg,
                                 bool integ) {
  uint64_t cycles = 0;
  size_t pc = 0;
  while (pc < seg.size()) {
    const Instruction& ins = seg[pc];
    pc++;
    switch (ins.op) {
      case Opcode::RECV: {
        if (!integ) throw SimError("RECV outside integ segment");
        if (buffer_.empty()) return cycles;  // suspend; resume re-runs RECV
        const InputEvent ev = buffer_.front();
        buffer_.pop_front();
        ev_enid_ = ev.target;
        ev_eaxg_ = ev.axon_global;
        ev_eaxl_ = ev.axon_local;
        ev_edata_ = ev.payload;
        ev_nbase_ = block_bases_[ev.target];
        cur_event_value_ = ev.value_carrying;
        flag_ = true;
        cycles += costs.basic;
        break;
      }
      case Opcode::SEND: {
        if (flag_) {
          const uint16_t type = ins.field & 0xFu;
          if (type == kSendLocal) {
            // Intra-core current transfer: the immediate's bits [14:4] give
            // the variable offset holding the local target neuron id.
            InputEvent ev;
            ev.target = mem_read(static_cast<uint32_t>(ev_nbase_) +
                                 (ins.field >> 4));
            ev.axon_global = kAxonValue;
            ev.payload = regs_[ins.dst];
            ev.value_carrying = true;
            deliver_intra_core(ev);
          } else {
            output_events_.push_back({type, ev_enid_, regs_[ins.dst]});
          }
        }
        cycles += costs.basic;
        break;
      }
      case Opcode::FINDIDX: {
        const uint16_t g = read_reg(ins.mem_base());
        const uint32_t hdr = static_cast<uint32_t>(ev_nbase_) + ins.mem_off();
        const uint16_t axbits = mem_read(hdr + kHdrAxbits);
        const uint16_t flags = mem_read(hdr + kHdrFlags);
        const uint16_t wbase = mem_read(hdr + kHdrWbase);
        cycles += costs.findidx(g);
        if (g >= axbits)
          throw SimError("FINDIDX: axon id " + std::to_string(g) +
                         " outside axon space " + std::to_string(axbits));
        uint16_t slot;
        if (flags & kHdrFlagDense) {
          slot = g;
        } else {
          const uint32_t bm = hdr + kHdrWords;
          if (bm + (axbits + 15u) / 16u > data_.size())
            throw SimError("FINDIDX: bitmap outside data memory");
          const auto r = findidx(data_.data() + bm, axbits, g);
          flag_ = r.hit;
          if (!r.hit) break;  // no connection: Rd unchanged, no side effect
          slot = r.slot;
        }
        flag_ = true;
        regs_[ins.dst] = static_cast<uint16_t>(wbase + slot);
        break;
      }
      case Opcode::LOCACC: {
        if (flag_) {
          const uint32_t ea = effective_addr(ins);
          const uint16_t cur = mem_read(ea);
          const uint16_t add = regs_[ins.dst];
          mem_write(ea, ins.dtype == DType::FP16
                            ? fp16::add(cur, add)
                            : static_cast<uint16_t>(cur + add));
          if (integ && !cur_event_value_) sop_count++;
        }
        cycles += costs.mem;
        break;
      }
      case Opcode::DIFF: {
        const uint32_t ea = effective_addr(ins);
        const uint16_t tau = mem_read(ea);
        const uint16_t c = mem_read(ea + 1);
        regs_[ins.dst] = fp16::diff_step(regs_[ins.dst], tau, c);
        mem_write(ea + 1, 0);  // read-clear the accumulated term
        cycles += costs.mem;
        break;
      }
      case Opcode::LD: {
        regs_[ins.dst] = mem_read(effective_addr(ins));
        cycles += costs.mem;
        break;
      }
      case Opcode::ST: {
        mem_write(effective_addr(ins), regs_[ins.dst]);
        cycles += costs.mem;
        break;
      }
      case Opcode::B: {
        if (ins.field > seg.size()) throw SimError("branch target out of segment");
        pc = ins.field;
        cycles += costs.basic;
        break;
      }
      case Opcode::BC: {
        if (ins.field > seg.size()) throw SimError("branch target out of segment");
        if (flag_) pc = ins.field;
        cycles += costs.basic;
        break;
      }
      default: {  // ALU group
        cycles += costs.basic;
        const bool conditional = ins.op == Opcode::ADDC ||
                                 ins.op == Opcode::SUBC ||
                                 ins.op == Opcode::MULC;
        if (conditional && !flag_) break;  // pure no-op on state
        const uint16_t b = ins.uses_imm ? ins.field
                                        : read_reg(static_cast<int>(ins.field));
        const uint16_t a = ins.op == Opcode::MOV ? regs_[ins.dst]
                                                  : regs_[ins.src1];
        const auto r = alu_exec(ins.op, ins.dtype, a, b, flag_,
                                static_cast<Rel>(ins.dst & 3));
        if (ins.op == Opcode::CMP) {
          flag_ = r.flag;
        } else {
          regs_[ins.dst] = r.value;
        }
        break;
      }
    }
  }
  return cycles;
}

uint64_t NeuronCore::process_events() {
  if (buffer_.empty()) return 0;  // event-driven quiescence: zero traffic
  const uint64_t cycles = run_segment(program_.integ, true);
  cycle_counter += cycles;
  busy_cycles += cycles;
  return cycles;
}

uint64_t NeuronCore::run_fire() {
  uint64_t cycles = 0;
  for (uint16_t id = 0; id < neurons_hosted_; id++) {
    // Integrate intra-core currents emitted by lower-id neurons first.
    cycles += run_segment(program_.integ, true);
    ev_enid_ = id;
    ev_eaxg_ = 0;
    ev_eaxl_ = 0;
    ev_edata_ = 0;
    ev_nbase_ = block_bases_[id];
    flag_ = true;
    cur_event_value_ = false;
    cycles += run_segment(program_.fire, false);
  }
  cycles += run_segment(program_.integ, true);
  cycle_counter += cycles;
  busy_cycles += cycles;
  return cycles;
}

}  // namespace taibai

#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <vector>

#include "taibai/isa.hpp"

namespace taibai {

enum class Phase : uint8_t { RESTING = 0, INTEG = 1, FIRE = 2 };

struct InputEvent {
  uint16_t target = 0;       // local neuron id on the receiving core
  uint16_t axon_global = 0;  // upstream channel / neuron index
  uint16_t axon_local = 0;   // filter offset / direct weight slot
  uint16_t payload = 0;      // FP16 current for value-carrying events
  bool value_carrying = false;
};

struct OutputEvent {
  uint16_t type = kSendNormal;
  uint16_t neuron = 0;  // fired local id
  uint16_t data = 0;
};

// One programmable neuron core: a register file, a data memory holding
// per-neuron blocks, an input event FIFO and an output event memory. The
// core suspends at RECV and wakes per event; the fire segment runs once per
// hosted neuron. Single-owner mutable state.
class NeuronCore {
 public:
  static constexpr uint16_t kMaxNeurons = 256;
  static constexpr size_t kDefaultDataWords = 32 * 1024;
  static constexpr size_t kDefaultBufferCap = 1024;

  explicit NeuronCore(size_t data_words = kDefaultDataWords,
                      size_t buffer_cap = kDefaultBufferCap);

  void load_program(const Program& p);
  const Program& program() const { return program_; }

  // Configuration surface (also reachable through the CC config space).
  std::vector<uint16_t>& data() { return data_; }
  const std::vector<uint16_t>& data() const { return data_; }
  void set_neurons_hosted(uint16_t n);
  uint16_t neurons_hosted() const { return neurons_hosted_; }
  void set_block_base(uint16_t neuron, uint16_t base) { block_bases_[neuron] = base; }
  uint16_t block_base(uint16_t neuron) const { return block_bases_[neuron]; }

  // Event delivery. Returns false when the FIFO is full (backpressure).
  bool enqueue(const InputEvent& ev);
  // Local delivery that never crosses the NoC (PSUM current transfer and
  // the like). Throws if the target is not hosted.
  void deliver_intra_core(const InputEvent& ev);
  size_t buffered_events() const { return buffer_.size(); }
  size_t buffer_cap() const { return buffer_cap_; }
  bool suspended_idle() const { return buffer_.empty(); }

  // Runs the integ segment over all buffered events until the core suspends
  // at RECV with an empty FIFO. Returns cycles consumed.
  uint64_t process_events();
  // Runs the fire segment once per hosted neuron (ascending local id),
  // integrating any intra-core events emitted along the way before the next
  // neuron fires. Returns cycles consumed.
  uint64_t run_fire();

  // Output event memory, filled by SEND; drained by the CC scheduler.
  std::vector<OutputEvent>& output_events() { return output_events_; }

  Phase phase = Phase::RESTING;
  uint64_t cycle_counter = 0;
  uint64_t busy_cycles = 0;
  uint64_t sop_count = 0;
  CycleCosts costs;

 private:
  uint64_t run_segment(const std::vector<Instruction>& seg, bool integ);
  uint16_t read_reg(int r) const;
  uint32_t effective_addr(const Instruction& ins) const;
  uint16_t mem_read(uint32_t addr) const;
  void mem_write(uint32_t addr, uint16_t v);

  Program program_;
  std::vector<uint16_t> data_;
  std::array<uint16_t, kMaxNeurons> block_bases_{};
  uint16_t neurons_hosted_ = 0;
  size_t buffer_cap_;
  std::deque<InputEvent> buffer_;
  std::vector<OutputEvent> output_events_;

  // Interpreter registers.
  std::array<uint16_t, kNumGpRegs> regs_{};
  uint16_t ev_enid_ = 0, ev_eaxg_ = 0, ev_eaxl_ = 0, ev_edata_ = 0,
           ev_nbase_ = 0;
  bool flag_ = false;
  bool cur_event_value_ = false;
};

}  // namespace taibai

#include "taibai/chip.hpp"

#include <atomic>
#include <condition_variable>
#include <mutex>
#include <sstream>
#include <thread>

namespace taibai {

// Small persistent pool; disjoint per-index state keeps results identical
// for any worker count, and the single-threaded path takes no locks.
class WorkerPool {
 public:
  explicit WorkerPool(int threads) : threads_(threads < 1 ? 1 : threads) {
    for (int i = 0; i < threads_ - 1; i++)
      workers_.emplace_back([this] { worker(); });
  }
  ~WorkerPool() {
    {
      std::lock_guard<std::mutex> lk(mu_);
      stop_ = true;
    }
    cv_.notify_all();
    for (auto& w : workers_) w.join();
  }

  void parallel_for(size_t count, const std::function<void(size_t)>& fn) {
    if (threads_ == 1 || count <= 1) {
      for (size_t i = 0; i < count; i++) fn(i);
      return;
    }
    {
      std::lock_guard<std::mutex> lk(mu_);
      fn_ = &fn;
      count_ = count;
      next_.store(0, std::memory_order_relaxed);
      active_ = threads_ - 1;
      generation_++;
    }
    cv_.notify_all();
    run_range();
    std::unique_lock<std::mutex> lk(mu_);
    done_cv_.wait(lk, [this] { return active_ == 0; });
    fn_ = nullptr;
    if (error_) {
      auto e = error_;
      error_ = nullptr;
      std::rethrow_exception(e);
    }
  }

 private:
  void run_range() {
    for (;;) {
      const size_t i = next_.fetch_add(1, std::memory_order_relaxed);
      if (i >= count_) break;
      try {
        (*fn_)(i);
      } catch (...) {
        std::lock_guard<std::mutex> lk(mu_);
        if (!error_) error_ = std::current_exception();
      }
    }
  }
  void worker() {
    uint64_t seen = 0;
    for (;;) {
      std::unique_lock<std::mutex> lk(mu_);
      cv_.wait(lk, [&] { return stop_ || generation_ != seen; });
      if (stop_) return;
      seen = generation_;
      lk.unlock();
      run_range();
      lk.lock();
      if (--active_ == 0) done_cv_.notify_all();
    }
  }

  int threads_;
  std::vector<std::thread> workers_;
  std::mutex mu_;
  std::condition_variable cv_, done_cv_;
  const std::function<void(size_t)>* fn_ = nullptr;
  std::atomic<size_t> next_{0};
  size_t count_ = 0;
  int active_ = 0;
  uint64_t generation_ = 0;
  bool stop_ = false;
  std::exception_ptr error_;
};

Chip::Chip(const ChipOptions& opt)
    : opt_(opt),
      mesh_(opt.rows, opt.cols, opt.queue_cap),
      ccs_(static_cast<size_t>(opt.rows) * opt.cols),
      pool_(std::make_unique<WorkerPool>(opt.threads)) {
  for (int r = 0; r < opt.rows; r++)
    for (int c = 0; c < opt.cols; c++)
      cc({static_cast<uint8_t>(r), static_cast<uint8_t>(c)}).coord = {
          static_cast<uint8_t>(r), static_cast<uint8_t>(c)};
}

Chip::~Chip() = default;

void Chip::config_write_direct(Coord c, uint32_t addr, uint16_t value) {
  cc(c).config_write(addr, value);
}

void Chip::replay_config_packets(const std::vector<Packet>& stream) {
  for (const auto& p : stream) {
    if (p.type != PacketType::MemWrite)
      throw SimError("config stream may contain only memory writes");
    pending_host_.push_back(p);
  }
  integ_until_quiescent(opt_.integ_cycle_limit);
}

void Chip::finalize_init() {
  for (auto& c : ccs_) c.finalize_programs();
  for (auto& c : ccs_) {
    c.layer_of.assign(
        static_cast<size_t>(kNcsPerCc) * NeuronCore::kMaxNeurons, -1);
    c.layer_spikes.assign(layer_count_, 0);
  }
}

void Chip::set_layer_count(size_t layers) {
  layer_count_ = layers;
  for (auto& c : ccs_) c.layer_spikes.assign(layers, 0);
}

void Chip::set_layer_neurons(std::vector<uint64_t> counts) {
  layer_neurons_ = std::move(counts);
}

uint16_t Chip::host_read(Coord c, uint32_t addr) {
  responses_.clear();
  pending_host_.push_back(Packet::mem_read_req(c, addr));
  integ_until_quiescent(opt_.integ_cycle_limit);
  if (responses_.size() != 1) throw SimError("expected one read response");
  return responses_[0].payload;
}

void Chip::host_write(Coord c, uint32_t addr, uint16_t value) {
  pending_host_.push_back(Packet::mem_write(c, addr, value));
  integ_until_quiescent(opt_.integ_cycle_limit);
}

void Chip::drain_deliveries() {
  for (auto& d : mesh_.deliveries()) {
    if (d.packet.dest0 == kHostCoord) {
      HostEvent ev;
      ev.t = now_ > 0 ? now_ - 1 : 0;
      ev.index = d.packet.index;
      ev.payload = d.packet.payload;
      ev.value = d.packet.is_spike() && (d.packet.tag & 1);
      if (d.packet.type == PacketType::MemReadResp)
        responses_.push_back(ev);
      else
        host_events_.push_back(ev);
    } else {
      if (record_flows_ && d.packet.is_spike() &&
          !(d.packet.sim_src == kHostCoord))
        flows_[{static_cast<uint16_t>((d.packet.sim_src.row << 8) |
                                      d.packet.sim_src.col),
                static_cast<uint16_t>((d.at.row << 8) | d.at.col)}]++;
      cc(d.at).inbox.push_back(d.packet);
    }
  }
  mesh_.deliveries().clear();
}

bool Chip::inject_pending() {
  bool all_in = true;
  // Host packets first, then CC outboxes in row-major CC order.
  const auto count = [this](const Packet& p) {
    switch (p.type) {
      case PacketType::SpikeUnicast: packets_[0]++; break;
      case PacketType::SpikeMulticast: packets_[1]++; break;
      case PacketType::SpikeBroadcast: packets_[2]++; break;
      default: packets_[3]++; break;
    }
  };
  size_t taken = 0;
  for (; taken < pending_host_.size(); taken++) {
    if (!mesh_.inject({0, 0}, pending_host_[taken])) break;
    count(pending_host_[taken]);
  }
  pending_host_.erase(pending_host_.begin(), pending_host_.begin() + taken);
  if (!pending_host_.empty()) all_in = false;
  for (auto& c : ccs_) {
    while (!c.outbox.empty()) {
      const Packet& p = c.outbox.front();
      if (!mesh_.inject(c.coord, p)) {
        all_in = false;
        break;
      }
      count(p);
      c.outbox.pop_front();
    }
  }
  return all_in;
}

void Chip::parallel_ccs(const std::function<void(CorticalColumn&)>& fn) {
  pool_->parallel_for(ccs_.size(), [&](size_t i) { fn(ccs_[i]); });
}

void Chip::integ_until_quiescent(uint64_t budget) {
  uint64_t cycles = 0;
  const uint64_t ts = now_;
  for (;;) {
    inject_pending();
    drain_deliveries();
    parallel_ccs([ts](CorticalColumn& c) { c.pump(ts); });
    bool cc_work = !pending_host_.empty();
    for (auto& c : ccs_) {
      if (!c.quiescent()) {
        cc_work = true;
        break;
      }
    }
    if (mesh_.idle() && !cc_work) break;  // exact global quiescence
    if (!mesh_.idle()) {
      mesh_.step();
      wall_cycles_++;
    }
    cycles++;
    if (cycles > budget)
      throw SimError(
          "INTEG did not reach quiescence within the cycle budget; the "
          "model likely has a combinational spike loop within a timestep");
  }
}

void Chip::step_timestep(const std::vector<InputSpike>& inputs) {
  // INTEG: inject this timestep's inputs and last FIRE's packets; run to
  // global quiescence.
  for (const auto& in : inputs) {
    if (in.neuron >= host_inputs_.size())
      throw SimError("input neuron outside the host input map");
    for (const auto& ie : host_inputs_[in.neuron].ies) {
      Packet p;
      p.type = ie.mode == kRouteBroadcast   ? PacketType::SpikeBroadcast
               : ie.mode == kRouteMulticast ? PacketType::SpikeMulticast
                                            : PacketType::SpikeUnicast;
      p.tag = ie.tag;
      p.index = ie.index;
      p.dest0 = ie.d0;
      p.dest1 = ie.d1;
      p.payload = in.is_value ? in.value : ie.axon;
      pending_host_.push_back(p);
    }
  }
  const uint64_t budget =
      opt_.fixed_budget && opt_.cycle_budget ? opt_.cycle_budget
                                             : opt_.integ_cycle_limit;
  integ_until_quiescent(budget);
  // FIRE: every core updates and spikes; packets go out next INTEG.
  const uint64_t ts = now_;
  std::vector<uint64_t> busy_before;
  busy_before.reserve(ccs_.size() * kNcsPerCc);
  for (auto& c : ccs_)
    for (const auto& core : c.nc) busy_before.push_back(core.busy_cycles);
  parallel_ccs([ts](CorticalColumn& c) { c.run_fire(ts); });
  // Cores fire in parallel; the slowest one bounds the stage.
  uint64_t max_fire = 0;
  size_t i = 0;
  for (auto& c : ccs_)
    for (const auto& core : c.nc) {
      max_fire = std::max(max_fire, core.busy_cycles - busy_before[i]);
      i++;
    }
  wall_cycles_ += max_fire;
  now_++;
}

void Chip::flush() { integ_until_quiescent(opt_.integ_cycle_limit); }

RunStats Chip::stats() const {
  RunStats s;
  s.timesteps = now_;
  s.packets_unicast = packets_[0];
  s.packets_multicast = packets_[1];
  s.packets_broadcast = packets_[2];
  s.packets_mem = packets_[3];
  s.link_traversals = mesh_.link_traversals();
  s.wall_cycles = wall_cycles_;
  s.layer_spikes.assign(layer_count_, 0);
  s.layer_neurons = layer_neurons_;
  for (const auto& c : ccs_) {
    s.tag_drops += c.drops;
    s.dispatch_cycles += c.dispatch_cycles;
    s.spikes += c.spikes_fired;
    for (const auto& core : c.nc) {
      s.sop_count += core.sop_count;
      s.nc_busy_cycles += core.busy_cycles;
    }
    for (size_t l = 0; l < c.layer_spikes.size() && l < s.layer_spikes.size();
         l++)
      s.layer_spikes[l] += c.layer_spikes[l];
  }
  return s;
}

Estimate estimate(const RunStats& stats, const CostModel& cm) {
  Estimate e;
  const double elapsed = static_cast<double>(stats.wall_cycles) * cm.cycle_time;
  e.energy_j = static_cast<double>(stats.sop_count) * cm.e_sop +
               static_cast<double>(stats.link_traversals) * cm.e_hop +
               elapsed * cm.p_static;
  e.avg_power_w = elapsed > 0 ? e.energy_j / elapsed : 0.0;
  e.throughput_sps = elapsed > 0 ? 1.0 / elapsed : 0.0;
  return e;
}

std::string RunStats::to_text(const CostModel& cm) const {
  const Estimate e = estimate(*this, cm);
  std::ostringstream os;
  os << "timesteps: " << timesteps << "\n";
  os << "sop_count: " << sop_count << "\n";
  os << "spikes: " << spikes << "\n";
  os << "packets_unicast: " << packets_unicast << "\n";
  os << "packets_multicast: " << packets_multicast << "\n";
  os << "packets_broadcast: " << packets_broadcast << "\n";
  os << "packets_mem: " << packets_mem << "\n";
  os << "link_traversals: " << link_traversals << "\n";
  os << "nc_busy_cycles: " << nc_busy_cycles << "\n";
  os << "dispatch_cycles: " << dispatch_cycles << "\n";
  os << "tag_drops: " << tag_drops << "\n";
  os << "wall_cycles: " << wall_cycles << "\n";
  for (size_t l = 0; l < layer_spikes.size(); l++) {
    os << "layer_" << l << "_spikes: " << layer_spikes[l];
    if (l < layer_neurons.size() && layer_neurons[l] > 0 && timesteps > 0) {
      const double rate =
          static_cast<double>(layer_spikes[l]) /
          (static_cast<double>(layer_neurons[l]) * static_cast<double>(timesteps));
      os << " rate: " << rate;
    }
    os << "\n";
  }
  os << "energy_j: " << e.energy_j << "\n";
  os << "avg_power_w: " << e.avg_power_w << "\n";
  os << "throughput_sps: " << e.throughput_sps << "\n";
  return os.str();
}

}  // namespace taibai

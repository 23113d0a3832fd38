#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "taibai/presets.hpp"

// Hardware-agnostic network description and its lowered form.
//
// A NetworkIR is an ordered list of layers (conv / pool / fc / sparse, with
// optional recurrent self-edges) plus skip connections, neuron models and
// learning presets. validate_and_lower() checks shapes, folds batch norm
// into weights and bias, splits conv+pool fusions, turns recurrent edges
// into next-timestep sparse self-links and skips into delayed value links,
// producing the flat population/link form the compiler consumes.

namespace taibai {

struct Shape {
  int c = 1, h = 1, w = 1;
  int size() const { return c * h * w; }
  bool operator==(const Shape&) const = default;
};

enum class LayerKind { Conv, Pool, FC, Sparse };
enum class NeuronModel { LIF, ALIF, DHLIF, Integrator };
enum class LearningRule { None, STDP, AccumFC };

struct Edge {
  uint32_t src = 0;
  uint32_t dst = 0;
  uint16_t weight = 0;  // FP16 bits
};

struct BatchNorm {
  std::vector<float> gamma, beta, mean, var;
  float eps = 1e-5f;
};

struct LayerSpec {
  LayerKind kind = LayerKind::FC;
  // conv
  int k = 1, stride = 1, pad = 0;
  int out_channels = 0;
  bool fuse_pool = false;
  int pool_window = 2;
  // pool
  int window = 2;
  // fc / sparse
  int out = 0;
  std::vector<Edge> edges;            // sparse feedforward
  std::vector<Edge> recurrent_edges;  // self-edges, unit delay
  // weights, FP16 bits: FC [out][in]; conv [c_out][c_in][k][k]
  std::vector<uint16_t> weights;
  std::optional<BatchNorm> bn;

  NeuronModel model = NeuronModel::LIF;
  uint16_t vth = fp16::kOne;
  uint16_t tau = 0;
  std::vector<uint16_t> vth_per, tau_per;  // optional per-neuron overrides
  uint16_t alif_beta = 0, alif_rho = 0;
  int dh_branches = 0;
  std::vector<uint16_t> branch_tau;

  LearningRule learning = LearningRule::None;
  StdpParams stdp;
  uint16_t eta = 0;  // AccumFC learning rate, FP16 bits
};

struct SkipSpec {
  int from = 0;  // source layer index (its output)
  int to = 0;    // destination layer index (its input); to >= from + 2
  uint16_t scale = fp16::kOne;  // FP16 current per delayed spike
  int subsample = 1;            // strided spatial pick when shapes differ
};

struct NetworkIR {
  Shape input;
  int timesteps = 32;
  std::vector<LayerSpec> layers;
  std::vector<SkipSpec> skips;
};

// Lowered form.
enum class LinkKind { Full, Sparse, Conv, Pool };

struct LoweredLink {
  LinkKind kind = LinkKind::Full;
  int src = -1;  // population index; -1 = network input
  int dst = 0;
  // conv geometry (src shape, dst shape implied by populations)
  int k = 1, stride = 1, pad = 0;
  int window = 1;                 // pool
  std::vector<uint16_t> weights;  // FC [out][in] / conv banks [c_out][c_in*k*k]
  std::vector<Edge> edges;        // sparse
  // Skip connection: delivered as value events `delay` timesteps late.
  int delay = 0;
  uint16_t value_scale = 0;  // nonzero: value link (payload = scale)
};

struct LoweredPop {
  Shape shape;
  NeuronModel model = NeuronModel::LIF;
  uint16_t vth = fp16::kOne, tau = 0;
  std::vector<uint16_t> vth_per, tau_per;
  std::vector<uint16_t> bias;  // per neuron, after BN folding (may be empty)
  uint16_t alif_beta = 0, alif_rho = 0;
  int dh_branches = 0;
  std::vector<uint16_t> branch_tau;
  LearningRule learning = LearningRule::None;
  StdpParams stdp;
  uint16_t eta = 0;
  int ir_layer = -1;  // provenance for reports
};

struct LoweredNet {
  Shape input;
  int timesteps = 32;
  std::vector<LoweredPop> pops;
  std::vector<LoweredLink> links;
  int output_pop() const { return static_cast<int>(pops.size()) - 1; }
};

class IrError : public std::runtime_error {
 public:
  explicit IrError(const std::string& what) : std::runtime_error(what) {}
};

LoweredNet validate_and_lower(const NetworkIR& ir);

// Folds y = gamma*(x-mean)/sqrt(var+eps) + beta into weights and bias.
// Returns per-output (scale, shift) pairs as floats.
std::vector<std::pair<float, float>> bn_fold_factors(const BatchNorm& bn);

// IR (de)serialization: JSON schema with inline weights or a binary FP16
// sidecar ("TBWT" magic, u32 rank, u32 dims..., little-endian FP16 data).
NetworkIR load_ir_json(const std::string& path);
void save_ir_json(const NetworkIR& ir, const std::string& path);
std::vector<uint16_t> load_weight_sidecar(const std::string& path,
                                          std::vector<uint32_t>* dims = nullptr);
void save_weight_sidecar(const std::string& path,
                         const std::vector<uint16_t>& data,
                         const std::vector<uint32_t>& dims);

}  // namespace taibai

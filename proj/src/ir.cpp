#include "taibai/ir.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"
#include "taibai/fp16.hpp"

namespace taibai {

namespace {

void check_finite_fp16(uint16_t bits, const std::string& what) {
  if (!fp16::is_finite(bits))
    throw IrError(what + " is not a finite FP16 value");
}

Shape conv_out_shape(const Shape& in, const LayerSpec& l) {
  if (l.k < 1 || l.stride < 1 || l.pad < 0)
    throw IrError("bad conv geometry");
  const int h = (in.h + 2 * l.pad - l.k) / l.stride + 1;
  const int w = (in.w + 2 * l.pad - l.k) / l.stride + 1;
  if (h < 1 || w < 1) throw IrError("conv output shape collapses to zero");
  return {l.out_channels, h, w};
}

}  // namespace

std::vector<std::pair<float, float>> bn_fold_factors(const BatchNorm& bn) {
  const size_t n = bn.gamma.size();
  if (bn.beta.size() != n || bn.mean.size() != n || bn.var.size() != n)
    throw IrError("batch norm parameter arrays disagree in length");
  std::vector<std::pair<float, float>> out(n);
  for (size_t i = 0; i < n; i++) {
    const float s = bn.gamma[i] / std::sqrt(bn.var[i] + bn.eps);
    out[i] = {s, bn.beta[i] - bn.mean[i] * s};
  }
  return out;
}

LoweredNet validate_and_lower(const NetworkIR& ir) {
  if (ir.layers.empty()) throw IrError("network has no layers");
  if (ir.timesteps < 1) throw IrError("timesteps must be positive");
  LoweredNet net;
  net.input = ir.input;
  net.timesteps = ir.timesteps;

  // ir layer index -> population index of its output.
  std::vector<int> pop_of_layer(ir.layers.size(), -1);
  Shape cur = ir.input;
  int cur_pop = -1;

  for (size_t li = 0; li < ir.layers.size(); li++) {
    const LayerSpec& l = ir.layers[li];
    LoweredPop pop;
    pop.model = l.model;
    pop.vth = l.vth;
    pop.tau = l.tau;
    pop.vth_per = l.vth_per;
    pop.tau_per = l.tau_per;
    pop.alif_beta = l.alif_beta;
    pop.alif_rho = l.alif_rho;
    pop.dh_branches = l.dh_branches;
    pop.branch_tau = l.branch_tau;
    pop.learning = l.learning;
    pop.stdp = l.stdp;
    pop.eta = l.eta;
    pop.ir_layer = static_cast<int>(li);
    check_finite_fp16(l.vth, "vth");
    check_finite_fp16(l.tau, "tau");
    if (l.model == NeuronModel::DHLIF) {
      if (l.dh_branches < 1) throw IrError("DH-LIF needs at least one branch");
      if (static_cast<int>(l.branch_tau.size()) != l.dh_branches)
        throw IrError("DH-LIF branch_tau length mismatch");
    }

    LoweredLink link;
    link.src = cur_pop;
    switch (l.kind) {
      case LayerKind::Conv: {
        if (l.out_channels < 1) throw IrError("conv needs out_channels");
        const Shape out = conv_out_shape(cur, l);
        const size_t want = static_cast<size_t>(l.out_channels) * cur.c *
                            l.k * l.k;
        if (l.weights.size() != want)
          throw IrError("conv weight count mismatch: want " +
                        std::to_string(want) + " got " +
                        std::to_string(l.weights.size()));
        link.kind = LinkKind::Conv;
        link.k = l.k;
        link.stride = l.stride;
        link.pad = l.pad;
        link.weights = l.weights;
        pop.shape = out;
        break;
      }
      case LayerKind::Pool: {
        if (l.window < 1) throw IrError("pool window must be positive");
        if (cur.h % l.window || cur.w % l.window)
          throw IrError("pool window must divide the input shape");
        link.kind = LinkKind::Pool;
        link.window = l.window;
        pop.shape = {cur.c, cur.h / l.window, cur.w / l.window};
        break;
      }
      case LayerKind::FC: {
        if (l.out < 1) throw IrError("fc needs a positive out size");
        const size_t want = static_cast<size_t>(l.out) * cur.size();
        if (l.weights.size() != want)
          throw IrError("fc weight count mismatch: want " +
                        std::to_string(want) + " got " +
                        std::to_string(l.weights.size()));
        link.kind = LinkKind::Full;
        link.weights = l.weights;
        pop.shape = {1, 1, l.out};
        break;
      }
      case LayerKind::Sparse: {
        if (l.out < 1) throw IrError("sparse needs a positive out size");
        link.kind = LinkKind::Sparse;
        link.edges = l.edges;
        for (const auto& e : l.edges) {
          if (static_cast<int>(e.src) >= cur.size() ||
              static_cast<int>(e.dst) >= l.out)
            throw IrError("sparse edge endpoint out of range");
          check_finite_fp16(e.weight, "sparse weight");
        }
        pop.shape = {1, 1, l.out};
        break;
      }
    }

    // Fold batch norm into the feedforward weights and a per-neuron bias.
    if (l.bn) {
      const auto factors = bn_fold_factors(*l.bn);
      if (l.kind == LayerKind::Conv) {
        if (factors.size() != static_cast<size_t>(l.out_channels))
          throw IrError("conv BN folds per output channel");
        const size_t per_out = link.weights.size() / l.out_channels;
        for (int co = 0; co < l.out_channels; co++)
          for (size_t i = 0; i < per_out; i++) {
            uint16_t& wb = link.weights[co * per_out + i];
            wb = fp16::from_float(fp16::to_float(wb) * factors[co].first);
          }
        pop.bias.resize(pop.shape.size());
        const int hw = pop.shape.h * pop.shape.w;
        for (int co = 0; co < l.out_channels; co++)
          for (int i = 0; i < hw; i++)
            pop.bias[co * hw + i] = fp16::from_float(factors[co].second);
      } else if (l.kind == LayerKind::FC) {
        if (factors.size() != static_cast<size_t>(l.out))
          throw IrError("fc BN folds per output");
        const size_t in = cur.size();
        for (int o = 0; o < l.out; o++)
          for (size_t i = 0; i < in; i++) {
            uint16_t& wb = link.weights[o * in + i];
            wb = fp16::from_float(fp16::to_float(wb) * factors[o].first);
          }
        pop.bias.resize(l.out);
        for (int o = 0; o < l.out; o++)
          pop.bias[o] = fp16::from_float(factors[o].second);
      } else {
        throw IrError("batch norm folds only into conv or fc layers");
      }
    }

    net.pops.push_back(pop);
    const int this_pop = static_cast<int>(net.pops.size()) - 1;
    link.dst = this_pop;
    net.links.push_back(link);

    // Recurrent self-edges deliver at the next timestep on their own.
    if (!l.recurrent_edges.empty()) {
      LoweredLink rec;
      rec.kind = LinkKind::Sparse;
      rec.src = this_pop;
      rec.dst = this_pop;
      rec.edges = l.recurrent_edges;
      for (const auto& e : l.recurrent_edges)
        if (static_cast<int>(e.src) >= pop.shape.size() ||
            static_cast<int>(e.dst) >= pop.shape.size())
          throw IrError("recurrent edge endpoint out of range");
      net.links.push_back(rec);
    }

    // conv+pool fusion lowers to the conv population followed by a pool
    // population co-partitioned with it.
    if (l.kind == LayerKind::Conv && l.fuse_pool) {
      const Shape cs = net.pops[this_pop].shape;
      if (cs.h % l.pool_window || cs.w % l.pool_window)
        throw IrError("fused pool window must divide the conv output");
      LoweredPop pp;
      pp.shape = {cs.c, cs.h / l.pool_window, cs.w / l.pool_window};
      pp.model = NeuronModel::LIF;
      pp.vth = fp16::kOne;
      pp.tau = 0;
      pp.ir_layer = static_cast<int>(li);
      net.pops.push_back(pp);
      LoweredLink pl;
      pl.kind = LinkKind::Pool;
      pl.window = l.pool_window;
      pl.src = this_pop;
      pl.dst = static_cast<int>(net.pops.size()) - 1;
      net.links.push_back(pl);
    }

    pop_of_layer[li] = static_cast<int>(net.pops.size()) - 1;
    cur_pop = pop_of_layer[li];
    cur = net.pops[cur_pop].shape;
  }

  // Skip connections: delayed value links, strictly fewer cores than
  // duplicating relay chains.
  for (const auto& sk : ir.skips) {
    if (sk.from < 0 || sk.to <= sk.from + 1 ||
        sk.to > static_cast<int>(ir.layers.size()))
      throw IrError("skip must span at least one layer");
    const int src_pop = pop_of_layer[sk.from];
    const int dst_pop = sk.to == static_cast<int>(ir.layers.size())
                            ? net.output_pop()
                            : pop_of_layer[sk.to];
    const Shape ss = net.pops[src_pop].shape;
    const Shape ds = net.pops[dst_pop].shape;
    LoweredLink link;
    link.kind = LinkKind::Sparse;
    link.src = src_pop;
    link.dst = dst_pop;
    link.delay = sk.to - sk.from - 1;
    link.value_scale = sk.scale;
    check_finite_fp16(sk.scale, "skip scale");
    if (sk.subsample == 1) {
      if (!(ss == ds))
        throw IrError("identity skip requires matching shapes");
      for (int i = 0; i < ss.size(); i++)
        link.edges.push_back({static_cast<uint32_t>(i),
                              static_cast<uint32_t>(i), sk.scale});
    } else {
      // Strided subsample: source position (c, y*s, x*s) -> dest (c, y, x).
      const int s = sk.subsample;
      if (ss.c != ds.c || ds.h * s != ss.h || ds.w * s != ss.w)
        throw IrError("subsampled skip shape mismatch");
      for (int c = 0; c < ds.c; c++)
        for (int y = 0; y < ds.h; y++)
          for (int x = 0; x < ds.w; x++) {
            const uint32_t src = static_cast<uint32_t>(
                (c * ss.h + y * s) * ss.w + x * s);
            const uint32_t dst =
                static_cast<uint32_t>((c * ds.h + y) * ds.w + x);
            link.edges.push_back({src, dst, sk.scale});
          }
    }
    net.links.push_back(link);
  }

  // AccumFC learning applies to the final FC only.
  for (size_t p = 0; p < net.pops.size(); p++) {
    if (net.pops[p].learning == LearningRule::AccumFC &&
        static_cast<int>(p) != net.output_pop())
      throw IrError("accumulated-spike learning is limited to the final layer");
  }
  return net;
}

// -------------------------- JSON serialization --------------------------

namespace {

using nlohmann::json;

uint16_t f16(const json& j) { return fp16::from_float(j.get<float>()); }

std::vector<uint16_t> weights_from_json(const json& j, const std::string& dir) {
  if (j.is_string()) {
    std::string ref = j.get<std::string>();
    return load_weight_sidecar(dir.empty() ? ref : dir + "/" + ref);
  }
  std::vector<uint16_t> out;
  out.reserve(j.size());
  for (const auto& v : j) out.push_back(fp16::from_float(v.get<float>()));
  return out;
}

}  // namespace

NetworkIR load_ir_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IrError("cannot open IR file: " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw IrError("IR JSON parse error: " + std::string(e.what()));
  }
  std::string dir;
  const auto slash = path.find_last_of('/');
  if (slash != std::string::npos) dir = path.substr(0, slash);

  NetworkIR ir;
  const auto& ji = j.at("input");
  ir.input = {ji.value("c", 1), ji.value("h", 1), ji.value("w", 1)};
  ir.timesteps = j.value("timesteps", 32);
  for (const auto& jl : j.at("layers")) {
    LayerSpec l;
    const std::string kind = jl.at("kind");
    if (kind == "conv") {
      l.kind = LayerKind::Conv;
      l.k = jl.at("k");
      l.stride = jl.value("stride", 1);
      l.pad = jl.value("pad", 0);
      l.out_channels = jl.at("out_channels");
      if (jl.contains("fuse_pool")) {
        l.fuse_pool = true;
        l.pool_window = jl.at("fuse_pool");
      }
    } else if (kind == "pool") {
      l.kind = LayerKind::Pool;
      l.window = jl.at("window");
    } else if (kind == "fc") {
      l.kind = LayerKind::FC;
      l.out = jl.at("out");
    } else if (kind == "sparse" || kind == "recurrent") {
      l.kind = LayerKind::Sparse;
      l.out = jl.at("out");
      if (jl.contains("edges"))
        for (const auto& e : jl.at("edges"))
          l.edges.push_back({e.at(0).get<uint32_t>(), e.at(1).get<uint32_t>(),
                             fp16::from_float(e.at(2).get<float>())});
    } else {
      throw IrError("unknown layer kind: " + kind);
    }
    if (jl.contains("recurrent_edges")) {
      const auto& jr = jl.at("recurrent_edges");
      if (jr.is_string() && jr.get<std::string>() == "full") {
        // filled after the out size is known; mark with a sentinel
        l.recurrent_edges.push_back({0xFFFFFFFFu, 0, 0});
      } else {
        for (const auto& e : jr)
          l.recurrent_edges.push_back({e.at(0).get<uint32_t>(),
                                       e.at(1).get<uint32_t>(),
                                       fp16::from_float(e.at(2).get<float>())});
      }
    }
    if (jl.contains("weights"))
      l.weights = weights_from_json(jl.at("weights"), dir);
    if (jl.contains("bn")) {
      BatchNorm bn;
      bn.gamma = jl.at("bn").at("gamma").get<std::vector<float>>();
      bn.beta = jl.at("bn").at("beta").get<std::vector<float>>();
      bn.mean = jl.at("bn").at("mean").get<std::vector<float>>();
      bn.var = jl.at("bn").at("var").get<std::vector<float>>();
      bn.eps = jl.at("bn").value("eps", 1e-5f);
      l.bn = bn;
    }
    const std::string model = jl.value("model", "lif");
    l.model = model == "lif"          ? NeuronModel::LIF
              : model == "alif"       ? NeuronModel::ALIF
              : model == "dhlif"      ? NeuronModel::DHLIF
              : model == "integrator" ? NeuronModel::Integrator
                                      : throw IrError("unknown model " + model);
    if (jl.contains("vth")) l.vth = f16(jl.at("vth"));
    if (jl.contains("tau")) l.tau = f16(jl.at("tau"));
    if (jl.contains("vth_per"))
      for (const auto& v : jl.at("vth_per")) l.vth_per.push_back(f16(v));
    if (jl.contains("tau_per"))
      for (const auto& v : jl.at("tau_per")) l.tau_per.push_back(f16(v));
    if (jl.contains("alif_beta")) l.alif_beta = f16(jl.at("alif_beta"));
    if (jl.contains("alif_rho")) l.alif_rho = f16(jl.at("alif_rho"));
    if (jl.contains("dh_branches")) l.dh_branches = jl.at("dh_branches");
    if (jl.contains("branch_tau"))
      for (const auto& v : jl.at("branch_tau")) l.branch_tau.push_back(f16(v));
    const std::string learn = jl.value("learning", "none");
    l.learning = learn == "none"      ? LearningRule::None
                 : learn == "stdp"    ? LearningRule::STDP
                 : learn == "accumfc" ? LearningRule::AccumFC
                                      : throw IrError("unknown learning rule");
    if (jl.contains("eta")) l.eta = f16(jl.at("eta"));
    if (jl.contains("stdp")) {
      const auto& js = jl.at("stdp");
      l.stdp.a_plus = js.value("a_plus", l.stdp.a_plus);
      l.stdp.a_minus = js.value("a_minus", l.stdp.a_minus);
      l.stdp.tau_plus = js.value("tau_plus", l.stdp.tau_plus);
      l.stdp.tau_minus = js.value("tau_minus", l.stdp.tau_minus);
      if (js.contains("w_min")) l.stdp.w_min = f16(js.at("w_min"));
      if (js.contains("w_max")) l.stdp.w_max = f16(js.at("w_max"));
    }
    // Expand the "full" recurrent sentinel now that `out` is known.
    if (l.recurrent_edges.size() == 1 &&
        l.recurrent_edges[0].src == 0xFFFFFFFFu) {
      const uint16_t w = jl.contains("recurrent_weight")
                             ? f16(jl.at("recurrent_weight"))
                             : fp16::from_float(0.1f);
      l.recurrent_edges.clear();
      for (int s = 0; s < l.out; s++)
        for (int d = 0; d < l.out; d++)
          l.recurrent_edges.push_back(
              {static_cast<uint32_t>(s), static_cast<uint32_t>(d), w});
    }
    ir.layers.push_back(std::move(l));
  }
  if (j.contains("skips")) {
    for (const auto& js : j.at("skips")) {
      SkipSpec sk;
      sk.from = js.at("from");
      sk.to = js.at("to");
      if (js.contains("scale")) sk.scale = f16(js.at("scale"));
      sk.subsample = js.value("subsample", 1);
      ir.skips.push_back(sk);
    }
  }
  return ir;
}

void save_ir_json(const NetworkIR& ir, const std::string& path) {
  json j;
  j["input"] = {{"c", ir.input.c}, {"h", ir.input.h}, {"w", ir.input.w}};
  j["timesteps"] = ir.timesteps;
  j["layers"] = json::array();
  for (const auto& l : ir.layers) {
    json jl;
    switch (l.kind) {
      case LayerKind::Conv:
        jl["kind"] = "conv";
        jl["k"] = l.k;
        jl["stride"] = l.stride;
        jl["pad"] = l.pad;
        jl["out_channels"] = l.out_channels;
        if (l.fuse_pool) jl["fuse_pool"] = l.pool_window;
        break;
      case LayerKind::Pool:
        jl["kind"] = "pool";
        jl["window"] = l.window;
        break;
      case LayerKind::FC:
        jl["kind"] = "fc";
        jl["out"] = l.out;
        break;
      case LayerKind::Sparse:
        jl["kind"] = "sparse";
        jl["out"] = l.out;
        break;
    }
    if (!l.edges.empty()) {
      json je = json::array();
      for (const auto& e : l.edges)
        je.push_back({e.src, e.dst, fp16::to_float(e.weight)});
      jl["edges"] = je;
    }
    if (!l.recurrent_edges.empty()) {
      json je = json::array();
      for (const auto& e : l.recurrent_edges)
        je.push_back({e.src, e.dst, fp16::to_float(e.weight)});
      jl["recurrent_edges"] = je;
    }
    if (!l.weights.empty()) {
      json jw = json::array();
      for (const uint16_t w : l.weights) jw.push_back(fp16::to_float(w));
      jl["weights"] = jw;
    }
    jl["model"] = l.model == NeuronModel::LIF          ? "lif"
                  : l.model == NeuronModel::ALIF       ? "alif"
                  : l.model == NeuronModel::DHLIF      ? "dhlif"
                                                       : "integrator";
    jl["vth"] = fp16::to_float(l.vth);
    jl["tau"] = fp16::to_float(l.tau);
    if (l.alif_beta) jl["alif_beta"] = fp16::to_float(l.alif_beta);
    if (l.alif_rho) jl["alif_rho"] = fp16::to_float(l.alif_rho);
    if (l.dh_branches) {
      jl["dh_branches"] = l.dh_branches;
      json jt = json::array();
      for (const uint16_t t : l.branch_tau) jt.push_back(fp16::to_float(t));
      jl["branch_tau"] = jt;
    }
    if (l.learning == LearningRule::STDP) jl["learning"] = "stdp";
    if (l.learning == LearningRule::AccumFC) {
      jl["learning"] = "accumfc";
      jl["eta"] = fp16::to_float(l.eta);
    }
    j["layers"].push_back(jl);
  }
  if (!ir.skips.empty()) {
    j["skips"] = json::array();
    for (const auto& sk : ir.skips)
      j["skips"].push_back({{"from", sk.from},
                            {"to", sk.to},
                            {"scale", fp16::to_float(sk.scale)},
                            {"subsample", sk.subsample}});
  }
  std::ofstream out(path);
  if (!out) throw IrError("cannot write IR file: " + path);
  out << j.dump(1) << "\n";
}

std::vector<uint16_t> load_weight_sidecar(const std::string& path,
                                          std::vector<uint32_t>* dims) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IrError("cannot open weight sidecar: " + path);
  char magic[4];
  in.read(magic, 4);
  if (std::string(magic, 4) != "TBWT")
    throw IrError("bad weight sidecar magic");
  uint32_t rank = 0;
  in.read(reinterpret_cast<char*>(&rank), 4);
  if (rank > 8) throw IrError("weight sidecar rank too large");
  uint64_t total = 1;
  std::vector<uint32_t> d(rank);
  for (uint32_t i = 0; i < rank; i++) {
    in.read(reinterpret_cast<char*>(&d[i]), 4);
    total *= d[i];
  }
  if (dims) *dims = d;
  std::vector<uint16_t> data(total);
  in.read(reinterpret_cast<char*>(data.data()), 2 * total);
  if (!in) throw IrError("weight sidecar truncated");
  return data;
}

void save_weight_sidecar(const std::string& path,
                         const std::vector<uint16_t>& data,
                         const std::vector<uint32_t>& dims) {
  uint64_t total = 1;
  for (const uint32_t d : dims) total *= d;
  if (total != data.size())
    throw IrError("weight sidecar dims do not match the data size");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IrError("cannot write weight sidecar: " + path);
  out.write("TBWT", 4);
  const uint32_t rank = static_cast<uint32_t>(dims.size());
  out.write(reinterpret_cast<const char*>(&rank), 4);
  for (const uint32_t d : dims)
    out.write(reinterpret_cast<const char*>(&d), 4);
  out.write(reinterpret_cast<const char*>(data.data()), 2 * data.size());
}

}  // namespace taibai

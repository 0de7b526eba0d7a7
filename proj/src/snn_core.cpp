#include "clane/snn_core.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace clane {

namespace {

std::int32_t sat24(std::int64_t v, std::uint64_t* saturations) {
  if (v > kMembraneMax) {
    if (saturations) ++*saturations;
    return kMembraneMax;
  }
  if (v < -kMembraneMax) {
    if (saturations) ++*saturations;
    return -kMembraneMax;
  }
  return static_cast<std::int32_t>(v);
}

std::int32_t round_even_i32(double v) {
  const double r = std::nearbyint(v);  // FE_TONEAREST: ties to even
  if (r > 2147483647.0) return 2147483647;
  if (r < -2147483648.0) return -2147483648;
  return static_cast<std::int32_t>(r);
}

template <class LayerT>
void check_chain(const Network<LayerT>& net) {
  if (net.layers.empty()) throw std::invalid_argument("network: no layers");
  Shape3 cur = net.input;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const LayerT& l = net.layers[i];
    if (l.kind == LayerKind::conv3x3) {
      if (l.in_ch != cur.ch)
        throw std::invalid_argument("network: layer " + std::to_string(i) + " expects " +
                                    std::to_string(l.in_ch) + " channels, got " +
                                    std::to_string(cur.ch));
      if (l.stride < 1) throw std::invalid_argument("network: stride must be >= 1");
      if (l.weights.rows() != l.out_ch || l.weights.cols() != l.in_ch * 9)
        throw std::invalid_argument("network: conv layer " + std::to_string(i) +
                                    " weight shape mismatch");
    } else {
      if (l.in_ch != cur.size())
        throw std::invalid_argument("network: fc layer " + std::to_string(i) + " expects " +
                                    std::to_string(l.in_ch) + " inputs, got " +
                                    std::to_string(cur.size()));
      if (l.weights.rows() != l.out_ch || l.weights.cols() != l.in_ch)
        throw std::invalid_argument("network: fc layer " + std::to_string(i) +
                                    " weight shape mismatch");
    }
    if (l.bias.size() != l.out_ch)
      throw std::invalid_argument("network: layer " + std::to_string(i) + " bias size mismatch");
    cur = layer_out_shape(l, cur);
  }
  const LayerT& last = net.layers.back();
  if (last.kind != LayerKind::fully_connected || last.out_ch != net.feature_dim)
    throw std::invalid_argument("network: last layer must be fully connected with feature_dim outputs");
}

struct FloatLayerState {
  Eigen::VectorXf v;
};

// Dense float LIF step; the reference dynamics for both paths.
Eigen::VectorXf float_layer_step(const FloatLayerDef& layer, FloatLayerState& state,
                                 const Eigen::VectorXf& input, const Shape3& in_shape,
                                 const Shape3& out_shape) {
  Eigen::VectorXf current = Eigen::VectorXf::Zero(out_shape.size());
  if (layer.kind == LayerKind::conv3x3) {
    const int s = layer.stride;
    for (int oc = 0; oc < out_shape.ch; ++oc) {
      for (int oy = 0; oy < out_shape.h; ++oy) {
        for (int ox = 0; ox < out_shape.w; ++ox) {
          float sum = 0.f;
          for (int ic = 0; ic < in_shape.ch; ++ic) {
            for (int ky = 0; ky < 3; ++ky) {
              const int iy = oy * s - 1 + ky;
              if (iy < 0 || iy >= in_shape.h) continue;
              for (int kx = 0; kx < 3; ++kx) {
                const int ix = ox * s - 1 + kx;
                if (ix < 0 || ix >= in_shape.w) continue;
                sum += layer.weights(oc, ic * 9 + ky * 3 + kx) *
                       input[(ic * in_shape.h + iy) * in_shape.w + ix];
              }
            }
          }
          current[(oc * out_shape.h + oy) * out_shape.w + ox] = sum;
        }
      }
    }
  } else {
    current = layer.weights * input;
  }

  if (layer.bn) {
    const BatchNormParams& bn = *layer.bn;
    const int plane = out_shape.h * out_shape.w;
    for (int oc = 0; oc < out_shape.ch; ++oc) {
      const float scale = bn.gamma[oc] / std::sqrt(bn.var[oc] + bn.eps);
      const float shift = bn.beta[oc] - bn.mean[oc] * scale;
      current.segment(oc * plane, plane) =
          (current.segment(oc * plane, plane).array() * scale + shift).matrix();
    }
  }

  Eigen::VectorXf spikes = Eigen::VectorXf::Zero(out_shape.size());
  const int plane = out_shape.h * out_shape.w;
  for (int oc = 0; oc < out_shape.ch; ++oc) {
    const float b = layer.bias[oc];
    for (int i = oc * plane; i < (oc + 1) * plane; ++i) {
      float v = layer.decay * state.v[i] + current[i] + b;
      if (v >= layer.threshold) {
        spikes[i] = 1.f;
        v = 0.f;
      }
      state.v[i] = v;
    }
  }
  return spikes;
}

Eigen::VectorXf frame_to_dense(const SparseFrame& frame, const Shape3& shape, bool binarize) {
  Eigen::VectorXf dense = Eigen::VectorXf::Zero(shape.size());
  for (const FrameCell& c : frame.cells) {
    const int idx = (int(c.channel) * shape.h + c.row) * shape.w + c.col;
    dense[idx] = binarize ? 1.f : float(c.count);
  }
  return dense;
}

FeatureSpikeStream float_forward_impl(const FrameSequence& frames, const FloatNetwork& net,
                                      bool binarize_input) {
  validate_network(net);
  if (net.input.h != frames.config.out_h || net.input.w != frames.config.out_w ||
      net.input.ch != 2)
    throw std::invalid_argument("float_forward: frame resolution does not match network input");

  std::vector<Shape3> shapes{net.input};
  for (const FloatLayerDef& l : net.layers) shapes.push_back(layer_out_shape(l, shapes.back()));

  std::vector<FloatLayerState> states(net.layers.size());
  for (std::size_t i = 0; i < net.layers.size(); ++i)
    states[i].v = Eigen::VectorXf::Zero(shapes[i + 1].size());

  FeatureSpikeStream out;
  out.reserve(frames.frames.size());
  for (const SparseFrame& frame : frames.frames) {
    Eigen::VectorXf act = frame_to_dense(frame, net.input, binarize_input);
    for (std::size_t i = 0; i < net.layers.size(); ++i)
      act = float_layer_step(net.layers[i], states[i], act, shapes[i], shapes[i + 1]);
    std::vector<std::int32_t> spikes;
    for (int d = 0; d < net.feature_dim; ++d)
      if (act[d] != 0.f) spikes.push_back(d);
    out.push_back(std::move(spikes));
  }
  return out;
}

}  // namespace

template <class LayerT>
void validate_network(const Network<LayerT>& net) {
  check_chain(net);
}

template void validate_network<FloatLayerDef>(const Network<FloatLayerDef>&);
template void validate_network<QuantizedLayer>(const Network<QuantizedLayer>&);

FloatLayerDef fuse_batchnorm(const FloatLayerDef& layer) {
  if (!layer.bn) throw std::invalid_argument("fuse_batchnorm: layer has no BN parameters");
  const BatchNormParams& bn = *layer.bn;
  if (bn.gamma.size() != layer.out_ch || bn.beta.size() != layer.out_ch ||
      bn.mean.size() != layer.out_ch || bn.var.size() != layer.out_ch)
    throw std::invalid_argument("fuse_batchnorm: BN parameter size mismatch");

  FloatLayerDef out = layer;
  for (int oc = 0; oc < layer.out_ch; ++oc) {
    const double denom_sq = double(bn.var[oc]) + bn.eps;
    if (denom_sq <= 0.0) throw std::invalid_argument("fuse_batchnorm: var + eps <= 0");
    const float scale = float(bn.gamma[oc] / std::sqrt(denom_sq));
    out.weights.row(oc) *= scale;
    out.bias[oc] = bn.beta[oc] - bn.mean[oc] * scale + layer.bias[oc];
  }
  out.bn.reset();
  return out;
}

FloatNetwork fuse_network(FloatNetwork net) {
  for (FloatLayerDef& l : net.layers)
    if (l.bn) l = fuse_batchnorm(l);
  return net;
}

QuantizedLayer quantize_layer(const FloatLayerDef& layer, int weight_bits) {
  if (layer.bn) throw std::invalid_argument("quantize_layer: fuse batch norm first");
  if (weight_bits < 2 || weight_bits > 8)
    throw std::invalid_argument("quantize_layer: weight_bits must be in [2, 8]");

  const double qmax = double((1 << (weight_bits - 1)) - 1);
  const double wmax = layer.weights.size() ? double(layer.weights.cwiseAbs().maxCoeff()) : 0.0;

  int e = 0;
  if (wmax > 0.0) {
    while (e < 62 && std::ldexp(wmax, e + 1) <= qmax) ++e;
    while (e > -62 && std::ldexp(wmax, e) > qmax) --e;
  }
  const double scale = std::ldexp(1.0, e);

  QuantizedLayer q;
  q.kind = layer.kind;
  q.in_ch = layer.in_ch;
  q.out_ch = layer.out_ch;
  q.stride = layer.stride;
  q.scale_exp = e;
  q.weights.resize(layer.weights.rows(), layer.weights.cols());
  for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
    for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
      const std::int32_t w = round_even_i32(double(layer.weights(r, c)) * scale);
      q.weights(r, c) = static_cast<std::int8_t>(std::clamp<std::int32_t>(w, -127, 127));
    }
  q.bias.resize(layer.bias.size());
  for (Eigen::Index i = 0; i < layer.bias.size(); ++i)
    q.bias[i] = round_even_i32(double(layer.bias[i]) * scale);
  q.threshold_q = std::max(1, round_even_i32(double(layer.threshold) * scale));
  q.decay_q = static_cast<std::uint16_t>(
      std::clamp(round_even_i32(double(layer.decay) * 4096.0), 0, 4096));
  return q;
}

QuantNetwork quantize_network(const FloatNetwork& net, int weight_bits) {
  validate_network(net);
  QuantNetwork out;
  out.input = net.input;
  out.feature_dim = net.feature_dim;
  out.layers.reserve(net.layers.size());
  for (const FloatLayerDef& l : net.layers) out.layers.push_back(quantize_layer(l, weight_bits));
  return out;
}

SpikePlane layer_step(const QuantizedLayer& layer, LayerState& state, const SpikePlane& input,
                      LayerOpCounts* counts) {
  const Shape3& in = input.shape;
  if (layer.kind == LayerKind::conv3x3) {
    if (in.ch != layer.in_ch)
      throw std::invalid_argument("layer_step: input channel count mismatch");
  } else {
    if (in.size() != layer.in_ch) throw std::invalid_argument("layer_step: input size mismatch");
  }
  const Shape3 out_shape = layer_out_shape(layer, in);
  const int n = out_shape.size();
  if (state.v.size() != n) throw std::invalid_argument("layer_step: state size mismatch");

  std::uint64_t synops = 0;
  std::vector<std::int64_t> current(n, 0);

  if (layer.kind == LayerKind::conv3x3) {
    const int s = layer.stride;
    const int plane = out_shape.h * out_shape.w;
    for (const Spike& sp : input.spikes) {
      const int ic = sp.index / (in.h * in.w);
      const int iy = (sp.index / in.w) % in.h;
      const int ix = sp.index % in.w;
      for (int ky = 0; ky < 3; ++ky) {
        const int ty = iy + 1 - ky;
        if (ty < 0 || ty % s != 0) continue;
        const int oy = ty / s;
        if (oy >= out_shape.h) continue;
        for (int kx = 0; kx < 3; ++kx) {
          const int tx = ix + 1 - kx;
          if (tx < 0 || tx % s != 0) continue;
          const int ox = tx / s;
          if (ox >= out_shape.w) continue;
          const int tap = ic * 9 + ky * 3 + kx;
          const int base = oy * out_shape.w + ox;
          for (int oc = 0; oc < out_shape.ch; ++oc)
            current[oc * plane + base] +=
                std::int64_t(layer.weights(oc, tap)) * sp.payload;
          synops += out_shape.ch;
        }
      }
    }
  } else {
    for (const Spike& sp : input.spikes) {
      for (int o = 0; o < layer.out_ch; ++o)
        current[o] += std::int64_t(layer.weights(o, sp.index)) * sp.payload;
      synops += layer.out_ch;
    }
  }

  std::uint64_t saturations = 0;
  SpikePlane out;
  out.shape = out_shape;
  const int plane = out_shape.h * out_shape.w;
  for (int i = 0; i < n; ++i) {
    const std::int64_t decayed = (std::int64_t(layer.decay_q) * state.v[i]) >> 12;
    const std::int64_t b = layer.bias[i / plane];
    std::int32_t v = sat24(decayed + current[i] + b, &saturations);
    if (v >= layer.threshold_q) {
      out.spikes.push_back(Spike{i, 1});
      v = 0;
    }
    state.v[i] = v;
  }

  if (counts) {
    counts->synops += synops;
    counts->neuron_updates += std::uint64_t(n);
    counts->spikes += out.spikes.size();
    counts->saturations += saturations;
  }
  return out;
}

SpikePlane frame_to_plane(const SparseFrame& frame, const Shape3& shape, bool binarize) {
  SpikePlane plane;
  plane.shape = shape;
  plane.spikes.reserve(frame.cells.size());
  for (const FrameCell& c : frame.cells) {
    Spike sp;
    sp.index = (std::int32_t(c.channel) * shape.h + c.row) * shape.w + c.col;
    sp.payload = binarize ? 1 : std::int32_t(c.count);
    plane.spikes.push_back(sp);
  }
  return plane;
}

FeatureSpikeStream run_extractor(const FrameSequence& frames, const QuantNetwork& net,
                                 OpCounts* counts, bool binarize_input) {
  validate_network(net);
  if (net.input.h != frames.config.out_h || net.input.w != frames.config.out_w ||
      net.input.ch != 2)
    throw std::invalid_argument("run_extractor: frame resolution does not match network input");

  std::vector<Shape3> shapes{net.input};
  for (const QuantizedLayer& l : net.layers) shapes.push_back(layer_out_shape(l, shapes.back()));

  std::vector<LayerState> states(net.layers.size());
  std::vector<std::string> names(net.layers.size());
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    states[i].v = Eigen::ArrayXi::Zero(shapes[i + 1].size());
    names[i] = (net.layers[i].kind == LayerKind::conv3x3 ? "conv" : "fc") + std::to_string(i);
  }

  FeatureSpikeStream out;
  out.reserve(frames.frames.size());
  for (const SparseFrame& frame : frames.frames) {
    SpikePlane plane = frame_to_plane(frame, net.input, binarize_input);
    for (std::size_t i = 0; i < net.layers.size(); ++i)
      plane = layer_step(net.layers[i], states[i], plane,
                         counts ? &counts->layer(names[i]) : nullptr);
    std::vector<std::int32_t> spikes;
    spikes.reserve(plane.spikes.size());
    for (const Spike& sp : plane.spikes) spikes.push_back(sp.index);
    out.push_back(std::move(spikes));
  }
  if (counts) counts->timesteps += frames.frames.size();
  return out;
}

Eigen::VectorXf float_forward(const FrameSequence& frames, const FloatNetwork& net,
                              bool binarize_input) {
  const FeatureSpikeStream stream = float_forward_impl(frames, net, binarize_input);
  Eigen::VectorXf rates = Eigen::VectorXf::Zero(net.feature_dim);
  for (const auto& step : stream)
    for (std::int32_t d : step) rates[d] += 1.f;
  return rates;
}

FeatureSpikeStream float_forward_stream(const FrameSequence& frames, const FloatNetwork& net,
                                        bool binarize_input) {
  return float_forward_impl(frames, net, binarize_input);
}

}  // namespace clane

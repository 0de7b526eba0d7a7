#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <vector>

#include "clane/event_ingest.hpp"
#include "clane/op_counts.hpp"

namespace clane {

enum class LayerKind : std::uint8_t { conv3x3 = 0, fully_connected = 1 };

struct Shape3 {
  int ch = 0;
  int h = 0;
  int w = 0;
  int size() const { return ch * h * w; }
  bool operator==(const Shape3&) const = default;
};

/// Output geometry of a 3x3 / stride-s / pad-1 convolution.
inline Shape3 conv3x3_out_shape(const Shape3& in, int out_ch, int stride) {
  return Shape3{out_ch, (in.h - 1) / stride + 1, (in.w - 1) / stride + 1};
}

struct BatchNormParams {
  Eigen::VectorXf gamma;
  Eigen::VectorXf beta;
  Eigen::VectorXf mean;
  Eigen::VectorXf var;
  float eps = 1e-5f;
};

/// Real-valued layer: conv3x3 (pad 1) or fully connected, with optional
/// batch-norm applied to the synaptic current and Parametric-LIF dynamics
/// v = decay*v + current + bias, spike at v >= threshold, reset to 0.
///
/// Conv weights are out_ch x (in_ch*9), tap index ic*9 + ky*3 + kx.
/// FC weights are out_ch x in_ch where in_ch is the flattened input size.
struct FloatLayerDef {
  LayerKind kind = LayerKind::conv3x3;
  int in_ch = 0;
  int out_ch = 0;
  int stride = 1;
  Eigen::MatrixXf weights;
  Eigen::VectorXf bias;
  std::optional<BatchNormParams> bn;
  float decay = 0.5f;      // alpha_v in [0, 1]
  float threshold = 1.0f;  // theta > 0
};

/// Integer twin of FloatLayerDef. Weights are signed 8-bit; integer units
/// relate to real units by 2^scale_exp. decay_q is Q0.12 (0..4096) and the
/// membrane update is v = sat24((decay_q*v >> 12) + x + bias).
struct QuantizedLayer {
  LayerKind kind = LayerKind::conv3x3;
  int in_ch = 0;
  int out_ch = 0;
  int stride = 1;
  Eigen::Matrix<std::int8_t, Eigen::Dynamic, Eigen::Dynamic> weights;
  Eigen::VectorXi bias;
  std::uint16_t decay_q = 0;
  std::int32_t threshold_q = 1;
  int scale_exp = 0;
};

/// Membrane potentials of one layer, saturating 24-bit signed.
struct LayerState {
  Eigen::ArrayXi v;
};

inline constexpr std::int32_t kMembraneMax = (1 << 23) - 1;

/// Sparse activity map. Binary spikes carry payload 1; graded inputs carry
/// positive counts. Entries are sorted by flat index ((c*h + y)*w + x) and
/// unique.
struct Spike {
  std::int32_t index = 0;
  std::int32_t payload = 1;
};

struct SpikePlane {
  Shape3 shape;
  std::vector<Spike> spikes;
};

template <class LayerT>
struct Network {
  Shape3 input{2, 100, 100};
  std::vector<LayerT> layers;
  int feature_dim = 0;
};

using FloatNetwork = Network<FloatLayerDef>;
using QuantNetwork = Network<QuantizedLayer>;

/// Layer output geometry given its input shape.
template <class LayerT>
Shape3 layer_out_shape(const LayerT& layer, const Shape3& in) {
  if (layer.kind == LayerKind::conv3x3) return conv3x3_out_shape(in, layer.out_ch, layer.stride);
  return Shape3{layer.out_ch, 1, 1};
}

/// Throws std::invalid_argument unless layer shapes chain from the input and
/// the last layer is fully connected with output feature_dim.
template <class LayerT>
void validate_network(const Network<LayerT>& net);

/// Fold batch-norm into the conv weights and bias:
/// w' = w * gamma/sqrt(var+eps), b' = beta - mean*gamma/sqrt(var+eps) + b.
/// The returned layer has no BN and produces identical currents.
FloatLayerDef fuse_batchnorm(const FloatLayerDef& layer);

/// fuse_batchnorm over every layer that still carries BN parameters.
FloatNetwork fuse_network(FloatNetwork net);

/// 8-bit quantization of a BN-free layer. Picks the largest scale exponent e
/// with max|w|*2^e <= qmax (127 for 8 bits), rounds weights to nearest-even,
/// and scales bias and threshold by 2^e so integer threshold crossings track
/// the float ones. decay is rounded to Q0.12.
QuantizedLayer quantize_layer(const FloatLayerDef& layer, int weight_bits = 8);
QuantNetwork quantize_network(const FloatNetwork& net, int weight_bits = 8);

/// One event-driven integer LIF step. Scatters payload*weight contributions
/// from the input spikes, then updates every membrane
/// v = sat24((decay_q*v >> 12) + x + bias), emits spikes where v >= threshold_q
/// and resets those neurons to 0. Saturation events are counted in `counts`
/// when given.
SpikePlane layer_step(const QuantizedLayer& layer, LayerState& state, const SpikePlane& input,
                      LayerOpCounts* counts = nullptr);

/// Per-step binary spike vectors of the final FC layer (spike indices,
/// ascending).
using FeatureSpikeStream = std::vector<std::vector<std::int32_t>>;

/// Run a clip through the quantized network from fresh state (all v = 0).
/// Frame counts enter as graded payloads unless binarize_input is set.
FeatureSpikeStream run_extractor(const FrameSequence& frames, const QuantNetwork& net,
                                 OpCounts* counts = nullptr, bool binarize_input = false);

/// Floating-point reference path: same dynamics in real arithmetic, no
/// saturation. Returns the per-clip summed output spikes (feature rates).
Eigen::VectorXf float_forward(const FrameSequence& frames, const FloatNetwork& net,
                              bool binarize_input = false);

/// Per-step variant of float_forward, used by oracles and tests.
FeatureSpikeStream float_forward_stream(const FrameSequence& frames, const FloatNetwork& net,
                                        bool binarize_input = false);

/// Graded SpikePlane for one event frame (channel-major flat indices).
SpikePlane frame_to_plane(const SparseFrame& frame, const Shape3& shape, bool binarize);

}  // namespace clane

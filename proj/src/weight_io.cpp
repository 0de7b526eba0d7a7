#include "clane/weight_io.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace clane {

namespace {

constexpr std::uint32_t kVersion = 1;

void put_u8(std::ostream& out, std::uint8_t v) { out.put(char(v)); }

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4] = {char(v & 0xff), char((v >> 8) & 0xff), char((v >> 16) & 0xff), char((v >> 24) & 0xff)};
  out.write(b, 4);
}

void put_i32(std::ostream& out, std::int32_t v) { put_u32(out, std::uint32_t(v)); }

void put_u16(std::ostream& out, std::uint16_t v) {
  char b[2] = {char(v & 0xff), char((v >> 8) & 0xff)};
  out.write(b, 2);
}

void put_f32(std::ostream& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

std::uint8_t get_u8(std::istream& in) {
  char c;
  if (!in.get(c)) throw std::runtime_error("weight file: unexpected end of file");
  return std::uint8_t(c);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw std::runtime_error("weight file: unexpected end of file");
  return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
         (std::uint32_t(b[3]) << 24);
}

std::int32_t get_i32(std::istream& in) { return std::int32_t(get_u32(in)); }

std::uint16_t get_u16(std::istream& in) {
  unsigned char b[2];
  if (!in.read(reinterpret_cast<char*>(b), 2))
    throw std::runtime_error("weight file: unexpected end of file");
  return std::uint16_t(b[0] | (b[1] << 8));
}

float get_f32(std::istream& in) {
  const std::uint32_t bits = get_u32(in);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

Eigen::VectorXf get_f32_vec(std::istream& in, int n) {
  Eigen::VectorXf v(n);
  for (int i = 0; i < n; ++i) v[i] = get_f32(in);
  return v;
}

template <class NetT>
void write_header(std::ostream& out, const NetT& net, std::uint8_t variant) {
  out.write("SNNW", 4);
  put_u32(out, kVersion);
  put_u8(out, variant);
  put_u32(out, std::uint32_t(net.layers.size()));
  put_u32(out, std::uint32_t(net.input.ch));
  put_u32(out, std::uint32_t(net.input.h));
  put_u32(out, std::uint32_t(net.input.w));
  put_u32(out, std::uint32_t(net.feature_dim));
}

std::uint32_t read_header(std::istream& in, Shape3& input, int& feature_dim,
                          std::uint8_t expect_variant) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "SNNW", 4) != 0)
    throw std::runtime_error("weight file: bad magic, expected SNNW");
  const std::uint32_t version = get_u32(in);
  if (version != kVersion)
    throw std::runtime_error("weight file: unsupported version " + std::to_string(version));
  const std::uint8_t variant = get_u8(in);
  if (variant != expect_variant)
    throw std::runtime_error(expect_variant == 0
                                 ? "weight file: expected quantized variant"
                                 : "weight file: expected float variant");
  const std::uint32_t n_layers = get_u32(in);
  input.ch = int(get_u32(in));
  input.h = int(get_u32(in));
  input.w = int(get_u32(in));
  feature_dim = int(get_u32(in));
  return n_layers;
}

template <class LayerT>
void write_layer_common(std::ostream& out, const LayerT& l) {
  put_u8(out, std::uint8_t(l.kind));
  put_u32(out, std::uint32_t(l.stride));
  put_u32(out, std::uint32_t(l.in_ch));
  put_u32(out, std::uint32_t(l.out_ch));
}

template <class LayerT>
void read_layer_common(std::istream& in, LayerT& l) {
  const std::uint8_t kind = get_u8(in);
  if (kind > 1) throw std::runtime_error("weight file: unknown layer kind");
  l.kind = LayerKind(kind);
  l.stride = int(get_u32(in));
  l.in_ch = int(get_u32(in));
  l.out_ch = int(get_u32(in));
}

int weight_cols(LayerKind kind, int in_ch) { return kind == LayerKind::conv3x3 ? in_ch * 9 : in_ch; }

}  // namespace

void write_float_network(const std::string& path, const FloatNetwork& net) {
  validate_network(net);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write weight file: " + path);
  write_header(out, net, 1);
  for (const FloatLayerDef& l : net.layers) {
    write_layer_common(out, l);
    put_f32(out, l.decay);
    put_f32(out, l.threshold);
    put_u8(out, l.bn ? 1 : 0);
    for (int i = 0; i < l.out_ch; ++i) put_f32(out, l.bias[i]);
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) put_f32(out, l.weights(r, c));
    if (l.bn) {
      put_f32(out, l.bn->eps);
      for (int i = 0; i < l.out_ch; ++i) put_f32(out, l.bn->gamma[i]);
      for (int i = 0; i < l.out_ch; ++i) put_f32(out, l.bn->beta[i]);
      for (int i = 0; i < l.out_ch; ++i) put_f32(out, l.bn->mean[i]);
      for (int i = 0; i < l.out_ch; ++i) put_f32(out, l.bn->var[i]);
    }
  }
}

FloatNetwork read_float_network(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open weight file: " + path);
  FloatNetwork net;
  const std::uint32_t n_layers = read_header(in, net.input, net.feature_dim, 1);
  net.layers.resize(n_layers);
  for (FloatLayerDef& l : net.layers) {
    read_layer_common(in, l);
    l.decay = get_f32(in);
    l.threshold = get_f32(in);
    const bool has_bn = get_u8(in) != 0;
    l.bias = get_f32_vec(in, l.out_ch);
    const int cols = weight_cols(l.kind, l.in_ch);
    l.weights.resize(l.out_ch, cols);
    for (int r = 0; r < l.out_ch; ++r)
      for (int c = 0; c < cols; ++c) l.weights(r, c) = get_f32(in);
    if (has_bn) {
      BatchNormParams bn;
      bn.eps = get_f32(in);
      bn.gamma = get_f32_vec(in, l.out_ch);
      bn.beta = get_f32_vec(in, l.out_ch);
      bn.mean = get_f32_vec(in, l.out_ch);
      bn.var = get_f32_vec(in, l.out_ch);
      l.bn = std::move(bn);
    }
  }
  validate_network(net);
  return net;
}

void write_quant_network(const std::string& path, const QuantNetwork& net) {
  validate_network(net);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write weight file: " + path);
  write_header(out, net, 0);
  for (const QuantizedLayer& l : net.layers) {
    write_layer_common(out, l);
    put_i32(out, l.scale_exp);
    put_u16(out, l.decay_q);
    put_i32(out, l.threshold_q);
    for (int i = 0; i < l.out_ch; ++i) put_i32(out, l.bias[i]);
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) out.put(char(l.weights(r, c)));
  }
}

QuantNetwork read_quant_network(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open weight file: " + path);
  QuantNetwork net;
  const std::uint32_t n_layers = read_header(in, net.input, net.feature_dim, 0);
  net.layers.resize(n_layers);
  for (QuantizedLayer& l : net.layers) {
    read_layer_common(in, l);
    l.scale_exp = get_i32(in);
    l.decay_q = get_u16(in);
    l.threshold_q = get_i32(in);
    l.bias.resize(l.out_ch);
    for (int i = 0; i < l.out_ch; ++i) l.bias[i] = get_i32(in);
    const int cols = weight_cols(l.kind, l.in_ch);
    l.weights.resize(l.out_ch, cols);
    for (int r = 0; r < l.out_ch; ++r)
      for (int c = 0; c < cols; ++c) l.weights(r, c) = std::int8_t(get_u8(in));
  }
  validate_network(net);
  return net;
}

void convert_weights(const std::string& float_path, const std::string& quant_path,
                     int weight_bits) {
  const FloatNetwork net = fuse_network(read_float_network(float_path));
  write_quant_network(quant_path, quantize_network(net, weight_bits));
}

}  // namespace clane

#pragma once

#include <string>

#include "clane/snn_core.hpp"

namespace clane {

/// Versioned "SNNW" weight files, little-endian.
///
/// Header: magic "SNNW", version u32 (=1), variant u8 (0 = quantized int8,
/// 1 = float32), layer count u32, input ch/h/w u32 each, feature_dim u32.
/// Per layer: kind u8 (0 = conv3x3, 1 = fully connected), stride u32,
/// in_ch u32, out_ch u32, then
///   quantized: scale_exp i32, decay_q u16, threshold_q i32,
///              bias out_ch x i32, weights row-major i8;
///   float:     decay f32, threshold f32, has_bn u8, bias out_ch x f32,
///              weights row-major f32, and when has_bn: eps f32 followed by
///              gamma/beta/mean/var arrays, out_ch x f32 each.
/// Conv weight rows hold in_ch*9 taps (tap index ic*9 + ky*3 + kx); FC rows
/// hold in_ch values.
void write_float_network(const std::string& path, const FloatNetwork& net);
FloatNetwork read_float_network(const std::string& path);
void write_quant_network(const std::string& path, const QuantNetwork& net);
QuantNetwork read_quant_network(const std::string& path);

/// Read a float weight file, fuse any batch norm, quantize, write a quantized
/// weight file.
void convert_weights(const std::string& float_path, const std::string& quant_path,
                     int weight_bits = 8);

}  // namespace clane

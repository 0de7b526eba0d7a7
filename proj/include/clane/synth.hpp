#pragma once

#include <cstdint>
#include <vector>

#include "clane/baselines.hpp"
#include "clane/event_ingest.hpp"
#include "clane/snn_core.hpp"

namespace clane {

// Desk-scale synthetic data: feature-space class clusters, moving-bar event
// clips, and a randomly initialized extractor network. All generators are
// pure functions of their spec (seed included).

// ---------------------------------------------------------------------------
// Feature clusters: unit-norm class centers with bounded pairwise cosine,
// plus isotropic Gaussian noise per sample.

struct FeatureSynthSpec {
  int num_classes = 12;
  int dim = 256;
  int samples_per_class = 50;
  double separation = 0.5;   // pairwise center cosine <= 1 - separation
  double noise_sigma = 0.05; // per-component noise std dev
  std::uint64_t seed = 0;

  void validate() const;
};

// Throws std::invalid_argument when no center set can satisfy the separation
// for this (num_classes, dim). Samples are ordered class-major.
FeatureSet synth_features(const FeatureSynthSpec& spec);

// ---------------------------------------------------------------------------
// Moving-bar event clips: class k moves a bar of bar_len pixels at angle
// 2*pi*k/num_classes with speed speed_px_per_ms, starting near the crop
// center. Bar pixels are unique per millisecond; polarity alternates with
// pixel parity. Uniform Poisson noise events are added at noise_rate_per_ms.

struct EventSynthSpec {
  int num_classes = 4;
  int clips_per_class = 4;
  std::uint16_t sensor_width = 1280;
  std::uint16_t sensor_height = 800;
  std::uint32_t clip_ms = 400;
  int bar_len = 120;
  double speed_px_per_ms = 0.25;
  double noise_rate_per_ms = 0.0;  // expected noise events per ms over the sensor
  std::uint64_t seed = 0;

  void validate() const;
};

struct SynthClips {
  std::vector<std::int32_t> labels;
  std::vector<EventStream> clips;
};

SynthClips synth_events(const EventSynthSpec& spec);

// ---------------------------------------------------------------------------
// Random extractor weights (float, with batch-norm on the conv layers).
// Default geometry: 5 conv3x3 layers, channels 2->16->32->32->64->64 at
// strides (2,2,2,2,1), taking 100x100 down to 7x7, then flatten 3136 -> fc.

struct NetworkSynthSpec {
  Shape3 input{2, 100, 100};
  std::vector<int> conv_channels{16, 32, 32, 64, 64};
  std::vector<int> conv_strides{2, 2, 2, 2, 1};
  int feature_dim = 256;
  std::uint64_t seed = 0;
};

FloatNetwork synth_network(const NetworkSynthSpec& spec);

}  // namespace clane

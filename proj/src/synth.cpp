#include "clane/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <stdexcept>

namespace clane {

namespace {

Eigen::VectorXd random_unit(std::mt19937_64& rng, int dim) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd v(dim);
  for (int d = 0; d < dim; ++d) v[d] = gauss(rng);
  const double n = v.norm();
  if (n == 0.0) return random_unit(rng, dim);
  return v / n;
}

}  // namespace

void FeatureSynthSpec::validate() const {
  if (num_classes < 2) throw std::invalid_argument("synth features: num_classes must be >= 2");
  if (dim < 2) throw std::invalid_argument("synth features: dim must be >= 2");
  if (samples_per_class < 1)
    throw std::invalid_argument("synth features: samples_per_class must be >= 1");
  if (separation <= 0.0) throw std::invalid_argument("synth features: separation must be > 0");
  if (noise_sigma < 0.0) throw std::invalid_argument("synth features: noise_sigma must be >= 0");
}

FeatureSet synth_features(const FeatureSynthSpec& spec) {
  spec.validate();
  const double max_cos = 1.0 - spec.separation;
  // A regular simplex achieves pairwise cosine -1/(K-1), the packing optimum;
  // below that no center set exists in any dimension.
  if (max_cos < -1.0 / double(spec.num_classes - 1) - 1e-12)
    throw std::invalid_argument("synth features: separation infeasible for num_classes");

  std::mt19937_64 rng(spec.seed);

  // Centers sit just inside the allowed cosine bound rather than merely below
  // it: a shared component pins the typical pairwise cosine near 1-separation
  // so classes genuinely interfere (in high dimensions independent random
  // centers would be nearly orthogonal and every learner could keep them
  // apart trivially). Rejection keeps the bound a hard guarantee.
  std::vector<Eigen::VectorXd> centers;
  const double rho = std::max(0.0, 0.85 * max_cos);
  for (int attempt = 0; attempt < 200 && int(centers.size()) < spec.num_classes; ++attempt) {
    centers.clear();
    const Eigen::VectorXd shared = random_unit(rng, spec.dim);
    for (int k = 0; k < spec.num_classes; ++k) {
      bool placed = false;
      for (int tries = 0; tries < 100 && !placed; ++tries) {
        Eigen::VectorXd u = random_unit(rng, spec.dim);
        u -= u.dot(shared) * shared;
        if (u.norm() == 0.0) continue;
        Eigen::VectorXd c = std::sqrt(rho) * shared + std::sqrt(1.0 - rho) * u.normalized();
        c.normalize();
        placed = std::all_of(centers.begin(), centers.end(), [&](const Eigen::VectorXd& other) {
          return c.dot(other) <= max_cos;
        });
        if (placed) centers.push_back(std::move(c));
      }
      if (!placed) break;
    }
  }
  if (int(centers.size()) < spec.num_classes) {
    // Rejection failed (tight separation); fall back to the deterministic
    // optimum: mutually orthogonal directions, or a simplex when cosine must
    // go negative. Both need num_classes <= dim.
    if (spec.num_classes > spec.dim)
      throw std::invalid_argument("synth features: separation infeasible for (num_classes, dim)");
    centers.clear();
    if (max_cos >= 0.0) {
      for (int k = 0; k < spec.num_classes; ++k) {
        Eigen::VectorXd c = Eigen::VectorXd::Zero(spec.dim);
        c[k] = 1.0;
        centers.push_back(std::move(c));
      }
    } else {
      const int k_count = spec.num_classes;
      for (int k = 0; k < k_count; ++k) {
        Eigen::VectorXd c = Eigen::VectorXd::Constant(spec.dim, 0.0);
        for (int j = 0; j < k_count; ++j) c[j] = (j == k ? 1.0 : 0.0) - 1.0 / double(k_count);
        centers.push_back(c / c.norm());
      }
    }
  }

  std::normal_distribution<double> gauss(0.0, 1.0);
  FeatureSet set;
  set.dim = spec.dim;
  set.labels.reserve(std::size_t(spec.num_classes) * spec.samples_per_class);
  set.features.reserve(set.labels.capacity());
  for (int k = 0; k < spec.num_classes; ++k) {
    for (int s = 0; s < spec.samples_per_class; ++s) {
      Eigen::VectorXf x(spec.dim);
      for (int d = 0; d < spec.dim; ++d)
        x[d] = float(centers[std::size_t(k)][d] + spec.noise_sigma * gauss(rng));
      set.labels.push_back(k);
      set.features.push_back(std::move(x));
    }
  }
  return set;
}

void EventSynthSpec::validate() const {
  if (num_classes < 1) throw std::invalid_argument("synth events: num_classes must be >= 1");
  if (clips_per_class < 1) throw std::invalid_argument("synth events: clips_per_class must be >= 1");
  if (sensor_width == 0 || sensor_height == 0)
    throw std::invalid_argument("synth events: sensor dims must be positive");
  if (clip_ms == 0) throw std::invalid_argument("synth events: clip_ms must be positive");
  if (bar_len < 1) throw std::invalid_argument("synth events: bar_len must be >= 1");
  if (speed_px_per_ms < 0) throw std::invalid_argument("synth events: speed must be >= 0");
  if (noise_rate_per_ms < 0) throw std::invalid_argument("synth events: noise rate must be >= 0");
}

SynthClips synth_events(const EventSynthSpec& spec) {
  spec.validate();
  SynthClips out;
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> jitter(-20.0, 20.0);
  std::uniform_int_distribution<int> px(0, spec.sensor_width - 1);
  std::uniform_int_distribution<int> py(0, spec.sensor_height - 1);
  std::poisson_distribution<int> noise_count(spec.noise_rate_per_ms);

  for (int k = 0; k < spec.num_classes; ++k) {
    const double angle = 2.0 * std::numbers::pi * double(k) / double(spec.num_classes);
    const double dx = std::cos(angle) * spec.speed_px_per_ms;
    const double dy = std::sin(angle) * spec.speed_px_per_ms;
    // The bar is perpendicular to its motion.
    const double ux = -std::sin(angle);
    const double uy = std::cos(angle);

    for (int clip = 0; clip < spec.clips_per_class; ++clip) {
      EventStream stream;
      stream.sensor_width = spec.sensor_width;
      stream.sensor_height = spec.sensor_height;

      double cx = spec.sensor_width / 2.0 + jitter(rng);
      double cy = spec.sensor_height / 2.0 + jitter(rng);

      for (std::uint32_t ms = 0; ms < spec.clip_ms; ++ms) {
        std::set<std::pair<int, int>> pixels;
        for (int i = 0; i < spec.bar_len; ++i) {
          const double offset = double(i) - double(spec.bar_len - 1) / 2.0;
          const int exi = int(std::lround(cx + ux * offset));
          const int eyi = int(std::lround(cy + uy * offset));
          if (exi < 0 || eyi < 0 || exi >= spec.sensor_width || eyi >= spec.sensor_height)
            continue;
          pixels.emplace(exi, eyi);
        }
        std::uint64_t seq = 0;
        for (const auto& [exi, eyi] : pixels) {
          Event ev;
          ev.x = std::uint16_t(exi);
          ev.y = std::uint16_t(eyi);
          ev.t = std::uint64_t(ms) * 1000 + seq++;
          ev.p = ((exi + eyi) & 1) ? std::int8_t(-1) : std::int8_t(1);
          stream.events.push_back(ev);
        }
        if (spec.noise_rate_per_ms > 0) {
          const int n = noise_count(rng);
          for (int i = 0; i < n; ++i) {
            Event ev;
            ev.x = std::uint16_t(px(rng));
            ev.y = std::uint16_t(py(rng));
            ev.t = std::uint64_t(ms) * 1000 + seq++;
            ev.p = (rng() & 1) ? std::int8_t(-1) : std::int8_t(1);
            stream.events.push_back(ev);
          }
        }
        cx += dx;
        cy += dy;
      }
      std::stable_sort(stream.events.begin(), stream.events.end(),
                       [](const Event& a, const Event& b) { return a.t < b.t; });
      out.labels.push_back(k);
      out.clips.push_back(std::move(stream));
    }
  }
  return out;
}

FloatNetwork synth_network(const NetworkSynthSpec& spec) {
  if (spec.feature_dim < 1) throw std::invalid_argument("synth network: feature_dim must be >= 1");
  if (spec.conv_strides.size() != spec.conv_channels.size())
    throw std::invalid_argument("synth network: one stride per conv layer");
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  FloatNetwork net;
  net.input = spec.input;
  net.feature_dim = spec.feature_dim;

  // Random weights with a small positive mean so spiking activity survives
  // the depth; thresholds step down with the payload scale (graded counts at
  // the input, binary spikes after).
  Shape3 shape = spec.input;
  bool first = true;
  for (std::size_t li = 0; li < spec.conv_channels.size(); ++li) {
    const int oc = spec.conv_channels[li];
    FloatLayerDef layer;
    layer.kind = LayerKind::conv3x3;
    layer.in_ch = shape.ch;
    layer.out_ch = oc;
    layer.stride = spec.conv_strides[li];
    const int taps = layer.in_ch * 9;
    const double scale = 1.0 / std::sqrt(double(taps));
    layer.weights.resize(oc, taps);
    for (int r = 0; r < oc; ++r)
      for (int c = 0; c < taps; ++c) layer.weights(r, c) = float((gauss(rng) + 0.1) * scale);
    layer.bias = Eigen::VectorXf::Zero(oc);
    BatchNormParams bn;
    bn.gamma.resize(oc);
    bn.beta.resize(oc);
    bn.mean.resize(oc);
    bn.var.resize(oc);
    for (int r = 0; r < oc; ++r) {
      bn.gamma[r] = float(0.8 + 0.4 * unif(rng));
      bn.beta[r] = float(0.05 * gauss(rng));
      bn.mean[r] = float(0.05 * gauss(rng));
      bn.var[r] = float(0.8 + 0.4 * unif(rng));
    }
    layer.bn = bn;
    layer.decay = 0.5f;
    layer.threshold = first ? 2.0f : 0.4f;
    first = false;
    net.layers.push_back(std::move(layer));
    shape = conv3x3_out_shape(shape, oc, spec.conv_strides[li]);
  }

  FloatLayerDef fc;
  fc.kind = LayerKind::fully_connected;
  fc.in_ch = shape.size();
  fc.out_ch = spec.feature_dim;
  fc.stride = 1;
  const double scale = 2.0 / std::sqrt(double(fc.in_ch));
  fc.weights.resize(fc.out_ch, fc.in_ch);
  for (int r = 0; r < fc.out_ch; ++r)
    for (int c = 0; c < fc.in_ch; ++c) fc.weights(r, c) = float(gauss(rng) * scale);
  fc.bias = Eigen::VectorXf::Zero(fc.out_ch);
  fc.decay = 0.5f;
  fc.threshold = 0.5f;
  net.layers.push_back(std::move(fc));

  validate_network(net);
  return net;
}

}  // namespace clane

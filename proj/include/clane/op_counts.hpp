#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace clane {

/// Event-driven cost counters for one instrumented stage.
struct LayerOpCounts {
  std::string name;
  std::uint64_t synops = 0;          // weight-accumulate operations
  std::uint64_t neuron_updates = 0;  // per-step membrane updates
  std::uint64_t spikes = 0;          // spikes emitted
  std::uint64_t saturations = 0;     // 24-bit membrane clamps
};

/// Aggregated per-run operation counts; totals are sums over layers.
struct OpCounts {
  std::vector<LayerOpCounts> layers;
  std::uint64_t timesteps = 0;

  std::uint64_t total_synops() const {
    std::uint64_t s = 0;
    for (const auto& l : layers) s += l.synops;
    return s;
  }
  std::uint64_t total_neuron_updates() const {
    std::uint64_t s = 0;
    for (const auto& l : layers) s += l.neuron_updates;
    return s;
  }
  std::uint64_t total_spikes() const {
    std::uint64_t s = 0;
    for (const auto& l : layers) s += l.spikes;
    return s;
  }
  std::uint64_t total_saturations() const {
    std::uint64_t s = 0;
    for (const auto& l : layers) s += l.saturations;
    return s;
  }

  /// Counters for `name`, appended on first use.
  LayerOpCounts& layer(const std::string& name) {
    for (auto& l : layers)
      if (l.name == name) return l;
    layers.push_back(LayerOpCounts{name, 0, 0, 0, 0});
    return layers.back();
  }
};

}  // namespace clane

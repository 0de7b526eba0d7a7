#pragma once

#include <filesystem>
#include <string>

#include "clane/agg_norm.hpp"
#include "clane/event_ingest.hpp"
#include "clane/protocol.hpp"

namespace clane {

struct ExtractorConfig {
  std::string weights;          // SNNW file driving `extract`
  bool binarize_input = false;  // feed frames as binary spikes instead of counts
};

// Everything the CLI reads, one section per pipeline stage. File syntax is
// flat INI: [section] headers, key = value pairs, #/; comments.
struct AppConfig {
  BinningConfig ingest;      // [ingest]
  ExtractorConfig extractor; // [extractor]
  NormConfig norm;           // [norm]
  LearnerOptions learner;    // [learner]
  ProtocolConfig protocol;   // [protocol]
  int num_seeds = 5;         // [protocol] num_seeds
  bool one_based_split = false;  // [protocol] one_based_split
};

// Parse a config file over the defaults. Unknown sections/keys and malformed
// lines throw std::invalid_argument with the line number.
AppConfig load_config(const std::filesystem::path& path);

// Apply one "section.key=value" override (CLI --set). Also accepts the key
// and value split apart.
void apply_override(AppConfig& cfg, const std::string& assignment);
void apply_override(AppConfig& cfg, const std::string& dotted_key, const std::string& value);

}  // namespace clane

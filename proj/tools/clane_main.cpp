// clane: event-camera continual-learning pipeline driver.
//
// Subcommands: ingest (events -> frame cache), extract (events/frames +
// weights -> feature file), learn (features -> incremental-learning reports),
// bench (op-count frequency sweep), synth (features / events / weights),
// lut-dump (inverse-sqrt seed table), convert (float -> quantized weights).
//
// All stage parameters live in an INI config (see --config / --set); a few
// common ones are mirrored as convenience flags. Runtime failures exit 2.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "clane/agg_norm.hpp"
#include "clane/config.hpp"
#include "clane/event_ingest.hpp"
#include "clane/protocol.hpp"
#include "clane/report.hpp"
#include "clane/snn_core.hpp"
#include "clane/synth.hpp"
#include "clane/weight_io.hpp"

namespace fs = std::filesystem;
using namespace clane;

namespace {

struct GlobalOpts {
  std::string config_path;
  std::vector<std::string> overrides;
};

AppConfig make_config(const GlobalOpts& g) {
  AppConfig cfg;
  if (!g.config_path.empty()) cfg = load_config(g.config_path);
  for (const std::string& assignment : g.overrides) apply_override(cfg, assignment);
  return cfg;
}

struct ManifestEntry {
  std::int32_t label;
  fs::path path;
};

std::vector<ManifestEntry> read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("manifest: cannot open " + path.string());
  std::vector<ManifestEntry> entries;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw std::runtime_error("manifest: expected class_id<TAB>path at line " +
                               std::to_string(lineno));
    std::int32_t label = 0;
    try {
      label = std::stoi(line.substr(0, tab));
    } catch (const std::exception&) {
      throw std::runtime_error("manifest: bad class id at line " + std::to_string(lineno));
    }
    fs::path p = line.substr(tab + 1);
    if (p.is_relative()) p = path.parent_path() / p;
    entries.push_back({label, std::move(p)});
  }
  if (entries.empty()) throw std::runtime_error("manifest: no entries in " + path.string());
  return entries;
}

// A clip source is either a frame cache ("FRAMES1" text) or an event file.
FrameSequence load_clip_frames(const fs::path& path, const BinningConfig& ingest) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw std::runtime_error("clip: cannot open " + path.string());
  char head[7] = {};
  probe.read(head, 7);
  probe.close();
  if (std::string_view(head, 7) == "FRAMES1") return load_frames(path.string());
  const EventStream stream = load_event_file(path.string());
  return bin_to_frames(stream, ingest);
}

// Reads whichever variant a weight file holds and returns both forms: the
// quantized network as stored or derived (fuse + quantize), and the float
// network when available.
struct LoadedWeights {
  QuantNetwork quant;
  std::optional<FloatNetwork> flt;
};

LoadedWeights load_weights_any(const fs::path& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw std::runtime_error("weights: cannot open " + path.string());
  char head[9] = {};
  probe.read(head, 9);
  if (!probe || std::string_view(head, 4) != "SNNW")
    throw std::runtime_error("weights: bad magic in " + path.string());
  probe.close();
  LoadedWeights w;
  if (head[8] == 0) {
    w.quant = read_quant_network(path.string());
  } else {
    FloatNetwork f = read_float_network(path.string());
    w.quant = quantize_network(fuse_network(f));
    w.flt = std::move(f);
  }
  return w;
}

int cmd_ingest(const GlobalOpts& g, const std::string& input, const std::string& output,
               const std::string& format) {
  const AppConfig cfg = make_config(g);
  const EventStream stream = load_event_file(input, format);
  const FrameSequence frames = bin_to_frames(stream, cfg.ingest);
  save_frames(output, frames);
  std::cout << "ingest: " << stream.events.size() << " events -> " << frames.frames.size()
            << " frames";
  if (!frames.frames.empty()) std::cout << ", sparsity " << sparsity(frames);
  std::cout << "\n";
  return 0;
}

int cmd_extract(const GlobalOpts& g, const std::string& manifest_path,
                const std::string& weights_path, const std::string& output,
                const std::string& mode) {
  const AppConfig cfg = make_config(g);
  const std::vector<ManifestEntry> entries = read_manifest(manifest_path);
  const fs::path wpath = weights_path.empty() ? fs::path(cfg.extractor.weights)
                                              : fs::path(weights_path);
  if (wpath.empty()) throw std::runtime_error("extract: no weights file configured");
  const LoadedWeights weights = load_weights_any(wpath);

  FeatureSet set;
  set.dim = weights.quant.feature_dim;
  for (const ManifestEntry& entry : entries) {
    const FrameSequence frames = load_clip_frames(entry.path, cfg.ingest);
    Eigen::VectorXf feat;
    if (mode == "fixed") {
      const FeatureSpikeStream stream =
          run_extractor(frames, weights.quant, nullptr, cfg.extractor.binarize_input);
      const GradedVector totals = accumulate(stream, weights.quant.feature_dim);
      const NormalizedVector norm = normalize_vector(totals, cfg.norm);
      feat = to_real(norm).cast<float>();
    } else if (mode == "float") {
      if (!weights.flt)
        throw std::runtime_error("extract: float mode needs float-variant weights");
      feat = float_forward(frames, *weights.flt, cfg.extractor.binarize_input);
    } else {
      throw std::runtime_error("extract: mode must be fixed or float");
    }
    set.labels.push_back(entry.label);
    set.features.push_back(std::move(feat));
  }
  save_features(output, set);
  std::cout << "extract: " << set.size() << " clips -> " << output << " (dim " << set.dim
            << ", mode " << mode << ")\n";
  return 0;
}

int cmd_learn(const GlobalOpts& g, const std::string& features_path, const std::string& learner,
              int shots, std::int64_t seed, int num_seeds, bool split_holdout,
              const std::string& out_jsonl, const std::string& out_csv) {
  AppConfig cfg = make_config(g);
  if (!learner.empty()) cfg.learner.name = learner;
  if (shots >= 0) cfg.protocol.shots = shots;
  if (seed >= 0) cfg.protocol.seed = std::uint64_t(seed);
  if (num_seeds > 0) cfg.num_seeds = num_seeds;

  const FeatureSet set = load_features(features_path);
  FeaturesByClass by_class = features_by_class(set);

  if (split_holdout) {
    std::int32_t max_label = 0;
    for (const auto& [label, samples] : by_class) max_label = std::max(max_label, label);
    const DatasetSplit split = split_classes(int(max_label) + 1, cfg.one_based_split);
    FeaturesByClass holdout;
    for (int id : split.holdout) {
      const auto it = by_class.find(id);
      if (it == by_class.end())
        throw std::runtime_error("learn: holdout class " + std::to_string(id) +
                                 " missing from feature file");
      holdout.emplace(it->first, std::move(it->second));
    }
    by_class = std::move(holdout);
  }

  std::vector<RunReport> reports;
  for (int s = 0; s < cfg.num_seeds; ++s) {
    ProtocolConfig pc = cfg.protocol;
    pc.seed = cfg.protocol.seed + std::uint64_t(s);
    const std::unique_ptr<IncrementalLearner> model = make_learner(cfg.learner, set.dim, pc.seed);
    reports.push_back(run_incremental(pc, *model, by_class));
  }

  if (!out_jsonl.empty()) write_reports_jsonl(fs::path(out_jsonl), reports);
  if (!out_csv.empty()) write_summary_csv(fs::path(out_csv), reports);
  std::cout << format_table(reports);
  return 0;
}

std::vector<std::uint64_t> parse_windows(const std::string& spec) {
  std::vector<std::uint64_t> out;
  std::size_t pos = 0;
  while (pos < spec.size()) {
    std::size_t comma = spec.find(',', pos);
    if (comma == std::string::npos) comma = spec.size();
    std::string tok = spec.substr(pos, comma - pos);
    pos = comma + 1;
    if (tok.empty()) continue;
    std::uint64_t mult = 1000;  // default unit ms
    if (tok.size() > 2 && tok.substr(tok.size() - 2) == "us") {
      mult = 1;
      tok = tok.substr(0, tok.size() - 2);
    } else if (tok.size() > 2 && tok.substr(tok.size() - 2) == "ms") {
      tok = tok.substr(0, tok.size() - 2);
    }
    try {
      out.push_back(std::stoull(tok) * mult);
    } catch (const std::exception&) {
      throw std::runtime_error("bench: bad window '" + tok + "'");
    }
    if (out.back() == 0) throw std::runtime_error("bench: window must be positive");
  }
  if (out.empty()) throw std::runtime_error("bench: no windows given");
  return out;
}

int cmd_bench(const GlobalOpts& g, const std::string& events_path,
              const std::string& weights_path, const std::string& windows_spec,
              std::int64_t clip_ms, const std::string& output) {
  const AppConfig cfg = make_config(g);
  const EventStream stream = load_event_file(events_path);
  if (stream.events.empty()) throw std::runtime_error("bench: event file is empty");
  const std::vector<std::uint64_t> windows = parse_windows(windows_spec);
  const LoadedWeights weights = load_weights_any(
      weights_path.empty() ? fs::path(cfg.extractor.weights) : fs::path(weights_path));

  // A span divisible by every window keeps frame-count ratios exact.
  std::uint64_t lcm = 1;
  for (std::uint64_t w : windows) lcm = std::lcm(lcm, w);
  const std::uint64_t t_min = stream.events.front().t;
  const std::uint64_t t_max = stream.events.back().t;
  const std::uint64_t start = (t_min / lcm) * lcm;
  std::uint64_t end;
  if (clip_ms > 0) {
    end = start + std::uint64_t(clip_ms) * 1000;
  } else {
    const std::uint64_t span = t_max + 1 - start;
    end = start + ((span + lcm - 1) / lcm) * lcm;
  }

  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  std::cout << "window_us  timesteps  synops       neuron_updates  spikes       saturations\n";
  for (std::uint64_t w : windows) {
    BinningConfig bc = cfg.ingest;
    bc.window_us = w;
    const FrameSequence frames = bin_to_frames(stream, bc, start, end);
    OpCounts ops;
    run_extractor(frames, weights.quant, &ops, cfg.extractor.binarize_input);
    nlohmann::ordered_json row;
    row["window_us"] = w;
    row["ops"] = op_counts_to_json(ops);
    rows.push_back(std::move(row));
    std::cout << w << "  " << ops.timesteps << "  " << ops.total_synops() << "  "
              << ops.total_neuron_updates() << "  " << ops.total_spikes() << "  "
              << ops.total_saturations() << "\n";
  }
  if (!output.empty()) {
    std::ofstream out(output, std::ios::binary);
    if (!out) throw std::runtime_error("bench: cannot open " + output + " for writing");
    out << rows.dump(2) << '\n';
  }
  return 0;
}

int cmd_synth_features(const GlobalOpts&, const FeatureSynthSpec& spec,
                       const std::string& output) {
  const FeatureSet set = synth_features(spec);
  save_features(output, set);
  std::cout << "synth features: " << set.size() << " samples, " << spec.num_classes
            << " classes, dim " << spec.dim << " -> " << output << "\n";
  return 0;
}

int cmd_synth_events(const GlobalOpts&, const EventSynthSpec& spec, const std::string& out_dir,
                     const std::string& manifest_path) {
  const SynthClips clips = synth_events(spec);
  fs::create_directories(out_dir);
  std::ofstream manifest(manifest_path, std::ios::binary);
  if (!manifest)
    throw std::runtime_error("synth events: cannot open " + manifest_path + " for writing");
  std::map<std::int32_t, int> per_class;
  for (std::size_t i = 0; i < clips.clips.size(); ++i) {
    const std::int32_t label = clips.labels[i];
    const std::string name =
        "clip_c" + std::to_string(label) + "_" + std::to_string(per_class[label]++) + ".evt";
    const fs::path path = fs::path(out_dir) / name;
    const std::vector<std::uint8_t> bytes = encode_events_binary(clips.clips[i]);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("synth events: cannot open " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    manifest << label << '\t' << fs::absolute(path).string() << '\n';
  }
  std::cout << "synth events: " << clips.clips.size() << " clips -> " << out_dir
            << ", manifest " << manifest_path << "\n";
  return 0;
}

int cmd_synth_weights(const GlobalOpts& g, int feature_dim, std::uint64_t seed, bool quantized,
                      const std::string& output) {
  const AppConfig cfg = make_config(g);
  NetworkSynthSpec spec;
  spec.input = Shape3{2, cfg.ingest.out_h, cfg.ingest.out_w};
  spec.feature_dim = feature_dim;
  spec.seed = seed;
  const FloatNetwork net = synth_network(spec);
  if (quantized) {
    write_quant_network(output, quantize_network(fuse_network(net)));
  } else {
    write_float_network(output, net);
  }
  std::cout << "synth weights: " << net.layers.size() << " layers, feature dim "
            << net.feature_dim << (quantized ? " (quantized)" : " (float)") << " -> " << output
            << "\n";
  return 0;
}

int cmd_lut_dump(const GlobalOpts& g, int addr_bits, const std::string& output) {
  AppConfig cfg = make_config(g);
  if (addr_bits > 0) cfg.norm.lut_addr_bits = addr_bits;
  if (output.empty()) {
    dump_inv_sqrt_lut(std::cout, cfg.norm);
  } else {
    std::ofstream out(output, std::ios::binary);
    if (!out) throw std::runtime_error("lut-dump: cannot open " + output + " for writing");
    dump_inv_sqrt_lut(out, cfg.norm);
  }
  return 0;
}

int cmd_convert(const std::string& input, const std::string& output, int bits) {
  convert_weights(input, output, bits);
  std::cout << "convert: " << input << " -> " << output << " (" << bits << "-bit)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"clane: event-driven continual-learning pipeline"};
  app.require_subcommand(1);

  GlobalOpts global;
  app.add_option("--config", global.config_path, "INI config file");
  app.add_option("--set", global.overrides, "override: section.key=value")->take_all();

  // ingest
  auto* ingest = app.add_subcommand("ingest", "bin an event file into a frame cache");
  std::string in_input, in_output, in_format = "auto";
  ingest->add_option("--input", in_input, "event file (binary_v1 or csv)")->required();
  ingest->add_option("--output", in_output, "frame cache to write")->required();
  ingest->add_option("--format", in_format, "auto|binary_v1|csv");

  // extract
  auto* extract = app.add_subcommand("extract", "run the extractor over a manifest of clips");
  std::string ex_manifest, ex_weights, ex_output, ex_mode = "fixed";
  extract->add_option("--manifest", ex_manifest, "class_id<TAB>path lines")->required();
  extract->add_option("--weights", ex_weights, "SNNW weight file");
  extract->add_option("--output", ex_output, "feature file to write")->required();
  extract->add_option("--mode", ex_mode, "fixed (quantized pipeline) or float (rate reference)");

  // learn
  auto* learn = app.add_subcommand("learn", "class-incremental runs over a feature file");
  std::string ln_features, ln_learner, ln_jsonl, ln_csv;
  int ln_shots = -1, ln_seeds = 0;
  std::int64_t ln_seed = -1;
  bool ln_holdout = false;
  learn->add_option("--features", ln_features, "feature file")->required();
  learn->add_option("--learner", ln_learner, "clp-loihi|clp-float|ncm|slda|replay|finetune");
  learn->add_option("--shots", ln_shots, "training samples per class (0 = full pool)");
  learn->add_option("--seed", ln_seed, "base seed");
  learn->add_option("--seeds", ln_seeds, "number of seeded repetitions");
  learn->add_flag("--split-holdout", ln_holdout,
                  "restrict to the every-fourth-class holdout before learning");
  learn->add_option("--out-jsonl", ln_jsonl, "write one JSON object per run");
  learn->add_option("--out-csv", ln_csv, "write the summary CSV");

  // bench
  auto* bench = app.add_subcommand("bench", "op-count frequency sweep over one clip");
  std::string bn_events, bn_weights, bn_windows = "40ms,10ms,2ms", bn_output;
  std::int64_t bn_clip_ms = 0;
  bench->add_option("--events", bn_events, "event file")->required();
  bench->add_option("--weights", bn_weights, "SNNW weight file");
  bench->add_option("--windows", bn_windows, "comma list, e.g. 40ms,10ms,2ms");
  bench->add_option("--clip-ms", bn_clip_ms, "force the analysis span length");
  bench->add_option("--output", bn_output, "write rows as JSON");

  // synth
  auto* synth = app.add_subcommand("synth", "generate synthetic data");
  synth->require_subcommand(1);

  auto* synth_feat = synth->add_subcommand("features", "feature-space class clusters");
  FeatureSynthSpec sf_spec;
  std::string sf_output;
  synth_feat->add_option("--classes", sf_spec.num_classes, "class count");
  synth_feat->add_option("--dim", sf_spec.dim, "feature dimension");
  synth_feat->add_option("--samples", sf_spec.samples_per_class, "samples per class");
  synth_feat->add_option("--separation", sf_spec.separation, "min center separation (cosine)");
  synth_feat->add_option("--noise", sf_spec.noise_sigma, "per-component noise sigma");
  synth_feat->add_option("--seed", sf_spec.seed, "generator seed");
  synth_feat->add_option("--output", sf_output, "feature file to write")->required();

  auto* synth_ev = synth->add_subcommand("events", "moving-bar event clips");
  EventSynthSpec se_spec;
  std::string se_dir, se_manifest;
  synth_ev->add_option("--classes", se_spec.num_classes, "class count");
  synth_ev->add_option("--clips", se_spec.clips_per_class, "clips per class");
  synth_ev->add_option("--clip-ms", se_spec.clip_ms, "clip length in ms");
  synth_ev->add_option("--bar-len", se_spec.bar_len, "bar length in pixels");
  synth_ev->add_option("--speed", se_spec.speed_px_per_ms, "bar speed in px/ms");
  synth_ev->add_option("--noise-rate", se_spec.noise_rate_per_ms, "noise events per ms");
  synth_ev->add_option("--seed", se_spec.seed, "generator seed");
  synth_ev->add_option("--out-dir", se_dir, "directory for the .evt files")->required();
  synth_ev->add_option("--manifest", se_manifest, "manifest to write")->required();

  auto* synth_w = synth->add_subcommand("weights", "random extractor network");
  int sw_dim = 256;
  std::uint64_t sw_seed = 0;
  bool sw_quant = false;
  std::string sw_output;
  synth_w->add_option("--feature-dim", sw_dim, "output feature dimension");
  synth_w->add_option("--seed", sw_seed, "generator seed");
  synth_w->add_flag("--quant", sw_quant, "store the fused+quantized variant");
  synth_w->add_option("--output", sw_output, "SNNW file to write")->required();

  // lut-dump
  auto* lut = app.add_subcommand("lut-dump", "print the inverse-sqrt seed table");
  int lt_bits = 0;
  std::string lt_output;
  lut->add_option("--addr-bits", lt_bits, "table address width");
  lut->add_option("--output", lt_output, "file instead of stdout");

  // convert
  auto* convert = app.add_subcommand("convert", "float weights -> quantized weights");
  std::string cv_input, cv_output;
  int cv_bits = 8;
  convert->add_option("--input", cv_input, "float-variant SNNW file")->required();
  convert->add_option("--output", cv_output, "quantized SNNW file to write")->required();
  convert->add_option("--bits", cv_bits, "weight bits");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) return cmd_ingest(global, in_input, in_output, in_format);
    if (*extract) return cmd_extract(global, ex_manifest, ex_weights, ex_output, ex_mode);
    if (*learn)
      return cmd_learn(global, ln_features, ln_learner, ln_shots, ln_seed, ln_seeds, ln_holdout,
                       ln_jsonl, ln_csv);
    if (*bench) return cmd_bench(global, bn_events, bn_weights, bn_windows, bn_clip_ms, bn_output);
    if (*synth_feat) return cmd_synth_features(global, sf_spec, sf_output);
    if (*synth_ev) return cmd_synth_events(global, se_spec, se_dir, se_manifest);
    if (*synth_w) return cmd_synth_weights(global, sw_dim, sw_seed, sw_quant, sw_output);
    if (*lut) return cmd_lut_dump(global, lt_bits, lt_output);
    if (*convert) return cmd_convert(cv_input, cv_output, cv_bits);
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  }
  return 0;
}

// Acceptance gate: one line per criterion, PASS/FAIL/SKIP, nonzero exit when
// any required criterion fails. Each check is self-contained and uses only
// brute-force oracles for expected values.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "clane/agg_norm.hpp"
#include "clane/baselines.hpp"
#include "clane/clp_head.hpp"
#include "clane/event_ingest.hpp"
#include "clane/protocol.hpp"
#include "clane/report.hpp"
#include "clane/snn_core.hpp"
#include "clane/synth.hpp"
#include "clane/weight_io.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace clane;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fail(const std::string& why) { return why; }

// ---------------------------------------------------------------------------
// 1. Binning vs dense histograms

std::string criterion_binning() {
  std::mt19937_64 rng(0xB141);
  const auto t0 = Clock::now();
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t count = 1000 + std::size_t(rng() % 100000u) % 99001u;
    EventStream s;
    s.sensor_width = 1280;
    s.sensor_height = 800;
    std::uniform_int_distribution<int> dx(0, 1279), dy(0, 799), dp(0, 1);
    std::uniform_int_distribution<std::uint64_t> dt(0, 500000);
    s.events.reserve(count);
    for (std::size_t i = 0; i < count; ++i)
      s.events.push_back({std::uint16_t(dx(rng)), std::uint16_t(dy(rng)), dt(rng),
                          std::int8_t(dp(rng) ? 1 : -1)});
    std::stable_sort(s.events.begin(), s.events.end(),
                     [](const Event& a, const Event& b) { return a.t < b.t; });

    BinningConfig cfg;
    cfg.window_us = 20000 + (rng() % 3) * 20000;
    cfg.count_clip = (rep % 4 == 0) ? 3 : 255;  // exercise saturation too
    const FrameSequence got = bin_to_frames(s, cfg);
    if (oracle::to_dense(got) != oracle::dense_histogram(s, cfg, got.t_start, got.t_end))
      return fail("stream " + std::to_string(rep) + " diverges from the dense histogram");
  }
  const double dt = seconds_since(t0);
  if (dt >= 5.0) return fail("runtime " + std::to_string(dt) + " s exceeds 5 s");
  return {};
}

// ---------------------------------------------------------------------------
// 2. layer_step vs dense integer reference

std::string criterion_snn_equivalence() {
  std::mt19937_64 rng(0x51111);
  std::uniform_int_distribution<int> dh(3, 9), dic(1, 3), doc(1, 6), dstride(1, 2);
  std::uniform_int_distribution<int> dw8(-127, 127), dbias(-100000, 100000), dthr(1, 3000);
  std::uniform_int_distribution<int> ddecay(0, 4096);
  std::uniform_int_distribution<std::int32_t> dv(-kMembraneMax, kMembraneMax);
  std::bernoulli_distribution on(0.3);
  std::uniform_int_distribution<std::int32_t> pay(1, 255);

  for (int rep = 0; rep < 1000; ++rep) {
    QuantizedLayer l;
    const bool conv = rep % 3 != 2;
    Shape3 in;
    if (conv) {
      in = Shape3{dic(rng), dh(rng), dh(rng)};
      l.kind = LayerKind::conv3x3;
      l.in_ch = in.ch;
      l.out_ch = doc(rng);
      l.stride = dstride(rng);
      l.weights.resize(l.out_ch, l.in_ch * 9);
    } else {
      in = Shape3{8 + int(rng() % 32), 1, 1};
      l.kind = LayerKind::fully_connected;
      l.in_ch = in.ch;
      l.out_ch = 1 + int(rng() % 16);
      l.stride = 1;
      l.weights.resize(l.out_ch, l.in_ch);
    }
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) l.weights(r, c) = std::int8_t(dw8(rng));
    l.bias.resize(l.out_ch);
    for (int i = 0; i < l.out_ch; ++i) l.bias[i] = dbias(rng);
    // A slice of the cases drives the membranes into saturation.
    if (rep % 11 == 0) l.bias[0] = (1 << 25);
    l.decay_q = std::uint16_t(ddecay(rng));
    l.threshold_q = dthr(rng);

    const Shape3 out = layer_out_shape(l, in);
    LayerState st{Eigen::ArrayXi(out.size())};
    for (int i = 0; i < out.size(); ++i) st.v[i] = dv(rng);
    Eigen::ArrayXi ref_v = st.v;

    SpikePlane input;
    input.shape = in;
    for (int i = 0; i < in.size(); ++i)
      if (on(rng)) input.spikes.push_back(Spike{i, conv ? pay(rng) : 1});

    LayerOpCounts counts;
    const SpikePlane got = layer_step(l, st, input, &counts);

    std::vector<std::int32_t> dense(std::size_t(in.size()), 0);
    for (const Spike& s : input.spikes) dense[std::size_t(s.index)] = s.payload;
    const oracle::DenseStep want = oracle::dense_layer_step(l, ref_v, dense, in);

    if (got.spikes.size() != want.spikes.size())
      return fail("case " + std::to_string(rep) + ": spike count mismatch");
    for (std::size_t i = 0; i < want.spikes.size(); ++i) {
      if (got.spikes[i].index != want.spikes[i] || got.spikes[i].payload != 1)
        return fail("case " + std::to_string(rep) + ": spike list mismatch");
      if (i > 0 && got.spikes[i].index <= got.spikes[i - 1].index)
        return fail("case " + std::to_string(rep) + ": spikes not ascending");
    }
    if (!(st.v == ref_v).all())
      return fail("case " + std::to_string(rep) + ": membrane state mismatch");
    if (!(st.v.abs() <= kMembraneMax).all())
      return fail("case " + std::to_string(rep) + ": saturation bound violated");
    for (const Spike& s : got.spikes)
      if (st.v[s.index] != 0) return fail("case " + std::to_string(rep) + ": missing reset");
    if (counts.synops != want.synop_fanout)
      return fail("case " + std::to_string(rep) + ": synop count mismatch");
    if (counts.saturations != want.saturations)
      return fail("case " + std::to_string(rep) + ": saturation count mismatch");
  }
  return {};
}

// ---------------------------------------------------------------------------
// 3. BN fusion forward agreement

std::string criterion_bn_fusion() {
  std::mt19937_64 rng(0xB2F);
  std::normal_distribution<float> gw(0.0f, 0.5f), gb(0.0f, 0.3f);
  std::uniform_real_distribution<float> gu(0.5f, 1.5f);
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const int in_ch = 1 + int(rng() % 3);
    const int out_ch = 1 + int(rng() % 6);
    FloatLayerDef l;
    l.kind = LayerKind::conv3x3;
    l.in_ch = in_ch;
    l.out_ch = out_ch;
    l.stride = 1 + int(rng() % 2);
    l.weights.resize(out_ch, in_ch * 9);
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) l.weights(r, c) = gw(rng);
    l.bias.resize(out_ch);
    for (int i = 0; i < out_ch; ++i) l.bias[i] = gb(rng);
    BatchNormParams bn;
    bn.gamma.resize(out_ch);
    bn.beta.resize(out_ch);
    bn.mean.resize(out_ch);
    bn.var.resize(out_ch);
    for (int i = 0; i < out_ch; ++i) {
      bn.gamma[i] = gu(rng);
      bn.beta[i] = gb(rng);
      bn.mean[i] = gb(rng);
      bn.var[i] = gu(rng);
    }
    l.bn = bn;
    const FloatLayerDef fused = fuse_batchnorm(l);

    const Shape3 in{in_ch, 8, 8};
    std::vector<double> x(std::size_t(in.size()), 0.0);
    std::uniform_int_distribution<int> payload(0, 5);
    for (double& v : x) v = payload(rng);

    const Shape3 out = layer_out_shape(l, in);
    Eigen::ArrayXd va = Eigen::ArrayXd::Zero(out.size());
    Eigen::ArrayXd vb = Eigen::ArrayXd::Zero(out.size());
    FloatLayerDef lh = l, fh = fused;
    lh.threshold = fh.threshold = 1e30f;  // keep v = current + bias observable
    oracle::dense_float_step(lh, va, x, in);
    oracle::dense_float_step(fh, vb, x, in);
    worst = std::max(worst, (va - vb).abs().maxCoeff() / std::max(va.abs().maxCoeff(), 1.0));
  }
  if (worst > 1e-5) return fail("relative error " + std::to_string(worst));
  return {};
}

// ---------------------------------------------------------------------------
// 4. Normalization bounds, inverse-sqrt error, monotonicity

std::string criterion_normalization() {
  std::mt19937_64 rng(0x40124);
  const NormConfig cfg;

  // 1e5 graded vectors split across the three dims.
  const int dims[3] = {64, 256, 1024};
  const int reps[3] = {40000, 40000, 20000};
  for (int d = 0; d < 3; ++d) {
    const int dim = dims[d];
    std::uniform_int_distribution<int> value(0, 4095);
    std::bernoulli_distribution on(0.25);
    std::uniform_int_distribution<int> big(0, (1 << 23) - 1);
    for (int rep = 0; rep < reps[d]; ++rep) {
      GradedVector x = GradedVector::Zero(dim);
      bool any = false;
      for (int i = 0; i < dim; ++i)
        if (on(rng)) {
          x[i] = (rep % 97 == 0) ? big(rng) : value(rng);
          any = any || x[i] != 0;
        }
      if (!any) x[int(rng() % std::uint64_t(dim))] = 1 + value(rng);

      const NormalizedVector n = normalize_vector(x, cfg);
      const Eigen::VectorXd r = to_real(n);
      const double norm = r.norm();
      if (norm < 1.0 - std::ldexp(1.0, -6) || norm > 1.0 + std::ldexp(1.0, -6))
        return fail("norm " + std::to_string(norm) + " out of bounds (dim " +
                    std::to_string(dim) + ")");
      const Eigen::VectorXd xd = x.cast<double>();
      const double cosine = r.dot(xd) / (norm * xd.norm());
      if (cosine < 1.0 - 1e-3)
        return fail("cosine " + std::to_string(cosine) + " out of bounds");
    }
  }

  // Inverse sqrt relative error, one Newton step.
  double worst = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const int bits = 1 + int(rng() % 52);
    const std::uint64_t u = (rng() & ((std::uint64_t(1) << bits) - 1)) | 1u;
    const InvSqrt r = fixed_inv_sqrt(u, cfg);
    const long double want = oracle::inv_sqrt_ref(u);
    const long double have = std::ldexp((long double)r.mant, -r.shift);
    worst = std::max(worst, double(std::fabs(have - want) / want));
  }
  if (worst > std::ldexp(1.0, -8))
    return fail("inv_sqrt relative error " + std::to_string(worst) + " exceeds 2^-8");

  // Exhaustive monotonicity below 2^20.
  long double prev = 2.0L;
  for (std::uint64_t u = 1; u < (1u << 20); ++u) {
    const InvSqrt r = fixed_inv_sqrt(u, cfg);
    const long double val = std::ldexp((long double)r.mant, -r.shift);
    if (val > prev) return fail("non-monotonic at u = " + std::to_string(u));
    prev = val;
  }
  return {};
}

// ---------------------------------------------------------------------------
// 5. CLP property suite

std::string criterion_clp_properties() {
  std::mt19937_64 rng(0xC19);
  const int dim = 64;
  ClpConfig cfg;
  cfg.dim = dim;
  PrototypeStore store(cfg);

  std::normal_distribution<double> g;
  std::vector<Eigen::VectorXd> centers;
  for (int c = 0; c < 16; ++c) {
    Eigen::VectorXd v(dim);
    for (int i = 0; i < dim; ++i) v[i] = g(rng);
    centers.push_back(v / v.norm());
  }
  const auto to_q = [](const Eigen::VectorXd& u) {
    NormalizedVector n;
    n.frac_bits = 15;
    n.values.resize(u.size());
    for (Eigen::Index i = 0; i < u.size(); ++i)
      n.values[i] = std::int32_t(std::llround(std::ldexp(u[i], 15)));
    return n;
  };

  int prev_size = 0;
  std::uint64_t corrects = 0, allocations = 0;
  for (int step = 0; step < 10000; ++step) {
    const int label = int(rng() % centers.size());
    Eigen::VectorXd x = centers[std::size_t(label)];
    for (int i = 0; i < dim; ++i) x[i] += 0.03 * g(rng);
    x /= x.norm();
    const NormalizedVector q = to_q(x);

    const ClpStepResult r = store.learn_step(q, label);
    if (store.size() < prev_size)
      return fail("store shrank at step " + std::to_string(step));
    prev_size = store.size();

    if (r.event.allocated_index) {
      ++allocations;
      const Prediction p = store.infer(q);
      if (p.winner != *r.event.allocated_index)
        return fail("imprint at step " + std::to_string(step) + " is not its own winner");
      const double sim = p.winner_similarity();
      if (sim < 1.0 - std::ldexp(1.0, -4) || sim > 1.0 + std::ldexp(1.0, -4))
        return fail("imprint self-similarity " + std::to_string(sim) + " at step " +
                    std::to_string(step));
    }
    if (r.event.outcome == ClpOutcome::correct) {
      ++corrects;
      const int before = store.size();
      const ClpStepResult replay = store.learn_step(q, label);
      if (replay.event.outcome != ClpOutcome::correct || store.size() != before)
        return fail("correct replay mutated the store at step " + std::to_string(step));
    }
  }
  if (allocations < 16) return fail("suite never exercised allocation");
  if (corrects < 1000) return fail("suite exercised too few correct steps");
  return {};
}

// ---------------------------------------------------------------------------
// 6. SLDA streaming vs batch

std::string criterion_slda() {
  std::mt19937_64 rng(0x51DA);
  const int dim = 64;
  std::normal_distribution<double> g;

  std::vector<Eigen::VectorXd> xs;
  std::vector<std::int32_t> ys;
  std::vector<Eigen::VectorXd> mus;
  for (int c = 0; c < 4; ++c) {
    Eigen::VectorXd mu(dim);
    for (int i = 0; i < dim; ++i) mu[i] = 2.0 * g(rng);
    mus.push_back(std::move(mu));
  }
  for (int i = 0; i < 10000; ++i) {
    const int c = int(rng() % 4);
    Eigen::VectorXd x = mus[std::size_t(c)];
    for (int d = 0; d < dim; ++d) x[d] += g(rng);
    xs.push_back(std::move(x));
    ys.push_back(c);
  }
  const oracle::BatchLda batch = oracle::BatchLda::fit(xs, ys, 1e-4, 1e-9);

  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), 0u);
  for (int pass = 0; pass < 2; ++pass) {
    SldaClassifier slda(dim);
    for (std::size_t i : order) slda.update(xs[i], ys[i]);
    const double cov_err = (slda.covariance() - batch.sigma).cwiseAbs().maxCoeff();
    if (cov_err > 1e-6)
      return fail("covariance error " + std::to_string(cov_err) + " on pass " +
                  std::to_string(pass));
    for (const auto& [label, mean] : batch.means) {
      const double mean_err = (slda.mean(label) - mean).cwiseAbs().maxCoeff();
      if (mean_err > 1e-6) return fail("mean error " + std::to_string(mean_err));
    }
    std::shuffle(order.begin(), order.end(), rng);
  }

  // Two-class agreement against batch LDA.
  std::vector<Eigen::VectorXd> xs2;
  std::vector<std::int32_t> ys2;
  const int d2 = 8;
  for (int i = 0; i < 600; ++i) {
    for (const int c : {0, 1}) {
      Eigen::VectorXd x = Eigen::VectorXd::Zero(d2);
      x[0] = c ? 1.5 : -1.5;
      x[1] = c ? -0.5 : 0.5;
      for (int d = 0; d < d2; ++d) x[d] += g(rng);
      xs2.push_back(std::move(x));
      ys2.push_back(c);
    }
  }
  SldaClassifier slda2(d2);
  for (std::size_t i = 0; i < xs2.size(); ++i) slda2.update(xs2[i], ys2[i]);
  const oracle::BatchLda batch2 = oracle::BatchLda::fit(xs2, ys2, 1e-4, 1e-9);
  int agree = 0;
  const int probes = 2000;
  for (int i = 0; i < probes; ++i) {
    Eigen::VectorXd x(d2);
    for (int d = 0; d < d2; ++d) x[d] = 2.5 * g(rng);
    agree += (slda2.predict(x) == batch2.predict(x));
  }
  const double rate = double(agree) / probes;
  if (rate < 0.995) return fail("batch agreement " + std::to_string(rate) + " below 0.995");
  return {};
}

// ---------------------------------------------------------------------------
// 7. Incremental-learning benchmark on synthetic features

std::string criterion_benchmark() {
  const auto t0 = Clock::now();

  FeatureSynthSpec spec;
  spec.num_classes = 12;
  spec.dim = 256;
  spec.samples_per_class = 50;
  spec.separation = 0.5;
  spec.noise_sigma = 0.05;
  spec.seed = 1234;
  const FeatureSet set = synth_features(spec);
  FeaturesByClass data;
  for (std::size_t i = 0; i < set.size(); ++i) data[set.labels[i]].push_back(set.features[i]);

  const std::vector<std::string> names = {"finetune", "clp-loihi", "clp-float", "ncm", "slda"};
  std::map<std::string, std::vector<RunReport>> runs;
  for (const std::string& name : names) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      LearnerOptions opts;
      opts.name = name;
      opts.clp.dim = spec.dim;
      ProtocolConfig cfg;
      cfg.shots = 10;
      cfg.seed = seed;
      auto learner = make_learner(opts, spec.dim, seed);
      runs[name].push_back(run_incremental(cfg, *learner, data));
    }
  }

  std::map<std::string, double> mean_final;
  for (const auto& [name, reports] : runs) {
    double m = 0.0;
    for (const RunReport& r : reports) m += r.final_accuracy;
    mean_final[name] = m / double(reports.size());
  }

  if (mean_final["finetune"] >= 0.30)
    return fail("finetune mean final accuracy " + std::to_string(mean_final["finetune"]));
  // Mean cumulative curve must decay monotonically once three classes are in.
  std::vector<double> curve(12, 0.0);
  for (const RunReport& r : runs["finetune"])
    for (std::size_t i = 0; i < curve.size(); ++i) curve[i] += r.cumulative_accuracy[i] / 5.0;
  for (std::size_t i = 2; i + 1 < curve.size(); ++i)
    if (curve[i + 1] > curve[i] + 1e-12)
      return fail("finetune mean cumulative curve rises after class " + std::to_string(i + 1) +
                  " (" + std::to_string(curve[i]) + " -> " + std::to_string(curve[i + 1]) + ")");

  for (const char* name : {"clp-loihi", "clp-float", "ncm"})
    if (mean_final[name] < 0.90)
      return fail(std::string(name) + " mean final accuracy " + std::to_string(mean_final[name]) +
                  " below 0.90");
  for (const auto& [name, value] : mean_final)
    if (mean_final["slda"] < value - 1e-12)
      return fail("slda mean " + std::to_string(mean_final["slda"]) + " below " + name + " mean " +
                  std::to_string(value));

  const double dt = seconds_since(t0);
  if (dt >= 120.0) return fail("runtime " + std::to_string(dt) + " s exceeds 2 min");
  return {};
}

// ---------------------------------------------------------------------------
// 8. Frequency-scaling proxy

std::string criterion_frequency_proxy() {
  EventSynthSpec espec;
  espec.num_classes = 4;
  espec.clips_per_class = 1;
  espec.clip_ms = 400;
  espec.seed = 77;
  const SynthClips clips = synth_events(espec);
  const EventStream& clip = clips.clips[1];

  NetworkSynthSpec nspec;
  nspec.seed = 71;
  const QuantNetwork net = quantize_network(fuse_network(synth_network(nspec)));

  const std::uint64_t windows[3] = {40000, 10000, 2000};
  std::uint64_t timesteps[3], updates[3], synops[3];
  for (int i = 0; i < 3; ++i) {
    BinningConfig cfg;
    cfg.window_us = windows[i];
    const FrameSequence frames = bin_to_frames(clip, cfg, 0, 400000);
    OpCounts counts;
    run_extractor(frames, net, &counts);
    timesteps[i] = counts.timesteps;
    updates[i] = counts.total_neuron_updates();
    synops[i] = counts.total_synops();
  }
  if (timesteps[0] != 10 || timesteps[1] != 40 || timesteps[2] != 200)
    return fail("timesteps " + std::to_string(timesteps[0]) + "/" + std::to_string(timesteps[1]) +
                "/" + std::to_string(timesteps[2]) + " not 1:4:20");
  if (updates[1] != 4 * updates[0] || updates[2] != 20 * updates[0])
    return fail("neuron updates not exactly 1:4:20");
  if (!(synops[0] <= synops[1] && synops[1] <= synops[2]))
    return fail("synops decrease with frequency");
  if (synops[1] < synops[0] || synops[1] > 20 * synops[0])
    return fail("synops at 10 ms outside the [1,20]x band");
  if (synops[2] < synops[0] || synops[2] > 20 * synops[0])
    return fail("synops at 2 ms outside the [1,20]x band");
  return {};
}

// ---------------------------------------------------------------------------
// 9. CLI determinism

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(CLANE_CLI_PATH) + " " + args + " >> " +
                          log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  if (status < 0) return -1;
  return WEXITSTATUS(status);
}

std::vector<char> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string criterion_cli_determinism() {
  const fs::path dir = fs::temp_directory_path() / "clane_acceptance_cli";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path log = dir / "cli.log";
  const fs::path feat = dir / "bench.feat";

  if (run_cli("synth features --classes 12 --dim 256 --samples 30 --seed 3 --output " +
                  feat.string(),
              log) != 0)
    return fail("synth features exited nonzero (see " + log.string() + ")");

  const std::string learn_args = "learn --features " + feat.string() +
                                 " --learner clp-loihi --shots 10 --seed 7 --seeds 3";
  for (const char* tag : {"a", "b"}) {
    const std::string out = (dir / tag).string();
    if (run_cli(learn_args + " --out-jsonl " + out + ".jsonl --out-csv " + out + ".csv", log) != 0)
      return fail("learn exited nonzero (see " + log.string() + ")");
  }
  if (slurp(dir / "a.jsonl").empty()) return fail("no report written");
  if (slurp(dir / "a.jsonl") != slurp(dir / "b.jsonl"))
    return fail("JSONL reports differ between identical runs");
  if (slurp(dir / "a.csv") != slurp(dir / "b.csv"))
    return fail("CSV summaries differ between identical runs");
  fs::remove_all(dir);
  return {};
}

// ---------------------------------------------------------------------------
// 10. Optional dataset-conditional protocol run

std::string criterion_dataset(bool& skipped) {
  const char* manifest_env = std::getenv("CLANE_DATASET_MANIFEST");
  const char* weights_env = std::getenv("CLANE_WEIGHTS");
  if (!manifest_env || !weights_env) {
    skipped = true;
    return {};
  }

  // Manifest: "class_id<TAB>event_file" per line.
  std::ifstream in(manifest_env);
  if (!in) return fail(std::string("cannot open manifest ") + manifest_env);
  std::map<std::int32_t, std::vector<std::string>> files;
  int max_label = -1;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos) return fail("manifest line without a tab: " + line);
    const std::int32_t label = std::int32_t(std::stol(line.substr(0, tab)));
    files[label].push_back(line.substr(tab + 1));
    max_label = std::max(max_label, int(label));
  }
  if (files.empty()) return fail("manifest lists no clips");

  // Weight file: quantized variant loads directly, float is fused+quantized.
  QuantNetwork net;
  try {
    net = read_quant_network(weights_env);
  } catch (const std::exception&) {
    net = quantize_network(fuse_network(read_float_network(weights_env)));
  }

  const DatasetSplit split = split_classes(max_label + 1);
  FeaturesByClass by_class;
  for (const int cls : split.holdout) {
    const auto it = files.find(cls);
    if (it == files.end()) continue;
    for (const std::string& path : it->second) {
      const EventStream stream = load_event_file(path);
      const FrameSequence frames = bin_to_frames(stream, BinningConfig{});
      const FeatureSpikeStream spikes = run_extractor(frames, net);
      const GradedVector totals = accumulate(spikes, net.feature_dim);
      by_class[cls].push_back(totals.cast<float>());
    }
  }
  if (by_class.size() < 2) return fail("manifest covers fewer than 2 holdout classes");

  std::vector<double> finals;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    LearnerOptions opts;
    opts.name = "clp-loihi";
    ProtocolConfig cfg;
    cfg.shots = 10;
    cfg.seed = seed;
    auto learner = make_learner(opts, net.feature_dim, seed);
    finals.push_back(run_incremental(cfg, *learner, by_class).final_accuracy);
  }
  double mean = 0.0;
  for (double f : finals) mean += f;
  mean /= double(finals.size());
  double var = 0.0;
  for (double f : finals) var += (f - mean) * (f - mean);
  const double sd = finals.size() > 1 ? std::sqrt(var / double(finals.size() - 1)) : 0.0;
  std::cout << "        10-shot final incremental accuracy: " << mean * 100.0 << " +/- "
            << sd * 100.0 << " % (reference 70.4 +/- 2.0 %)\n";
  return {};
}

struct Criterion {
  int id;
  const char* title;
  std::function<std::string()> run;
};

}  // namespace

int main() {
  bool dataset_skipped = false;
  const std::vector<Criterion> criteria = {
      {1, "event binning matches dense histograms in under 5 s", criterion_binning},
      {2, "sparse integer layer steps are bit-identical to the dense reference",
       criterion_snn_equivalence},
      {3, "batch-norm fusion preserves forward currents to 1e-5", criterion_bn_fusion},
      {4, "fixed-point normalization meets norm, cosine, error and monotonicity bounds",
       criterion_normalization},
      {5, "prototype imprinting is faithful, idempotent and monotone", criterion_clp_properties},
      {6, "streaming LDA reproduces batch statistics and decisions", criterion_slda},
      {7, "learner benchmark reproduces the forgetting/accuracy ordering", criterion_benchmark},
      {8, "op counts scale 1:4:20 across 40/10/2 ms windows", criterion_frequency_proxy},
      {9, "CLI runs are byte-identical under identical config and seed",
       criterion_cli_determinism},
      {10, "dataset protocol run (optional, needs CLANE_DATASET_MANIFEST + CLANE_WEIGHTS)",
       [&dataset_skipped] { return criterion_dataset(dataset_skipped); }},
  };

  int failures = 0;
  for (const Criterion& c : criteria) {
    const auto t0 = Clock::now();
    std::string why;
    try {
      why = c.run();
    } catch (const std::exception& e) {
      why = std::string("exception: ") + e.what();
    }
    const double dt = seconds_since(t0);
    char timing[32];
    std::snprintf(timing, sizeof timing, "%.1f s", dt);
    if (c.id == 10 && dataset_skipped) {
      std::cout << "SKIP " << std::setw(2) << c.id << ". " << c.title << "\n";
    } else if (why.empty()) {
      std::cout << "PASS " << std::setw(2) << c.id << ". " << c.title << " (" << timing << ")\n";
    } else {
      std::cout << "FAIL " << std::setw(2) << c.id << ". " << c.title << " -- " << why << "\n";
      ++failures;
    }
  }
  return failures == 0 ? 0 : 1;
}

#include "clane/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "clane/agg_norm.hpp"

namespace clane {

DatasetSplit split_classes(int num_classes, bool one_based) {
  if (num_classes < 4) throw std::invalid_argument("split_classes: need at least 4 classes");
  DatasetSplit split;
  const int holdout_count = num_classes / 4;
  std::vector<bool> is_holdout(std::size_t(num_classes), false);
  for (int i = 0; i < holdout_count; ++i) {
    const int id = 4 * i + (one_based ? 3 : 0);
    is_holdout[std::size_t(id)] = true;
    split.holdout.push_back(id);
  }
  for (int c = 0; c < num_classes; ++c)
    if (!is_holdout[std::size_t(c)]) split.base.push_back(c);
  return split;
}

void ProtocolConfig::validate() const {
  if (shots < 0) throw std::invalid_argument("protocol: shots must be >= 0");
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw std::invalid_argument("protocol: test_fraction must be in (0,1)");
}

// ---------------------------------------------------------------------------
// Learner adapters

namespace {

class ClpLoihiLearner final : public IncrementalLearner {
 public:
  ClpLoihiLearner(const ClpConfig& cfg, int dim) : store_([&] {
        ClpConfig c = cfg;
        c.dim = dim;
        return c;
      }()) {}

  std::string name() const override { return "clp-loihi"; }

  void train(const Eigen::VectorXf& x, std::int32_t label) override {
    count_infer_ops();
    store_.learn_step(to_normalized(x), label);
  }

  std::int32_t predict(const Eigen::VectorXf& x) const override {
    count_infer_ops();
    const Prediction pred = store_.infer(to_normalized(x));
    if (!pred.has_winner()) throw std::logic_error("clp predict: empty store");
    return pred.label;
  }

  std::int64_t state_size() const override { return store_.size(); }
  const OpCounts* ops() const override { return &ops_; }
  const PrototypeStore& store() const { return store_; }

 private:
  NormalizedVector to_normalized(const Eigen::VectorXf& x) const {
    const float maxabs = x.cwiseAbs().maxCoeff();
    if (!(maxabs > 0)) throw std::invalid_argument("clp learner: zero feature vector");
    // Integer staging at ~22 bits keeps x_i^2 sums inside the u64 budget of
    // the fixed-point normalizer for any realistic dim.
    const double scale = double(1 << 22) / double(maxabs);
    Eigen::VectorXi v(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) v[i] = int(std::llround(double(x[i]) * scale));
    NormalizedVector n = normalize_vector(v, norm_cfg_);
    ops_.layer("agg_norm").neuron_updates += std::uint64_t(x.size());
    return n;
  }

  void count_infer_ops() const {
    LayerOpCounts& clp = ops_.layer("clp");
    clp.synops += std::uint64_t(store_.size()) * std::uint64_t(store_.config().dim);
    clp.neuron_updates += std::uint64_t(store_.size());
  }

  PrototypeStore store_;
  NormConfig norm_cfg_;
  mutable OpCounts ops_;
};

class ClpFloatLearner final : public IncrementalLearner {
 public:
  ClpFloatLearner(const ClpConfig& cfg, int dim, double eta) : eta_(eta) {
    store_.cfg = cfg;
    store_.cfg.dim = dim;
  }

  std::string name() const override { return "clp-float"; }

  void train(const Eigen::VectorXf& x, std::int32_t label) override {
    clp_float_reference_step(store_, unit(x), label, eta_);
  }

  std::int32_t predict(const Eigen::VectorXf& x) const override {
    if (store_.protos.empty()) throw std::logic_error("clp-float predict: empty store");
    const Eigen::VectorXd q = unit(x);
    int best = -1;
    double best_dot = 0.0;
    for (std::size_t i = 0; i < store_.protos.size(); ++i) {
      const double dot = store_.protos[i].w.dot(q);
      if (best < 0 || dot > best_dot) {
        best = int(i);
        best_dot = dot;
      }
    }
    return store_.protos[std::size_t(best)].label;
  }

  std::int64_t state_size() const override { return std::int64_t(store_.protos.size()); }

 private:
  static Eigen::VectorXd unit(const Eigen::VectorXf& x) {
    Eigen::VectorXd v = x.cast<double>();
    const double n = v.norm();
    if (!(n > 0)) throw std::invalid_argument("clp-float learner: zero feature vector");
    return v / n;
  }

  FloatClpStore store_;
  double eta_;
};

class NcmLearner final : public IncrementalLearner {
 public:
  explicit NcmLearner(int dim) : ncm_(dim) {}
  std::string name() const override { return "ncm"; }
  void train(const Eigen::VectorXf& x, std::int32_t label) override {
    ncm_.update(x.cast<double>(), label);
  }
  std::int32_t predict(const Eigen::VectorXf& x) const override {
    return ncm_.predict(x.cast<double>());
  }
  std::int64_t state_size() const override { return ncm_.state_size(); }

 private:
  NcmClassifier ncm_;
};

class SldaLearner final : public IncrementalLearner {
 public:
  SldaLearner(int dim, const SldaConfig& cfg) : slda_(dim, cfg) {}
  std::string name() const override { return "slda"; }
  void train(const Eigen::VectorXf& x, std::int32_t label) override {
    slda_.update(x.cast<double>(), label);
  }
  std::int32_t predict(const Eigen::VectorXf& x) const override {
    return slda_.predict(x.cast<double>());
  }
  std::int64_t state_size() const override { return slda_.state_size(); }

 private:
  SldaClassifier slda_;
};

class ReplayAdapter final : public IncrementalLearner {
 public:
  ReplayAdapter(int dim, ReplayConfig cfg) : replay_(dim, cfg) {}
  std::string name() const override { return "replay"; }
  void train(const Eigen::VectorXf& x, std::int32_t label) override {
    replay_.update(x.cast<double>(), label);
  }
  std::int32_t predict(const Eigen::VectorXf& x) const override {
    return replay_.predict(x.cast<double>());
  }
  std::int64_t state_size() const override { return replay_.state_size(); }

 private:
  ReplayLearner replay_;
};

class FinetuneAdapter final : public IncrementalLearner {
 public:
  FinetuneAdapter(int dim, SgdConfig cfg) : ft_(dim, cfg) {}
  std::string name() const override { return "finetune"; }
  void train(const Eigen::VectorXf& x, std::int32_t label) override {
    ft_.update(x.cast<double>(), label);
  }
  std::int32_t predict(const Eigen::VectorXf& x) const override {
    return ft_.predict(x.cast<double>());
  }
  std::int64_t state_size() const override { return ft_.state_size(); }

 private:
  FinetuneLearner ft_;
};

}  // namespace

std::unique_ptr<IncrementalLearner> make_learner(const LearnerOptions& opts, int dim,
                                                 std::uint64_t seed) {
  if (opts.name == "clp-loihi") return std::make_unique<ClpLoihiLearner>(opts.clp, dim);
  if (opts.name == "clp-float")
    return std::make_unique<ClpFloatLearner>(opts.clp, dim, opts.clp_eta);
  if (opts.name == "ncm") return std::make_unique<NcmLearner>(dim);
  if (opts.name == "slda") return std::make_unique<SldaLearner>(dim, opts.slda);
  if (opts.name == "replay") {
    ReplayConfig cfg = opts.replay;
    cfg.sgd.seed = seed;
    return std::make_unique<ReplayAdapter>(dim, cfg);
  }
  if (opts.name == "finetune") {
    SgdConfig cfg = opts.sgd;
    cfg.seed = seed;
    return std::make_unique<FinetuneAdapter>(dim, cfg);
  }
  throw std::invalid_argument("unknown learner: " + opts.name);
}

// ---------------------------------------------------------------------------
// Protocol runner

RunReport run_incremental(const ProtocolConfig& cfg, IncrementalLearner& learner,
                          const FeaturesByClass& by_class) {
  cfg.validate();
  if (by_class.empty()) throw std::invalid_argument("run_incremental: no classes");

  std::mt19937_64 rng(cfg.seed);

  std::vector<std::int32_t> order = cfg.class_order;
  if (order.empty()) {
    for (const auto& [label, samples] : by_class) order.push_back(label);
    std::shuffle(order.begin(), order.end(), rng);
  } else {
    std::vector<std::int32_t> sorted = order;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw std::invalid_argument("run_incremental: class_order has duplicates");
  }

  // Validate and split every class up front: errors must fire before any
  // learning happens.
  struct ClassData {
    std::vector<const Eigen::VectorXf*> train;
    std::vector<const Eigen::VectorXf*> test;
  };
  std::map<std::int32_t, ClassData> data;
  for (std::int32_t label : order) {
    const auto it = by_class.find(label);
    if (it == by_class.end())
      throw std::invalid_argument("run_incremental: class " + std::to_string(label) +
                                  " missing from features");
    const std::vector<Eigen::VectorXf>& samples = it->second;
    const int n = int(samples.size());
    const int n_test = std::max(1, int(std::floor(double(n) * cfg.test_fraction)));
    if (n - n_test < 1)
      throw std::invalid_argument("run_incremental: class " + std::to_string(label) +
                                  " has too few samples");
    std::vector<int> idx;
    idx.resize(std::size_t(n));
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);

    ClassData cd;
    for (int i = 0; i < n_test; ++i) cd.test.push_back(&samples[std::size_t(idx[std::size_t(i)])]);
    const int pool = n - n_test;
    const int take = cfg.shots == 0 ? pool : std::min(cfg.shots, pool);
    for (int i = 0; i < take; ++i)
      cd.train.push_back(&samples[std::size_t(idx[std::size_t(n_test + i)])]);
    data.emplace(label, std::move(cd));
  }

  RunReport report;
  report.learner = learner.name();
  report.seed = cfg.seed;
  report.shots = cfg.shots;
  report.class_order = order;

  for (std::size_t step = 0; step < order.size(); ++step) {
    const std::int32_t label = order[step];
    for (const Eigen::VectorXf* x : data.at(label).train) {
      learner.train(*x, label);
      ++report.samples_trained;
    }

    std::vector<double> row;
    std::int64_t correct = 0, total = 0;
    for (std::size_t j = 0; j <= step; ++j) {
      const std::int32_t cls = order[j];
      std::int64_t cls_correct = 0;
      const ClassData& cd = data.at(cls);
      for (const Eigen::VectorXf* x : cd.test)
        if (learner.predict(*x) == cls) ++cls_correct;
      row.push_back(double(cls_correct) / double(cd.test.size()));
      correct += cls_correct;
      total += std::int64_t(cd.test.size());
    }
    report.class_accuracy.push_back(std::move(row));
    report.cumulative_accuracy.push_back(double(correct) / double(total));
  }

  report.final_accuracy = report.cumulative_accuracy.back();
  for (std::size_t j = 0; j < order.size(); ++j) {
    double peak = 0.0;
    for (std::size_t step = j; step < order.size(); ++step)
      peak = std::max(peak, report.class_accuracy[step][j]);
    report.forgetting[order[j]] = peak - report.class_accuracy.back()[j];
  }
  report.state_size = learner.state_size();
  if (const OpCounts* ops = learner.ops()) report.ops = *ops;
  return report;
}

}  // namespace clane

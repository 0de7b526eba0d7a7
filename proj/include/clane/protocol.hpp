#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "clane/baselines.hpp"
#include "clane/clp_head.hpp"
#include "clane/op_counts.hpp"

namespace clane {

// Class-incremental protocol: classes arrive one at a time, the learner sees
// each training sample exactly once, and evaluation after each class covers
// every class introduced so far.

struct DatasetSplit {
  std::vector<int> base;
  std::vector<int> holdout;
};

// "Every fourth class" holdout selection. Zero-based (default) takes ids
// {0, 4, 8, ...}; one-based takes {3, 7, 11, ...}. Either way the holdout
// holds floor(num_classes / 4) ids: 50 classes -> 12 holdout + 38 base.
DatasetSplit split_classes(int num_classes = 50, bool one_based = false);

struct ProtocolConfig {
  int shots = 10;              // training samples per class; 0 = full train pool
  double test_fraction = 0.2;  // per-class held-out share, never trained on
  std::uint64_t seed = 0;
  std::vector<std::int32_t> class_order;  // empty = seeded shuffle of all classes

  void validate() const;
};

struct RunReport {
  std::string learner;
  std::uint64_t seed = 0;
  int shots = 0;
  std::vector<std::int32_t> class_order;
  // Row i: accuracy per class in class_order[0..i], measured after step i.
  std::vector<std::vector<double>> class_accuracy;
  std::vector<double> cumulative_accuracy;
  double final_accuracy = 0.0;
  std::map<std::int32_t, double> forgetting;  // max-over-steps acc - final acc
  std::int64_t state_size = 0;                // prototypes or parameters at the end
  std::int64_t samples_trained = 0;           // single-pass audit counter
  OpCounts ops;                               // empty unless the learner instruments
};

// Streaming learner facade the protocol drives. Features arrive as float
// vectors; integer learners convert internally.
class IncrementalLearner {
 public:
  virtual ~IncrementalLearner() = default;
  virtual std::string name() const = 0;
  virtual void train(const Eigen::VectorXf& x, std::int32_t label) = 0;
  virtual std::int32_t predict(const Eigen::VectorXf& x) const = 0;
  virtual std::int64_t state_size() const = 0;
  virtual const OpCounts* ops() const { return nullptr; }
};

struct LearnerOptions {
  std::string name = "clp-loihi";  // clp-loihi | clp-float | ncm | slda | replay | finetune
  ClpConfig clp;
  double clp_eta = 0.1;  // adaptation rate of the float reference
  SldaConfig slda;
  ReplayConfig replay;
  SgdConfig sgd;  // fine-tune
};

// Throws std::invalid_argument for unknown names. `seed` feeds the stochastic
// learners (replay); dim must match the feature files.
std::unique_ptr<IncrementalLearner> make_learner(const LearnerOptions& opts, int dim,
                                                 std::uint64_t seed);

using FeaturesByClass = std::map<std::int32_t, std::vector<Eigen::VectorXf>>;

// Run the protocol once. Throws before any learning when a class in the order
// is missing from `by_class` or a class has too few samples to give both a
// train and a test sample.
RunReport run_incremental(const ProtocolConfig& cfg, IncrementalLearner& learner,
                          const FeaturesByClass& by_class);

}  // namespace clane

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace clane {

// Streaming float baselines operating on clip-level feature vectors: nearest
// class mean, streaming LDA, experience replay over a linear head, and naive
// fine-tuning of the same head. All are deterministic given their seed; NCM
// and SLDA are seed-free.

// ---------------------------------------------------------------------------
// Nearest class mean

class NcmClassifier {
 public:
  explicit NcmClassifier(int dim);

  void update(const Eigen::VectorXd& x, std::int32_t label);
  std::int32_t predict(const Eigen::VectorXd& x) const;  // throws when no class seen

  int dim() const { return dim_; }
  int classes_seen() const { return int(means_.size()); }
  const Eigen::VectorXd& mean(std::int32_t label) const { return means_.at(label).mean; }
  std::int64_t count(std::int32_t label) const { return means_.at(label).n; }
  std::int64_t state_size() const { return std::int64_t(means_.size()) * dim_; }

 private:
  struct ClassStat {
    Eigen::VectorXd mean;
    std::int64_t n = 0;
  };
  int dim_;
  std::map<std::int32_t, ClassStat> means_;  // ordered: lowest id wins ties
};

// ---------------------------------------------------------------------------
// Streaming LDA

struct SldaConfig {
  double shrinkage_scale = 1e-4;  // eps_s = shrinkage_scale * trace(Sigma) / D
  double shrinkage_floor = 1e-9;  // keeps Sigma + eps_s I invertible when Sigma = 0
};

class SldaClassifier {
 public:
  explicit SldaClassifier(int dim, SldaConfig cfg = {});

  void update(const Eigen::VectorXd& x, std::int32_t label);
  std::int32_t predict(const Eigen::VectorXd& x) const;  // throws before first update

  int dim() const { return dim_; }
  std::int64_t total_count() const { return total_; }
  const Eigen::VectorXd& mean(std::int32_t label) const { return means_.at(label).mean; }
  // Population covariance of class residuals, Sigma = S / n.
  Eigen::MatrixXd covariance() const;
  double shrinkage() const;
  std::int64_t state_size() const {
    return std::int64_t(dim_) * dim_ + std::int64_t(means_.size()) * dim_;
  }

 private:
  void refresh_discriminants() const;

  struct ClassStat {
    Eigen::VectorXd mean;
    std::int64_t n = 0;
  };
  int dim_;
  SldaConfig cfg_;
  std::map<std::int32_t, ClassStat> means_;
  Eigen::MatrixXd scatter_;  // running sum of (x - mu_old)(x - mu_new)^T
  std::int64_t total_ = 0;

  // Discriminants are a pure function of the statistics; rebuilt lazily at
  // evaluation time after any update.
  mutable bool cache_valid_ = false;
  mutable std::map<std::int32_t, std::pair<Eigen::VectorXd, double>> discriminants_;
};

// ---------------------------------------------------------------------------
// Linear softmax head shared by Replay and fine-tune

struct SgdConfig {
  // One full-strength step per sample: the naive single-pass baseline. On
  // near-unit-norm features smaller rates degrade into a frozen prototype
  // head instead of the catastrophically forgetting learner this models.
  double lr = 1.0;
  std::uint64_t seed = 0;
};

class LinearHead {
 public:
  LinearHead(int dim, double lr);

  // One cross-entropy SGD step, gradients averaged over the batch. Rows for
  // unseen classes are zero-initialized on first encounter.
  void sgd_step(const std::vector<std::pair<Eigen::VectorXd, std::int32_t>>& batch);
  std::int32_t predict(const Eigen::VectorXd& x) const;  // throws when no class seen

  int dim() const { return dim_; }
  int classes_seen() const { return int(rows_.size()); }
  double lr() const { return lr_; }
  const Eigen::VectorXd& weights(std::int32_t label) const { return rows_.at(label).w; }
  double bias(std::int32_t label) const { return rows_.at(label).b; }
  std::int64_t state_size() const { return std::int64_t(rows_.size()) * (dim_ + 1); }

 private:
  struct Row {
    Eigen::VectorXd w;
    double b = 0.0;
  };
  void ensure_class(std::int32_t label);

  int dim_;
  double lr_;
  std::map<std::int32_t, Row> rows_;
};

class FinetuneLearner {
 public:
  FinetuneLearner(int dim, SgdConfig cfg = {});

  void update(const Eigen::VectorXd& x, std::int32_t label);
  std::int32_t predict(const Eigen::VectorXd& x) const { return head_.predict(x); }
  const LinearHead& head() const { return head_; }
  std::int64_t state_size() const { return head_.state_size(); }

 private:
  LinearHead head_;
};

// ---------------------------------------------------------------------------
// Experience replay

struct ReplayConfig {
  int per_class_capacity = 64;  // 0 degenerates to plain fine-tuning
  int minibatch = 8;            // buffer samples mixed into each step
  SgdConfig sgd;
};

class ReplayLearner {
 public:
  ReplayLearner(int dim, ReplayConfig cfg = {});

  // Reservoir-samples (x,label) into the per-class buffer, then takes one SGD
  // step over {x} plus a minibatch drawn from the whole buffer (the entire
  // buffer when it holds fewer than `minibatch` samples).
  void update(const Eigen::VectorXd& x, std::int32_t label);
  std::int32_t predict(const Eigen::VectorXd& x) const { return head_.predict(x); }

  const LinearHead& head() const { return head_; }
  std::int64_t buffer_size() const;
  std::int64_t state_size() const { return head_.state_size(); }

 private:
  struct ClassBuffer {
    std::vector<Eigen::VectorXd> samples;
    std::int64_t seen = 0;  // reservoir counter
  };

  ReplayConfig cfg_;
  LinearHead head_;
  std::map<std::int32_t, ClassBuffer> buffers_;
  std::mt19937_64 rng_;
};

// ---------------------------------------------------------------------------
// Feature files: header "FEAT", dim u32, count u64; per sample label u32 then
// dim float32, all little-endian.

struct FeatureSet {
  int dim = 0;
  std::vector<std::int32_t> labels;
  std::vector<Eigen::VectorXf> features;

  std::size_t size() const { return features.size(); }
};

void save_features(const std::filesystem::path& path, const FeatureSet& set);
FeatureSet load_features(const std::filesystem::path& path);

// Group a flat feature set by class id, preserving file order within a class.
std::map<std::int32_t, std::vector<Eigen::VectorXf>> features_by_class(const FeatureSet& set);

}  // namespace clane

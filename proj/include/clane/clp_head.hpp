#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "clane/agg_norm.hpp"

namespace clane {

// Prototype-based continual learner modeled after a neuromorphic plasticity
// core: weights live as int8, inference is an integer dot-product WTA, and
// learning is single-shot imprinting on error or novelty. Imprinted
// prototypes are never adapted afterwards.

struct ClpConfig {
  int dim = 256;
  int capacity = 512;               // allocation beyond this is refused, never silent
  double novelty_threshold = 0.3;   // real similarity units, in (0,1)
  std::int32_t weight_scale = 127;  // unit vector -> int8 via round(scale * w)

  void validate() const;
};

struct Prototype {
  Eigen::Matrix<std::int8_t, Eigen::Dynamic, 1> w;  // quantized unit vector
  std::int32_t label = -1;
  std::uint64_t birth_step = 0;  // sample index at allocation
};

struct Prediction {
  int winner = -1;          // prototype index; -1 when the store is empty
  std::int32_t label = -1;  // winner's label
  std::vector<std::int64_t> scores;  // integer dot product per prototype
  double score_scale = 0.0;          // scores[i] * score_scale = real similarity

  bool has_winner() const { return winner >= 0; }
  double winner_similarity() const {
    return has_winner() ? double(scores[std::size_t(winner)]) * score_scale : 0.0;
  }
};

enum class ClpOutcome {
  correct,
  error_allocated,
  novel_allocated,
  error_capacity_full,
};

struct LearnEvent {
  ClpOutcome outcome = ClpOutcome::correct;
  std::optional<int> allocated_index;  // present iff an allocation happened
};

struct ClpStepResult {
  Prediction prediction;
  LearnEvent event;
};

class PrototypeStore {
 public:
  explicit PrototypeStore(ClpConfig cfg = {});

  const ClpConfig& config() const { return cfg_; }
  int size() const { return int(protos_.size()); }
  std::uint64_t steps_seen() const { return steps_seen_; }
  const Prototype& prototype(int i) const { return protos_.at(std::size_t(i)); }

  // Integer dot-product WTA. Ties break to the lowest prototype index.
  Prediction infer(const NormalizedVector& x) const;

  // Supervised step: infer, then imprint x as a new prototype when the store
  // is empty, the winner similarity falls below the novelty threshold, or the
  // winner's label is wrong. Correct predictions change nothing.
  ClpStepResult learn_step(const NormalizedVector& x, std::int32_t label);

  void save(const std::filesystem::path& path) const;
  // Geometry (dim) comes from the file; capacity/threshold from cfg.
  static PrototypeStore load(const std::filesystem::path& path, ClpConfig cfg = {});

 private:
  bool imprint(const NormalizedVector& x, std::int32_t label);

  ClpConfig cfg_;
  std::vector<Prototype> protos_;
  std::uint64_t steps_seen_ = 0;
};

// Floating-point reference variant. Same allocation policy, but on a correct
// prediction the winner is nudged with the projection-style self-normalizing
// rule w <- w + eta (x - <w,x> w), which keeps ||w|| within O(eta^2) of 1.
// The exact on-chip three-factor rule lives in prior work; this is a
// documented approximation used for qualitative comparison only.

struct FloatPrototype {
  Eigen::VectorXd w;
  std::int32_t label = -1;
};

struct FloatClpStore {
  ClpConfig cfg;
  std::vector<FloatPrototype> protos;
};

// One application of the update rule (eta = 0 returns w unchanged).
Eigen::VectorXd clp_reference_update(const Eigen::VectorXd& w,
                                     const Eigen::VectorXd& x, double eta);

LearnEvent clp_float_reference_step(FloatClpStore& store, const Eigen::VectorXd& x,
                                    std::int32_t label, double eta);

}  // namespace clane

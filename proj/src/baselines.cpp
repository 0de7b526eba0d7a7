#include "clane/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>

namespace clane {

namespace {

void check_dim(const Eigen::VectorXd& x, int dim, const char* who) {
  if (x.size() != dim) throw std::invalid_argument(std::string(who) + ": dim mismatch");
}

}  // namespace

// --------------------------------------------------------------------------
// NCM

NcmClassifier::NcmClassifier(int dim) : dim_(dim) {
  if (dim <= 0) throw std::invalid_argument("ncm: dim must be positive");
}

void NcmClassifier::update(const Eigen::VectorXd& x, std::int32_t label) {
  check_dim(x, dim_, "ncm update");
  ClassStat& st = means_[label];
  if (st.n == 0) st.mean = Eigen::VectorXd::Zero(dim_);
  ++st.n;
  st.mean += (x - st.mean) / double(st.n);
}

std::int32_t NcmClassifier::predict(const Eigen::VectorXd& x) const {
  check_dim(x, dim_, "ncm predict");
  if (means_.empty()) throw std::logic_error("ncm predict: no class seen yet");
  std::int32_t best = -1;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (const auto& [label, st] : means_) {
    const double d2 = (x - st.mean).squaredNorm();
    if (d2 < best_d2) {  // map order makes ties resolve to the lowest id
      best_d2 = d2;
      best = label;
    }
  }
  return best;
}

// --------------------------------------------------------------------------
// SLDA

SldaClassifier::SldaClassifier(int dim, SldaConfig cfg) : dim_(dim), cfg_(cfg) {
  if (dim <= 0) throw std::invalid_argument("slda: dim must be positive");
  if (cfg.shrinkage_scale <= 0 || cfg.shrinkage_floor <= 0)
    throw std::invalid_argument("slda: shrinkage parameters must be positive");
  scatter_ = Eigen::MatrixXd::Zero(dim_, dim_);
}

void SldaClassifier::update(const Eigen::VectorXd& x, std::int32_t label) {
  check_dim(x, dim_, "slda update");
  ClassStat& st = means_[label];
  if (st.n == 0) st.mean = Eigen::VectorXd::Zero(dim_);
  const Eigen::VectorXd before = x - st.mean;  // residual against mu_old
  ++st.n;
  st.mean += before / double(st.n);
  const Eigen::VectorXd after = x - st.mean;  // residual against mu_new
  scatter_.noalias() += before * after.transpose();
  ++total_;
  cache_valid_ = false;
}

Eigen::MatrixXd SldaClassifier::covariance() const {
  if (total_ == 0) return Eigen::MatrixXd::Zero(dim_, dim_);
  // The rank-1 Welford updates accumulate the pooled within-class scatter but
  // not perfectly symmetrically; symmetrize before use.
  Eigen::MatrixXd sigma = (scatter_ + scatter_.transpose()) / (2.0 * double(total_));
  return sigma;
}

double SldaClassifier::shrinkage() const {
  const double tr = covariance().trace();
  return std::max(cfg_.shrinkage_scale * tr / double(dim_), cfg_.shrinkage_floor);
}

void SldaClassifier::refresh_discriminants() const {
  const Eigen::MatrixXd sigma = covariance();
  Eigen::MatrixXd reg = sigma;
  reg.diagonal().array() += shrinkage();
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(reg);
  if (ldlt.info() != Eigen::Success)
    throw std::runtime_error("slda: covariance factorization failed");
  discriminants_.clear();
  for (const auto& [label, st] : means_) {
    Eigen::VectorXd w = ldlt.solve(st.mean);
    const double b = -0.5 * st.mean.dot(w);
    discriminants_.emplace(label, std::make_pair(std::move(w), b));
  }
  cache_valid_ = true;
}

std::int32_t SldaClassifier::predict(const Eigen::VectorXd& x) const {
  check_dim(x, dim_, "slda predict");
  if (total_ == 0) throw std::logic_error("slda predict: no sample seen yet");
  if (!cache_valid_) refresh_discriminants();
  std::int32_t best = -1;
  double best_score = -std::numeric_limits<double>::infinity();
  for (const auto& [label, disc] : discriminants_) {
    const double score = disc.first.dot(x) + disc.second;
    if (score > best_score) {
      best_score = score;
      best = label;
    }
  }
  return best;
}

// --------------------------------------------------------------------------
// Linear head

LinearHead::LinearHead(int dim, double lr) : dim_(dim), lr_(lr) {
  if (dim <= 0) throw std::invalid_argument("linear head: dim must be positive");
  if (lr < 0) throw std::invalid_argument("linear head: lr must be nonnegative");
}

void LinearHead::ensure_class(std::int32_t label) {
  Row& row = rows_[label];
  if (row.w.size() == 0) row.w = Eigen::VectorXd::Zero(dim_);
}

void LinearHead::sgd_step(const std::vector<std::pair<Eigen::VectorXd, std::int32_t>>& batch) {
  if (batch.empty()) return;
  for (const auto& [x, label] : batch) {
    check_dim(x, dim_, "linear head");
    ensure_class(label);
  }

  // Softmax cross-entropy gradient, averaged over the batch.
  std::map<std::int32_t, Row> grad;
  for (const auto& [label, row] : rows_) {
    (void)row;
    grad[label].w = Eigen::VectorXd::Zero(dim_);
  }
  for (const auto& [x, label] : batch) {
    double zmax = -std::numeric_limits<double>::infinity();
    std::map<std::int32_t, double> z;
    for (const auto& [c, row] : rows_) {
      const double v = row.w.dot(x) + row.b;
      z[c] = v;
      zmax = std::max(zmax, v);
    }
    double denom = 0.0;
    for (auto& [c, v] : z) {
      v = std::exp(v - zmax);
      denom += v;
    }
    for (const auto& [c, v] : z) {
      const double p = v / denom;
      const double g = p - (c == label ? 1.0 : 0.0);
      Row& gr = grad[c];
      gr.w.noalias() += g * x;
      gr.b += g;
    }
  }
  const double scale = lr_ / double(batch.size());
  for (auto& [c, row] : rows_) {
    const Row& gr = grad[c];
    row.w.noalias() -= scale * gr.w;
    row.b -= scale * gr.b;
  }
}

std::int32_t LinearHead::predict(const Eigen::VectorXd& x) const {
  check_dim(x, dim_, "linear head predict");
  if (rows_.empty()) throw std::logic_error("linear head predict: no class seen yet");
  std::int32_t best = -1;
  double best_score = -std::numeric_limits<double>::infinity();
  for (const auto& [label, row] : rows_) {
    const double score = row.w.dot(x) + row.b;
    if (score > best_score) {
      best_score = score;
      best = label;
    }
  }
  return best;
}

FinetuneLearner::FinetuneLearner(int dim, SgdConfig cfg) : head_(dim, cfg.lr) {}

void FinetuneLearner::update(const Eigen::VectorXd& x, std::int32_t label) {
  head_.sgd_step({{x, label}});
}

// --------------------------------------------------------------------------
// Replay

ReplayLearner::ReplayLearner(int dim, ReplayConfig cfg)
    : cfg_(cfg), head_(dim, cfg.sgd.lr), rng_(cfg.sgd.seed) {
  if (cfg.per_class_capacity < 0) throw std::invalid_argument("replay: capacity must be >= 0");
  if (cfg.minibatch < 0) throw std::invalid_argument("replay: minibatch must be >= 0");
}

std::int64_t ReplayLearner::buffer_size() const {
  std::int64_t n = 0;
  for (const auto& [label, buf] : buffers_) n += std::int64_t(buf.samples.size());
  return n;
}

void ReplayLearner::update(const Eigen::VectorXd& x, std::int32_t label) {
  check_dim(x, head_.dim(), "replay update");

  if (cfg_.per_class_capacity > 0) {
    ClassBuffer& buf = buffers_[label];
    ++buf.seen;
    if (int(buf.samples.size()) < cfg_.per_class_capacity) {
      buf.samples.push_back(x);
    } else {
      std::uniform_int_distribution<std::int64_t> pick(0, buf.seen - 1);
      const std::int64_t j = pick(rng_);
      if (j < cfg_.per_class_capacity) buf.samples[std::size_t(j)] = x;
    }
  }

  std::vector<std::pair<Eigen::VectorXd, std::int32_t>> batch;
  batch.emplace_back(x, label);

  // Flatten the buffer in class order for stable indexing, then draw the
  // minibatch without replacement.
  std::vector<std::pair<const Eigen::VectorXd*, std::int32_t>> flat;
  for (const auto& [c, buf] : buffers_)
    for (const Eigen::VectorXd& s : buf.samples) flat.emplace_back(&s, c);

  if (int(flat.size()) <= cfg_.minibatch) {
    for (const auto& [ptr, c] : flat) batch.emplace_back(*ptr, c);
  } else {
    std::vector<std::size_t> idx(flat.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (int k = 0; k < cfg_.minibatch; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, idx.size() - 1);
      std::swap(idx[std::size_t(k)], idx[pick(rng_)]);
      const auto& [ptr, c] = flat[idx[std::size_t(k)]];
      batch.emplace_back(*ptr, c);
    }
  }
  head_.sgd_step(batch);
}

// --------------------------------------------------------------------------
// Feature files

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  put_u32(out, std::uint32_t(v));
  put_u32(out, std::uint32_t(v >> 32));
}

void put_f32(std::ostream& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw std::runtime_error("feature file: truncated");
  return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
         (std::uint32_t(b[3]) << 24);
}

std::uint64_t get_u64(std::istream& in) {
  const std::uint64_t lo = get_u32(in);
  const std::uint64_t hi = get_u32(in);
  return lo | (hi << 32);
}

float get_f32(std::istream& in) {
  const std::uint32_t bits = get_u32(in);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

}  // namespace

void save_features(const std::filesystem::path& path, const FeatureSet& set) {
  if (set.labels.size() != set.features.size())
    throw std::invalid_argument("feature file: label/feature count mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("feature file: cannot open " + path.string() + " for writing");
  out.write("FEAT", 4);
  put_u32(out, std::uint32_t(set.dim));
  put_u64(out, set.features.size());
  for (std::size_t i = 0; i < set.features.size(); ++i) {
    if (set.features[i].size() != set.dim)
      throw std::invalid_argument("feature file: sample dim mismatch");
    put_u32(out, std::uint32_t(set.labels[i]));
    for (Eigen::Index d = 0; d < set.features[i].size(); ++d) put_f32(out, set.features[i][d]);
  }
  if (!out) throw std::runtime_error("feature file: write failed for " + path.string());
}

FeatureSet load_features(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("feature file: cannot open " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "FEAT", 4) != 0)
    throw std::runtime_error("feature file: bad magic in " + path.string());
  FeatureSet set;
  set.dim = int(get_u32(in));
  if (set.dim <= 0 || set.dim > (1 << 20))
    throw std::runtime_error("feature file: implausible dim");
  const std::uint64_t count = get_u64(in);
  set.labels.reserve(count);
  set.features.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    set.labels.push_back(std::int32_t(get_u32(in)));
    Eigen::VectorXf x(set.dim);
    for (int d = 0; d < set.dim; ++d) x[d] = get_f32(in);
    set.features.push_back(std::move(x));
  }
  return set;
}

std::map<std::int32_t, std::vector<Eigen::VectorXf>> features_by_class(const FeatureSet& set) {
  std::map<std::int32_t, std::vector<Eigen::VectorXf>> by_class;
  for (std::size_t i = 0; i < set.size(); ++i)
    by_class[set.labels[i]].push_back(set.features[i]);
  return by_class;
}

}  // namespace clane

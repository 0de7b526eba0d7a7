#include "clane/clp_head.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>

namespace clane {

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

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw std::runtime_error("clp store: truncated file");
  return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
         (std::uint32_t(b[3]) << 24);
}

std::uint64_t get_u64(std::istream& in) {
  const std::uint64_t lo = get_u32(in);
  const std::uint64_t hi = get_u32(in);
  return lo | (hi << 32);
}

}  // namespace

void ClpConfig::validate() const {
  if (dim <= 0) throw std::invalid_argument("clp: dim must be positive");
  if (capacity <= 0) throw std::invalid_argument("clp: capacity must be positive");
  if (!(novelty_threshold > 0.0 && novelty_threshold < 1.0))
    throw std::invalid_argument("clp: novelty_threshold must be in (0,1)");
  if (weight_scale <= 0 || weight_scale > 127)
    throw std::invalid_argument("clp: weight_scale must be in [1,127]");
}

PrototypeStore::PrototypeStore(ClpConfig cfg) : cfg_(cfg) { cfg_.validate(); }

Prediction PrototypeStore::infer(const NormalizedVector& x) const {
  if (x.values.size() != cfg_.dim) throw std::invalid_argument("clp infer: dim mismatch");

  Prediction pred;
  pred.score_scale = std::ldexp(1.0 / double(cfg_.weight_scale), -x.frac_bits);
  pred.scores.reserve(protos_.size());
  for (std::size_t i = 0; i < protos_.size(); ++i) {
    const Prototype& p = protos_[i];
    std::int64_t dot = 0;
    for (Eigen::Index d = 0; d < x.values.size(); ++d)
      dot += std::int64_t(p.w[d]) * std::int64_t(x.values[d]);
    pred.scores.push_back(dot);
    if (pred.winner < 0 || dot > pred.scores[std::size_t(pred.winner)]) {
      pred.winner = int(i);
      pred.label = p.label;
    }
  }
  return pred;
}

bool PrototypeStore::imprint(const NormalizedVector& x, std::int32_t label) {
  if (x.values.size() != cfg_.dim) throw std::invalid_argument("clp imprint: dim mismatch");
  if (int(protos_.size()) >= cfg_.capacity) return false;

  Prototype p;
  p.label = label;
  p.birth_step = steps_seen_;
  p.w.resize(cfg_.dim);
  const double scale = std::ldexp(double(cfg_.weight_scale), -x.frac_bits);
  for (Eigen::Index d = 0; d < x.values.size(); ++d) {
    const double q = std::nearbyint(scale * double(x.values[d]));
    p.w[d] = std::int8_t(std::clamp(q, -127.0, 127.0));
  }
  protos_.push_back(std::move(p));
  return true;
}

ClpStepResult PrototypeStore::learn_step(const NormalizedVector& x, std::int32_t label) {
  ClpStepResult res;
  res.prediction = infer(x);

  const bool novel = !res.prediction.has_winner() ||
                     res.prediction.winner_similarity() < cfg_.novelty_threshold;
  const bool wrong = res.prediction.has_winner() && res.prediction.label != label;

  if (novel || wrong) {
    if (imprint(x, label)) {
      res.event.outcome = novel ? ClpOutcome::novel_allocated : ClpOutcome::error_allocated;
      res.event.allocated_index = int(protos_.size()) - 1;
    } else {
      res.event.outcome = ClpOutcome::error_capacity_full;
    }
  } else {
    res.event.outcome = ClpOutcome::correct;
  }
  ++steps_seen_;
  return res;
}

void PrototypeStore::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("clp store: cannot open " + path.string() + " for writing");
  out.write("CLPS", 4);
  put_u32(out, 1);  // version
  put_u32(out, std::uint32_t(cfg_.dim));
  put_u32(out, std::uint32_t(protos_.size()));
  for (const Prototype& p : protos_) {
    put_u32(out, std::uint32_t(p.label));
    put_u64(out, p.birth_step);
    out.write(reinterpret_cast<const char*>(p.w.data()), p.w.size());
  }
  if (!out) throw std::runtime_error("clp store: write failed for " + path.string());
}

PrototypeStore PrototypeStore::load(const std::filesystem::path& path, ClpConfig cfg) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("clp store: cannot open " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "CLPS", 4) != 0)
    throw std::runtime_error("clp store: bad magic in " + path.string());
  const std::uint32_t version = get_u32(in);
  if (version != 1)
    throw std::runtime_error("clp store: unsupported version " + std::to_string(version));
  const std::uint32_t dim = get_u32(in);
  const std::uint32_t count = get_u32(in);
  if (dim == 0 || dim > (1u << 20)) throw std::runtime_error("clp store: implausible dim");

  cfg.dim = int(dim);
  if (int(count) > cfg.capacity)
    throw std::runtime_error("clp store: file holds more prototypes than capacity allows");
  PrototypeStore store(cfg);
  store.protos_.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    Prototype p;
    p.label = std::int32_t(get_u32(in));
    p.birth_step = get_u64(in);
    p.w.resize(dim);
    in.read(reinterpret_cast<char*>(p.w.data()), p.w.size());
    if (!in) throw std::runtime_error("clp store: truncated prototype data");
    store.steps_seen_ = std::max(store.steps_seen_, p.birth_step + 1);
    store.protos_.push_back(std::move(p));
  }
  return store;
}

Eigen::VectorXd clp_reference_update(const Eigen::VectorXd& w, const Eigen::VectorXd& x,
                                     double eta) {
  if (w.size() != x.size()) throw std::invalid_argument("clp reference: dim mismatch");
  const double dot = w.dot(x);
  return w + eta * (x - dot * w);
}

LearnEvent clp_float_reference_step(FloatClpStore& store, const Eigen::VectorXd& x,
                                    std::int32_t label, double eta) {
  store.cfg.validate();
  if (x.size() != store.cfg.dim)
    throw std::invalid_argument("clp reference: dim mismatch");

  int winner = -1;
  double best = 0.0;
  for (std::size_t i = 0; i < store.protos.size(); ++i) {
    const double dot = store.protos[i].w.dot(x);
    if (winner < 0 || dot > best) {
      winner = int(i);
      best = dot;
    }
  }

  LearnEvent ev;
  const bool novel = winner < 0 || best < store.cfg.novelty_threshold;
  const bool wrong = winner >= 0 && store.protos[std::size_t(winner)].label != label;
  if (novel || wrong) {
    if (int(store.protos.size()) >= store.cfg.capacity) {
      ev.outcome = ClpOutcome::error_capacity_full;
    } else {
      store.protos.push_back(FloatPrototype{x, label});
      ev.outcome = novel ? ClpOutcome::novel_allocated : ClpOutcome::error_allocated;
      ev.allocated_index = int(store.protos.size()) - 1;
    }
  } else {
    ev.outcome = ClpOutcome::correct;
    Eigen::VectorXd& w = store.protos[std::size_t(winner)].w;
    w = clp_reference_update(w, x, eta);
  }
  return ev;
}

}  // namespace clane

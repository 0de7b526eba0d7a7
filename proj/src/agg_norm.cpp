#include "clane/agg_norm.hpp"

#include <bit>
#include <cmath>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <unordered_map>

namespace clane {

namespace {

constexpr std::int32_t kGradedMax = (1 << 23) - 1;

// Seed tables are built once per address width with real arithmetic; the
// runtime path below only reads them.
const std::vector<std::uint32_t>& lut_for(int addr_bits) {
  static std::mutex mu;
  static std::unordered_map<int, std::vector<std::uint32_t>> tables;
  std::lock_guard<std::mutex> lock(mu);
  auto it = tables.find(addr_bits);
  if (it != tables.end()) return it->second;

  const int n = 1 << addr_bits;
  std::vector<std::uint32_t> lut(n);
  for (int i = 0; i < n; ++i) {
    const double m = 1.0 + (double(i) + 0.5) / double(n);  // cell midpoint
    lut[i] = std::uint32_t(std::llround(std::ldexp(1.0 / std::sqrt(m), 30)));
  }
  return tables.emplace(addr_bits, std::move(lut)).first->second;
}

// round(2^31 / sqrt(2))
constexpr std::int64_t kInvSqrt2Q31 = 1518500250;

}  // namespace

void NormConfig::validate() const {
  if (lut_addr_bits < 4 || lut_addr_bits > 12)
    throw std::invalid_argument("norm: lut_addr_bits must be in [4, 12]");
  if (frac_bits < 1 || frac_bits > 15)
    throw std::invalid_argument("norm: frac_bits must be in [1, 15]");
  if (newton_iters < 0 || newton_iters > 2)
    throw std::invalid_argument("norm: newton_iters must be in {0, 1, 2}");
}

GradedVector accumulate(const std::vector<std::vector<std::int32_t>>& stream, int dim) {
  if (dim <= 0) throw std::invalid_argument("accumulate: dim must be positive");
  GradedVector totals = GradedVector::Zero(dim);
  for (const auto& step : stream) {
    for (std::int32_t idx : step) {
      if (idx < 0 || idx >= dim) throw std::invalid_argument("accumulate: spike index out of range");
      if (totals[idx] < kGradedMax) ++totals[idx];
    }
  }
  return totals;
}

double to_real(const InvSqrt& r) { return std::ldexp(double(r.mant), -r.shift); }

// [fixed-point path begin]
// Shifts, multiplies, adds, compares and table reads only past this point.

namespace {

// Round-to-nearest-even of v * 2^-s, s >= 1.
std::int64_t rne_shift(std::int64_t v, int s) {
  const std::int64_t q = v >> s;  // arithmetic shift: floor
  const std::int64_t rem = v - (q << s);
  const std::int64_t half = std::int64_t(1) << (s - 1);
  return q + ((rem > half) || (rem == half && (q & 1)));
}

}  // namespace

InvSqrt fixed_inv_sqrt(std::uint64_t u, const NormConfig& cfg) {
  cfg.validate();
  if (u == 0) throw std::invalid_argument("fixed_inv_sqrt: u must be nonzero");

  const int k = 63 - std::countl_zero(u);
  // mantissa m = u * 2^-k in Q2.30, in [2^30, 2^31)
  const std::uint64_t m = (k <= 30) ? (u << (30 - k)) : (u >> (k - 30));

  const std::vector<std::uint32_t>& lut = lut_for(cfg.lut_addr_bits);
  const std::uint64_t idx = (m >> (30 - cfg.lut_addr_bits)) & ((1u << cfg.lut_addr_bits) - 1);
  std::uint64_t y = lut[idx];  // ~1/sqrt(m), Q2.30

  for (int i = 0; i < cfg.newton_iters; ++i) {
    const std::uint64_t y2 = (y * y) >> 30;
    const std::uint64_t t = (m * y2) >> 30;
    const std::uint64_t r = (std::uint64_t(3) << 30) - t;
    y = (y * r) >> 31;  // y * r / 2
  }

  InvSqrt out;
  out.mant = std::int64_t(y);
  out.shift = 30 + (k >> 1);
  if (k & 1) out.mant = (out.mant * kInvSqrt2Q31) >> 31;
  return out;
}

NormalizedVector normalize_vector(const GradedVector& x, const NormConfig& cfg) {
  cfg.validate();
  std::uint64_t sum_sq = 0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const std::int64_t v = x[i];
    sum_sq += std::uint64_t(v * v);
  }
  if (sum_sq == 0)
    throw std::invalid_argument("normalize_vector: zero vector (empty clip upstream)");

  const InvSqrt r = fixed_inv_sqrt(sum_sq, cfg);
  const int s = r.shift - cfg.frac_bits;

  NormalizedVector out;
  out.frac_bits = cfg.frac_bits;
  out.values.resize(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i)
    out.values[i] = std::int32_t(rne_shift(std::int64_t(x[i]) * r.mant, s));
  return out;
}

// [fixed-point path end]

Eigen::VectorXd to_real(const NormalizedVector& v) {
  Eigen::VectorXd out(v.values.size());
  for (Eigen::Index i = 0; i < v.values.size(); ++i)
    out[i] = std::ldexp(double(v.values[i]), -v.frac_bits);
  return out;
}

std::vector<std::uint32_t> inv_sqrt_lut(const NormConfig& cfg) {
  cfg.validate();
  return lut_for(cfg.lut_addr_bits);
}

void dump_inv_sqrt_lut(std::ostream& out, const NormConfig& cfg) {
  const std::vector<std::uint32_t> lut = inv_sqrt_lut(cfg);
  for (std::size_t i = 0; i < lut.size(); ++i) out << i << '\t' << lut[i] << '\n';
}

}  // namespace clane

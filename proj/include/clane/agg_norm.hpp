#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <iosfwd>
#include <vector>

namespace clane {

/// Integer activation vector carried by graded spikes; |value| <= 2^23 - 1.
using GradedVector = Eigen::VectorXi;

/// Fixed-point normalization parameters. Output elements are Q1.frac_bits,
/// the inverse-sqrt seed table has 2^lut_addr_bits entries over m in [1, 2),
/// and newton_iters refinement steps are applied to the seed.
struct NormConfig {
  int frac_bits = 15;     // <= 15
  int lut_addr_bits = 8;  // 4..12
  int newton_iters = 1;   // 0..2

  void validate() const;
};

/// Unit vector in Q1.frac_bits fixed point.
struct NormalizedVector {
  Eigen::VectorXi values;
  int frac_bits = 15;
};

/// Sum the per-step binary feature spikes of a clip into graded totals.
/// `stream` holds ascending spike indices per step; indices must be < dim.
/// Totals saturate at 2^23 - 1 (graded-spike payload bound).
GradedVector accumulate(const std::vector<std::vector<std::int32_t>>& stream, int dim);

/// 1/sqrt(u) as mant * 2^-shift with a 30-fractional-bit mantissa.
struct InvSqrt {
  std::int64_t mant = 0;
  int shift = 30;
};

double to_real(const InvSqrt& r);

/// Division-free fixed-point inverse square root. u is normalized to
/// m * 2^k with m in [1, 2), a table seed for 1/sqrt(m) is refined by
/// newton_iters steps of y <- y*(3 - m*y^2)/2, and the result is rescaled by
/// 2^-(k/2) (odd k multiplies by a stored 1/sqrt(2) constant). Relative error
/// <= 2^-8 with one Newton step. Throws std::invalid_argument for u = 0.
InvSqrt fixed_inv_sqrt(std::uint64_t u, const NormConfig& cfg = {});

/// Two-population L2 normalization: each element is squared and the squares
/// are summed (widened arithmetic), the inverse square root of the sum is
/// computed via fixed_inv_sqrt, and every element is multiplied by it and
/// rounded to Q1.frac_bits. The real norm of the result lies in
/// [1 - 2^-6, 1 + 2^-6]. Throws std::invalid_argument on a zero vector
/// (signals an empty clip upstream).
NormalizedVector normalize_vector(const GradedVector& x, const NormConfig& cfg = {});

Eigen::VectorXd to_real(const NormalizedVector& v);

/// Seed table contents for a given config (index i seeds
/// 1/sqrt(1 + (i + 0.5)/2^a) in Q2.30).
std::vector<std::uint32_t> inv_sqrt_lut(const NormConfig& cfg = {});

/// Text dump of the seed table, one "index<TAB>entry" line per entry.
void dump_inv_sqrt_lut(std::ostream& out, const NormConfig& cfg = {});

}  // namespace clane

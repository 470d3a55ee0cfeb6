#pragma once

#include <cstdint>
#include <string>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/multiprecision/cpp_int.hpp>

namespace authkit::attack {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;
/// 50 decimal digits (~166-bit mantissa). 1 - q is around 2^-38 for the
/// case-study parameters, far below double precision.
using Real = boost::multiprecision::number<boost::multiprecision::cpp_bin_float<50>>;

/// Lazy-user model for a b-bit fingerprint: the r leftmost and r rightmost
/// bits are always checked, and u of the l = b - 2r middle bits.
struct AttackParams {
  unsigned b = 0;
  unsigned r = 0;
  unsigned l = 0;
  unsigned u = 0;

  /// Derives l = b - 2r; throws ValidationError if the partition is
  /// inconsistent.
  static AttackParams from_bits(unsigned b, unsigned r, unsigned u);

  /// Bits an attacker may flip without the user noticing.
  unsigned t() const { return l - u; }
  void validate() const;
};

struct AttackEstimate {
  Rational q;
  BigInt valid_count;
  /// False when q = 1: no attempt can ever succeed.
  bool feasible = false;
  double p_target = 0.5;
  Real e;
  double log2_e = 0.0;
  /// log2(1 - q), i.e. q = 1 - 2^log2_one_minus_q.
  double log2_one_minus_q = 0.0;
};

/// Sum_{k=1..t} C(l, k), exact.
BigInt count_partial_preimages(const AttackParams& p);

/// The same count built row by row from Pascal's triangle; kept as an
/// independent cross-check of the closed form.
BigInt count_partial_preimages_pascal(const AttackParams& p);

/// (2^b - count) / 2^b, exact.
Rational q_no_preimage(const AttackParams& p);

/// e = ln(1 - p_target) / ln(q). Throws ValidationError unless
/// 0 < p_target < 1.
AttackEstimate attack_effort(const AttackParams& p, double p_target = 0.5);

/// 1 - q^e evaluated in extended precision.
Real success_probability(const Rational& q, const Real& e);

inline constexpr unsigned kMaxOracleBits = 24;

/// Enumerates all 2^b strings and counts those a lazy user would accept for
/// `target` but that differ from it: boundary bits equal, and equal on at
/// least one choice of u checked middle positions. The checked-position
/// families are enumerated explicitly, no binomials involved. `target` holds
/// the string in its low b bits, leftmost bit most significant. Throws
/// ValidationError for b > 24.
std::uint64_t oracle_enumerate(const AttackParams& p, std::uint32_t target);

/// Same enumeration for one designated set of checked middle positions
/// (`checked_mask` bit i = middle position i, popcount u).
std::uint64_t oracle_enumerate_fixed_mask(const AttackParams& p, std::uint32_t target, std::uint32_t checked_mask);

/// Monte-Carlo: each trial draws a random target and `attempts` uniformly
/// random candidates; the trial succeeds if any candidate is a partial
/// preimage. Returns the success rate. Throws ValidationError for b > 24.
double simulate_lazy_attack(const AttackParams& p, std::uint64_t attempts, std::uint64_t trials, std::uint64_t seed);

}  // namespace authkit::attack

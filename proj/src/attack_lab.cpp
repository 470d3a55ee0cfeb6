#include "authkit/attack_lab.hpp"

#include <bit>
#include <random>
#include <vector>

#include <boost/math/special_functions/log1p.hpp>

#include "authkit/errors.hpp"

namespace authkit::attack {

namespace {

BigInt binomial(unsigned n, unsigned k)
{
  if (k > n) return 0;
  k = std::min(k, n - k);
  BigInt acc = 1;
  for (unsigned i = 1; i <= k; ++i) {
    acc *= n - k + i;
    acc /= i;
  }
  return acc;
}

void require_oracle_size(const AttackParams& p)
{
  p.validate();
  if (p.b > kMaxOracleBits) {
    throw ValidationError("enumeration refused for b = " + std::to_string(p.b) + " (limit " +
                          std::to_string(kMaxOracleBits) + ")");
  }
}

std::uint32_t low_bits(unsigned n)
{
  return n >= 32 ? 0xffffffffu : (1u << n) - 1;
}

struct Layout {
  std::uint32_t boundary;
  std::uint32_t middle;
};

Layout layout(const AttackParams& p)
{
  std::uint32_t right = low_bits(p.r);
  std::uint32_t middle = low_bits(p.l) << p.r;
  std::uint32_t left = low_bits(p.r) << (p.r + p.l);
  return {left | right, middle};
}

}  // namespace

AttackParams AttackParams::from_bits(unsigned b, unsigned r, unsigned u)
{
  if (2 * r > b) throw ValidationError("boundary bits 2r exceed fingerprint length b");
  AttackParams p{b, r, b - 2 * r, u};
  p.validate();
  return p;
}

void AttackParams::validate() const
{
  if (b != 2 * r + l) throw ValidationError("inconsistent partition: b must equal 2r + l");
  if (u > l) throw ValidationError("checked middle bits u exceed middle length l");
}

BigInt count_partial_preimages(const AttackParams& p)
{
  p.validate();
  BigInt sum = 0;
  for (unsigned k = 1; k <= p.t(); ++k) sum += binomial(p.l, k);
  return sum;
}

BigInt count_partial_preimages_pascal(const AttackParams& p)
{
  p.validate();
  std::vector<BigInt> row{1};
  for (unsigned n = 1; n <= p.l; ++n) {
    std::vector<BigInt> next(n + 1);
    next[0] = next[n] = 1;
    for (unsigned k = 1; k < n; ++k) next[k] = row[k - 1] + row[k];
    row = std::move(next);
  }
  BigInt sum = 0;
  for (unsigned k = 1; k <= p.t() && k < row.size(); ++k) sum += row[k];
  return sum;
}

Rational q_no_preimage(const AttackParams& p)
{
  BigInt space = BigInt(1) << p.b;
  return Rational(space - count_partial_preimages(p), space);
}

Real success_probability(const Rational& q, const Real& e)
{
  Real one_minus_q = Real(denominator(q) - numerator(q)) / Real(denominator(q));
  // q^e = exp(e * ln q), ln q via log1p to keep the tiny 1 - q exact.
  Real ln_q = boost::math::log1p(Real(-one_minus_q));
  return Real(1) - boost::multiprecision::exp(e * ln_q);
}

AttackEstimate attack_effort(const AttackParams& p, double p_target)
{
  if (!(p_target > 0.0 && p_target < 1.0)) throw ValidationError("target probability must lie in (0, 1)");
  AttackEstimate est;
  est.p_target = p_target;
  est.valid_count = count_partial_preimages(p);
  BigInt space = BigInt(1) << p.b;
  est.q = Rational(space - est.valid_count, space);
  if (est.valid_count == 0) {
    est.feasible = false;
    return est;
  }
  est.feasible = true;
  Real one_minus_q = Real(est.valid_count) / Real(space);
  Real ln_q = boost::math::log1p(Real(-one_minus_q));
  Real ln_fail = boost::math::log1p(Real(-p_target));
  est.e = ln_fail / ln_q;
  est.log2_e = static_cast<double>(boost::multiprecision::log2(est.e));
  est.log2_one_minus_q = static_cast<double>(boost::multiprecision::log2(one_minus_q));
  return est;
}

std::uint64_t oracle_enumerate(const AttackParams& p, std::uint32_t target)
{
  require_oracle_size(p);
  const unsigned l = p.l;
  // accepted[d]: a lazy user checking some u-subset of the middle positions
  // would miss the middle difference pattern d.
  std::vector<bool> accepted(std::size_t{1} << l, false);
  const std::uint32_t all = low_bits(l);
  for (std::uint32_t checked = 0; checked <= all; ++checked) {
    if (static_cast<unsigned>(std::popcount(checked)) != p.u) continue;
    const std::uint32_t free = all & ~checked;
    // Every subset of the unchecked positions, including the empty one.
    for (std::uint32_t d = free;; d = (d - 1) & free) {
      accepted[d] = true;
      if (d == 0) break;
    }
  }

  const Layout lay = layout(p);
  target &= low_bits(p.b);
  std::uint64_t count = 0;
  const std::uint64_t space = std::uint64_t{1} << p.b;
  for (std::uint64_t s = 0; s < space; ++s) {
    std::uint32_t diff = static_cast<std::uint32_t>(s) ^ target;
    if (diff == 0 || (diff & lay.boundary) != 0) continue;
    if (accepted[(diff & lay.middle) >> p.r]) ++count;
  }
  return count;
}

std::uint64_t oracle_enumerate_fixed_mask(const AttackParams& p, std::uint32_t target, std::uint32_t checked_mask)
{
  require_oracle_size(p);
  if (checked_mask & ~low_bits(p.l)) throw ValidationError("checked mask exceeds middle length");
  if (static_cast<unsigned>(std::popcount(checked_mask)) != p.u) {
    throw ValidationError("checked mask must select exactly u positions");
  }
  const Layout lay = layout(p);
  const std::uint32_t fixed = lay.boundary | (checked_mask << p.r);
  target &= low_bits(p.b);
  std::uint64_t count = 0;
  const std::uint64_t space = std::uint64_t{1} << p.b;
  for (std::uint64_t s = 0; s < space; ++s) {
    std::uint32_t diff = static_cast<std::uint32_t>(s) ^ target;
    if (diff != 0 && (diff & fixed) == 0) ++count;
  }
  return count;
}

double simulate_lazy_attack(const AttackParams& p, std::uint64_t attempts, std::uint64_t trials, std::uint64_t seed)
{
  require_oracle_size(p);
  if (trials == 0) return 0.0;
  const Layout lay = layout(p);
  const unsigned t = p.t();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::uint32_t> draw(0, low_bits(p.b));
  std::uint64_t hits = 0;
  for (std::uint64_t trial = 0; trial < trials; ++trial) {
    const std::uint32_t target = draw(rng);
    for (std::uint64_t a = 0; a < attempts; ++a) {
      std::uint32_t diff = draw(rng) ^ target;
      if ((diff & lay.boundary) != 0) continue;
      auto flipped = static_cast<unsigned>(std::popcount(diff & lay.middle));
      if (flipped >= 1 && flipped <= t) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(trials);
}

}  // namespace authkit::attack

#include <doctest.h>

#include <cmath>

#include "authkit/errors.hpp"
#include "authkit/group.hpp"
#include "support.hpp"

using namespace authkit;
using testing::tiny;
using testing::value;

namespace {

std::uint64_t modpow(std::uint64_t b, std::uint64_t e, std::uint64_t m)
{
  std::uint64_t r = 1;
  for (b %= m; e; e >>= 1, b = b * b % m) {
    if (e & 1) r = r * b % m;
  }
  return r;
}

}  // namespace

TEST_CASE("tiny23 exponentiation of the generator")
{
  const Group& g = tiny23();
  CHECK(value(g.g_pow(g.scalar(0))) == 1);
  CHECK(value(g.g_pow(g.scalar(3))) == 8);
  CHECK(value(g.g_pow(g.scalar(11))) == 1);
  CHECK(g.is_identity(g.g_pow(g.scalar(11))));
  for (std::uint64_t s = 0; s < 40; ++s) CHECK(value(g.g_pow(g.scalar(s))) == modpow(2, s, 23));
}

TEST_CASE("tiny23 multiplication, division and powers")
{
  const Group& g = tiny23();
  CHECK(value(g.mul(tiny(8), tiny(1))) == 8);
  CHECK(value(g.mul(tiny(16), tiny(18))) == 12);
  CHECK(value(g.mul(tiny(9), tiny(16))) == 6);
  CHECK(value(g.div(tiny(6), tiny(16))) == 9);
  CHECK(value(g.div(tiny(12), tiny(18))) == 16);
  CHECK(value(g.pow(tiny(4), g.scalar(3))) == 18);
  CHECK(value(g.pow(tiny(9), g.scalar(3))) == 16);
  for (std::uint64_t s = 0; s < 11; ++s) {
    GroupElement x = g.g_pow(g.scalar(s));
    CHECK(g.is_identity(g.div(x, x)));
    CHECK(g.is_identity(g.pow(x, g.scalar(0))));
  }
}

TEST_CASE("tiny23 decode accepts exactly the quadratic residues")
{
  const Group& g = tiny23();
  for (std::uint64_t v = 0; v < 256; ++v) {
    bool member = v >= 1 && v < 23 && modpow(v, 11, 23) == 1;
    Bytes enc(g.element_size(), 0);
    enc.back() = static_cast<std::uint8_t>(v);
    if (member) {
      CHECK(value(g.decode(enc)) == v);
    } else {
      CHECK_THROWS_AS(g.decode(enc), ValidationError);
    }
  }
  CHECK_THROWS_AS(g.decode(Bytes(g.element_size() + 1, 1)), ValidationError);
}

TEST_CASE("mixing groups is a usage error")
{
  const Group& t = tiny23();
  const Group& p = p256();
  CHECK_THROWS_AS(t.mul(t.generator(), p.generator()), UsageError);
  CHECK_THROWS_AS(p.div(p.generator(), t.generator()), UsageError);
  CHECK_THROWS_AS(t.pow(t.generator(), p.scalar(2)), UsageError);
  CHECK_THROWS_AS(p.g_pow(t.scalar(2)), UsageError);
}

TEST_CASE("group laws hold on random P-256 scalars")
{
  const Group& g = p256();
  testing::Gen gen(0x5eed01);
  for (int i = 0; i < 25; ++i) {
    std::uint64_t a = gen.next() >> 2;
    std::uint64_t b = gen.next() >> 2;
    GroupElement ga = g.g_pow(g.scalar(a));
    GroupElement gb = g.g_pow(g.scalar(b));
    CHECK(g.mul(ga, gb) == g.g_pow(g.scalar(a + b)));
    CHECK(g.div(g.mul(ga, gb), gb) == ga);
    CHECK(g.pow(ga, g.scalar(b)) == g.pow(gb, g.scalar(a)));
    CHECK(g.decode(ga.bytes()) == ga);
    CHECK(ga.bytes().size() == 33);
  }
  CHECK(g.is_identity(g.identity()));
  CHECK(g.decode(Bytes(33, 0)) == g.identity());
  CHECK(g.mul(g.generator(), g.inverse(g.generator())) == g.identity());
  Bytes order = g.order();
  CHECK(g.is_identity(g.g_pow(g.scalar_from_bytes(order))));
}

TEST_CASE("P-256 decode rejects points off the curve")
{
  const Group& g = p256();
  GroupElement gen = g.generator();
  Bytes enc(gen.bytes().begin(), gen.bytes().end());
  enc[0] = 0x04;
  CHECK_THROWS_AS(g.decode(enc), ValidationError);
  enc = Bytes(33, 0xff);
  enc[0] = 0x02;
  CHECK_THROWS_AS(g.decode(enc), ValidationError);
  CHECK_THROWS_AS(g.decode(Bytes(32, 0)), ValidationError);
}

TEST_CASE("random scalars are reproducible under a fixed seed")
{
  const Group& g = p256();
  DeterministicRandom a(42), b(42), c(43);
  Scalar sa = g.random_scalar(a);
  CHECK(sa == g.random_scalar(b));
  CHECK_FALSE(sa == g.random_scalar(c));
}

TEST_CASE("tiny23 random scalars are uniform")
{
  const Group& g = tiny23();
  DeterministicRandom rng(7);
  constexpr int kDraws = 100000;
  std::uint64_t counts[11] = {};
  for (int i = 0; i < kDraws; ++i) ++counts[g.random_scalar(rng).to_u64()];
  const double p = 1.0 / 11;
  const double sigma = std::sqrt(kDraws * p * (1 - p));
  for (auto c : counts) CHECK(std::abs(static_cast<double>(c) - kDraws * p) < 5 * sigma);
}

TEST_CASE("hash_to_element is deterministic and never the identity")
{
  for (const Group* g : {&tiny23(), &p256()}) {
    GroupElement m = g->hash_to_element("label-one");
    CHECK(m == g->hash_to_element("label-one"));
    CHECK_FALSE(g->is_identity(m));
    CHECK_FALSE(g->is_identity(g->hash_to_element("label-two")));
  }
  CHECK_FALSE(p256().hash_to_element("a") == p256().hash_to_element("b"));
}

TEST_CASE("group_by_name")
{
  CHECK(&group_by_name("tiny23") == &tiny23());
  CHECK(&group_by_name("p256") == &p256());
  CHECK_THROWS_AS(group_by_name("p384"), ValidationError);
}

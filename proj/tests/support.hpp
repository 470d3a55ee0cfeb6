#pragma once

#include <cstdint>
#include <string>

#include "authkit/bytes.hpp"
#include "authkit/group.hpp"

namespace testing {

/// splitmix64: tiny, seedable, good enough to drive property tests.
class Gen {
public:
  explicit Gen(std::uint64_t seed) : s_(seed) {}

  std::uint64_t next()
  {
    std::uint64_t z = (s_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  /// Uniform in [0, n).
  std::uint64_t below(std::uint64_t n) { return next() % n; }
  authkit::Bytes bytes(std::size_t n)
  {
    authkit::Bytes b(n);
    for (auto& x : b) x = static_cast<std::uint8_t>(next());
    return b;
  }
  std::string word(std::size_t max_len)
  {
    std::string s(1 + below(max_len), 'a');
    for (auto& c : s) c = static_cast<char>('a' + below(26));
    return s;
  }

private:
  std::uint64_t s_;
};

/// Element of tiny23 from its integer value.
inline authkit::GroupElement tiny(std::uint64_t v)
{
  const auto& g = authkit::tiny23();
  authkit::Bytes enc(g.element_size(), 0);
  for (std::size_t i = enc.size(); i-- > 0; v >>= 8) enc[i] = static_cast<std::uint8_t>(v);
  return g.decode(enc);
}

inline std::uint64_t value(const authkit::GroupElement& e)
{
  std::uint64_t v = 0;
  for (auto b : e.bytes()) v = (v << 8) | b;
  return v;
}

}  // namespace testing

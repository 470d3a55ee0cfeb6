#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "authkit/errors.hpp"
#include "authkit/trustwords.hpp"
#include "support.hpp"

using namespace authkit;

namespace {

Fingerprint random_fpr(testing::Gen& gen) { return Fingerprint::from_bytes(gen.bytes(20)); }

const Dictionary& hexdict()
{
  static const Dictionary d = Dictionary::hex_test();
  return d;
}

}  // namespace

TEST_CASE("fingerprints")
{
  CHECK(fingerprint_of(as_bytes("abc")).hex() == "ba7816bf8f01cfea414140de5dae2223b00361a3");
  Fingerprint f = Fingerprint::from_hex("BA78 16BF:8f01cfea414140de5dae2223b00361a3");
  CHECK(f == fingerprint_of(as_bytes("abc")));
  CHECK_THROWS_AS(Fingerprint::from_hex("ba78"), ValidationError);
  CHECK_THROWS_AS(Fingerprint::from_hex(std::string(40, 'g')), ValidationError);
  CHECK_THROWS_AS(Fingerprint::from_bytes(Bytes(19, 0)), ValidationError);
}

TEST_CASE("xor of fingerprints")
{
  testing::Gen gen(1);
  Fingerprint a = random_fpr(gen);
  CHECK(xor_fingerprints(a, a) == Fingerprint{});
  CHECK(xor_fingerprints(Fingerprint{}, a) == a);
  Fingerprint ff = Fingerprint::from_bytes(Bytes(20, 0xff));
  Fingerprint aa = Fingerprint::from_bytes(Bytes(20, 0xaa));
  CHECK(xor_fingerprints(ff, aa) == Fingerprint::from_bytes(Bytes(20, 0x55)));
}

TEST_CASE("constructed fixture maps blocks to words in order")
{
  Fingerprint a{};
  Fingerprint b{};
  for (std::size_t i = 0; i < 10; ++i) b.bits[2 * i + 1] = static_cast<std::uint8_t>(i + 1);
  TrustwordList w = trustwords(a, b, hexdict());
  REQUIRE(w.words.size() == 10);
  for (std::size_t i = 0; i < 10; ++i) {
    char expect[5];
    std::snprintf(expect, sizeof expect, "%04zx", i + 1);
    CHECK(w.words[i] == expect);
    CHECK(w.indices[i] == i + 1);
  }
}

TEST_CASE("trustword properties")
{
  testing::Gen gen(0x7777);
  for (int i = 0; i < 2000; ++i) {
    Fingerprint a = random_fpr(gen), b = random_fpr(gen);
    TrustwordList ab = trustwords(a, b, hexdict());
    // Symmetry and determinism.
    CHECK(ab.words == trustwords(b, a, hexdict()).words);
    CHECK(ab.words == trustwords(a, b, hexdict()).words);
    // Zero XOR is a fixed point.
    TrustwordList same = trustwords(a, a, hexdict());
    for (const auto& w : same.words) CHECK(w == hexdict()[0]);
    // Flipping a bit changes exactly the word holding it.
    std::size_t bit = gen.below(160);
    Fingerprint c = b;
    c.bits[bit / 8] ^= static_cast<std::uint8_t>(0x80u >> (bit % 8));
    TrustwordList ac = trustwords(a, c, hexdict());
    for (std::size_t k = 0; k < 10; ++k) CHECK((ab.words[k] != ac.words[k]) == (k == bit / 16));
    // Five words are the first five of ten and cover exactly the first 80 bits.
    TrustwordList five = trustwords(a, b, hexdict(), 5);
    REQUIRE(five.words.size() == 5);
    CHECK(std::equal(five.words.begin(), five.words.end(), ab.words.begin()));
    TrustwordList five_c = trustwords(a, c, hexdict(), 5);
    CHECK((five.words != five_c.words) == (bit < 80));
  }
  CHECK_THROWS_AS(trustwords(Fingerprint{}, Fingerprint{}, hexdict(), 7), ValidationError);
}

TEST_CASE("dictionary loading")
{
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "authkit-dict-test";
  fs::create_directories(dir);
  fs::path good = dir / "good.txt";
  {
    std::ofstream out(good, std::ios::binary);
    for (int i = 0; i < 65536; ++i) out << "w" << i << (i % 2 ? "\r\n" : "\n");
  }
  Dictionary d = Dictionary::load(good, "x-test");
  CHECK(d[0] == "w0");
  CHECK(d[65535] == "w65535");
  CHECK(d.language_tag() == "x-test");

  fs::path short_file = dir / "short.txt";
  {
    std::ofstream out(short_file);
    for (int i = 0; i < 100; ++i) out << "w" << i << "\n";
  }
  CHECK_THROWS_AS(Dictionary::load(short_file), ValidationError);
  std::vector<std::string> dup(65536, "same");
  CHECK_THROWS_AS(Dictionary(dup, "und"), ValidationError);
  CHECK_THROWS(Dictionary::load(dir / "missing.txt"));
  fs::remove_all(dir);
}

#include <boost/multiprecision/cpp_int.hpp>

#include "doctest.h"
#include "solphish/base58.hpp"
#include "solphish/synth.hpp"

using namespace solphish;
using boost::multiprecision::cpp_int;

namespace {

// Textbook big-integer conversion: leading zero bytes become '1's.
std::string oracle_encode(const std::vector<std::uint8_t>& bytes) {
  cpp_int n = 0;
  for (auto b : bytes) n = n * 256 + b;
  std::string out;
  while (n > 0) {
    out.insert(out.begin(), base58::kAlphabet[static_cast<std::size_t>(n % 58)]);
    n /= 58;
  }
  for (auto b : bytes) {
    if (b != 0) break;
    out.insert(out.begin(), '1');
  }
  return out;
}

}  // namespace

TEST_SUITE("base58") {

TEST_CASE("known vectors") {
  CHECK(base58::encode(std::vector<std::uint8_t>{}) == "");
  CHECK(base58::encode(std::vector<std::uint8_t>{0}) == "1");
  CHECK(base58::encode(std::vector<std::uint8_t>(32, 0)) == "11111111111111111111111111111111");
  const std::string hello = "Hello World!";
  CHECK(base58::encode(std::vector<std::uint8_t>(hello.begin(), hello.end())) == "2NEpo7TZRRrLZSi2U");
}

TEST_CASE("encode agrees with the big-integer oracle and decode inverts it") {
  synth::Rng rng(58);
  for (int i = 0; i < 2000; ++i) {
    std::vector<std::uint8_t> bytes(rng.uniform(0, 70));
    const auto zeros = rng.uniform(0, 3);
    for (std::size_t j = 0; j < bytes.size(); ++j) {
      bytes[j] = j < zeros ? 0 : static_cast<std::uint8_t>(rng.uniform(0, 255));
    }
    const auto text = base58::encode(bytes);
    REQUIRE(text == oracle_encode(bytes));
    const auto back = base58::decode(text);
    REQUIRE(back.has_value());
    CHECK(*back == bytes);
  }
}

TEST_CASE("decode rejects characters outside the alphabet") {
  for (auto bad : {"0", "O", "I", "l", "abc+", " 1"}) CHECK_FALSE(base58::decode(bad).has_value());
  CHECK(base58::is_alphabet_char('z'));
  CHECK_FALSE(base58::is_alphabet_char('0'));
}

}

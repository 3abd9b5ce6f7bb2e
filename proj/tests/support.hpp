#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>

#include "solphish/ingest.hpp"
#include "solphish/synth.hpp"
#include "solphish/txmodel.hpp"

namespace testing {

namespace fs = std::filesystem;
using namespace solphish;

inline fs::path source_path(std::string_view rel) { return fs::path(SOLPHISH_SOURCE_DIR) / rel; }

inline Transaction fixture_tx(std::string_view rel) {
  auto txs = ingest::load_fixture(source_path(rel));
  if (txs.size() != 1) throw std::runtime_error("expected one transaction in " + std::string(rel));
  return txs.front();
}

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

class TempDir {
 public:
  explicit TempDir(std::string_view tag = "t") {
    static std::atomic<unsigned> counter{0};
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = fs::temp_directory_path() /
            ("solphish-" + std::string(tag) + "-" + std::to_string(stamp) + "-" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(std::string_view rel) const { return path_ / rel; }

 private:
  fs::path path_;
};

inline const Address kUsdc = Address::parse("EPjFWdd5AufqSSqeM2qN1xzybapC8G4wEGGkZwyTDt1v");
inline const Address kBonk = Address::parse("DezXAZ8z7PnrnRJjz3wXBoRgixCa6xjnB7YaB1pPB263");
inline const Address kJup = Address::parse("JUPyiwrYJFskUPiHa7hkeR8VUtAeFoSYbKedZNsDvCN");

// Hand-assembled transactions. Balances are taken as given; nothing here
// keeps them consistent with the instructions.
class Sketch {
 public:
  explicit Sketch(std::uint64_t seed = 1) : rng_(seed) {
    tx_.signature = synth::random_signature(rng_);
    tx_.slot = 250'000'000;
    tx_.block_time = 1709251200;
  }

  Address addr() { return synth::random_address(rng_); }

  Sketch& payer(const Address& a, std::uint64_t pre = 1'000'000'000, std::uint64_t fee = 5000) {
    tx_.fee_payer = a;
    tx_.signers.insert(tx_.signers.begin(), a);
    tx_.fee = fee;
    return sol(a, pre, pre - fee);
  }
  Sketch& sol(const Address& a, std::uint64_t pre, std::uint64_t post) {
    tx_.balances.push_back({a, std::nullopt, Asset::native(), pre, post, kNativeDecimals});
    return *this;
  }
  Sketch& token(const Address& account, const Address& owner, const Address& mint, std::uint64_t pre,
                std::uint64_t post, std::uint8_t decimals = 6) {
    tx_.balances.push_back({account, owner, Asset::token(mint), pre, post, decimals});
    return *this;
  }
  Sketch& transfer(const Address& from, const Address& to, std::uint64_t amount,
                   std::optional<Address> mint = std::nullopt, std::uint32_t depth = 0) {
    Instruction ins;
    ins.program = mint ? programs::kToken : programs::kSystem;
    ins.kind = InstructionKind::Transfer;
    ins.source = from;
    ins.destination = to;
    ins.amount = amount;
    ins.mint = mint;
    ins.depth = depth;
    tx_.instructions.push_back(ins);
    return *this;
  }
  Sketch& assign(const Address& account, const Address& owner) {
    Instruction ins;
    ins.program = programs::kSystem;
    ins.kind = InstructionKind::Assign;
    ins.source = account;
    ins.new_authority = owner;
    tx_.instructions.push_back(ins);
    return *this;
  }
  Sketch& set_authority(const Address& account, std::string_view type, const Address& to,
                        std::optional<Address> current = std::nullopt) {
    Instruction ins;
    ins.program = programs::kToken;
    ins.kind = InstructionKind::SetAuthority;
    ins.source = account;
    ins.authority_type = normalize_authority_type(type);
    ins.new_authority = to;
    ins.authority = current;
    tx_.instructions.push_back(ins);
    return *this;
  }
  Sketch& log(std::string line) {
    tx_.logs.push_back(std::move(line));
    return *this;
  }
  Sketch& at(UnixSeconds t) {
    tx_.block_time = t;
    return *this;
  }
  Sketch& failed() {
    tx_.success = false;
    return *this;
  }

  const Transaction& tx() const { return tx_; }
  operator const Transaction&() const { return tx_; }

 private:
  synth::Rng rng_;
  Transaction tx_;
};

}  // namespace testing

#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace solphish {

using UnixSeconds = std::int64_t;

class InvalidAddress : public std::runtime_error {
 public:
  explicit InvalidAddress(const std::string& text)
      : std::runtime_error("invalid address '" + text + "'") {}
};

/// A Solana public key in its canonical base58 form.
///
/// Construction always validates: the text must decode to exactly 32 bytes,
/// and the stored value is the re-encoding of those bytes, so two Address
/// values compare equal iff they name the same key.
class Address {
 public:
  Address() = default;

  static Address parse(std::string_view text);
  static std::optional<Address> try_parse(std::string_view text);

  const std::string& str() const { return value_; }
  bool empty() const { return value_.empty(); }

  friend bool operator==(const Address&, const Address&) = default;
  friend std::strong_ordering operator<=>(const Address& a, const Address& b) {
    return a.value_.compare(b.value_) <=> 0;
  }

 private:
  explicit Address(std::string value) : value_(std::move(value)) {}
  std::string value_;
};

// Well-known program ids.
namespace programs {
extern const Address kSystem;
extern const Address kToken;
extern const Address kToken2022;
extern const Address kAssociatedToken;
extern const Address kComputeBudget;
extern const Address kMemo;
bool is_token_program(const Address& program);
}  // namespace programs

inline constexpr std::uint8_t kNativeDecimals = 9;
inline constexpr std::string_view kNativeKey = "NATIVE";

/// Either native SOL or an SPL token identified by its mint.
class Asset {
 public:
  Asset() = default;  // native
  static Asset native() { return Asset{}; }
  static Asset token(Address mint) { return Asset{std::move(mint)}; }

  bool is_native() const { return !mint_.has_value(); }
  const Address& mint() const { return *mint_; }
  /// "NATIVE" for SOL, the mint address otherwise.
  std::string key() const { return mint_ ? mint_->str() : std::string(kNativeKey); }
  static Asset from_key(std::string_view key);

  friend bool operator==(const Asset&, const Asset&) = default;
  friend std::strong_ordering operator<=>(const Asset& a, const Asset& b) {
    if (a.is_native() != b.is_native()) return a.is_native() ? std::strong_ordering::less
                                                             : std::strong_ordering::greater;
    if (a.is_native()) return std::strong_ordering::equal;
    return *a.mint_ <=> *b.mint_;
  }

 private:
  explicit Asset(Address mint) : mint_(std::move(mint)) {}
  std::optional<Address> mint_;
};

enum class InstructionKind { Transfer, Assign, SetAuthority, AdvanceNonce, CreateAccount, Other };

std::string_view to_string(InstructionKind kind);

/// One parsed instruction, top-level (depth 0) or inner/CPI (depth >= 1).
///
/// Field use per kind:
///   Transfer      source, destination, amount; mint when the parser knew it;
///                 authority = signing owner for token transfers
///   Assign        source = reassigned account, new_authority = new owner program
///   SetAuthority  source = account or mint, authority_type (normalized),
///                 new_authority (absent when revoked), authority = current owner
///   AdvanceNonce  source = nonce account, authority = nonce authority
///   CreateAccount source = funder, destination = new account, amount = lamports,
///                 new_authority = owner program
///   Other         other_name carries the parsed type name
struct Instruction {
  Address program;
  InstructionKind kind = InstructionKind::Other;
  std::string other_name;
  std::optional<Address> source;
  std::optional<Address> destination;
  std::optional<std::uint64_t> amount;
  std::optional<Address> mint;
  std::optional<std::string> authority_type;
  std::optional<Address> new_authority;
  std::optional<Address> authority;
  std::uint32_t depth = 0;

  bool operator==(const Instruction&) const = default;
};

/// Lowercase and strip spaces so "accountOwner" and "account owner" agree.
std::string normalize_authority_type(std::string_view raw);

inline constexpr std::string_view kAccountOwnerAuthority = "accountowner";

struct BalanceEntry {
  Address account;
  std::optional<Address> owner;  // token accounts: owner before the transaction
  Asset asset = Asset::native();
  std::uint64_t pre = 0;
  std::uint64_t post = 0;
  std::uint8_t decimals = kNativeDecimals;

  std::int64_t delta() const {
    return static_cast<std::int64_t>(post) - static_cast<std::int64_t>(pre);
  }
  bool drained() const { return pre != 0 && post == 0; }
  /// The wallet that controls this balance.
  const Address& holder() const { return owner ? *owner : account; }

  bool operator==(const BalanceEntry&) const = default;
};

struct Transaction {
  std::string signature;
  std::uint64_t slot = 0;
  UnixSeconds block_time = 0;
  std::vector<Instruction> instructions;
  std::vector<std::string> logs;
  std::vector<BalanceEntry> balances;
  std::vector<Address> signers;
  Address fee_payer;
  std::uint64_t fee = 0;
  bool success = true;

  bool operator==(const Transaction&) const = default;
};

/// A balance entry reference: which account lost (or holds) which asset.
struct AssetRef {
  Address account;
  Asset asset;
  bool operator==(const AssetRef&) const = default;
};

struct Roles {
  std::optional<Address> loser;
  std::optional<Address> beneficiary;
  bool operator==(const Roles&) const = default;
};

enum class RuleFamily { TransferLike, AuthorityLike };

class RoleUnderdetermined : public std::runtime_error {
 public:
  explicit RoleUnderdetermined(const std::string& signature)
      : std::runtime_error("roles underdetermined for " + signature +
                           ": no balance movement and no authority instruction") {}
};

/// post - pre for the entry matching (account, asset); 0 when absent.
std::int64_t net_delta(const Transaction& tx, const Address& account, const Asset& asset);

/// Every entry with pre != 0 and post == 0, in balances order.
std::vector<AssetRef> drained_assets(const Transaction& tx);

/// Loser and beneficiary of a transaction under one rule family.
///
/// TransferLike: each balance entry is attributed to its holder (token
/// owner, or the account itself for SOL). The loser is the holder with the
/// most asset classes carrying a negative entry delta, the beneficiary the
/// holder with the most classes carrying a positive one. Ties go to the fee
/// payer when it is among the tied, else to the smallest address.
///
/// AuthorityLike: the first Assign/SetAuthority decides. Beneficiary is its
/// new authority; loser is the reassigned wallet (Assign) or the current
/// owner of the reassigned token account (SetAuthority).
///
/// Throws RoleUnderdetermined when the transaction moves no balance and
/// carries no authority instruction.
Roles derive_roles(const Transaction& tx, RuleFamily family);

/// Holder of `account`: its token owner when a balance entry names one,
/// otherwise the account itself.
Address holder_of(const Transaction& tx, const Address& account);

/// Every address the transaction touches: balance accounts and owners,
/// instruction programs and named accounts, new authorities. Sorted.
std::vector<Address> participants(const Transaction& tx);

/// Structural problems with a transaction (empty when well-formed).
std::vector<std::string> validate(const Transaction& tx);

/// Sum of native deltas; equals -fee for a well-formed transaction.
std::int64_t native_delta_sum(const Transaction& tx);

}  // namespace solphish

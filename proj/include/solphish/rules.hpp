#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "solphish/txmodel.hpp"
#include "solphish/usd.hpp"

namespace solphish::rules {

/// Declared in precedence order: AAT > STMT > ISA.
enum class PhishType { AAT, STMT, ISA };

std::string_view to_string(PhishType type);
std::optional<PhishType> phish_type_from(std::string_view name);

struct MarketList {
  std::set<Address> addresses;
  std::set<std::string> keywords{"buy", "sell", "purchase"};

  bool contains(const Address& a) const { return addresses.contains(a); }
  /// Case-insensitive substring match of any keyword in any line.
  std::optional<std::string> keyword_hit(std::span<const std::string> logs) const;

  /// {"addresses": [...], "keywords": [...]}; keywords default when absent.
  static MarketList load(const std::filesystem::path& path);
};

/// Official system accounts. Entries are kept as text because some of the
/// published forms do not decode to 32 bytes.
struct OfficialAllowlist {
  std::set<std::string> addresses;

  bool contains(std::string_view a) const { return addresses.contains(std::string(a)); }
  static OfficialAllowlist load(const std::filesystem::path& path);
};

/// Newline-delimited entries; '#' starts a comment; blank lines skipped.
std::vector<std::string> read_address_lines(const std::filesystem::path& path);

/// Programs known to receive wallet reassignments for benign reasons.
std::set<Address> load_program_allowlist(const std::filesystem::path& path);

enum class RejectReason { LoserIsMarket, BeneficiaryIsMarket, LogKeyword, SelfDealing };

std::string_view to_string(RejectReason reason);

/// nullopt means the transaction passed.
using PrerequisiteVerdict = std::optional<RejectReason>;

/// Reasons are checked in rule-table order; the first hit is reported.
PrerequisiteVerdict check_prerequisites(const Transaction& tx, const Roles& roles, const MarketList& markets);

struct StmtEvidence {
  std::size_t transfer_count = 0;
  std::vector<AssetRef> drained_tokens;
  bool durable_nonce = false;

  bool operator==(const StmtEvidence&) const = default;
};

enum class AuthorityScope { Wallet, Token };

std::string_view to_string(AuthorityScope scope);

struct Reassignment {
  Address account;
  std::optional<Address> old_owner;
  std::optional<Address> new_owner;
  AuthorityScope scope = AuthorityScope::Wallet;
  std::optional<Address> mint;  // token scope, when the balances name it
  std::uint32_t depth = 0;

  bool operator==(const Reassignment&) const = default;
};

struct AatEvidence {
  std::vector<Reassignment> reassignments;

  bool operator==(const AatEvidence&) const = default;
};

enum class VanityMatch { None, Prefix, Suffix };

std::string_view to_string(VanityMatch match);

struct IsaEvidence {
  std::size_t transfer_count = 0;
  std::vector<AssetRef> drained;
  Address beneficiary;
  VanityMatch match = VanityMatch::None;

  bool operator==(const IsaEvidence&) const = default;
};

inline constexpr std::string_view kVanityPrefix = "Compu";
inline constexpr std::string_view kDefaultIsaSuffix = "1111";

/// Which impersonation pattern `address` carries; None when allowlisted.
VanityMatch vanity_pattern(std::string_view address, const OfficialAllowlist& allowlist,
                           std::string_view suffix = kDefaultIsaSuffix);

inline bool match_vanity(std::string_view address, const OfficialAllowlist& allowlist,
                         std::string_view suffix = kDefaultIsaSuffix) {
  return vanity_pattern(address, allowlist, suffix) != VanityMatch::None;
}

std::size_t count_transfers(const Transaction& tx);

/// More than two transfers (any depth) and at least two token balances
/// emptied.
std::optional<StmtEvidence> detect_stmt(const Transaction& tx);

/// Any Assign, or a SetAuthority of the account-owner kind.
std::optional<AatEvidence> detect_aat(const Transaction& tx);

/// At least one transfer, some token or SOL balance emptied, and a
/// beneficiary impersonating a system account. The beneficiary comes from
/// the TransferLike roles.
std::optional<IsaEvidence> detect_isa(const Transaction& tx, const OfficialAllowlist& allowlist,
                                      std::string_view suffix = kDefaultIsaSuffix);

struct Detection {
  std::string signature;
  std::uint64_t slot = 0;
  UnixSeconds block_time = 0;
  std::vector<PhishType> phish_types;
  Address victim;
  Address phisher;
  std::optional<AatEvidence> aat;
  std::optional<StmtEvidence> stmt;
  std::optional<IsaEvidence> isa;
  std::optional<Usd> loss_usd;
  std::vector<std::string> unpriced_assets;

  PhishType primary() const { return phish_types.front(); }
  bool has(PhishType t) const;
  /// Assets the evidence names: drained balances plus mints of reassigned
  /// token accounts. Sorted, unique.
  std::vector<Asset> involved_assets() const;

  bool operator==(const Detection&) const = default;
};

struct RuleConfig {
  MarketList markets;
  OfficialAllowlist official;
  std::set<Address> benign_programs;  // empty unless configured
  std::string isa_suffix{kDefaultIsaSuffix};
};

struct Classification {
  std::optional<Detection> detection;
  PrerequisiteVerdict transfer_verdict;
  PrerequisiteVerdict authority_verdict;
  std::vector<std::string> diagnostics;
};

/// Full pipeline for one transaction: roles per family, prerequisites per
/// family, then the detectors of each family that passed. Failed
/// transactions never produce a detection.
Classification classify(const Transaction& tx, const RuleConfig& config);

/// classify over a corpus on `threads` workers; output in input order.
std::vector<Classification> classify_all(std::span<const Transaction> txs, const RuleConfig& config,
                                         unsigned threads = 0);

}  // namespace solphish::rules

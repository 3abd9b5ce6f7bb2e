#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "solphish/rules.hpp"
#include "solphish/txmodel.hpp"

namespace solphish::synth {

enum class Label { Benign, Market, SelfDealing, STMT, AAT_Wallet, AAT_Token, AAT_Both, ISA };

std::string_view to_string(Label label);
std::optional<Label> label_from(std::string_view name);

/// Types classify must report for a transaction carrying `label`.
std::set<rules::PhishType> expected_types(Label label);
bool is_phishing(Label label);

/// mt19937_64 with hand-rolled bounded draws: std distributions are
/// implementation-defined, and corpora must be identical everywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  std::uint64_t next() { return engine_(); }
  /// Uniform in [lo, hi].
  std::uint64_t uniform(std::uint64_t lo, std::uint64_t hi);
  bool chance(std::uint64_t num, std::uint64_t den) { return uniform(0, den - 1) < num; }
  /// Log-uniform over [10^3, 10^12].
  std::uint64_t amount();

 private:
  std::mt19937_64 engine_;
};

Address random_address(Rng& rng);

enum class VanityStyle { Prefix, Suffix4, Suffix5 };

/// 32 random bytes, base58, then the prefix/suffix patched in; resampled
/// until the patched text still decodes to 32 bytes.
Address vanity_address(Rng& rng, VanityStyle style);

std::string random_signature(Rng& rng);

/// Ground truth emitted alongside each generated transaction.
struct Generated {
  Transaction tx;
  Label label = Label::Benign;
  std::optional<Address> victim;
  std::optional<Address> phisher;
  std::vector<AssetRef> drained;      // token entries emptied by the attack
  std::vector<Asset> involved_assets; // what Detection::involved_assets should report
  bool durable_nonce = false;
};

/// Per-transaction inputs the corpus scheduler decides.
struct Context {
  UnixSeconds block_time = 1709251200;  // 2024-03-01
  std::optional<Address> phisher;       // reuse a scripted phisher
  const rules::MarketList* markets = nullptr;
};

enum class BenignVariant { PartialSol, PartialToken, TokenAndSol, SingleDrain, PhisherActivity };

Generated gen_benign_transfer(Rng& rng, const Context& ctx);
Generated gen_benign_transfer(Rng& rng, const Context& ctx, BenignVariant variant);

/// Near-miss probes for each rule conjunct; all labeled Benign.
enum class NegativeControl {
  StmtOneDrain,       // 3 transfers, one token emptied
  StmtTwoTransfers,   // 2 transfers, two tokens emptied
  AatWrongType,       // SetAuthority closeAccount
  IsaAllowlisted,     // emptied into an official system account
  IsaPartial,         // vanity beneficiary, nothing emptied
};
Generated gen_negative_control(Rng& rng, const Context& ctx, NegativeControl control);

enum class MarketVariant { LogKeyword, MarketBeneficiary, MarketLoser, NftSale };

/// Requires ctx.markets with at least one address.
Generated gen_market_swap(Rng& rng, const Context& ctx);
Generated gen_market_swap(Rng& rng, const Context& ctx, MarketVariant variant);

/// A wallet emptying tokens into its own accounts (STMT-shaped).
Generated gen_self_dealing(Rng& rng, const Context& ctx);

struct StmtOptions {
  std::size_t n_tokens = 4;
  bool durable_nonce = false;
  bool via_program = false;  // route transfers as inner instructions
};
Generated gen_stmt_phish(Rng& rng, const Context& ctx, const StmtOptions& options);

enum class AatKind { Wallet, Token, Both };
/// perturbed: Token kind with authority type closeAccount, labeled Benign.
Generated gen_aat_phish(Rng& rng, const Context& ctx, AatKind kind, bool perturbed = false);

enum class IsaVariant { TokenDrain, SolDrain };
/// perturbed: beneficiary is an official system account, labeled Benign.
Generated gen_isa_phish(Rng& rng, const Context& ctx, IsaVariant variant, VanityStyle style,
                        bool perturbed = false);
Generated gen_isa_phish(Rng& rng, const Context& ctx);

/// Mints used by the generators; the first is sampled three times as often.
const std::vector<std::pair<Address, std::uint8_t>>& mint_pool();

/// Starter market addresses (mirrors data/markets.json).
rules::MarketList default_markets();
/// Official system accounts (mirrors data/official_allowlist.txt).
rules::OfficialAllowlist default_official_allowlist();
rules::RuleConfig default_rule_config();

struct ScriptedPhisher {
  Address address;
  rules::PhishType family = rules::PhishType::STMT;
  std::size_t attempts = 0;
  UnixSeconds first_phish = 0;
  UnixSeconds last_phish = 0;
  UnixSeconds last_activity = 0;
};

struct Manifest {
  std::uint64_t seed = 0;
  std::map<Label, std::size_t> requested;
  std::map<Label, std::size_t> tallies;
  std::vector<ScriptedPhisher> phishers;
  std::map<std::string, std::map<rules::PhishType, std::size_t>> monthly_tally;  // "YYYY-MM"
  std::map<std::string, std::size_t> mint_tally;  // asset key -> phishing txs involving it
  std::vector<std::string> durable_nonce;
};

struct LabeledCorpus {
  std::vector<Transaction> transactions;
  std::vector<Label> labels;  // parallel to transactions
  std::vector<Generated> truth;
  Manifest manifest;

  std::map<std::string, Label> label_map() const;
};

struct CorpusParams {
  std::uint64_t seed = 42;
  std::map<Label, std::size_t> counts;
  std::size_t phishers_per_family = 6;

  /// 40% benign, 10% market, 10% self-dealing, 40% phishing split across
  /// STMT / AAT (three kinds) / ISA.
  static CorpusParams mixed(std::uint64_t seed, std::size_t total = 1000);
};

/// Pure function of the params.
LabeledCorpus generate_corpus(const CorpusParams& params);

nlohmann::ordered_json manifest_to_json(const Manifest& m);

/// corpus.jsonl (ingest fixture format), labels.json and manifest.json
/// under `dir`. Returns the manifest path.
std::filesystem::path write_corpus(const LabeledCorpus& corpus, const std::filesystem::path& dir);

/// Gang-extraction scenario: labeled accounts in three gangs (StarOut,
/// Tree, StarIn) plus isolated labeled accounts, and noise transfers to
/// unlabeled accounts.
struct GangScenario {
  std::set<Address> labeled;
  std::vector<Transaction> transactions;
  struct ExpectedGang {
    std::set<Address> members;
    std::string topology;
  };
  std::vector<ExpectedGang> gangs;
  std::set<Address> isolated;
};
GangScenario gen_gang_scenario(std::uint64_t seed);

}  // namespace solphish::synth

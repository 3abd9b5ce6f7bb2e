#include "solphish/synth.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>

#include "solphish/analysis.hpp"
#include "solphish/base58.hpp"
#include "solphish/ingest.hpp"

namespace solphish::synth {

using rules::PhishType;

namespace {

constexpr std::array<std::pair<Label, std::string_view>, 8> kLabelNames{{
    {Label::Benign, "Benign"},
    {Label::Market, "Market"},
    {Label::SelfDealing, "SelfDealing"},
    {Label::STMT, "STMT"},
    {Label::AAT_Wallet, "AAT_Wallet"},
    {Label::AAT_Token, "AAT_Token"},
    {Label::AAT_Both, "AAT_Both"},
    {Label::ISA, "ISA"},
}};

constexpr UnixSeconds kGenesis = 1584316800;   // 2020-03-16
constexpr UnixSeconds kCorpusStart = 1704067200;  // 2024-01-01
constexpr UnixSeconds kDay = 86400;
constexpr std::uint64_t kTokenAccountRent = 2039280;
constexpr std::uint64_t kNonceAccountRent = 1447680;
constexpr std::uint64_t kBaseFee = 5000;

bool clean_text(std::string_view text) {
  std::string lowered(text);
  std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (std::string_view kw : {"buy", "sell", "purchase"}) {
    if (lowered.find(kw) != std::string::npos) return false;
  }
  return true;
}

bool looks_vanity(std::string_view text) {
  return text.starts_with(rules::kVanityPrefix) || text.ends_with(rules::kDefaultIsaSuffix);
}

std::string random_text(Rng& rng, std::size_t bytes) {
  std::vector<std::uint8_t> buf(bytes);
  for (std::size_t i = 0; i < bytes; i += 8) {
    auto word = rng.next();
    for (std::size_t j = i; j < std::min(bytes, i + 8); ++j) {
      buf[j] = static_cast<std::uint8_t>(word & 0xff);
      word >>= 8;
    }
  }
  return base58::encode(buf);
}

std::uint64_t slot_for(UnixSeconds t) {
  return t <= kGenesis ? 0 : static_cast<std::uint64_t>(t - kGenesis) * 5 / 2;
}

class TxBuilder {
 public:
  TxBuilder(Rng& rng, const Address& fee_payer, std::uint64_t fee_payer_pre, UnixSeconds t)
      : rng_(rng) {
    tx_.signature = random_signature(rng);
    tx_.block_time = t;
    tx_.slot = slot_for(t);
    tx_.fee = kBaseFee + 1000 * rng.uniform(0, 20);
    tx_.fee_payer = fee_payer;
    if (fee_payer_pre < tx_.fee) throw std::logic_error("fee payer cannot cover the fee");
    wallet(fee_payer, fee_payer_pre);
    native_.front().post -= tx_.fee;
    tx_.signers.push_back(fee_payer);
  }

  std::uint64_t fee() const { return tx_.fee; }

  void wallet(const Address& a, std::uint64_t pre) {
    if (native_index_.contains(a)) return;
    native_index_[a] = native_.size();
    native_.push_back(BalanceEntry{a, std::nullopt, Asset::native(), pre, pre, kNativeDecimals});
  }

  void signer(const Address& a) {
    if (!native_index_.contains(a)) throw std::logic_error("signer without a native entry");
    if (std::find(tx_.signers.begin(), tx_.signers.end(), a) == tx_.signers.end()) tx_.signers.push_back(a);
  }

  Address token_account(const Address& owner, const Address& mint, std::uint8_t decimals, std::uint64_t pre) {
    auto account = random_address(rng_);
    wallet(account, kTokenAccountRent);
    token_index_[account] = tokens_.size();
    tokens_.push_back(BalanceEntry{account, owner, Asset::token(mint), pre, pre, decimals});
    return account;
  }

  std::uint64_t sol_available(const Address& a) const { return native_.at(native_index_.at(a)).post; }
  std::uint64_t token_available(const Address& a) const { return tokens_.at(token_index_.at(a)).post; }

  void sol_transfer(const Address& from, const Address& to, std::uint64_t amount, std::uint32_t depth = 0) {
    auto& src = native_.at(native_index_.at(from));
    if (src.post < amount) throw std::logic_error("overdrawn native balance");
    src.post -= amount;
    wallet(to, 0);
    native_.at(native_index_.at(to)).post += amount;
    Instruction ins;
    ins.program = programs::kSystem;
    ins.kind = InstructionKind::Transfer;
    ins.source = from;
    ins.destination = to;
    ins.amount = amount;
    ins.depth = depth;
    push(std::move(ins), "Transfer");
  }

  void token_transfer(const Address& from, const Address& to, std::uint64_t amount, std::uint32_t depth = 0) {
    auto& src = tokens_.at(token_index_.at(from));
    auto& dst = tokens_.at(token_index_.at(to));
    if (src.post < amount) throw std::logic_error("overdrawn token balance");
    src.post -= amount;
    dst.post += amount;
    Instruction ins;
    ins.program = programs::kToken;
    ins.kind = InstructionKind::Transfer;
    ins.source = from;
    ins.destination = to;
    ins.amount = amount;
    ins.mint = src.asset.mint();
    ins.authority = src.owner;
    ins.depth = depth;
    push(std::move(ins), "TransferChecked");
  }

  void assign(const Address& account, const Address& program, std::uint32_t depth = 0) {
    Instruction ins;
    ins.program = programs::kSystem;
    ins.kind = InstructionKind::Assign;
    ins.source = account;
    ins.new_authority = program;
    ins.depth = depth;
    push(std::move(ins), "Assign");
  }

  void set_authority(const Address& account, std::string_view type, const Address& new_authority,
                     std::uint32_t depth = 0) {
    Instruction ins;
    ins.program = programs::kToken;
    ins.kind = InstructionKind::SetAuthority;
    ins.source = account;
    ins.authority_type = normalize_authority_type(type);
    ins.new_authority = new_authority;
    ins.authority = tokens_.at(token_index_.at(account)).owner;
    ins.depth = depth;
    push(std::move(ins), "SetAuthority");
  }

  void advance_nonce(const Address& nonce_account, const Address& authority) {
    wallet(nonce_account, kNonceAccountRent);
    Instruction ins;
    ins.program = programs::kSystem;
    ins.kind = InstructionKind::AdvanceNonce;
    ins.source = nonce_account;
    ins.authority = authority;
    push(std::move(ins), "AdvanceNonceAccount");
  }

  void other(const Address& program, std::string name, std::uint32_t depth = 0) {
    Instruction ins;
    ins.program = program;
    ins.kind = InstructionKind::Other;
    ins.other_name = std::move(name);
    ins.depth = depth;
    auto label = ins.other_name;
    if (!label.empty()) label[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(label[0])));
    push(std::move(ins), label);
  }

  void log(std::string line) { tx_.logs.push_back(std::move(line)); }

  /// Canonical form: exactly what ingest would produce from the encoded payload.
  Transaction finish() {
    tx_.balances = native_;
    tx_.balances.insert(tx_.balances.end(), tokens_.begin(), tokens_.end());
    return ingest::normalize(ingest::make_record(tx_, 0));
  }

 private:
  void push(Instruction ins, std::string_view log_name) {
    const auto level = std::to_string(ins.depth + 1);
    tx_.logs.push_back("Program " + ins.program.str() + " invoke [" + level + "]");
    tx_.logs.push_back("Program log: Instruction: " + std::string(log_name));
    tx_.logs.push_back("Program " + ins.program.str() + " success");
    tx_.instructions.push_back(std::move(ins));
  }

  Rng& rng_;
  Transaction tx_;
  std::vector<BalanceEntry> native_;
  std::vector<BalanceEntry> tokens_;
  std::map<Address, std::size_t> native_index_;
  std::map<Address, std::size_t> token_index_;
};

std::uint64_t wallet_balance(Rng& rng) { return rng.amount() + 10'000'000; }

/// `n` distinct mints; the first pool entry carries triple weight.
std::vector<std::pair<Address, std::uint8_t>> pick_mints(Rng& rng, std::size_t n) {
  std::vector<std::pair<Address, std::uint8_t>> pool = mint_pool();
  std::vector<std::uint64_t> weight(pool.size(), 1);
  weight[0] = 3;
  std::vector<std::pair<Address, std::uint8_t>> out;
  while (out.size() < n) {
    if (pool.empty()) {
      out.emplace_back(random_address(rng), static_cast<std::uint8_t>(rng.uniform(0, 9)));
      continue;
    }
    std::uint64_t total = 0;
    for (auto w : weight) total += w;
    auto r = rng.uniform(0, total - 1);
    std::size_t i = 0;
    while (r >= weight[i]) r -= weight[i++];
    out.push_back(pool[i]);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(i));
    weight.erase(weight.begin() + static_cast<std::ptrdiff_t>(i));
  }
  return out;
}

const rules::MarketList& markets_of(const Context& ctx) {
  static const rules::MarketList fallback = default_markets();
  return ctx.markets && !ctx.markets->addresses.empty() ? *ctx.markets : fallback;
}

Address pick_market(Rng& rng, const Context& ctx) {
  const auto& m = markets_of(ctx).addresses;
  auto it = m.begin();
  std::advance(it, static_cast<std::ptrdiff_t>(rng.uniform(0, m.size() - 1)));
  return *it;
}

Generated finish(TxBuilder& b, Label label) {
  Generated g;
  g.tx = b.finish();
  g.label = label;
  return g;
}

void compute_budget(Rng& rng, TxBuilder& b) {
  if (rng.chance(1, 2)) b.other(programs::kComputeBudget, "setComputeUnitPrice");
}

// A wallet moving `n_drained` full token balances plus `n_partial` partial
// ones and an optional partial SOL transfer to `to` (token accounts owned by
// `to`). Shared by STMT, its negative controls, and market probes.
struct MultiTransfer {
  std::size_t n_drained = 0;
  std::size_t n_partial = 0;
  bool sol = true;
  bool sol_first = true;
  std::uint32_t depth = 0;
};

std::vector<AssetRef> multi_transfer(Rng& rng, TxBuilder& b, const Address& from, const Address& to,
                                     const MultiTransfer& spec) {
  b.wallet(to, wallet_balance(rng));
  auto sol = [&] {
    const auto avail = b.sol_available(from);
    b.sol_transfer(from, to, rng.uniform(1, avail - 1), spec.depth);
  };
  if (spec.sol && spec.sol_first) sol();
  std::vector<AssetRef> drained;
  const auto mints = pick_mints(rng, spec.n_drained + spec.n_partial);
  for (std::size_t i = 0; i < mints.size(); ++i) {
    const auto& [mint, decimals] = mints[i];
    const auto src = b.token_account(from, mint, decimals, rng.amount());
    const auto dst = b.token_account(to, mint, decimals, rng.chance(1, 2) ? 0 : rng.amount());
    const bool drain = i < spec.n_drained;
    const auto held = b.token_available(src);
    b.token_transfer(src, dst, drain ? held : rng.uniform(1, held - 1), spec.depth);
    if (drain) drained.push_back({src, Asset::token(mint)});
  }
  if (spec.sol && !spec.sol_first) sol();
  return drained;
}

}  // namespace

std::string_view to_string(Label label) {
  for (const auto& [l, name] : kLabelNames) {
    if (l == label) return name;
  }
  return "?";
}

std::optional<Label> label_from(std::string_view name) {
  for (const auto& [l, n] : kLabelNames) {
    if (n == name) return l;
  }
  return std::nullopt;
}

std::set<PhishType> expected_types(Label label) {
  switch (label) {
    case Label::STMT: return {PhishType::STMT};
    case Label::AAT_Wallet:
    case Label::AAT_Token:
    case Label::AAT_Both: return {PhishType::AAT};
    case Label::ISA: return {PhishType::ISA};
    default: return {};
  }
}

bool is_phishing(Label label) { return !expected_types(label).empty(); }

std::uint64_t Rng::uniform(std::uint64_t lo, std::uint64_t hi) {
  if (hi < lo) throw std::invalid_argument("Rng::uniform: empty range");
  const auto span = hi - lo;
  if (span == std::numeric_limits<std::uint64_t>::max()) return next();
  const auto range = span + 1;
  // Reject the top partial bucket so every residue is equally likely.
  const auto limit = std::numeric_limits<std::uint64_t>::max() - (std::numeric_limits<std::uint64_t>::max() % range);
  std::uint64_t x;
  do {
    x = next();
  } while (x >= limit);
  return lo + x % range;
}

std::uint64_t Rng::amount() {
  // Uniform decade, then uniform within it: log-uniform without floating point.
  const auto decade = uniform(3, 11);
  std::uint64_t lo = 1;
  for (std::uint64_t i = 0; i < decade; ++i) lo *= 10;
  return uniform(lo, lo * 10 - 1);
}

Address random_address(Rng& rng) {
  for (;;) {
    auto text = random_text(rng, 32);
    if (looks_vanity(text) || !clean_text(text)) continue;
    return Address::parse(text);
  }
}

Address vanity_address(Rng& rng, VanityStyle style) {
  for (;;) {
    auto text = random_text(rng, 32);
    switch (style) {
      case VanityStyle::Prefix:
        text.replace(0, rules::kVanityPrefix.size(), rules::kVanityPrefix);
        break;
      case VanityStyle::Suffix4:
        text.replace(text.size() - 4, 4, "1111");
        break;
      case VanityStyle::Suffix5:
        text.replace(text.size() - 5, 5, "11111");
        break;
    }
    if (!clean_text(text)) continue;
    auto parsed = Address::try_parse(text);
    if (parsed && parsed->str() == text) return *parsed;
  }
}

std::string random_signature(Rng& rng) { return random_text(rng, 64); }

const std::vector<std::pair<Address, std::uint8_t>>& mint_pool() {
  static const std::vector<std::pair<Address, std::uint8_t>> pool = {
      {Address::parse("EPjFWdd5AufqSSqeM2qN1xzybapC8G4wEGGkZwyTDt1v"), 6},  // USDC
      {Address::parse("Es9vMFrzaCERmJfrF4H2FYD4KCoNkY11McCe8BenwNYB"), 6},  // USDT
      {Address::parse("DezXAZ8z7PnrnRJjz3wXBoRgixCa6xjnB7YaB1pPB263"), 5},  // BONK
      {Address::parse("JUPyiwrYJFskUPiHa7hkeR8VUtAeFoSYbKedZNsDvCN"), 6},   // JUP
      {Address::parse("EKpQGSJtjMFqKZ9KQanSqYXRcF8fBopzLHYxdM65zcjm"), 6},  // WIF
      {Address::parse("mSoLzYCxHdYgdzU16g5QSh3i5K3z3KZK7ytfqcJm7So"), 9},   // mSOL
  };
  return pool;
}

rules::MarketList default_markets() {
  rules::MarketList m;
  for (const char* a : {
           "JUP6LkbZbjS1jKKwapdHNy74zcZ3tLUZoi5QNyVTaV4",   // Jupiter v6
           "675kPX9MHTjS2zt1qfr1NYHuzeLXfQM9H24wFSUt1Mp8",  // Raydium AMM v4
           "whirLbMiicVdio4qvUfM5KAg6Ct8VwpYzGff3uctyCc",   // Orca Whirlpool
           "M2mx93ekt1fmXSVkTrUL9xVFHkmME8HTUi5Cyc5aF7K",   // Magic Eden v2
           "TSWAPaqyCSx2KABk68Shruf4rp7CxcNi8hAsbdwmHbN",   // Tensor swap
           "srmqPvymJeFKQ4zGQed1GFppgkRHL9kaELCbyksJtPX",   // OpenBook
           "PhoeNiXZ8ByJGLkxNfZRnkUfjvmuYqLR89jjFHGqdXY",   // Phoenix
           "LBUZKhRxPF3XUpBCjp4YzTKgLccjZhTSDM9YuVaPwxo",   // Meteora DLMM
       }) {
    m.addresses.insert(Address::parse(a));
  }
  return m;
}

rules::OfficialAllowlist default_official_allowlist() {
  rules::OfficialAllowlist list;
  for (const char* a : {
           // As commonly displayed.
           "111111111111111111111111111111111",
           "ComputeBudget111111111111111111111111111111",
           "NativeLoader111111111111111111111111111111",
           // Canonical 32-byte forms.
           "11111111111111111111111111111111",
           "NativeLoader1111111111111111111111111111111",
           "TokenkegQfeZyiNwAJbNbGKPFXCWuBvf9Ss623VQ5DA",
           "TokenzQdBNbLqP5VEhdkAS6EPFLC1PHnBqCXEpPxuEb",
           "ATokenGPvbdGVxr1b2hvZbsiqW5xWH25efTNsLJA8knL",
           "MemoSq4gqABAXKb96qnH8TysNcWxMyWCqXgDLGmfcHr",
           "Memo1UhkJRfHyvLMcVucJwxXeuD728EqVDDwQDxFMNo",
           "BPFLoader1111111111111111111111111111111111",
           "BPFLoader2111111111111111111111111111111111",
           "BPFLoaderUpgradeab1e11111111111111111111111",
           "Vote111111111111111111111111111111111111111",
           "Stake11111111111111111111111111111111111111",
           "Config1111111111111111111111111111111111111",
           "AddressLookupTab1e1111111111111111111111111",
           "Ed25519SigVerify111111111111111111111111111",
           "KeccakSecp256k11111111111111111111111111111",
           "SysvarC1ock11111111111111111111111111111111",
           "SysvarRent111111111111111111111111111111111",
           "SysvarRecentB1ockHashes11111111111111111111",
           "SysvarS1otHashes111111111111111111111111111",
           "SysvarStakeHistory1111111111111111111111111",
           "SysvarEpochSchedu1e111111111111111111111111",
           "SysvarFees111111111111111111111111111111111",
           "Sysvar1nstructions1111111111111111111111111",
           "SysvarRewards111111111111111111111111111111",
       }) {
    list.addresses.insert(a);
  }
  return list;
}

rules::RuleConfig default_rule_config() {
  rules::RuleConfig c;
  c.markets = default_markets();
  c.official = default_official_allowlist();
  return c;
}

Generated gen_benign_transfer(Rng& rng, const Context& ctx) {
  if (ctx.phisher) return gen_benign_transfer(rng, ctx, BenignVariant::PhisherActivity);
  const auto v = static_cast<BenignVariant>(rng.uniform(0, 3));
  return gen_benign_transfer(rng, ctx, v);
}

Generated gen_benign_transfer(Rng& rng, const Context& ctx, BenignVariant variant) {
  const auto sender =
      variant == BenignVariant::PhisherActivity && ctx.phisher ? *ctx.phisher : random_address(rng);
  const auto receiver = random_address(rng);
  TxBuilder b(rng, sender, wallet_balance(rng), ctx.block_time);
  compute_budget(rng, b);
  b.wallet(receiver, rng.chance(1, 4) ? 0 : wallet_balance(rng));

  auto partial_sol = [&](const Address& to) { b.sol_transfer(sender, to, rng.uniform(1, b.sol_available(sender) - 1)); };
  auto token = [&](bool drain) {
    const auto [mint, decimals] = pick_mints(rng, 1).front();
    const auto src = b.token_account(sender, mint, decimals, rng.amount());
    const auto dst = b.token_account(receiver, mint, decimals, rng.chance(1, 2) ? 0 : rng.amount());
    const auto held = b.token_available(src);
    b.token_transfer(src, dst, drain ? held : rng.uniform(1, held - 1));
  };

  switch (variant) {
    case BenignVariant::PartialSol:
      partial_sol(receiver);
      if (rng.chance(1, 3)) {
        const auto second = random_address(rng);
        b.wallet(second, wallet_balance(rng));
        partial_sol(second);
      }
      break;
    case BenignVariant::PartialToken:
      token(false);
      if (rng.chance(1, 3)) token(false);
      break;
    case BenignVariant::TokenAndSol:
      token(false);
      partial_sol(receiver);
      break;
    case BenignVariant::SingleDrain:
      token(true);
      if (rng.chance(1, 2)) partial_sol(receiver);
      break;
    case BenignVariant::PhisherActivity:
      partial_sol(receiver);
      break;
  }
  if (rng.chance(1, 5)) b.other(programs::kMemo, "memo");
  return finish(b, Label::Benign);
}

Generated gen_negative_control(Rng& rng, const Context& ctx, NegativeControl control) {
  switch (control) {
    case NegativeControl::AatWrongType:
      return gen_aat_phish(rng, ctx, AatKind::Token, true);
    case NegativeControl::IsaAllowlisted:
      return gen_isa_phish(rng, ctx, IsaVariant::SolDrain, static_cast<VanityStyle>(rng.uniform(0, 1)), true);
    default:
      break;
  }
  const auto victim = random_address(rng);
  const auto receiver = control == NegativeControl::IsaPartial
                            ? vanity_address(rng, static_cast<VanityStyle>(rng.uniform(0, 2)))
                            : random_address(rng);
  TxBuilder b(rng, victim, wallet_balance(rng), ctx.block_time);
  compute_budget(rng, b);
  MultiTransfer spec;
  if (control == NegativeControl::StmtOneDrain) spec = {1, 1, true, true, 0};
  if (control == NegativeControl::StmtTwoTransfers) spec = {2, 0, false, true, 0};
  if (control == NegativeControl::IsaPartial) spec = {0, 1, true, rng.chance(1, 2), 0};
  multi_transfer(rng, b, victim, receiver, spec);
  return finish(b, Label::Benign);
}

Generated gen_market_swap(Rng& rng, const Context& ctx) {
  return gen_market_swap(rng, ctx, static_cast<MarketVariant>(rng.uniform(0, 3)));
}

Generated gen_market_swap(Rng& rng, const Context& ctx, MarketVariant variant) {
  const auto user = random_address(rng);
  TxBuilder b(rng, user, wallet_balance(rng), ctx.block_time);
  compute_budget(rng, b);
  switch (variant) {
    case MarketVariant::LogKeyword: {
      // Drainer-shaped on purpose: only the keyword keeps it out.
      const auto counterparty = random_address(rng);
      multi_transfer(rng, b, user, counterparty, {2, 0, true, true, 0});
      static constexpr std::array<std::string_view, 6> kLines = {
          "Program log: Instruction: Buy",       "Program log: Instruction: Sell",
          "Program log: Instruction: BuyExactIn", "Program log: Instruction: SellExactIn",
          "Program log: Instruction: Purchase",  "Program log: instruction: buy"};
      b.log(std::string(kLines[rng.uniform(0, kLines.size() - 1)]));
      break;
    }
    case MarketVariant::MarketBeneficiary:
      multi_transfer(rng, b, user, pick_market(rng, ctx), {2, 0, true, true, 0});
      break;
    case MarketVariant::MarketLoser: {
      // The pool pays out two tokens for the user's SOL.
      const auto market = pick_market(rng, ctx);
      b.wallet(market, wallet_balance(rng));
      b.sol_transfer(user, market, rng.uniform(1, b.sol_available(user) - 1));
      for (const auto& [mint, decimals] : pick_mints(rng, 2)) {
        const auto src = b.token_account(market, mint, decimals, rng.amount());
        const auto dst = b.token_account(user, mint, decimals, 0);
        b.token_transfer(src, dst, b.token_available(src));
      }
      break;
    }
    case MarketVariant::NftSale: {
      // NFT handed to the marketplace via SetAuthority; marketplace pays SOL.
      const auto market = pick_market(rng, ctx);
      b.wallet(market, wallet_balance(rng));
      const auto nft = b.token_account(user, random_address(rng), 0, 1);
      b.set_authority(nft, "accountOwner", market);
      b.sol_transfer(market, user, rng.uniform(b.fee() + 1, b.sol_available(market) - 1));
      break;
    }
  }
  return finish(b, Label::Market);
}

Generated gen_self_dealing(Rng& rng, const Context& ctx) {
  const auto wallet = random_address(rng);
  TxBuilder b(rng, wallet, wallet_balance(rng), ctx.block_time);
  compute_budget(rng, b);
  // Consolidate two tokens into fresh accounts of the same wallet.
  for (const auto& [mint, decimals] : pick_mints(rng, 2)) {
    const auto src = b.token_account(wallet, mint, decimals, rng.amount());
    const auto dst = b.token_account(wallet, mint, decimals, 0);
    b.token_transfer(src, dst, b.token_available(src));
  }
  b.sol_transfer(wallet, wallet, rng.uniform(1, b.sol_available(wallet) - 1));
  return finish(b, Label::SelfDealing);
}

Generated gen_stmt_phish(Rng& rng, const Context& ctx, const StmtOptions& options) {
  if (options.n_tokens < 2) throw std::invalid_argument("gen_stmt_phish: n_tokens must be >= 2");
  const auto victim = random_address(rng);
  const auto phisher = ctx.phisher ? *ctx.phisher : random_address(rng);
  TxBuilder b(rng, victim, wallet_balance(rng), ctx.block_time);
  if (options.durable_nonce) b.advance_nonce(random_address(rng), victim);
  compute_budget(rng, b);
  std::uint32_t depth = 0;
  if (options.via_program) {
    b.other(random_address(rng), "claim");
    depth = 1;
  }
  Generated g;
  g.drained = multi_transfer(rng, b, victim, phisher, {options.n_tokens, 0, true, true, depth});
  g.tx = b.finish();
  g.label = Label::STMT;
  g.victim = victim;
  g.phisher = phisher;
  g.durable_nonce = options.durable_nonce;
  for (const auto& d : g.drained) g.involved_assets.push_back(d.asset);
  std::sort(g.involved_assets.begin(), g.involved_assets.end());
  return g;
}

Generated gen_aat_phish(Rng& rng, const Context& ctx, AatKind kind, bool perturbed) {
  const auto victim = random_address(rng);
  const auto phisher = ctx.phisher ? *ctx.phisher : random_address(rng);
  TxBuilder b(rng, victim, wallet_balance(rng), ctx.block_time);
  compute_budget(rng, b);
  Generated g;
  std::optional<Address> mint;
  switch (kind) {
    case AatKind::Wallet:
      b.assign(victim, phisher);
      g.label = Label::AAT_Wallet;
      break;
    case AatKind::Token: {
      const auto [m, decimals] = pick_mints(rng, 1).front();
      const auto account = b.token_account(victim, m, decimals, rng.amount());
      b.set_authority(account, perturbed ? "closeAccount" : "accountOwner", phisher);
      mint = m;
      g.label = perturbed ? Label::Benign : Label::AAT_Token;
      break;
    }
    case AatKind::Both: {
      // Wallet handed to the phishing program, which then takes the token account.
      const auto [m, decimals] = pick_mints(rng, 1).front();
      const auto account = b.token_account(victim, m, decimals, rng.amount());
      const auto accomplice = random_address(rng);
      b.assign(victim, phisher);
      b.other(phisher, "claim");
      b.set_authority(account, "accountOwner", accomplice, 1);
      mint = m;
      g.label = Label::AAT_Both;
      break;
    }
  }
  g.tx = b.finish();
  if (g.label != Label::Benign) {
    g.victim = victim;
    g.phisher = phisher;
    if (mint) g.involved_assets.push_back(Asset::token(*mint));
  }
  return g;
}

Generated gen_isa_phish(Rng& rng, const Context& ctx) {
  const auto variant = static_cast<IsaVariant>(rng.uniform(0, 1));
  const auto style = static_cast<VanityStyle>(rng.uniform(0, 2));
  return gen_isa_phish(rng, ctx, variant, style);
}

Generated gen_isa_phish(Rng& rng, const Context& ctx, IsaVariant variant, VanityStyle style, bool perturbed) {
  Address beneficiary;
  if (perturbed) {
    // Official accounts that carry the patterns themselves.
    beneficiary = Address::parse(style == VanityStyle::Prefix ? "ComputeBudget111111111111111111111111111111"
                                                              : "SysvarRent111111111111111111111111111111111");
    variant = IsaVariant::SolDrain;
  } else {
    beneficiary = ctx.phisher ? *ctx.phisher : vanity_address(rng, style);
  }
  const auto victim = random_address(rng);
  Generated g;

  if (variant == IsaVariant::TokenDrain) {
    TxBuilder b(rng, victim, wallet_balance(rng), ctx.block_time);
    compute_budget(rng, b);
    b.wallet(beneficiary, wallet_balance(rng));
    const auto [mint, decimals] = pick_mints(rng, 1).front();
    const auto src = b.token_account(victim, mint, decimals, rng.amount());
    const auto dst = b.token_account(beneficiary, mint, decimals, 0);
    b.token_transfer(src, dst, b.token_available(src));
    if (rng.chance(1, 2)) b.sol_transfer(victim, beneficiary, rng.uniform(1, b.sol_available(victim) - 1));
    g.tx = b.finish();
    g.drained.push_back({src, Asset::token(mint)});
  } else if (perturbed) {
    // Victim pays and sends everything left.
    TxBuilder b(rng, victim, wallet_balance(rng), ctx.block_time);
    b.wallet(beneficiary, 1'009'200);
    b.sol_transfer(victim, beneficiary, b.sol_available(victim));
    g.tx = b.finish();
    g.drained.push_back({victim, Asset::native()});
  } else {
    // Phisher sponsors the fee; the victim's whole SOL balance moves.
    TxBuilder b(rng, beneficiary, wallet_balance(rng), ctx.block_time);
    b.wallet(victim, rng.amount() + 1'000'000);
    b.signer(victim);
    b.sol_transfer(victim, beneficiary, b.sol_available(victim));
    g.tx = b.finish();
    g.drained.push_back({victim, Asset::native()});
  }

  if (perturbed) {
    g.label = Label::Benign;
    g.drained.clear();
    return g;
  }
  g.label = Label::ISA;
  g.victim = victim;
  g.phisher = beneficiary;
  for (const auto& d : g.drained) g.involved_assets.push_back(d.asset);
  return g;
}

std::map<std::string, Label> LabeledCorpus::label_map() const {
  std::map<std::string, Label> out;
  for (std::size_t i = 0; i < transactions.size(); ++i) out.emplace(transactions[i].signature, labels[i]);
  return out;
}

CorpusParams CorpusParams::mixed(std::uint64_t seed, std::size_t total) {
  CorpusParams p;
  p.seed = seed;
  const auto benign = total * 4 / 10;
  const auto market = total / 10;
  const auto self = total / 10;
  const auto phishing = total - benign - market - self;
  const auto stmt = phishing / 3;
  const auto isa = phishing / 3;
  const auto aat = phishing - stmt - isa;
  p.counts = {
      {Label::Benign, benign},
      {Label::Market, market},
      {Label::SelfDealing, self},
      {Label::STMT, stmt},
      {Label::AAT_Wallet, aat / 3 + (aat % 3 > 0)},
      {Label::AAT_Token, aat / 3 + (aat % 3 > 1)},
      {Label::AAT_Both, aat / 3},
      {Label::ISA, isa},
  };
  return p;
}

namespace {

PhishType family_of(Label l) { return *expected_types(l).begin(); }

struct Job {
  Label label;
  std::optional<std::size_t> phisher;  // index into the scripted phishers
  UnixSeconds time = 0;
  bool follow_up = false;
};

std::size_t count_of(const CorpusParams& p, Label l) {
  auto it = p.counts.find(l);
  return it == p.counts.end() ? 0 : it->second;
}

}  // namespace

LabeledCorpus generate_corpus(const CorpusParams& params) {
  Rng rng(params.seed);
  LabeledCorpus corpus;
  auto& manifest = corpus.manifest;
  manifest.seed = params.seed;
  for (const auto& [l, _] : kLabelNames) {
    manifest.requested[l] = count_of(params, l);
    manifest.tallies[l] = 0;
  }

  std::vector<Job> jobs;
  auto& phishers = manifest.phishers;

  // Phishing jobs, each family sharing a pool of phishers round-robin.
  auto add_family = [&](PhishType family, std::vector<Label> labels) {
    if (labels.empty()) return;
    const auto pool = std::min(std::max<std::size_t>(params.phishers_per_family, 1), labels.size());
    const auto base = phishers.size();
    for (std::size_t i = 0; i < pool; ++i) {
      ScriptedPhisher p;
      p.family = family;
      p.address = family == PhishType::ISA ? vanity_address(rng, static_cast<VanityStyle>(i % 3)) : random_address(rng);
      phishers.push_back(p);
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const auto idx = base + i % pool;
      ++phishers[idx].attempts;
      jobs.push_back({labels[i], idx, 0, false});
    }
  };
  add_family(PhishType::STMT, std::vector<Label>(count_of(params, Label::STMT), Label::STMT));
  {
    std::vector<Label> aat;
    std::array<std::size_t, 3> left = {count_of(params, Label::AAT_Wallet), count_of(params, Label::AAT_Token),
                                       count_of(params, Label::AAT_Both)};
    constexpr std::array<Label, 3> kinds = {Label::AAT_Wallet, Label::AAT_Token, Label::AAT_Both};
    while (left[0] + left[1] + left[2] > 0) {
      for (std::size_t k = 0; k < 3; ++k) {
        if (left[k] > 0) {
          aat.push_back(kinds[k]);
          --left[k];
        }
      }
    }
    add_family(PhishType::AAT, std::move(aat));
  }
  add_family(PhishType::ISA, std::vector<Label>(count_of(params, Label::ISA), Label::ISA));

  // Scripted lifecycles: evenly spaced attempts over [first, first + window].
  std::vector<UnixSeconds> dormant(phishers.size());
  std::vector<std::size_t> issued(phishers.size(), 0);
  for (std::size_t i = 0; i < phishers.size(); ++i) {
    auto& p = phishers[i];
    p.first_phish = kCorpusStart + static_cast<UnixSeconds>(rng.uniform(0, 200)) * kDay +
                    static_cast<UnixSeconds>(rng.uniform(0, kDay - 1));
    const auto window = p.attempts > 1 ? static_cast<UnixSeconds>(rng.uniform(kDay, 120 * kDay)) : 0;
    p.last_phish = p.first_phish + window;
    p.last_activity = p.last_phish;
    dormant[i] = static_cast<UnixSeconds>(rng.uniform(3600, 60 * kDay));
  }
  for (auto& job : jobs) {
    auto& p = phishers[*job.phisher];
    const auto k = issued[*job.phisher]++;
    const auto window = p.last_phish - p.first_phish;
    job.time = p.attempts > 1 ? p.first_phish + window * static_cast<UnixSeconds>(k) /
                                                    static_cast<UnixSeconds>(p.attempts - 1)
                              : p.first_phish;
  }

  // Benign jobs: phisher follow-ups first, then ordinary traffic.
  const auto benign = count_of(params, Label::Benign);
  const auto follow_ups = std::min(benign, phishers.size());
  for (std::size_t i = 0; i < follow_ups; ++i) {
    phishers[i].last_activity = phishers[i].last_phish + dormant[i];
    jobs.push_back({Label::Benign, i, phishers[i].last_activity, true});
  }
  auto random_time = [&] { return kCorpusStart + static_cast<UnixSeconds>(rng.uniform(0, 365 * kDay - 1)); };
  for (std::size_t i = follow_ups; i < benign; ++i) jobs.push_back({Label::Benign, std::nullopt, random_time(), false});
  for (std::size_t i = 0; i < count_of(params, Label::Market); ++i) {
    jobs.push_back({Label::Market, std::nullopt, random_time(), false});
  }
  for (std::size_t i = 0; i < count_of(params, Label::SelfDealing); ++i) {
    jobs.push_back({Label::SelfDealing, std::nullopt, random_time(), false});
  }

  const auto markets = default_markets();
  std::set<std::string> signatures;
  std::size_t benign_index = 0;
  std::size_t market_index = 0;
  for (const auto& job : jobs) {
    Context ctx;
    ctx.block_time = job.time;
    ctx.markets = &markets;
    if (job.phisher) ctx.phisher = phishers[*job.phisher].address;

    Generated g;
    switch (job.label) {
      case Label::Benign: {
        if (job.follow_up) {
          g = gen_benign_transfer(rng, ctx, BenignVariant::PhisherActivity);
          break;
        }
        // Cycle so every near-miss probe appears.
        switch (benign_index++ % 10) {
          case 4: g = gen_negative_control(rng, ctx, NegativeControl::StmtOneDrain); break;
          case 5: g = gen_negative_control(rng, ctx, NegativeControl::StmtTwoTransfers); break;
          case 6: g = gen_negative_control(rng, ctx, NegativeControl::AatWrongType); break;
          case 7: g = gen_negative_control(rng, ctx, NegativeControl::IsaAllowlisted); break;
          case 8: g = gen_negative_control(rng, ctx, NegativeControl::IsaPartial); break;
          default: g = gen_benign_transfer(rng, ctx); break;
        }
        break;
      }
      case Label::Market:
        g = gen_market_swap(rng, ctx, static_cast<MarketVariant>(market_index++ % 4));
        break;
      case Label::SelfDealing:
        g = gen_self_dealing(rng, ctx);
        break;
      case Label::STMT: {
        StmtOptions o;
        o.n_tokens = static_cast<std::size_t>(rng.uniform(2, 5));
        o.durable_nonce = rng.chance(1, 4);
        o.via_program = rng.chance(1, 4);
        g = gen_stmt_phish(rng, ctx, o);
        break;
      }
      case Label::AAT_Wallet: g = gen_aat_phish(rng, ctx, AatKind::Wallet); break;
      case Label::AAT_Token: g = gen_aat_phish(rng, ctx, AatKind::Token); break;
      case Label::AAT_Both: g = gen_aat_phish(rng, ctx, AatKind::Both); break;
      case Label::ISA: {
        const auto style = static_cast<VanityStyle>(*job.phisher % 3);
        g = gen_isa_phish(rng, ctx, static_cast<IsaVariant>(rng.uniform(0, 1)), style);
        break;
      }
    }
    // Pools generate their own Benign-labeled variants; the job label wins.
    if (job.label != Label::Benign && g.label != job.label) throw std::logic_error("generator label mismatch");
    if (!signatures.insert(g.tx.signature).second) throw std::logic_error("duplicate signature");
    corpus.truth.push_back(std::move(g));
  }

  // Chronological order; ties by signature.
  std::sort(corpus.truth.begin(), corpus.truth.end(), [](const Generated& a, const Generated& b) {
    if (a.tx.block_time != b.tx.block_time) return a.tx.block_time < b.tx.block_time;
    return a.tx.signature < b.tx.signature;
  });

  for (const auto& g : corpus.truth) {
    corpus.transactions.push_back(g.tx);
    corpus.labels.push_back(g.label);
    ++manifest.tallies[g.label];
    if (!is_phishing(g.label)) continue;
    const auto type = family_of(g.label);
    ++manifest.monthly_tally[analysis::format_month(analysis::month_of(g.tx.block_time))][type];
    for (const auto& a : g.involved_assets) ++manifest.mint_tally[a.key()];
    if (g.durable_nonce) manifest.durable_nonce.push_back(g.tx.signature);
  }
  return corpus;
}

nlohmann::ordered_json manifest_to_json(const Manifest& m) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["schema"] = "1";
  j["seed"] = m.seed;
  ordered_json counts = ordered_json::object();
  for (const auto& [l, n] : m.requested) counts[std::string(to_string(l))] = n;
  j["params"] = {{"counts", counts}};
  ordered_json tallies = ordered_json::object();
  std::size_t total = 0;
  std::size_t phishing = 0;
  for (const auto& [l, n] : m.tallies) {
    tallies[std::string(to_string(l))] = n;
    total += n;
    if (is_phishing(l)) phishing += n;
  }
  j["tallies"] = tallies;
  j["total"] = total;
  j["phishing_total"] = phishing;
  ordered_json monthly = ordered_json::object();
  for (const auto& [month, by_type] : m.monthly_tally) {
    ordered_json row = ordered_json::object();
    for (const auto& [t, n] : by_type) row[std::string(rules::to_string(t))] = n;
    monthly[month] = row;
  }
  j["monthly_tally"] = monthly;
  ordered_json phishers = ordered_json::array();
  for (const auto& p : m.phishers) {
    phishers.push_back({{"address", p.address.str()},
                        {"family", rules::to_string(p.family)},
                        {"attempts", p.attempts},
                        {"first_phish", p.first_phish},
                        {"last_phish", p.last_phish},
                        {"last_activity", p.last_activity},
                        {"phishing_period", p.last_phish - p.first_phish},
                        {"dormant_period", p.last_activity - p.last_phish}});
  }
  j["phishers"] = phishers;
  ordered_json mints = ordered_json::object();
  for (const auto& [k, n] : m.mint_tally) mints[k] = n;
  j["mint_tally"] = mints;
  j["durable_nonce"] = m.durable_nonce;
  return j;
}

std::filesystem::path write_corpus(const LabeledCorpus& corpus, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());

  std::vector<ingest::RawTransactionRecord> records;
  records.reserve(corpus.transactions.size());
  for (const auto& tx : corpus.transactions) records.push_back(ingest::make_record(tx, tx.block_time));
  ingest::write_records(dir / "corpus.jsonl", records);

  auto write_json = [](const std::filesystem::path& path, const nlohmann::ordered_json& j) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("write failed: " + path.string());
  };

  nlohmann::ordered_json labels = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < corpus.transactions.size(); ++i) {
    labels[corpus.transactions[i].signature] = to_string(corpus.labels[i]);
  }
  write_json(dir / "labels.json", labels);
  const auto manifest = dir / "manifest.json";
  write_json(manifest, manifest_to_json(corpus.manifest));
  return manifest;
}

GangScenario gen_gang_scenario(std::uint64_t seed) {
  Rng rng(seed);
  GangScenario s;
  UnixSeconds t = kCorpusStart + 30 * kDay;
  auto next_time = [&] { return t += static_cast<UnixSeconds>(rng.uniform(60, kDay)); };
  auto fresh = [&] {
    auto a = random_address(rng);
    s.labeled.insert(a);
    return a;
  };
  auto pay = [&](const Address& from, const Address& to) {
    TxBuilder b(rng, from, wallet_balance(rng), next_time());
    b.wallet(to, wallet_balance(rng));
    b.sol_transfer(from, to, rng.uniform(1, b.sol_available(from) - 1));
    s.transactions.push_back(b.finish());
  };
  auto pay_token = [&](const Address& from, const Address& to) {
    TxBuilder b(rng, from, wallet_balance(rng), next_time());
    const auto [mint, decimals] = pick_mints(rng, 1).front();
    const auto src = b.token_account(from, mint, decimals, rng.amount());
    const auto dst = b.token_account(to, mint, decimals, 0);
    b.token_transfer(src, dst, rng.uniform(1, b.token_available(src)));
    s.transactions.push_back(b.finish());
  };
  auto hand_over = [&](const Address& from, const Address& to) {
    TxBuilder b(rng, from, wallet_balance(rng), next_time());
    const auto [mint, decimals] = pick_mints(rng, 1).front();
    const auto account = b.token_account(from, mint, decimals, rng.amount());
    b.set_authority(account, "accountOwner", to);
    s.transactions.push_back(b.finish());
  };

  // StarOut: a hub distributing to five members.
  {
    GangScenario::ExpectedGang g{{}, "StarOut"};
    const auto hub = fresh();
    g.members.insert(hub);
    for (int i = 0; i < 5; ++i) {
      const auto m = fresh();
      g.members.insert(m);
      pay(hub, m);
      if (i % 2 == 0) pay_token(hub, m);
    }
    s.gangs.push_back(std::move(g));
  }
  // Tree: A->B, B->C, B->D, D->E (authority).
  {
    GangScenario::ExpectedGang g{{}, "Tree"};
    std::array<Address, 5> n;
    for (auto& a : n) {
      a = fresh();
      g.members.insert(a);
    }
    pay(n[0], n[1]);
    pay_token(n[1], n[2]);
    pay(n[1], n[3]);
    hand_over(n[3], n[4]);
    s.gangs.push_back(std::move(g));
  }
  // StarIn: five feeders aggregating into one collector.
  {
    GangScenario::ExpectedGang g{{}, "StarIn"};
    const auto collector = fresh();
    g.members.insert(collector);
    for (int i = 0; i < 5; ++i) {
      const auto m = fresh();
      g.members.insert(m);
      pay(m, collector);
      if (i % 2 == 1) pay_token(m, collector);
    }
    s.gangs.push_back(std::move(g));
  }
  for (int i = 0; i < 2; ++i) s.isolated.insert(fresh());

  // Noise: every labeled account trades with outsiders.
  for (const auto& a : std::vector<Address>(s.labeled.begin(), s.labeled.end())) {
    const auto outsider = random_address(rng);
    pay(a, outsider);
    if (rng.chance(1, 2)) pay(outsider, a);
  }
  std::sort(s.transactions.begin(), s.transactions.end(),
            [](const Transaction& a, const Transaction& b) { return a.block_time < b.block_time; });
  return s;
}

}  // namespace solphish::synth

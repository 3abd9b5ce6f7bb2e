#include "solphish/rules.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <fstream>
#include <thread>

#include "json.hpp"

namespace solphish::rules {

std::string_view to_string(PhishType type) {
  switch (type) {
    case PhishType::AAT: return "AAT";
    case PhishType::STMT: return "STMT";
    case PhishType::ISA: return "ISA";
  }
  return "?";
}

std::optional<PhishType> phish_type_from(std::string_view name) {
  if (name == "AAT") return PhishType::AAT;
  if (name == "STMT") return PhishType::STMT;
  if (name == "ISA") return PhishType::ISA;
  return std::nullopt;
}

std::string_view to_string(RejectReason reason) {
  switch (reason) {
    case RejectReason::LoserIsMarket: return "loser_is_market";
    case RejectReason::BeneficiaryIsMarket: return "beneficiary_is_market";
    case RejectReason::LogKeyword: return "log_keyword";
    case RejectReason::SelfDealing: return "self_dealing";
  }
  return "?";
}

std::string_view to_string(AuthorityScope scope) {
  return scope == AuthorityScope::Wallet ? "wallet" : "token";
}

std::string_view to_string(VanityMatch match) {
  switch (match) {
    case VanityMatch::None: return "none";
    case VanityMatch::Prefix: return "prefix";
    case VanityMatch::Suffix: return "suffix";
  }
  return "?";
}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

std::optional<std::string> MarketList::keyword_hit(std::span<const std::string> logs) const {
  for (const auto& line : logs) {
    const auto l = lower(line);
    for (const auto& k : keywords) {
      if (l.find(k) != std::string::npos) return k;
    }
  }
  return std::nullopt;
}

MarketList MarketList::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open markets file " + path.string());
  const auto j = nlohmann::json::parse(in);
  MarketList list;
  for (const auto& a : j.value("addresses", nlohmann::json::array())) {
    list.addresses.insert(Address::parse(a.get<std::string>()));
  }
  if (j.contains("keywords")) {
    list.keywords.clear();
    for (const auto& k : j["keywords"]) list.keywords.insert(lower(k.get<std::string>()));
    if (list.keywords.empty()) throw std::runtime_error(path.string() + ": keywords must be non-empty");
  }
  return list;
}

std::vector<std::string> read_address_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    out.push_back(line.substr(first, last - first + 1));
  }
  return out;
}

OfficialAllowlist OfficialAllowlist::load(const std::filesystem::path& path) {
  OfficialAllowlist list;
  for (auto& a : read_address_lines(path)) list.addresses.insert(std::move(a));
  return list;
}

std::set<Address> load_program_allowlist(const std::filesystem::path& path) {
  std::set<Address> out;
  for (const auto& a : read_address_lines(path)) out.insert(Address::parse(a));
  return out;
}

PrerequisiteVerdict check_prerequisites(const Transaction& tx, const Roles& roles, const MarketList& markets) {
  if (roles.loser && markets.contains(*roles.loser)) return RejectReason::LoserIsMarket;
  if (roles.beneficiary && markets.contains(*roles.beneficiary)) return RejectReason::BeneficiaryIsMarket;
  if (markets.keyword_hit(tx.logs)) return RejectReason::LogKeyword;
  if (roles.loser && roles.beneficiary && *roles.loser == *roles.beneficiary) return RejectReason::SelfDealing;
  return std::nullopt;
}

VanityMatch vanity_pattern(std::string_view address, const OfficialAllowlist& allowlist, std::string_view suffix) {
  if (allowlist.contains(address)) return VanityMatch::None;
  if (address.starts_with(kVanityPrefix)) return VanityMatch::Prefix;
  if (!suffix.empty() && address.ends_with(suffix)) return VanityMatch::Suffix;
  return VanityMatch::None;
}

std::size_t count_transfers(const Transaction& tx) {
  return static_cast<std::size_t>(std::count_if(tx.instructions.begin(), tx.instructions.end(), [](const auto& i) {
    return i.kind == InstructionKind::Transfer;
  }));
}

std::optional<StmtEvidence> detect_stmt(const Transaction& tx) {
  StmtEvidence ev;
  ev.transfer_count = count_transfers(tx);
  if (ev.transfer_count <= 2) return std::nullopt;
  for (const auto& e : tx.balances) {
    if (!e.asset.is_native() && e.drained()) ev.drained_tokens.push_back({e.account, e.asset});
  }
  if (ev.drained_tokens.size() < 2) return std::nullopt;
  ev.durable_nonce = std::any_of(tx.instructions.begin(), tx.instructions.end(),
                                 [](const auto& i) { return i.kind == InstructionKind::AdvanceNonce; });
  return ev;
}

namespace {

std::optional<Address> mint_of(const Transaction& tx, const Address& account) {
  for (const auto& e : tx.balances) {
    if (e.account == account && !e.asset.is_native()) return e.asset.mint();
  }
  return std::nullopt;
}

std::optional<IsaEvidence> detect_isa_with(const Transaction& tx, const Roles& roles,
                                           const OfficialAllowlist& allowlist, std::string_view suffix) {
  if (!roles.beneficiary) return std::nullopt;
  IsaEvidence ev;
  ev.transfer_count = count_transfers(tx);
  if (ev.transfer_count == 0) return std::nullopt;
  ev.drained = drained_assets(tx);
  if (ev.drained.empty()) return std::nullopt;
  ev.match = vanity_pattern(roles.beneficiary->str(), allowlist, suffix);
  if (ev.match == VanityMatch::None) return std::nullopt;
  ev.beneficiary = *roles.beneficiary;
  return ev;
}

}  // namespace

std::optional<AatEvidence> detect_aat(const Transaction& tx) {
  AatEvidence ev;
  for (const auto& ins : tx.instructions) {
    if (ins.kind == InstructionKind::Assign && ins.source) {
      ev.reassignments.push_back({*ins.source, *ins.source, ins.new_authority, AuthorityScope::Wallet,
                                  std::nullopt, ins.depth});
    } else if (ins.kind == InstructionKind::SetAuthority && ins.authority_type == kAccountOwnerAuthority &&
               ins.source) {
      auto old_owner = ins.authority ? ins.authority : std::optional<Address>(holder_of(tx, *ins.source));
      ev.reassignments.push_back({*ins.source, old_owner, ins.new_authority, AuthorityScope::Token,
                                  mint_of(tx, *ins.source), ins.depth});
    }
  }
  if (ev.reassignments.empty()) return std::nullopt;
  return ev;
}

std::optional<IsaEvidence> detect_isa(const Transaction& tx, const OfficialAllowlist& allowlist,
                                      std::string_view suffix) {
  Roles roles;
  try {
    roles = derive_roles(tx, RuleFamily::TransferLike);
  } catch (const RoleUnderdetermined&) {
    return std::nullopt;
  }
  return detect_isa_with(tx, roles, allowlist, suffix);
}

bool Detection::has(PhishType t) const {
  return std::find(phish_types.begin(), phish_types.end(), t) != phish_types.end();
}

std::vector<Asset> Detection::involved_assets() const {
  std::set<Asset> assets;
  if (stmt) {
    for (const auto& d : stmt->drained_tokens) assets.insert(d.asset);
  }
  if (isa) {
    for (const auto& d : isa->drained) assets.insert(d.asset);
  }
  if (aat) {
    for (const auto& r : aat->reassignments) {
      if (r.mint) assets.insert(Asset::token(*r.mint));
    }
  }
  return {assets.begin(), assets.end()};
}

Classification classify(const Transaction& tx, const RuleConfig& config) {
  Classification out;
  if (!tx.success) {
    out.diagnostics.push_back("failed transaction: not evaluated");
    return out;
  }

  Roles transfer_roles;
  Roles authority_roles;
  try {
    transfer_roles = derive_roles(tx, RuleFamily::TransferLike);
    authority_roles = derive_roles(tx, RuleFamily::AuthorityLike);
  } catch (const RoleUnderdetermined& e) {
    out.diagnostics.push_back(e.what());
    return out;
  }

  std::optional<StmtEvidence> stmt;
  std::optional<IsaEvidence> isa;
  out.transfer_verdict = check_prerequisites(tx, transfer_roles, config.markets);
  if (out.transfer_verdict) {
    out.diagnostics.push_back(std::string("transfer family rejected: ") +
                              std::string(to_string(*out.transfer_verdict)));
  } else if (transfer_roles.loser && transfer_roles.beneficiary) {
    stmt = detect_stmt(tx);
    isa = detect_isa_with(tx, transfer_roles, config.official, config.isa_suffix);
  }

  std::optional<AatEvidence> aat;
  const bool has_authority_ins = std::any_of(tx.instructions.begin(), tx.instructions.end(), [](const auto& i) {
    return i.kind == InstructionKind::Assign || i.kind == InstructionKind::SetAuthority;
  });
  if (has_authority_ins) {
    out.authority_verdict = check_prerequisites(tx, authority_roles, config.markets);
    if (out.authority_verdict) {
      out.diagnostics.push_back(std::string("authority family rejected: ") +
                                std::string(to_string(*out.authority_verdict)));
    } else if (authority_roles.loser && authority_roles.beneficiary) {
      aat = detect_aat(tx);
      if (aat && !config.benign_programs.empty()) {
        std::erase_if(aat->reassignments, [&](const Reassignment& r) {
          const bool benign = r.new_owner && config.benign_programs.contains(*r.new_owner);
          if (benign) out.diagnostics.push_back("reassignment to allowlisted program " + r.new_owner->str());
          return benign;
        });
        if (aat->reassignments.empty()) aat.reset();
      }
    }
  }

  if (!aat && !stmt && !isa) return out;

  Detection d;
  d.signature = tx.signature;
  d.slot = tx.slot;
  d.block_time = tx.block_time;
  if (aat) d.phish_types.push_back(PhishType::AAT);
  if (stmt) d.phish_types.push_back(PhishType::STMT);
  if (isa) d.phish_types.push_back(PhishType::ISA);
  const auto& roles = aat ? authority_roles : transfer_roles;
  d.victim = *roles.loser;
  d.phisher = *roles.beneficiary;
  d.aat = std::move(aat);
  d.stmt = std::move(stmt);
  d.isa = std::move(isa);
  out.detection = std::move(d);
  return out;
}

std::vector<Classification> classify_all(std::span<const Transaction> txs, const RuleConfig& config,
                                         unsigned threads) {
  std::vector<Classification> out(txs.size());
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(txs.size(), 1)));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (auto i = next++; i < txs.size(); i = next++) out[i] = classify(txs[i], config);
  };
  {
    std::vector<std::jthread> pool;
    for (unsigned i = 1; i < threads; ++i) pool.emplace_back(worker);
    worker();
  }
  return out;
}

}  // namespace solphish::rules

#include "solphish/txmodel.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>

#include "solphish/base58.hpp"

namespace solphish {

Address Address::parse(std::string_view text) {
  auto parsed = try_parse(text);
  if (!parsed) throw InvalidAddress(std::string(text));
  return *std::move(parsed);
}

std::optional<Address> Address::try_parse(std::string_view text) {
  if (text.size() < 32 || text.size() > 44) return std::nullopt;
  auto bytes = base58::decode(text);
  if (!bytes || bytes->size() != 32) return std::nullopt;
  return Address(base58::encode(*bytes));
}

namespace programs {
const Address kSystem = Address::parse("11111111111111111111111111111111");
const Address kToken = Address::parse("TokenkegQfeZyiNwAJbNbGKPFXCWuBvf9Ss623VQ5DA");
const Address kToken2022 = Address::parse("TokenzQdBNbLqP5VEhdkAS6EPFLC1PHnBqCXEpPxuEb");
const Address kAssociatedToken = Address::parse("ATokenGPvbdGVxr1b2hvZbsiqW5xWH25efTNsLJA8knL");
const Address kComputeBudget = Address::parse("ComputeBudget111111111111111111111111111111");
const Address kMemo = Address::parse("MemoSq4gqABAXKb96qnH8TysNcWxMyWCqXgDLGmfcHr");

bool is_token_program(const Address& program) {
  return program == kToken || program == kToken2022;
}
}  // namespace programs

Asset Asset::from_key(std::string_view key) {
  if (key == kNativeKey) return native();
  return token(Address::parse(key));
}

std::string_view to_string(InstructionKind kind) {
  switch (kind) {
    case InstructionKind::Transfer: return "Transfer";
    case InstructionKind::Assign: return "Assign";
    case InstructionKind::SetAuthority: return "SetAuthority";
    case InstructionKind::AdvanceNonce: return "AdvanceNonce";
    case InstructionKind::CreateAccount: return "CreateAccount";
    case InstructionKind::Other: return "Other";
  }
  return "Other";
}

std::string normalize_authority_type(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  for (char c : raw) {
    if (c == ' ') continue;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

std::int64_t net_delta(const Transaction& tx, const Address& account, const Asset& asset) {
  for (const auto& entry : tx.balances) {
    if (entry.account == account && entry.asset == asset) return entry.delta();
  }
  return 0;
}

std::vector<AssetRef> drained_assets(const Transaction& tx) {
  std::vector<AssetRef> out;
  for (const auto& entry : tx.balances) {
    if (entry.drained()) out.push_back({entry.account, entry.asset});
  }
  return out;
}

Address holder_of(const Transaction& tx, const Address& account) {
  for (const auto& entry : tx.balances) {
    if (entry.account == account && entry.owner) return *entry.owner;
  }
  return account;
}

namespace {

bool is_authority_instruction(const Instruction& ins) {
  return ins.kind == InstructionKind::Assign || ins.kind == InstructionKind::SetAuthority;
}

std::optional<Address> pick_by_count(const std::map<Address, std::set<Asset>>& classes,
                                     const Address& fee_payer) {
  std::size_t best = 0;
  for (const auto& [holder, assets] : classes) best = std::max(best, assets.size());
  if (best == 0) return std::nullopt;

  auto fee_payer_it = classes.find(fee_payer);
  if (fee_payer_it != classes.end() && fee_payer_it->second.size() == best) return fee_payer;
  // std::map iterates in address order, so the first hit is the smallest.
  for (const auto& [holder, assets] : classes) {
    if (assets.size() == best) return holder;
  }
  return std::nullopt;
}

Roles transfer_roles(const Transaction& tx) {
  std::map<Address, std::set<Asset>> losing;
  std::map<Address, std::set<Asset>> gaining;
  for (const auto& entry : tx.balances) {
    const auto d = entry.delta();
    if (d < 0) losing[entry.holder()].insert(entry.asset);
    if (d > 0) gaining[entry.holder()].insert(entry.asset);
  }
  return Roles{pick_by_count(losing, tx.fee_payer), pick_by_count(gaining, tx.fee_payer)};
}

Roles authority_roles(const Transaction& tx, const Instruction& ins) {
  Roles roles;
  roles.beneficiary = ins.new_authority;
  if (ins.kind == InstructionKind::Assign) {
    roles.loser = ins.source ? ins.source : std::optional<Address>(tx.fee_payer);
  } else if (ins.authority) {
    roles.loser = ins.authority;
  } else if (ins.source) {
    roles.loser = holder_of(tx, *ins.source);
  } else {
    roles.loser = tx.fee_payer;
  }
  return roles;
}

}  // namespace

Roles derive_roles(const Transaction& tx, RuleFamily family) {
  const auto authority_it =
      std::find_if(tx.instructions.begin(), tx.instructions.end(), is_authority_instruction);
  const bool moves = std::any_of(tx.balances.begin(), tx.balances.end(),
                                 [](const BalanceEntry& e) { return e.delta() != 0; });
  if (!moves && authority_it == tx.instructions.end()) throw RoleUnderdetermined(tx.signature);

  if (family == RuleFamily::TransferLike) return transfer_roles(tx);
  if (authority_it == tx.instructions.end()) return Roles{};
  return authority_roles(tx, *authority_it);
}

std::vector<Address> participants(const Transaction& tx) {
  std::set<Address> out;
  for (const auto& e : tx.balances) {
    out.insert(e.account);
    if (e.owner) out.insert(*e.owner);
  }
  for (const auto& ins : tx.instructions) {
    out.insert(ins.program);
    for (const auto* a : {&ins.source, &ins.destination, &ins.new_authority, &ins.authority}) {
      if (*a) out.insert(**a);
    }
  }
  return {out.begin(), out.end()};
}

std::int64_t native_delta_sum(const Transaction& tx) {
  std::int64_t sum = 0;
  for (const auto& entry : tx.balances) {
    if (entry.asset.is_native()) sum += entry.delta();
  }
  return sum;
}

std::vector<std::string> validate(const Transaction& tx) {
  std::vector<std::string> issues;
  auto sig = base58::decode(tx.signature);
  if (!sig || sig->size() != 64) issues.push_back("signature is not a 64-byte base58 value");
  if (tx.signers.empty()) {
    issues.push_back("no signers");
  } else if (tx.fee_payer != tx.signers.front()) {
    issues.push_back("fee payer is not the first signer");
  }

  std::set<Address> known;
  std::set<std::pair<Address, Asset>> seen;
  for (const auto& entry : tx.balances) {
    known.insert(entry.account);
    if (!seen.emplace(entry.account, entry.asset).second) {
      issues.push_back("duplicate balance entry for " + entry.account.str() + "/" +
                       entry.asset.key());
    }
    if (entry.asset.is_native() && entry.decimals != kNativeDecimals) {
      issues.push_back("native entry for " + entry.account.str() + " has decimals != 9");
    }
  }

  for (std::size_t i = 0; i < tx.instructions.size(); ++i) {
    const auto& ins = tx.instructions[i];
    const auto where = "instruction " + std::to_string(i) + ": ";
    switch (ins.kind) {
      case InstructionKind::Transfer:
        if (!ins.source || !ins.destination || !ins.amount)
          issues.push_back(where + "transfer without source/destination/amount");
        break;
      case InstructionKind::SetAuthority:
        if (!ins.authority_type) issues.push_back(where + "setAuthority without authority type");
        break;
      case InstructionKind::Assign:
        if (!ins.new_authority) issues.push_back(where + "assign without new owner");
        break;
      default:
        break;
    }
    for (const auto* named : {&ins.source, &ins.destination}) {
      if (*named && !known.contains(**named) && **named != ins.program &&
          **named != programs::kSystem) {
        issues.push_back(where + "account " + (*named)->str() + " missing from balances");
      }
    }
  }

  if (native_delta_sum(tx) != -static_cast<std::int64_t>(tx.fee)) {
    issues.push_back("native deltas do not sum to -fee");
  }
  return issues;
}

}  // namespace solphish

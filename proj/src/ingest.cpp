#include "solphish/ingest.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

namespace solphish::ingest {

using nlohmann::json;

namespace {

class Cursor {
 public:
  Cursor(const json& node, std::string path) : node_(node), path_(std::move(path)) {}

  const json& node() const { return node_; }
  const std::string& path() const { return path_; }

  [[noreturn]] void fail(const std::string& what) const { throw MalformedPayload(path_, what); }

  bool has(std::string_view key) const {
    return node_.is_object() && node_.contains(key) && !node_.at(std::string(key)).is_null();
  }

  Cursor at(std::string_view key) const {
    if (!node_.is_object()) fail("expected object");
    auto it = node_.find(key);
    if (it == node_.end()) throw MalformedPayload(path_ + "." + std::string(key), "missing");
    return Cursor(*it, path_ + "." + std::string(key));
  }

  Cursor at(std::size_t index) const {
    if (!node_.is_array() || index >= node_.size()) fail("index " + std::to_string(index) + " out of range");
    return Cursor(node_[index], path_ + "[" + std::to_string(index) + "]");
  }

  std::size_t size() const {
    if (!node_.is_array()) fail("expected array");
    return node_.size();
  }

  std::string string() const {
    if (!node_.is_string()) fail("expected string");
    return node_.get<std::string>();
  }

  Address address() const {
    auto parsed = Address::try_parse(string());
    if (!parsed) fail("not a 32-byte base58 address");
    return *parsed;
  }

  std::uint64_t u64() const {
    if (node_.is_number_unsigned()) return node_.get<std::uint64_t>();
    if (node_.is_number_integer() && node_.get<std::int64_t>() >= 0) return node_.get<std::uint64_t>();
    if (node_.is_string()) {
      const auto& s = node_.get_ref<const std::string&>();
      if (!s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; })) {
        try {
          return std::stoull(s);
        } catch (const std::out_of_range&) {
          fail("amount out of range");
        }
      }
    }
    fail("expected unsigned integer");
  }

  std::int64_t i64() const {
    if (!node_.is_number_integer()) fail("expected integer");
    return node_.get<std::int64_t>();
  }

  bool boolean() const {
    if (!node_.is_boolean()) fail("expected boolean");
    return node_.get<bool>();
  }

  std::optional<Address> opt_address(std::string_view key) const {
    if (!has(key)) return std::nullopt;
    return at(key).address();
  }

 private:
  const json& node_;
  std::string path_;
};

InstructionKind kind_for(std::string_view type) {
  if (type == "transfer" || type == "transferChecked" || type == "transferWithSeed")
    return InstructionKind::Transfer;
  if (type == "assign" || type == "assignWithSeed") return InstructionKind::Assign;
  if (type == "setAuthority") return InstructionKind::SetAuthority;
  if (type == "advanceNonce") return InstructionKind::AdvanceNonce;
  if (type == "createAccount" || type == "createAccountWithSeed") return InstructionKind::CreateAccount;
  return InstructionKind::Other;
}

std::optional<Address> first_address(const Cursor& info, std::initializer_list<std::string_view> keys) {
  for (auto key : keys) {
    if (info.has(key)) return info.at(key).address();
  }
  return std::nullopt;
}

Instruction parse_instruction(const Cursor& c, std::uint32_t depth) {
  Instruction ins;
  ins.program = c.at("programId").address();
  ins.depth = depth;

  if (!c.has("parsed")) {
    ins.kind = InstructionKind::Other;
    ins.other_name = "raw";
    return ins;
  }
  const auto parsed = c.at("parsed");
  if (parsed.node().is_string()) {
    // spl-memo and friends parse to a bare string.
    std::string name = c.has("program") ? c.at("program").string() : "unknown";
    if (name.rfind("spl-", 0) == 0) name.erase(0, 4);
    ins.kind = InstructionKind::Other;
    ins.other_name = name;
    return ins;
  }

  const auto type = parsed.at("type").string();
  ins.kind = kind_for(type);
  if (ins.kind == InstructionKind::Other) {
    ins.other_name = type;
    return ins;
  }

  const auto info = parsed.at("info");
  switch (ins.kind) {
    case InstructionKind::Transfer:
      ins.source = info.at("source").address();
      ins.destination = info.at("destination").address();
      if (info.has("lamports")) {
        ins.amount = info.at("lamports").u64();
      } else if (info.has("amount")) {
        ins.amount = info.at("amount").u64();
      } else if (info.has("tokenAmount")) {
        ins.amount = info.at("tokenAmount").at("amount").u64();
      } else {
        info.fail("transfer without amount");
      }
      ins.mint = info.opt_address("mint");
      ins.authority = first_address(info, {"authority", "multisigAuthority"});
      break;
    case InstructionKind::Assign:
      ins.source = info.at("account").address();
      ins.new_authority = info.at("owner").address();
      break;
    case InstructionKind::SetAuthority:
      ins.source = first_address(info, {"account", "mint"});
      ins.authority_type = normalize_authority_type(info.at("authorityType").string());
      ins.new_authority = info.opt_address("newAuthority");
      ins.authority = first_address(info, {"authority", "multisigAuthority"});
      break;
    case InstructionKind::AdvanceNonce:
      ins.source = info.at("nonceAccount").address();
      ins.authority = info.opt_address("nonceAuthority");
      break;
    case InstructionKind::CreateAccount:
      ins.source = info.at("source").address();
      ins.destination = info.at("newAccount").address();
      ins.amount = info.at("lamports").u64();
      ins.new_authority = info.opt_address("owner");
      break;
    case InstructionKind::Other:
      break;
  }
  return ins;
}

std::uint32_t inner_depth(const Cursor& c) {
  if (c.has("stackHeight")) {
    const auto height = c.at("stackHeight").u64();
    return height >= 2 ? static_cast<std::uint32_t>(height - 1) : 1;
  }
  return 1;
}

struct TokenSide {
  std::optional<Address> owner;
  std::uint64_t amount = 0;
  std::uint8_t decimals = 0;
};

}  // namespace

Transaction normalize_payload(const json& payload) {
  const Cursor root(payload, "$");
  if (!payload.is_object()) root.fail("payload is not an object");
  const auto meta = root.at("meta");
  const auto message = root.at("transaction").at("message");

  Transaction tx;
  tx.signature = root.at("transaction").at("signatures").at(0).string();
  tx.slot = root.at("slot").u64();
  tx.block_time = root.has("blockTime") ? root.at("blockTime").i64() : 0;
  tx.success = !meta.has("err");
  tx.fee = meta.at("fee").u64();

  // Account keys: jsonParsed gives objects, plain json gives strings.
  const auto keys = message.at("accountKeys");
  std::size_t required_signatures = 0;
  if (message.has("header")) {
    required_signatures = message.at("header").at("numRequiredSignatures").u64();
  }
  std::vector<Address> accounts;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    const auto key = keys.at(i);
    if (key.node().is_string()) {
      accounts.push_back(key.address());
      if (i < required_signatures) tx.signers.push_back(accounts.back());
    } else {
      accounts.push_back(key.at("pubkey").address());
      if (key.has("signer") && key.at("signer").boolean()) tx.signers.push_back(accounts.back());
    }
  }
  if (accounts.empty()) keys.fail("no account keys");
  tx.fee_payer = accounts.front();

  // Top-level instructions, each followed by its inner instructions.
  std::map<std::uint64_t, Cursor> inner_by_index;
  if (meta.has("innerInstructions")) {
    const auto inner = meta.at("innerInstructions");
    for (std::size_t i = 0; i < inner.size(); ++i) {
      const auto group = inner.at(i);
      inner_by_index.emplace(group.at("index").u64(), group.at("instructions"));
    }
  }
  const auto top = message.at("instructions");
  for (std::size_t i = 0; i < top.size(); ++i) {
    tx.instructions.push_back(parse_instruction(top.at(i), 0));
    if (auto it = inner_by_index.find(i); it != inner_by_index.end()) {
      const auto& group = it->second;
      for (std::size_t j = 0; j < group.size(); ++j) {
        const auto c = group.at(j);
        tx.instructions.push_back(parse_instruction(c, inner_depth(c)));
      }
    }
  }

  if (meta.has("logMessages")) {
    const auto logs = meta.at("logMessages");
    for (std::size_t i = 0; i < logs.size(); ++i) tx.logs.push_back(logs.at(i).string());
  }

  const auto pre = meta.at("preBalances");
  const auto post = meta.at("postBalances");
  if (pre.size() != accounts.size() || post.size() != accounts.size()) {
    meta.fail("pre/postBalances length differs from accountKeys");
  }
  for (std::size_t i = 0; i < accounts.size(); ++i) {
    BalanceEntry entry;
    entry.account = accounts[i];
    entry.asset = Asset::native();
    entry.pre = pre.at(i).u64();
    entry.post = post.at(i).u64();
    entry.decimals = kNativeDecimals;
    tx.balances.push_back(std::move(entry));
  }

  // (accountIndex, mint) -> (pre side, post side)
  std::map<std::pair<std::uint64_t, Address>, std::pair<std::optional<TokenSide>, std::optional<TokenSide>>>
      tokens;
  auto collect = [&](std::string_view field, bool is_pre) {
    if (!meta.has(field)) return;
    const auto list = meta.at(field);
    for (std::size_t i = 0; i < list.size(); ++i) {
      const auto e = list.at(i);
      const auto index = e.at("accountIndex").u64();
      if (index >= accounts.size()) e.at("accountIndex").fail("account index out of range");
      TokenSide side;
      side.owner = e.opt_address("owner");
      const auto ui = e.at("uiTokenAmount");
      side.amount = ui.at("amount").u64();
      side.decimals = static_cast<std::uint8_t>(ui.at("decimals").u64());
      auto& slot = tokens[{index, e.at("mint").address()}];
      (is_pre ? slot.first : slot.second) = side;
    }
  };
  collect("preTokenBalances", true);
  collect("postTokenBalances", false);
  for (const auto& [key, sides] : tokens) {
    const auto& [before, after] = sides;
    BalanceEntry entry;
    entry.account = accounts[key.first];
    entry.asset = Asset::token(key.second);
    entry.owner = before && before->owner ? before->owner : (after ? after->owner : std::nullopt);
    entry.pre = before ? before->amount : 0;
    entry.post = after ? after->amount : 0;
    entry.decimals = before ? before->decimals : after->decimals;
    tx.balances.push_back(std::move(entry));
  }
  return tx;
}

Transaction normalize(const RawTransactionRecord& raw) {
  json payload;
  try {
    payload = json::parse(raw.payload);
  } catch (const json::parse_error& e) {
    throw MalformedPayload("$", std::string("invalid JSON: ") + e.what());
  }
  return normalize_payload(payload);
}

namespace {

std::string camel_authority_type(const std::string& normalized) {
  static const std::map<std::string, std::string> known = {
      {"accountowner", "accountOwner"},
      {"minttokens", "mintTokens"},
      {"freezeaccount", "freezeAccount"},
      {"closeaccount", "closeAccount"},
  };
  auto it = known.find(normalized);
  return it == known.end() ? normalized : it->second;
}

std::string program_label(const Address& program) {
  if (program == programs::kSystem) return "system";
  if (program == programs::kToken) return "spl-token";
  if (program == programs::kToken2022) return "spl-token-2022";
  if (program == programs::kAssociatedToken) return "spl-associated-token-account";
  if (program == programs::kMemo) return "spl-memo";
  return "unknown";
}

std::uint8_t decimals_of(const Transaction& tx, const Address& mint) {
  for (const auto& e : tx.balances) {
    if (!e.asset.is_native() && e.asset.mint() == mint) return e.decimals;
  }
  return 0;
}

json encode_instruction(const Transaction& tx, const Instruction& ins) {
  json out = json::object();
  out["programId"] = ins.program.str();
  out["program"] = program_label(ins.program);
  if (ins.kind == InstructionKind::Other && ins.other_name == "raw") {
    out.erase("program");
    out["accounts"] = json::array();
    out["data"] = "";
    return out;
  }

  json info = json::object();
  std::string type;
  switch (ins.kind) {
    case InstructionKind::Transfer:
      info["source"] = ins.source->str();
      info["destination"] = ins.destination->str();
      if (!programs::is_token_program(ins.program)) {
        type = "transfer";
        info["lamports"] = *ins.amount;
      } else if (ins.mint) {
        type = "transferChecked";
        info["mint"] = ins.mint->str();
        const auto decimals = decimals_of(tx, *ins.mint);
        info["tokenAmount"] = {{"amount", std::to_string(*ins.amount)}, {"decimals", decimals}};
      } else {
        type = "transfer";
        info["amount"] = std::to_string(*ins.amount);
      }
      if (ins.authority) info["authority"] = ins.authority->str();
      break;
    case InstructionKind::Assign:
      type = "assign";
      info["account"] = ins.source->str();
      info["owner"] = ins.new_authority->str();
      break;
    case InstructionKind::SetAuthority:
      type = "setAuthority";
      if (ins.source) info["account"] = ins.source->str();
      info["authorityType"] = camel_authority_type(*ins.authority_type);
      info["newAuthority"] = ins.new_authority ? json(ins.new_authority->str()) : json(nullptr);
      if (ins.authority) info["authority"] = ins.authority->str();
      break;
    case InstructionKind::AdvanceNonce:
      type = "advanceNonce";
      info["nonceAccount"] = ins.source->str();
      info["recentBlockhashesSysvar"] = "SysvarRecentB1ockHashes11111111111111111111";
      if (ins.authority) info["nonceAuthority"] = ins.authority->str();
      break;
    case InstructionKind::CreateAccount:
      type = "createAccount";
      info["source"] = ins.source->str();
      info["newAccount"] = ins.destination->str();
      info["lamports"] = *ins.amount;
      info["space"] = 0;
      if (ins.new_authority) info["owner"] = ins.new_authority->str();
      break;
    case InstructionKind::Other:
      type = ins.other_name;
      break;
  }
  out["parsed"] = {{"type", type}, {"info", info}};
  return out;
}

}  // namespace

json encode_payload(const Transaction& tx) {
  std::vector<Address> accounts;
  std::map<Address, std::size_t> index_of;
  json pre = json::array();
  json post = json::array();
  for (const auto& e : tx.balances) {
    if (!e.asset.is_native()) continue;
    index_of.emplace(e.account, accounts.size());
    accounts.push_back(e.account);
    pre.push_back(e.pre);
    post.push_back(e.post);
  }

  json keys = json::array();
  for (const auto& a : accounts) {
    const bool signer = std::find(tx.signers.begin(), tx.signers.end(), a) != tx.signers.end();
    keys.push_back({{"pubkey", a.str()}, {"signer", signer}, {"source", "transaction"}, {"writable", true}});
  }

  json pre_tokens = json::array();
  json post_tokens = json::array();
  for (const auto& e : tx.balances) {
    if (e.asset.is_native()) continue;
    auto it = index_of.find(e.account);
    if (it == index_of.end()) {
      throw std::invalid_argument("token account " + e.account.str() + " has no native entry");
    }
    auto side = [&](std::uint64_t amount) {
      json j = {{"accountIndex", it->second},
                {"mint", e.asset.mint().str()},
                {"uiTokenAmount", {{"amount", std::to_string(amount)}, {"decimals", e.decimals}}}};
      if (e.owner) j["owner"] = e.owner->str();
      return j;
    };
    if (e.pre != 0) pre_tokens.push_back(side(e.pre));
    post_tokens.push_back(side(e.post));
  }

  json top = json::array();
  json inner = json::array();
  for (const auto& ins : tx.instructions) {
    auto encoded = encode_instruction(tx, ins);
    if (ins.depth == 0) {
      top.push_back(std::move(encoded));
      continue;
    }
    if (top.empty()) throw std::invalid_argument("inner instruction before any top-level one");
    encoded["stackHeight"] = ins.depth + 1;
    const auto parent = top.size() - 1;
    if (inner.empty() || inner.back()["index"] != parent) {
      inner.push_back({{"index", parent}, {"instructions", json::array()}});
    }
    inner.back()["instructions"].push_back(std::move(encoded));
  }

  json meta = {{"err", tx.success ? json(nullptr) : json({{"InstructionError", {0, "Custom"}}})},
               {"fee", tx.fee},
               {"preBalances", pre},
               {"postBalances", post},
               {"preTokenBalances", pre_tokens},
               {"postTokenBalances", post_tokens},
               {"innerInstructions", inner},
               {"logMessages", tx.logs}};
  json message = {{"accountKeys", keys}, {"instructions", top}};
  return {{"blockTime", tx.block_time},
          {"slot", tx.slot},
          {"meta", meta},
          {"transaction", {{"signatures", {tx.signature}}, {"message", message}}}};
}

RawTransactionRecord make_record(const Transaction& tx, UnixSeconds fetched_at) {
  return {tx.signature, encode_payload(tx).dump(), fetched_at};
}

std::string record_to_line(const RawTransactionRecord& record) {
  // Assembled by hand so the payload text is written byte-for-byte.
  std::string line = "{\"signature\":";
  line += json(record.signature).dump();
  line += ",\"fetched_at\":";
  line += std::to_string(record.fetched_at);
  line += ",\"payload\":";
  line += record.payload;
  line += "}";
  return line;
}

RawTransactionRecord record_from_line(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw MalformedPayload("$", std::string("invalid JSON: ") + e.what());
  }
  const Cursor c(j, "$");
  RawTransactionRecord record;
  record.signature = c.at("signature").string();
  record.fetched_at = c.has("fetched_at") ? c.at("fetched_at").i64() : 0;
  const auto payload = c.at("payload");
  if (!payload.node().is_object()) payload.fail("payload is not an object");
  record.payload = payload.node().dump();
  return record;
}

std::vector<RawTransactionRecord> read_records(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<RawTransactionRecord> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    try {
      out.push_back(record_from_line(line));
    } catch (const MalformedPayload& e) {
      throw MalformedPayload(path.string() + ":" + std::to_string(number) + " " + e.path(), e.reason());
    }
  }
  return out;
}

void write_records(const std::filesystem::path& path, const std::vector<RawTransactionRecord>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& r : records) out << record_to_line(r) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<Transaction> load_fixture(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<Transaction> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    try {
      out.push_back(normalize(record_from_line(line)));
    } catch (const MalformedPayload& e) {
      throw MalformedPayload("line " + std::to_string(number) + " " + e.path(), e.reason());
    }
  }
  return out;
}

}  // namespace solphish::ingest

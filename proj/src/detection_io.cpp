#include "solphish/detection_io.hpp"

#include <algorithm>
#include <fstream>

namespace solphish::rules {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

ordered_json opt(const std::optional<Address>& a) { return a ? ordered_json(a->str()) : ordered_json(nullptr); }

ordered_json refs_to_json(const std::vector<AssetRef>& refs) {
  ordered_json out = ordered_json::array();
  for (const auto& r : refs) out.push_back({{"account", r.account.str()}, {"asset", r.asset.key()}});
  return out;
}

std::vector<AssetRef> refs_from_json(const json& j) {
  std::vector<AssetRef> out;
  for (const auto& r : j) {
    out.push_back({Address::parse(r.at("account").get<std::string>()),
                   Asset::from_key(r.at("asset").get<std::string>())});
  }
  return out;
}

std::optional<Address> opt_address(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return Address::parse(j.at(key).get<std::string>());
}

}  // namespace

ordered_json detection_to_json(const Detection& d) {
  ordered_json types = ordered_json::array();
  for (auto t : d.phish_types) types.push_back(std::string(to_string(t)));

  ordered_json evidence = ordered_json::object();
  if (d.aat) {
    ordered_json list = ordered_json::array();
    for (const auto& r : d.aat->reassignments) {
      list.push_back({{"account", r.account.str()},
                      {"old_owner", opt(r.old_owner)},
                      {"new_owner", opt(r.new_owner)},
                      {"scope", std::string(to_string(r.scope))},
                      {"mint", opt(r.mint)},
                      {"depth", r.depth}});
    }
    evidence["aat"] = {{"reassignments", list}};
  }
  if (d.stmt) {
    evidence["stmt"] = {{"transfer_count", d.stmt->transfer_count},
                        {"drained", refs_to_json(d.stmt->drained_tokens)},
                        {"durable_nonce", d.stmt->durable_nonce}};
  }
  if (d.isa) {
    evidence["isa"] = {{"transfer_count", d.isa->transfer_count},
                       {"drained", refs_to_json(d.isa->drained)},
                       {"beneficiary", d.isa->beneficiary.str()},
                       {"vanity_match", std::string(to_string(d.isa->match))}};
  }

  ordered_json out;
  out["schema"] = std::string(kDetectionSchema);
  out["signature"] = d.signature;
  out["slot"] = d.slot;
  out["block_time"] = d.block_time;
  out["phish_types"] = types;
  out["victim"] = d.victim.str();
  out["phisher"] = d.phisher.str();
  out["evidence"] = evidence;
  out["loss_usd"] = d.loss_usd ? ordered_json(usd_to_string(*d.loss_usd)) : ordered_json(nullptr);
  out["unpriced_assets"] = d.unpriced_assets;
  return out;
}

Detection detection_from_json(const json& j) {
  try {
    if (j.at("schema").get<std::string>() != kDetectionSchema) {
      throw SchemaViolation("unsupported detection schema " + j.at("schema").dump());
    }
    Detection d;
    d.signature = j.at("signature").get<std::string>();
    d.slot = j.at("slot").get<std::uint64_t>();
    d.block_time = j.at("block_time").get<UnixSeconds>();
    for (const auto& t : j.at("phish_types")) {
      auto type = phish_type_from(t.get<std::string>());
      if (!type) throw SchemaViolation("unknown phish type " + t.dump());
      d.phish_types.push_back(*type);
    }
    d.victim = Address::parse(j.at("victim").get<std::string>());
    d.phisher = Address::parse(j.at("phisher").get<std::string>());

    const auto& ev = j.at("evidence");
    if (ev.contains("aat")) {
      AatEvidence aat;
      for (const auto& r : ev["aat"].at("reassignments")) {
        Reassignment re;
        re.account = Address::parse(r.at("account").get<std::string>());
        re.old_owner = opt_address(r, "old_owner");
        re.new_owner = opt_address(r, "new_owner");
        re.scope = r.at("scope").get<std::string>() == "wallet" ? AuthorityScope::Wallet : AuthorityScope::Token;
        re.mint = opt_address(r, "mint");
        re.depth = r.at("depth").get<std::uint32_t>();
        aat.reassignments.push_back(std::move(re));
      }
      d.aat = std::move(aat);
    }
    if (ev.contains("stmt")) {
      const auto& s = ev["stmt"];
      d.stmt = StmtEvidence{s.at("transfer_count").get<std::size_t>(), refs_from_json(s.at("drained")),
                            s.at("durable_nonce").get<bool>()};
    }
    if (ev.contains("isa")) {
      const auto& s = ev["isa"];
      IsaEvidence isa;
      isa.transfer_count = s.at("transfer_count").get<std::size_t>();
      isa.drained = refs_from_json(s.at("drained"));
      isa.beneficiary = Address::parse(s.at("beneficiary").get<std::string>());
      const auto m = s.at("vanity_match").get<std::string>();
      isa.match = m == "prefix" ? VanityMatch::Prefix : m == "suffix" ? VanityMatch::Suffix : VanityMatch::None;
      d.isa = std::move(isa);
    }
    if (j.contains("loss_usd") && !j["loss_usd"].is_null()) {
      d.loss_usd = parse_usd(j["loss_usd"].get<std::string>());
    }
    if (j.contains("unpriced_assets")) d.unpriced_assets = j["unpriced_assets"].get<std::vector<std::string>>();

    if (d.phish_types.empty()) throw SchemaViolation("empty phish_types");
    if (!std::is_sorted(d.phish_types.begin(), d.phish_types.end()) ||
        std::adjacent_find(d.phish_types.begin(), d.phish_types.end()) != d.phish_types.end()) {
      throw SchemaViolation("phish_types not in precedence order");
    }
    if (d.victim == d.phisher) throw SchemaViolation("victim equals phisher");
    if (d.has(PhishType::AAT) != d.aat.has_value() || d.has(PhishType::STMT) != d.stmt.has_value() ||
        d.has(PhishType::ISA) != d.isa.has_value()) {
      throw SchemaViolation("evidence does not match phish_types");
    }
    return d;
  } catch (const SchemaViolation&) {
    throw;
  } catch (const std::exception& e) {
    throw SchemaViolation(e.what());
  }
}

void write_detections(const std::filesystem::path& path, std::span<const Detection> detections) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& d : detections) out << detection_to_json(d).dump() << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<Detection> read_detections(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<Detection> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    try {
      out.push_back(detection_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      throw SchemaViolation(path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace solphish::rules

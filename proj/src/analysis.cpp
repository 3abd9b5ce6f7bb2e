#include "solphish/analysis.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <regex>
#include <stdexcept>

namespace solphish::analysis {

namespace {

// Days since 1970-01-01 <-> proleptic Gregorian date.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m > 2 ? m - 3 : m + 9) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

struct Civil {
  std::int64_t year;
  unsigned month;
  unsigned day;
};

Civil civil_from_days(std::int64_t z) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const auto doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp < 10 ? mp + 3 : mp - 9;
  return {static_cast<std::int64_t>(yoe) + era * 400 + (m <= 2), m, d};
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) { return a / b - ((a % b != 0) && ((a < 0) != (b < 0))); }

}  // namespace

UnixSeconds utc_seconds(int year, unsigned month, unsigned day, int hour, int minute, int second) {
  return days_from_civil(year, month, day) * 86400 + hour * 3600 + minute * 60 + second;
}

MonthKey month_of(UnixSeconds t) {
  const auto c = civil_from_days(floor_div(t, 86400));
  return {static_cast<int>(c.year), c.month};
}

std::string format_month(const MonthKey& m) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u", m.year, m.month);
  return buf;
}

std::string format_date(UnixSeconds t) {
  const auto c = civil_from_days(floor_div(t, 86400));
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04lld-%02u-%02u", static_cast<long long>(c.year), c.month, c.day);
  return buf;
}

std::string format_iso8601(UnixSeconds t) {
  const auto secs = t - floor_div(t, 86400) * 86400;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%sT%02lld:%02lld:%02lldZ", format_date(t).c_str(),
                static_cast<long long>(secs / 3600), static_cast<long long>(secs / 60 % 60),
                static_cast<long long>(secs % 60));
  return buf;
}

UnixSeconds parse_iso8601(std::string_view text) {
  static const std::regex kIso(R"((\d{4})-(\d{2})-(\d{2})(?:[T ](\d{2}):(\d{2})(?::(\d{2}))?(?:\.\d+)?)?(Z|[+-]\d{2}:?\d{2})?)");
  std::match_results<std::string_view::const_iterator> m;
  if (!std::regex_match(text.begin(), text.end(), m, kIso)) {
    throw std::invalid_argument("not an ISO-8601 timestamp: " + std::string(text));
  }
  auto num = [&](int i) { return m[i].matched ? std::stoi(m[i].str()) : 0; };
  const std::chrono::year_month_day ymd{std::chrono::year{num(1)}, std::chrono::month{static_cast<unsigned>(num(2))},
                                       std::chrono::day{static_cast<unsigned>(num(3))}};
  if (!ymd.ok() || num(4) > 23 || num(5) > 59 || num(6) > 60) {
    throw std::invalid_argument("not a valid date/time: " + std::string(text));
  }
  auto t = utc_seconds(num(1), static_cast<unsigned>(num(2)), static_cast<unsigned>(num(3)), num(4), num(5), num(6));
  if (m[7].matched && m[7].str() != "Z") {
    auto tz = m[7].str();
    tz.erase(std::remove(tz.begin(), tz.end(), ':'), tz.end());
    const int sign = tz[0] == '-' ? -1 : 1;
    const int hh = std::stoi(tz.substr(1, 2));
    const int mm = std::stoi(tz.substr(3, 2));
    t -= sign * (hh * 3600 + mm * 60);
  }
  return t;
}

std::optional<Usd> PriceTable::price(const Asset& asset) const {
  auto it = entries.find(asset);
  if (it == entries.end()) return std::nullopt;
  return it->second.usd_price;
}

void PriceTable::set(const Asset& asset, Usd price, UnixSeconds as_of) {
  if (price < 0) throw std::invalid_argument("negative price for " + asset.key());
  entries.insert_or_assign(asset, PricePoint{std::move(price), as_of});
}

PriceTable PriceTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open price table " + path.string());
  const auto j = nlohmann::json::parse(in);
  PriceTable table;
  table.source = j.value("source", std::string());
  const UnixSeconds as_of = j.contains("as_of") ? parse_iso8601(j["as_of"].get<std::string>()) : 0;
  for (const auto& [key, value] : j.at("prices").items()) {
    const auto text = value.is_string() ? value.get<std::string>() : value.dump();
    table.set(Asset::from_key(key), parse_usd(text), as_of);
  }
  return table;
}

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::Phishing: return "phishing";
    case Outcome::MutualTransfer: return "mutual_transfer";
    case Outcome::Laundering: return "laundering";
  }
  return "?";
}

OutcomeReport classify_detections(std::span<const Detection> detections, const std::set<Address>& labeled) {
  if (labeled.empty()) throw std::invalid_argument("labeled phisher set is empty");
  OutcomeReport report;
  report.outcomes.reserve(detections.size());
  for (const auto& d : detections) {
    const bool victim_labeled = labeled.contains(d.victim);
    const bool phisher_labeled = labeled.contains(d.phisher);
    if (!victim_labeled) {
      report.outcomes.push_back(Outcome::Phishing);
    } else if (phisher_labeled) {
      report.outcomes.push_back(Outcome::MutualTransfer);
    } else {
      report.outcomes.push_back(Outcome::Laundering);
      report.gang_candidates.insert(d.phisher);
    }
  }
  return report;
}

MonthlyHistogram monthly_histogram(std::span<const Detection> detections) {
  MonthlyHistogram h;
  for (const auto& d : detections) ++h[month_of(d.block_time)][d.primary()];
  return h;
}

LossResult compute_loss(const Detection& detection, const Transaction& tx, const PriceTable& prices) {
  LossResult out;
  std::set<std::string> unpriced;
  auto value = [&](const BalanceEntry& e, std::uint64_t amount) {
    if (amount == 0) return;
    if (auto p = prices.price(e.asset)) {
      out.loss_usd += scale_amount(amount, e.decimals) * *p;
    } else {
      unpriced.insert(e.asset.key());
    }
  };

  if (detection.primary() == PhishType::AAT && detection.aat) {
    std::set<Address> reassigned;
    for (const auto& r : detection.aat->reassignments) reassigned.insert(r.account);
    std::set<Address> token_accounts;
    for (const auto& e : tx.balances) {
      if (!e.asset.is_native()) token_accounts.insert(e.account);
    }
    for (const auto& e : tx.balances) {
      if (!reassigned.contains(e.account)) continue;
      if (e.asset.is_native() && token_accounts.contains(e.account)) continue;
      value(e, e.post);
    }
  } else {
    for (const auto& e : tx.balances) {
      if (e.holder() != detection.victim) continue;
      auto d = e.delta();
      if (e.asset.is_native() && e.account == tx.fee_payer) d += static_cast<std::int64_t>(tx.fee);
      if (d < 0) value(e, static_cast<std::uint64_t>(-d));
    }
  }
  out.unpriced_assets.assign(unpriced.begin(), unpriced.end());
  return out;
}

LossSummary summarize_losses(std::span<const Detection> detections) {
  LossSummary s;
  s.detections = detections.size();
  for (const auto& d : detections) {
    auto& t = s.by_type[d.primary()];
    ++t.count;
    if (d.loss_usd) {
      t.total += *d.loss_usd;
      s.grand_total += *d.loss_usd;
    }
  }
  return s;
}

std::optional<std::string> check_loss_consistency(const LossSummary& summary, const Usd& tolerance) {
  Usd sum = 0;
  std::size_t count = 0;
  for (const auto& [type, t] : summary.by_type) {
    sum += t.total;
    count += t.count;
    if (boost::multiprecision::abs(t.average() * Usd(t.count) - t.total) > tolerance) {
      return "average x count != total for " + std::string(rules::to_string(type));
    }
  }
  if (boost::multiprecision::abs(sum - summary.grand_total) > tolerance) {
    return "sum of per-type losses != grand total";
  }
  if (count != summary.detections) return "per-type counts do not sum to detection count";
  return std::nullopt;
}

std::map<std::pair<std::string, PhishType>, Usd> daily_losses(std::span<const Detection> detections) {
  std::map<std::pair<std::string, PhishType>, Usd> out;
  for (const auto& d : detections) {
    auto& slot = out[{format_date(d.block_time), d.primary()}];
    if (d.loss_usd) slot += *d.loss_usd;
  }
  return out;
}

std::vector<TokenCount> top_tokens(std::span<const Detection> detections, std::size_t k) {
  std::map<Asset, std::size_t> counts;
  for (const auto& d : detections) {
    for (const auto& a : d.involved_assets()) ++counts[a];
  }
  std::vector<TokenCount> ranked;
  for (const auto& [asset, n] : counts) ranked.push_back({asset, n});
  std::stable_sort(ranked.begin(), ranked.end(), [](const TokenCount& a, const TokenCount& b) {
    if (a.count != b.count) return a.count > b.count;
    return a.asset.key() < b.asset.key();
  });
  if (ranked.size() > k) ranked.resize(k);
  return ranked;
}

std::vector<PhisherStats> phisher_stats(std::span<const Detection> detections, const Histories& histories) {
  struct Acc {
    PhisherStats stats;
    std::map<PhishType, std::size_t> by_type;
  };
  std::map<Address, Acc> acc;
  for (const auto& d : detections) {
    auto [it, fresh] = acc.try_emplace(d.phisher);
    auto& s = it->second.stats;
    if (fresh) {
      s.account = d.phisher;
      s.first_phish = s.last_phish = d.block_time;
    }
    ++s.attempts;
    if (d.loss_usd) s.total_loss_usd += *d.loss_usd;
    s.first_phish = std::min(s.first_phish, d.block_time);
    s.last_phish = std::max(s.last_phish, d.block_time);
    ++it->second.by_type[d.primary()];
  }

  std::vector<PhisherStats> out;
  for (auto& [account, a] : acc) {
    auto& s = a.stats;
    // by_type iterates in precedence order, so strict > keeps the earlier type on ties.
    std::size_t best = 0;
    for (const auto& [type, n] : a.by_type) {
      if (n > best) {
        best = n;
        s.dominant_type = type;
      }
    }
    s.last_activity = s.last_phish;
    if (auto h = histories.find(account); h != histories.end()) {
      for (const auto& tx : h->second) s.last_activity = std::max(s.last_activity, tx.block_time);
    } else {
      s.history_missing = true;
    }
    out.push_back(s);
  }
  std::stable_sort(out.begin(), out.end(), [](const PhisherStats& a, const PhisherStats& b) {
    if (a.attempts != b.attempts) return a.attempts > b.attempts;
    return a.account < b.account;
  });
  return out;
}

std::string_view to_string(EdgeKind k) { return k == EdgeKind::Transfer ? "transfer" : "authority_transfer"; }

std::string_view to_string(Topology t) {
  switch (t) {
    case Topology::StarIn: return "StarIn";
    case Topology::StarOut: return "StarOut";
    case Topology::Tree: return "Tree";
    case Topology::Other: return "Other";
  }
  return "?";
}

GangGraph build_gang_graph(const std::set<Address>& labeled, std::span<const Transaction> txs,
                           const std::set<Address>& candidates) {
  GangGraph g;
  g.nodes = labeled;
  g.nodes.insert(candidates.begin(), candidates.end());

  std::map<std::tuple<Address, Address, EdgeKind>, std::size_t> counts;
  std::set<std::string> seen;
  auto add = [&](const Address& from, const std::optional<Address>& to, EdgeKind kind) {
    if (!to || from == *to || !g.nodes.contains(from) || !g.nodes.contains(*to)) return;
    ++counts[{from, *to, kind}];
  };
  for (const auto& tx : txs) {
    if (!tx.success || !seen.insert(tx.signature).second) continue;
    for (const auto& ins : tx.instructions) {
      switch (ins.kind) {
        case InstructionKind::Transfer: {
          auto from = holder_of(tx, *ins.source);
          if (from == *ins.source && ins.authority) from = *ins.authority;
          add(from, holder_of(tx, *ins.destination), EdgeKind::Transfer);
          break;
        }
        case InstructionKind::Assign:
          if (ins.source) add(*ins.source, ins.new_authority, EdgeKind::AuthorityTransfer);
          break;
        case InstructionKind::SetAuthority:
          if (ins.source && ins.authority_type == kAccountOwnerAuthority) {
            add(ins.authority ? *ins.authority : holder_of(tx, *ins.source), ins.new_authority,
                EdgeKind::AuthorityTransfer);
          }
          break;
        default:
          break;
      }
    }
  }
  for (const auto& [key, n] : counts) {
    const auto& [from, to, kind] = key;
    g.edges.push_back({from, to, kind, n});
  }
  return g;
}

namespace {

class DisjointSets {
 public:
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
    return x;
  }
  /// False when a and b were already joined.
  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent_[std::max(a, b)] = std::min(a, b);
    return true;
  }
  std::size_t add() {
    parent_.push_back(parent_.size());
    return parent_.size() - 1;
  }

 private:
  std::vector<std::size_t> parent_;
};

}  // namespace

Topology topology_hint(std::size_t node_count, std::span<const GangEdge> edges) {
  if (edges.empty()) return Topology::Other;
  std::map<Address, std::size_t> out_deg;
  std::map<Address, std::size_t> in_deg;
  for (const auto& e : edges) {
    ++out_deg[e.from];
    ++in_deg[e.to];
  }
  auto max_of = [](const auto& m) {
    std::size_t best = 0;
    for (const auto& [_, n] : m) best = std::max(best, n);
    return best;
  };
  // One node at >= 80% of edge sources (or sinks).
  if (max_of(out_deg) * 5 >= edges.size() * 4) return Topology::StarOut;
  if (max_of(in_deg) * 5 >= edges.size() * 4) return Topology::StarIn;

  if (edges.size() + 1 == node_count) {
    DisjointSets ds;
    std::map<Address, std::size_t> id;
    auto index = [&](const Address& a) {
      auto [it, fresh] = id.try_emplace(a, 0);
      if (fresh) it->second = ds.add();
      return it->second;
    };
    bool acyclic = true;
    for (const auto& e : edges) acyclic = ds.unite(index(e.from), index(e.to)) && acyclic;
    if (acyclic) return Topology::Tree;
  }
  return Topology::Other;
}

std::vector<Gang> find_gangs(const GangGraph& graph) {
  DisjointSets ds;
  std::map<Address, std::size_t> id;
  std::vector<Address> by_id;
  auto index = [&](const Address& a) {
    auto [it, fresh] = id.try_emplace(a, 0);
    if (fresh) {
      it->second = ds.add();
      by_id.push_back(a);
    }
    return it->second;
  };
  for (const auto& e : graph.edges) ds.unite(index(e.from), index(e.to));

  std::map<std::size_t, Gang> components;
  for (std::size_t i = 0; i < by_id.size(); ++i) components[ds.find(i)].members.push_back(by_id[i]);
  for (const auto& e : graph.edges) components[ds.find(id.at(e.from))].edges.push_back(e);

  std::vector<Gang> gangs;
  for (auto& [_, g] : components) {
    std::sort(g.members.begin(), g.members.end());
    g.topology = topology_hint(g.members.size(), g.edges);
    gangs.push_back(std::move(g));
  }
  std::sort(gangs.begin(), gangs.end(), [](const Gang& a, const Gang& b) {
    if (a.members.size() != b.members.size()) return a.members.size() > b.members.size();
    return a.members.front() < b.members.front();
  });
  return gangs;
}

namespace {

nlohmann::ordered_json edges_to_json(std::span<const GangEdge> edges) {
  auto out = nlohmann::ordered_json::array();
  for (const auto& e : edges) {
    out.push_back({{"from", e.from.str()}, {"to", e.to.str()}, {"kind", std::string(to_string(e.kind))},
                   {"count", e.count}});
  }
  return out;
}

std::vector<GangEdge> edges_from_json(const nlohmann::json& j) {
  std::vector<GangEdge> out;
  for (const auto& e : j) {
    const auto kind = e.at("kind").get<std::string>();
    if (kind != "transfer" && kind != "authority_transfer") throw std::runtime_error("unknown edge kind " + kind);
    out.push_back({Address::parse(e.at("from").get<std::string>()), Address::parse(e.at("to").get<std::string>()),
                   kind == "transfer" ? EdgeKind::Transfer : EdgeKind::AuthorityTransfer,
                   e.at("count").get<std::size_t>()});
  }
  return out;
}

Topology topology_from(const std::string& s) {
  for (auto t : {Topology::StarIn, Topology::StarOut, Topology::Tree, Topology::Other}) {
    if (to_string(t) == s) return t;
  }
  throw std::runtime_error("unknown topology " + s);
}

}  // namespace

nlohmann::ordered_json gang_report_to_json(const GangGraph& graph, std::span<const Gang> gangs) {
  nlohmann::ordered_json out;
  out["schema"] = "1";
  auto nodes = nlohmann::ordered_json::array();
  for (const auto& n : graph.nodes) nodes.push_back(n.str());
  out["nodes"] = nodes;
  out["edges"] = edges_to_json(graph.edges);
  auto list = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < gangs.size(); ++i) {
    auto members = nlohmann::ordered_json::array();
    for (const auto& m : gangs[i].members) members.push_back(m.str());
    list.push_back({{"id", i + 1},
                    {"size", gangs[i].members.size()},
                    {"topology", std::string(to_string(gangs[i].topology))},
                    {"members", members},
                    {"edges", edges_to_json(gangs[i].edges)}});
  }
  out["gangs"] = list;
  return out;
}

GangReport gang_report_from_json(const nlohmann::json& j) {
  if (j.at("schema").get<std::string>() != "1") throw std::runtime_error("unsupported gang report schema");
  GangReport r;
  for (const auto& n : j.at("nodes")) r.graph.nodes.insert(Address::parse(n.get<std::string>()));
  r.graph.edges = edges_from_json(j.at("edges"));
  for (const auto& g : j.at("gangs")) {
    Gang gang;
    for (const auto& m : g.at("members")) gang.members.push_back(Address::parse(m.get<std::string>()));
    gang.edges = edges_from_json(g.at("edges"));
    gang.topology = topology_from(g.at("topology").get<std::string>());
    r.gangs.push_back(std::move(gang));
  }
  return r;
}

}  // namespace solphish::analysis

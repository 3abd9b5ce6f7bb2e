#pragma once

#include <compare>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "solphish/rules.hpp"
#include "solphish/txmodel.hpp"
#include "solphish/usd.hpp"

namespace solphish::analysis {

using rules::Detection;
using rules::PhishType;

// UTC calendar helpers.
struct MonthKey {
  int year = 1970;
  unsigned month = 1;
  friend auto operator<=>(const MonthKey&, const MonthKey&) = default;
};
MonthKey month_of(UnixSeconds t);
std::string format_month(const MonthKey& m);  // "2024-03"
std::string format_date(UnixSeconds t);       // "2024-03-17"
std::string format_iso8601(UnixSeconds t);    // "2024-03-17T08:00:00Z"
UnixSeconds parse_iso8601(std::string_view text);
UnixSeconds utc_seconds(int year, unsigned month, unsigned day, int hour = 0, int minute = 0, int second = 0);

struct PricePoint {
  Usd usd_price;
  UnixSeconds as_of = 0;
};

/// Latest USD prices keyed by asset. Missing assets stay missing.
struct PriceTable {
  std::map<Asset, PricePoint> entries;
  std::string source;

  std::optional<Usd> price(const Asset& asset) const;
  void set(const Asset& asset, Usd price, UnixSeconds as_of = 0);

  /// {"source": str, "as_of": iso8601, "prices": {mint_or_NATIVE: decimal}}
  static PriceTable load(const std::filesystem::path& path);
};

enum class Outcome { Phishing, MutualTransfer, Laundering };
std::string_view to_string(Outcome o);

struct OutcomeReport {
  std::vector<Outcome> outcomes;      // parallel to the input detections
  std::set<Address> gang_candidates;  // unlabeled receivers of laundering
};

/// Throws std::invalid_argument when `labeled` is empty.
OutcomeReport classify_detections(std::span<const Detection> detections, const std::set<Address>& labeled);

using MonthlyHistogram = std::map<MonthKey, std::map<PhishType, std::size_t>>;

/// Detections bucketed by UTC month and primary type.
MonthlyHistogram monthly_histogram(std::span<const Detection> detections);

struct LossResult {
  Usd loss_usd{0};
  std::vector<std::string> unpriced_assets;
};

/// STMT/ISA: value of the victim's outflows (fee excluded). AAT: value held
/// after the transaction by every account whose authority moved.
LossResult compute_loss(const Detection& detection, const Transaction& tx, const PriceTable& prices);

struct TypeLoss {
  std::size_t count = 0;
  Usd total{0};
  Usd average() const { return count == 0 ? Usd(0) : total / Usd(count); }
};

struct LossSummary {
  std::map<PhishType, TypeLoss> by_type;
  Usd grand_total{0};
  std::size_t detections = 0;
};

/// Per primary type. Detections without loss_usd count with loss 0.
LossSummary summarize_losses(std::span<const Detection> detections);

/// First violated additivity invariant, if any.
std::optional<std::string> check_loss_consistency(const LossSummary& summary, const Usd& tolerance = Usd("0.01"));

/// (date, type) -> loss, for re-plotting daily losses.
std::map<std::pair<std::string, PhishType>, Usd> daily_losses(std::span<const Detection> detections);

struct TokenCount {
  Asset asset;
  std::size_t count = 0;
  bool operator==(const TokenCount&) const = default;
};

/// Assets ranked by how many detections involve them; ties by key ascending.
std::vector<TokenCount> top_tokens(std::span<const Detection> detections, std::size_t k);

struct PhisherStats {
  Address account;
  std::size_t attempts = 0;
  Usd total_loss_usd{0};
  UnixSeconds first_phish = 0;
  UnixSeconds last_phish = 0;
  UnixSeconds last_activity = 0;
  PhishType dominant_type = PhishType::AAT;
  bool history_missing = false;

  UnixSeconds phishing_period() const { return last_phish - first_phish; }
  UnixSeconds dormant_period() const { return last_activity - last_phish; }
};

using Histories = std::map<Address, std::vector<Transaction>>;

/// One entry per phisher, ordered by attempts descending then address.
std::vector<PhisherStats> phisher_stats(std::span<const Detection> detections, const Histories& histories);

enum class EdgeKind { Transfer, AuthorityTransfer };
std::string_view to_string(EdgeKind k);

struct GangEdge {
  Address from;
  Address to;
  EdgeKind kind = EdgeKind::Transfer;
  std::size_t count = 0;
  bool operator==(const GangEdge&) const = default;
};

struct GangGraph {
  std::set<Address> nodes;
  std::vector<GangEdge> edges;  // sorted by (from, to, kind), no self-loops
};

/// Direct transfer and authority edges between labeled accounts (and
/// gang candidates). Transactions are deduplicated by signature, so
/// overlapping histories can be passed as-is.
GangGraph build_gang_graph(const std::set<Address>& labeled, std::span<const Transaction> txs,
                           const std::set<Address>& candidates = {});

enum class Topology { StarIn, StarOut, Tree, Other };
std::string_view to_string(Topology t);

struct Gang {
  std::vector<Address> members;  // sorted
  std::vector<GangEdge> edges;
  Topology topology = Topology::Other;
};

/// Weakly connected components with at least one edge, largest first.
std::vector<Gang> find_gangs(const GangGraph& graph);

Topology topology_hint(std::size_t node_count, std::span<const GangEdge> edges);

nlohmann::ordered_json gang_report_to_json(const GangGraph& graph, std::span<const Gang> gangs);

struct GangReport {
  GangGraph graph;
  std::vector<Gang> gangs;
};
GangReport gang_report_from_json(const nlohmann::json& j);

}  // namespace solphish::analysis

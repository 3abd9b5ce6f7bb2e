#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "solphish/analysis.hpp"
#include "solphish/rpc.hpp"
#include "solphish/rules.hpp"
#include "solphish/synth.hpp"

namespace solphish::app {

namespace fs = std::filesystem;

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitDetections = 2;

/// Operator configuration. Empty list paths fall back to the built-in
/// starter lists. Relative paths in a config file resolve against the
/// file's directory.
struct RunConfig {
  std::optional<std::string> rpc_url;
  fs::path markets_path;
  fs::path official_allowlist_path;
  std::optional<fs::path> benign_programs_path;
  std::optional<fs::path> prices_path;
  std::optional<fs::path> labeled_phishers_path;
  fs::path output_dir = "out";
  std::string isa_suffix{rules::kDefaultIsaSuffix};

  std::size_t max_in_flight = 8;
  int retry_limit = 3;
  int backoff_base_ms = 250;
  std::optional<fs::path> cache_dir;
  bool reuse_listings = false;

  /// JSON object with any of the fields above; unknown keys are rejected.
  static RunConfig load(const fs::path& path);
  /// SOLPHISH_RPC_URL overrides rpc_url.
  void apply_env();

  rules::RuleConfig rule_config() const;
  ingest::IngestConfig ingest_config() const;
};

/// Labeled phishing accounts (one address per line), empty when unset.
std::set<Address> load_labeled(const RunConfig& config);

struct ScanTarget {
  enum class Kind { Account, Signature, Fixture } kind = Kind::Fixture;
  std::string value;
  std::size_t limit = 1000;
};

struct Streams {
  std::ostream& out;
  std::ostream& err;
};

/// Network access for account/signature scans; defaults to HTTP against
/// config.rpc_url.
using TransportFactory = std::function<std::shared_ptr<ingest::RpcTransport>(const std::string& url)>;

/// Writes <out>/detections.jsonl (and <out>/histories/<account>.jsonl for
/// account scans). 0: nothing found, 2: detections found, 1: failure.
int cmd_scan(const ScanTarget& target, const RunConfig& config, Streams io, TransportFactory transport = {});

/// histories: a directory of *.jsonl fixtures, a single fixture, or none.
/// Writes histogram.csv, loss_daily.csv, loss_summary.csv, top_tokens.csv,
/// phisher_stats.csv, outcomes.csv and gangs.json under the output dir.
int cmd_analyze(const fs::path& detections, const std::optional<fs::path>& histories, const RunConfig& config,
                Streams io);

/// Writes phishing_accounts.csv, phishing_transactions.jsonl,
/// gang_edges.csv and MANIFEST under the output dir.
int cmd_export(const fs::path& detections, const std::optional<fs::path>& gang_report, const RunConfig& config,
               Streams io);

int cmd_synth(const synth::CorpusParams& params, const fs::path& out_dir, Streams io);

/// Every transaction in a history file or directory of files, deduplicated
/// by signature, in load order.
std::vector<Transaction> load_histories(const fs::path& path);

/// Indexes transactions by every address they touch.
analysis::Histories index_histories(std::span<const Transaction> txs);

std::string sha256_hex(const fs::path& file);

}  // namespace solphish::app

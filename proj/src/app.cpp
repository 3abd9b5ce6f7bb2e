#include "solphish/app.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "solphish/analysis.hpp"
#include "solphish/detection_io.hpp"
#include "solphish/ingest.hpp"

namespace solphish::app {

using analysis::PhishType;
using nlohmann::json;

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_relative() ? base / path : path;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
}

}  // namespace

RunConfig RunConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw std::runtime_error(path.string() + ": config must be a JSON object");
  const auto base = path.parent_path();
  RunConfig c;
  for (const auto& [key, v] : j.items()) {
    if (key == "rpc_url") c.rpc_url = v.get<std::string>();
    else if (key == "markets_path") c.markets_path = resolve(base, v.get<std::string>());
    else if (key == "official_allowlist_path") c.official_allowlist_path = resolve(base, v.get<std::string>());
    else if (key == "benign_programs_path") c.benign_programs_path = resolve(base, v.get<std::string>());
    else if (key == "prices_path") c.prices_path = resolve(base, v.get<std::string>());
    else if (key == "labeled_phishers_path") c.labeled_phishers_path = resolve(base, v.get<std::string>());
    else if (key == "output_dir") c.output_dir = resolve(base, v.get<std::string>());
    else if (key == "isa_suffix") c.isa_suffix = v.get<std::string>();
    else if (key == "max_in_flight") c.max_in_flight = v.get<std::size_t>();
    else if (key == "retry_limit") c.retry_limit = v.get<int>();
    else if (key == "backoff_base_ms") c.backoff_base_ms = v.get<int>();
    else if (key == "cache_dir") c.cache_dir = resolve(base, v.get<std::string>());
    else if (key == "reuse_listings") c.reuse_listings = v.get<bool>();
    else throw std::runtime_error(path.string() + ": unknown key '" + key + "'");
  }
  return c;
}

void RunConfig::apply_env() {
  if (const char* url = std::getenv("SOLPHISH_RPC_URL"); url && *url) rpc_url = url;
}

rules::RuleConfig RunConfig::rule_config() const {
  rules::RuleConfig rc;
  rc.markets = markets_path.empty() ? synth::default_markets() : rules::MarketList::load(markets_path);
  rc.official = official_allowlist_path.empty() ? synth::default_official_allowlist()
                                                : rules::OfficialAllowlist::load(official_allowlist_path);
  if (benign_programs_path) rc.benign_programs = rules::load_program_allowlist(*benign_programs_path);
  rc.isa_suffix = isa_suffix;
  return rc;
}

ingest::IngestConfig RunConfig::ingest_config() const {
  ingest::IngestConfig ic;
  ic.endpoint_url = rpc_url.value_or("");
  ic.max_in_flight = max_in_flight;
  ic.retry_limit = retry_limit;
  ic.backoff_base_ms = backoff_base_ms;
  if (cache_dir) ic.cache_dir = *cache_dir;
  ic.reuse_listings = reuse_listings;
  ic.check();
  return ic;
}

std::set<Address> load_labeled(const RunConfig& config) {
  std::set<Address> out;
  if (!config.labeled_phishers_path) return out;
  for (const auto& a : rules::read_address_lines(*config.labeled_phishers_path)) out.insert(Address::parse(a));
  return out;
}

std::vector<Transaction> load_histories(const fs::path& path) {
  std::vector<fs::path> files;
  if (fs::is_directory(path)) {
    for (const auto& e : fs::directory_iterator(path)) {
      if (e.is_regular_file() && e.path().extension() == ".jsonl") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
  } else {
    files.push_back(path);
  }
  std::vector<Transaction> out;
  std::set<std::string> seen;
  for (const auto& f : files) {
    for (auto& tx : ingest::load_fixture(f)) {
      if (seen.insert(tx.signature).second) out.push_back(std::move(tx));
    }
  }
  return out;
}

analysis::Histories index_histories(std::span<const Transaction> txs) {
  analysis::Histories h;
  for (const auto& tx : txs) {
    for (const auto& a : participants(tx)) h[a].push_back(tx);
  }
  return h;
}

std::string sha256_hex(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + file.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md, &len);
  std::ostringstream hex;
  for (unsigned i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return hex.str();
}

// ---------------------------------------------------------------- scan

int cmd_scan(const ScanTarget& target, const RunConfig& config, Streams io, TransportFactory transport) {
  std::vector<Transaction> txs;
  rules::RuleConfig rc;
  try {
    rc = config.rule_config();
    if (target.kind == ScanTarget::Kind::Fixture) {
      txs = ingest::load_fixture(target.value);
    } else {
      if (!config.rpc_url) throw std::runtime_error("no rpc_url: set it in the config, SOLPHISH_RPC_URL or --rpc-url");
      auto ic = config.ingest_config();
      auto t = transport ? transport(*config.rpc_url) : std::make_shared<ingest::HttpTransport>(*config.rpc_url);
      ingest::RpcClient client(ic, t);
      if (target.kind == ScanTarget::Kind::Account) {
        const auto account = Address::parse(target.value);
        txs = ingest::ingest_account(client, account, target.limit);
        ensure_dir(config.output_dir / "histories");
        std::vector<ingest::RawTransactionRecord> records;
        for (const auto& tx : txs) records.push_back(ingest::make_record(tx, tx.block_time));
        ingest::write_records(config.output_dir / "histories" / (account.str() + ".jsonl"), records);
      } else {
        txs.push_back(ingest::normalize(client.fetch_transaction(target.value)));
      }
    }
  } catch (const std::exception& e) {
    io.err << "scan failed: " << e.what() << '\n';
    return kExitError;
  }

  const auto results = rules::classify_all(txs, rc);
  std::optional<analysis::PriceTable> prices;
  try {
    if (config.prices_path) prices = analysis::PriceTable::load(*config.prices_path);
  } catch (const std::exception& e) {
    io.err << "scan failed: " << e.what() << '\n';
    return kExitError;
  }

  std::vector<rules::Detection> detections;
  std::size_t failed = 0;
  std::size_t underdetermined = 0;
  for (std::size_t i = 0; i < txs.size(); ++i) {
    if (!txs[i].success) ++failed;
    for (const auto& d : results[i].diagnostics) {
      if (d.starts_with("roles underdetermined")) ++underdetermined;
    }
    if (!results[i].detection) continue;
    auto det = *results[i].detection;
    if (prices) {
      auto loss = analysis::compute_loss(det, txs[i], *prices);
      det.loss_usd = loss.loss_usd;
      det.unpriced_assets = std::move(loss.unpriced_assets);
    }
    detections.push_back(std::move(det));
  }

  const auto path = config.output_dir / "detections.jsonl";
  try {
    ensure_dir(config.output_dir);
    rules::write_detections(path, detections);
  } catch (const std::exception& e) {
    io.err << "scan failed: " << e.what() << '\n';
    return kExitError;
  }

  std::map<PhishType, std::size_t> by_type;
  for (const auto& d : detections) ++by_type[d.primary()];
  io.out << "scanned " << txs.size() << " transactions (" << failed << " failed, " << underdetermined
         << " underdetermined)\n";
  io.out << "detections: " << detections.size() << '\n';
  for (const auto t : {PhishType::AAT, PhishType::STMT, PhishType::ISA}) {
    io.out << "  " << std::left << std::setw(5) << rules::to_string(t) << by_type[t] << '\n';
  }
  const auto labeled = load_labeled(config);
  if (!labeled.empty()) {
    const auto report = analysis::classify_detections(detections, labeled);
    std::map<analysis::Outcome, std::size_t> by_outcome;
    for (const auto o : report.outcomes) ++by_outcome[o];
    io.out << "outcomes:";
    for (const auto o : {analysis::Outcome::Phishing, analysis::Outcome::MutualTransfer, analysis::Outcome::Laundering}) {
      io.out << ' ' << analysis::to_string(o) << '=' << by_outcome[o];
    }
    io.out << '\n';
  }
  io.out << "wrote " << path.string() << '\n';
  return detections.empty() ? kExitOk : kExitDetections;
}

// ---------------------------------------------------------------- analyze

namespace {

struct AnalysisBundle {
  analysis::MonthlyHistogram histogram;
  analysis::LossSummary losses;
  std::map<std::pair<std::string, PhishType>, Usd> daily;
  std::vector<analysis::TokenCount> tokens;
  std::vector<analysis::PhisherStats> phishers;
  std::optional<analysis::OutcomeReport> outcomes;
  analysis::GangGraph graph;
  std::vector<analysis::Gang> gangs;
};

std::optional<std::string> check_bundle(const AnalysisBundle& b, std::size_t detections) {
  std::size_t hist = 0;
  for (const auto& [_, row] : b.histogram) {
    for (const auto& [__, n] : row) hist += n;
  }
  if (hist != detections) {
    return "histogram buckets sum to " + std::to_string(hist) + ", expected " + std::to_string(detections);
  }
  if (auto v = analysis::check_loss_consistency(b.losses)) return v;
  std::size_t attempts = 0;
  for (const auto& p : b.phishers) {
    attempts += p.attempts;
    if (p.phishing_period() < 0) return "negative phishing period for " + p.account.str();
    if (p.dormant_period() < 0) return "negative dormant period for " + p.account.str();
  }
  if (attempts != detections) {
    return "phisher attempts sum to " + std::to_string(attempts) + ", expected " + std::to_string(detections);
  }
  return std::nullopt;
}

}  // namespace

int cmd_analyze(const fs::path& detections_path, const std::optional<fs::path>& histories, const RunConfig& config,
                Streams io) {
  std::vector<rules::Detection> detections;
  std::vector<Transaction> txs;
  std::set<Address> labeled;
  try {
    detections = rules::read_detections(detections_path);
    if (histories) txs = load_histories(*histories);
    labeled = load_labeled(config);
  } catch (const std::exception& e) {
    io.err << "analyze failed: " << e.what() << '\n';
    return kExitError;
  }

  AnalysisBundle b;
  b.histogram = analysis::monthly_histogram(detections);
  b.losses = analysis::summarize_losses(detections);
  b.daily = analysis::daily_losses(detections);
  b.tokens = analysis::top_tokens(detections, 10);
  b.phishers = analysis::phisher_stats(detections, index_histories(txs));
  std::set<Address> candidates;
  if (!labeled.empty()) {
    b.outcomes = analysis::classify_detections(detections, labeled);
    candidates = b.outcomes->gang_candidates;
  } else {
    for (const auto& d : detections) labeled.insert(d.phisher);
  }
  b.graph = analysis::build_gang_graph(labeled, txs, candidates);
  b.gangs = analysis::find_gangs(b.graph);

  if (auto violation = check_bundle(b, detections.size())) {
    io.err << "invariant violated: " << *violation << '\n';
    return kExitError;
  }

  const auto& dir = config.output_dir;
  try {
    ensure_dir(dir);
    {
      auto out = open_out(dir / "histogram.csv");
      out << "month,type,count\n";
      for (const auto& [month, row] : b.histogram) {
        for (const auto& [type, n] : row) out << analysis::format_month(month) << ',' << rules::to_string(type) << ',' << n << '\n';
      }
    }
    {
      auto out = open_out(dir / "loss_daily.csv");
      out << "date,type,loss_usd\n";
      for (const auto& [key, usd] : b.daily) out << key.first << ',' << rules::to_string(key.second) << ',' << format_usd(usd) << '\n';
    }
    {
      auto out = open_out(dir / "loss_summary.csv");
      out << "type,count,total_usd,average_usd\n";
      for (const auto& [type, tl] : b.losses.by_type) {
        out << rules::to_string(type) << ',' << tl.count << ',' << format_usd(tl.total) << ',' << format_usd(tl.average()) << '\n';
      }
      out << "ALL," << b.losses.detections << ',' << format_usd(b.losses.grand_total) << ','
          << format_usd(b.losses.detections ? b.losses.grand_total / Usd(b.losses.detections) : Usd(0)) << '\n';
    }
    {
      auto out = open_out(dir / "top_tokens.csv");
      out << "rank,asset,detections\n";
      for (std::size_t i = 0; i < b.tokens.size(); ++i) out << i + 1 << ',' << b.tokens[i].asset.key() << ',' << b.tokens[i].count << '\n';
    }
    {
      auto out = open_out(dir / "phisher_stats.csv");
      out << "address,attempts,total_loss_usd,dominant_type,first_phish,last_phish,last_activity,"
             "phishing_period_s,dormant_period_s,history\n";
      for (const auto& p : b.phishers) {
        out << p.account.str() << ',' << p.attempts << ',' << format_usd(p.total_loss_usd) << ','
            << rules::to_string(p.dominant_type) << ',' << analysis::format_iso8601(p.first_phish) << ','
            << analysis::format_iso8601(p.last_phish) << ',' << analysis::format_iso8601(p.last_activity) << ','
            << p.phishing_period() << ',' << p.dormant_period() << ',' << (p.history_missing ? "missing" : "ok") << '\n';
      }
    }
    {
      auto out = open_out(dir / "outcomes.csv");
      out << "signature,outcome\n";
      for (std::size_t i = 0; i < detections.size(); ++i) {
        const auto o = b.outcomes ? b.outcomes->outcomes[i] : analysis::Outcome::Phishing;
        out << detections[i].signature << ',' << analysis::to_string(o) << '\n';
      }
    }
    {
      auto out = open_out(dir / "gangs.json");
      out << analysis::gang_report_to_json(b.graph, b.gangs).dump(2) << '\n';
    }
  } catch (const std::exception& e) {
    io.err << "analyze failed: " << e.what() << '\n';
    return kExitError;
  }

  io.out << "detections: " << detections.size() << '\n';
  io.out << "total loss: $" << format_usd(b.losses.grand_total) << '\n';
  io.out << "phishers: " << b.phishers.size() << '\n';
  io.out << "gangs: " << b.gangs.size() << '\n';
  for (std::size_t i = 0; i < b.gangs.size(); ++i) {
    io.out << "  gang " << i + 1 << ": " << b.gangs[i].members.size() << " accounts, "
           << analysis::to_string(b.gangs[i].topology) << '\n';
  }
  io.out << "wrote reports to " << dir.string() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- export

int cmd_export(const fs::path& detections_path, const std::optional<fs::path>& gang_report, const RunConfig& config,
               Streams io) {
  std::vector<rules::Detection> detections;
  std::optional<analysis::GangReport> gangs;
  std::set<Address> labeled;
  try {
    detections = rules::read_detections(detections_path);
    if (gang_report) {
      std::ifstream in(*gang_report);
      if (!in) throw std::runtime_error("cannot open " + gang_report->string());
      json j;
      try {
        j = json::parse(in);
      } catch (const json::parse_error& e) {
        throw rules::SchemaViolation(gang_report->string() + ": " + e.what());
      }
      gangs = analysis::gang_report_from_json(j);
    }
    labeled = load_labeled(config);
  } catch (const std::exception& e) {
    io.err << "export failed: " << e.what() << '\n';
    return kExitError;
  }

  std::optional<analysis::OutcomeReport> outcomes;
  if (!labeled.empty()) outcomes = analysis::classify_detections(detections, labeled);

  struct Account {
    std::string source;
    std::map<PhishType, std::size_t> types;
    std::optional<UnixSeconds> first;
    std::optional<UnixSeconds> last;
  };
  std::map<Address, Account> accounts;
  for (std::size_t i = 0; i < detections.size(); ++i) {
    const auto& d = detections[i];
    auto& a = accounts[d.phisher];
    const bool laundering = outcomes && outcomes->outcomes[i] == analysis::Outcome::Laundering;
    const auto source = laundering ? (d.has(PhishType::ISA) ? "vanity_discovered" : "gang_member") : "detected";
    // detected beats vanity_discovered beats gang_member.
    auto rank = [](const std::string& s) { return s == "detected" ? 0 : s == "vanity_discovered" ? 1 : 2; };
    if (a.source.empty() || rank(source) < rank(a.source)) a.source = source;
    ++a.types[d.primary()];
    a.first = std::min(a.first.value_or(d.block_time), d.block_time);
    a.last = std::max(a.last.value_or(d.block_time), d.block_time);
  }
  if (gangs) {
    for (const auto& g : gangs->gangs) {
      for (const auto& m : g.members) {
        auto& a = accounts[m];
        if (a.source.empty()) a.source = "gang_member";
      }
    }
  }

  const auto& dir = config.output_dir;
  std::map<std::string, std::size_t> by_source;
  std::size_t edge_rows = 0;
  try {
    ensure_dir(dir);
    {
      auto out = open_out(dir / "phishing_accounts.csv");
      out << "address,source,dominant_type,first_seen,last_seen\n";
      for (const auto& [addr, a] : accounts) {
        std::string dominant;
        std::size_t best = 0;
        for (const auto& [t, n] : a.types) {
          if (n > best) {
            best = n;
            dominant = std::string(rules::to_string(t));
          }
        }
        out << addr.str() << ',' << a.source << ',' << dominant << ','
            << (a.first ? analysis::format_iso8601(*a.first) : "") << ','
            << (a.last ? analysis::format_iso8601(*a.last) : "") << '\n';
        ++by_source[a.source];
      }
    }
    rules::write_detections(dir / "phishing_transactions.jsonl", detections);
    {
      auto out = open_out(dir / "gang_edges.csv");
      out << "gang,from,to,kind,count\n";
      if (gangs) {
        for (std::size_t i = 0; i < gangs->gangs.size(); ++i) {
          for (const auto& e : gangs->gangs[i].edges) {
            out << i + 1 << ',' << e.from.str() << ',' << e.to.str() << ',' << analysis::to_string(e.kind) << ','
                << e.count << '\n';
            ++edge_rows;
          }
        }
      }
    }
    {
      auto out = open_out(dir / "MANIFEST");
      out << "accounts " << accounts.size() << '\n';
      for (const auto* s : {"detected", "vanity_discovered", "gang_member"}) out << "accounts." << s << ' ' << by_source[s] << '\n';
      out << "transactions " << detections.size() << '\n';
      out << "gang_edges " << edge_rows << '\n';
      for (const auto* f : {"phishing_accounts.csv", "phishing_transactions.jsonl", "gang_edges.csv"}) {
        out << "sha256 " << sha256_hex(dir / f) << ' ' << f << '\n';
      }
    }
  } catch (const std::exception& e) {
    io.err << "export failed: " << e.what() << '\n';
    return kExitError;
  }

  io.out << "accounts: " << accounts.size() << " (detected " << by_source["detected"] << ", vanity_discovered "
         << by_source["vanity_discovered"] << ", gang_member " << by_source["gang_member"] << ")\n";
  io.out << "transactions: " << detections.size() << '\n';
  io.out << "gang edges: " << edge_rows << '\n';
  io.out << "wrote dataset to " << dir.string() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- synth

int cmd_synth(const synth::CorpusParams& params, const fs::path& out_dir, Streams io) {
  try {
    const auto corpus = synth::generate_corpus(params);
    const auto manifest = synth::write_corpus(corpus, out_dir);
    std::size_t phishing = 0;
    for (const auto l : corpus.labels) phishing += synth::is_phishing(l);
    io.out << "seed " << params.seed << ": " << corpus.transactions.size() << " transactions, " << phishing
           << " phishing\n";
    for (const auto& [label, n] : corpus.manifest.tallies) {
      io.out << "  " << std::left << std::setw(12) << synth::to_string(label) << n << '\n';
    }
    io.out << "wrote " << manifest.string() << '\n';
  } catch (const std::exception& e) {
    io.err << "synth failed: " << e.what() << '\n';
    return kExitError;
  }
  return kExitOk;
}

}  // namespace solphish::app

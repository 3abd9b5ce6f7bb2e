#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "solphish/app.hpp"

using namespace solphish;

namespace {

struct Common {
  std::string config;
  std::string out;
  std::string rpc_url;
  std::string prices;
  std::string labels;
  std::string benign_programs;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "JSON run configuration")->check(CLI::ExistingFile);
  cmd->add_option("--out", c.out, "Output directory");
  cmd->add_option("--prices", c.prices, "Price table JSON")->check(CLI::ExistingFile);
  cmd->add_option("--labels", c.labels, "Labeled phishing accounts, one per line")->check(CLI::ExistingFile);
  cmd->add_option("--benign-programs", c.benign_programs, "Programs whose reassignments are benign")
      ->check(CLI::ExistingFile);
}

// Precedence: flag > env > file.
app::RunConfig make_config(const Common& c) {
  auto cfg = c.config.empty() ? app::RunConfig{} : app::RunConfig::load(c.config);
  cfg.apply_env();
  if (!c.rpc_url.empty()) cfg.rpc_url = c.rpc_url;
  if (!c.out.empty()) cfg.output_dir = c.out;
  if (!c.prices.empty()) cfg.prices_path = c.prices;
  if (!c.labels.empty()) cfg.labeled_phishers_path = c.labels;
  if (!c.benign_programs.empty()) cfg.benign_programs_path = c.benign_programs;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"Detect and analyze Solana-specific phishing transactions"};
  cli.require_subcommand(1);

  Common scan_opts;
  std::string account, tx, fixture;
  std::size_t limit = 1000;
  auto* scan = cli.add_subcommand("scan", "Classify an account history, one transaction, or a fixture");
  add_common(scan, scan_opts);
  auto* o_account = scan->add_option("--account", account, "Account whose history to scan");
  auto* o_tx = scan->add_option("--tx", tx, "Transaction signature");
  auto* o_fixture = scan->add_option("--fixture", fixture, "JSON-lines fixture")->check(CLI::ExistingFile);
  o_account->excludes(o_tx)->excludes(o_fixture);
  o_tx->excludes(o_fixture);
  scan->add_option("--limit", limit, "Maximum signatures fetched for --account")->check(CLI::PositiveNumber);
  scan->add_option("--rpc-url", scan_opts.rpc_url, "JSON-RPC endpoint");

  Common analyze_opts;
  std::string detections = "out/detections.jsonl", histories;
  auto* analyze = cli.add_subcommand("analyze", "Histogram, losses, phisher stats and gang report");
  add_common(analyze, analyze_opts);
  analyze->add_option("--detections", detections, "Detections JSON-lines")->check(CLI::ExistingFile);
  analyze->add_option("--histories", histories, "Fixture file or directory of account histories")
      ->check(CLI::ExistingPath);

  Common export_opts;
  std::string export_detections = "out/detections.jsonl", gangs;
  auto* exp = cli.add_subcommand("export", "Write the phishing dataset files");
  add_common(exp, export_opts);
  exp->add_option("--detections", export_detections, "Detections JSON-lines")->check(CLI::ExistingFile);
  exp->add_option("--gangs", gangs, "Gang report from analyze")->check(CLI::ExistingFile);

  std::uint64_t seed = 42;
  std::size_t total = 1000;
  std::vector<std::string> counts;
  std::string synth_out = "corpus";
  auto* syn = cli.add_subcommand("synth", "Generate a labeled synthetic corpus");
  syn->add_option("--seed", seed, "Generator seed");
  syn->add_option("--total", total, "Size of the default mixed corpus");
  syn->add_option("--count", counts, "Per-label count LABEL=N (replaces the mixed defaults)");
  syn->add_option("--out", synth_out, "Output directory");

  CLI11_PARSE(cli, argc, argv);

  const app::Streams io{std::cout, std::cerr};
  try {
    if (*scan) {
      if (!*o_account && !*o_tx && !*o_fixture) {
        std::cerr << "scan: one of --account, --tx, --fixture is required\n";
        return app::kExitError;
      }
      app::ScanTarget target;
      if (*o_account) target = {app::ScanTarget::Kind::Account, account, limit};
      if (*o_tx) target = {app::ScanTarget::Kind::Signature, tx, limit};
      if (*o_fixture) target = {app::ScanTarget::Kind::Fixture, fixture, limit};
      return app::cmd_scan(target, make_config(scan_opts), io);
    }
    if (*analyze) {
      std::optional<std::filesystem::path> h;
      if (!histories.empty()) h = histories;
      return app::cmd_analyze(detections, h, make_config(analyze_opts), io);
    }
    if (*exp) {
      std::optional<std::filesystem::path> g;
      if (!gangs.empty()) g = gangs;
      return app::cmd_export(export_detections, g, make_config(export_opts), io);
    }
    if (*syn) {
      auto params = synth::CorpusParams::mixed(seed, total);
      if (!counts.empty()) {
        params.counts.clear();
        for (const auto& c : counts) {
          const auto eq = c.find('=');
          const auto label = synth::label_from(c.substr(0, eq));
          if (eq == std::string::npos || !label) {
            std::cerr << "synth: bad --count '" << c << "' (want LABEL=N)\n";
            return app::kExitError;
          }
          params.counts[*label] = std::stoull(c.substr(eq + 1));
        }
      }
      return app::cmd_synth(params, synth_out, io);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return app::kExitError;
  }
  return app::kExitError;
}

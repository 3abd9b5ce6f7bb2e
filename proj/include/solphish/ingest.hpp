#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "solphish/txmodel.hpp"

namespace solphish::ingest {

class MalformedPayload : public std::runtime_error {
 public:
  MalformedPayload(std::string path, std::string reason)
      : std::runtime_error(path + ": " + reason), path_(std::move(path)), reason_(std::move(reason)) {}
  const std::string& path() const { return path_; }
  const std::string& reason() const { return reason_; }

 private:
  std::string path_;
  std::string reason_;
};

/// A transaction exactly as an endpoint returned it.
struct RawTransactionRecord {
  std::string signature;
  std::string payload;  // compact JSON text of the getTransaction result
  UnixSeconds fetched_at = 0;

  bool operator==(const RawTransactionRecord&) const = default;
};

/// Parsed-encoding getTransaction result -> Transaction.
///
/// Instruction order is top-level order with each instruction's inner
/// instructions following it. Token balances are joined on (account, mint);
/// a side missing from pre/postTokenBalances counts as zero.
Transaction normalize(const RawTransactionRecord& raw);
Transaction normalize_payload(const nlohmann::json& payload);

/// Inverse of normalize_payload for transactions in canonical form.
/// Used to write fixtures and synthetic corpora.
nlohmann::json encode_payload(const Transaction& tx);

RawTransactionRecord make_record(const Transaction& tx, UnixSeconds fetched_at);

/// One JSON-lines fixture line: {"signature","fetched_at","payload"}.
std::string record_to_line(const RawTransactionRecord& record);
RawTransactionRecord record_from_line(std::string_view line);

std::vector<RawTransactionRecord> read_records(const std::filesystem::path& path);
void write_records(const std::filesystem::path& path, const std::vector<RawTransactionRecord>& records);

/// Reads a JSON-lines fixture and normalizes every line, preserving order.
/// Errors carry the 1-based line number in their path.
std::vector<Transaction> load_fixture(const std::filesystem::path& path);

}  // namespace solphish::ingest

#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <semaphore>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "solphish/ingest.hpp"

namespace solphish::ingest {

class EndpointUnavailable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class RateLimited : public std::runtime_error {
 public:
  RateLimited(const std::string& what, std::chrono::milliseconds retry_after)
      : std::runtime_error(what), retry_after_(retry_after) {}
  std::chrono::milliseconds retry_after() const { return retry_after_; }

 private:
  std::chrono::milliseconds retry_after_;
};

class NotFound : public std::runtime_error {
 public:
  explicit NotFound(const std::string& signature)
      : std::runtime_error("transaction not found: " + signature) {}
};

/// Error object returned by the endpoint itself; never retried.
class RpcError : public std::runtime_error {
 public:
  RpcError(int code, const std::string& message)
      : std::runtime_error("rpc error " + std::to_string(code) + ": " + message), code_(code) {}
  int code() const { return code_; }

 private:
  int code_;
};

struct IngestConfig {
  std::string endpoint_url;
  std::size_t max_in_flight = 8;
  int retry_limit = 3;
  int backoff_base_ms = 250;
  std::filesystem::path cache_dir;
  std::size_t page_size = 1000;  // getSignaturesForAddress caps pages at 1000
  /// Serve signature listings from the cache when present. Off by default:
  /// a cached listing never shows newer transactions.
  bool reuse_listings = false;

  /// Throws std::invalid_argument on a violated bound.
  void check() const;
};

/// endpoint_url from SOLPHISH_RPC_URL when set, else `fallback`.
std::string endpoint_from_env(const std::string& fallback);

/// One JSON-RPC method call. Implementations return the "result" member and
/// signal failures with EndpointUnavailable, RateLimited or RpcError.
class RpcTransport {
 public:
  virtual ~RpcTransport() = default;
  virtual nlohmann::json call(const std::string& method, const nlohmann::json& params) = 0;
};

/// JSON-RPC over HTTP(S).
class HttpTransport : public RpcTransport {
 public:
  explicit HttpTransport(std::string url, std::chrono::seconds timeout = std::chrono::seconds(30));
  nlohmann::json call(const std::string& method, const nlohmann::json& params) override;

 private:
  std::string scheme_host_port_;
  std::string path_;
  std::chrono::seconds timeout_;
  std::atomic<std::uint64_t> next_id_{1};
};

/// One JSON file per signature, named by the signature. Writers go through
/// a temporary file and an atomic rename, so concurrent writers are safe.
class TransactionCache {
 public:
  explicit TransactionCache(std::filesystem::path dir);

  std::optional<RawTransactionRecord> get(const std::string& signature) const;
  void put(const RawTransactionRecord& record) const;
  /// Signature listings, keyed by account and limit.
  std::optional<std::vector<std::string>> get_listing(const std::string& key) const;
  void put_listing(const std::string& key, const std::vector<std::string>& signatures) const;
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
};

class RpcClient {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  RpcClient(IngestConfig config, std::shared_ptr<RpcTransport> transport, Sleeper sleeper = {});

  /// Up to `limit` signatures for `account`, newest first, paging
  /// page_size at a time. `before` resumes after a known signature.
  std::vector<std::string> fetch_signatures(const Address& account, std::size_t limit,
                                            const std::optional<std::string>& before = std::nullopt);

  /// Cache first; a miss fetches (parsed encoding), stores and returns.
  RawTransactionRecord fetch_transaction(const std::string& signature);

  /// Fetches in parallel with at most max_in_flight outstanding requests.
  /// Results are in input order; the first failure is rethrown.
  std::vector<RawTransactionRecord> fetch_transactions(std::span<const std::string> signatures);

  std::size_t network_calls() const { return network_calls_.load(); }
  std::size_t cache_hits() const { return cache_hits_.load(); }
  const IngestConfig& config() const { return config_; }

 private:
  nlohmann::json call_with_retry(const std::string& method, const nlohmann::json& params);

  IngestConfig config_;
  std::shared_ptr<RpcTransport> transport_;
  Sleeper sleeper_;
  std::optional<TransactionCache> cache_;
  std::counting_semaphore<1 << 20> in_flight_;
  std::atomic<std::size_t> network_calls_{0};
  std::atomic<std::size_t> cache_hits_{0};
};

/// Signatures + transactions for an account, normalized; failed
/// transactions are kept (the rules skip them).
std::vector<Transaction> ingest_account(RpcClient& client, const Address& account, std::size_t limit);

}  // namespace solphish::ingest

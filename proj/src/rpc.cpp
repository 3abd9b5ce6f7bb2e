#include "solphish/rpc.hpp"

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "solphish/base58.hpp"

namespace solphish::ingest {

using nlohmann::json;

void IngestConfig::check() const {
  if (max_in_flight < 1) throw std::invalid_argument("max_in_flight must be >= 1");
  if (retry_limit < 0) throw std::invalid_argument("retry_limit must be >= 0");
  if (backoff_base_ms < 1) throw std::invalid_argument("backoff_base_ms must be >= 1");
  if (page_size < 1) throw std::invalid_argument("page_size must be >= 1");
}

std::string endpoint_from_env(const std::string& fallback) {
  if (const char* env = std::getenv("SOLPHISH_RPC_URL"); env != nullptr && *env != '\0') return env;
  return fallback;
}

HttpTransport::HttpTransport(std::string url, std::chrono::seconds timeout) : timeout_(timeout) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw std::invalid_argument("endpoint url needs a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) {
    scheme_host_port_ = url;
    path_ = "/";
  } else {
    scheme_host_port_ = url.substr(0, path_start);
    path_ = url.substr(path_start);
  }
}

json HttpTransport::call(const std::string& method, const json& params) {
  httplib::Client client(scheme_host_port_);
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);

  const json request = {{"jsonrpc", "2.0"}, {"id", next_id_++}, {"method", method}, {"params", params}};
  auto response = client.Post(path_, request.dump(), "application/json");
  if (!response) {
    throw EndpointUnavailable(method + ": " + httplib::to_string(response.error()));
  }
  if (response->status == 429) {
    std::chrono::milliseconds retry_after{0};
    if (response->has_header("Retry-After")) {
      try {
        retry_after = std::chrono::seconds(std::stoll(response->get_header_value("Retry-After")));
      } catch (const std::exception&) {
      }
    }
    throw RateLimited(method + ": HTTP 429", retry_after);
  }
  if (response->status >= 500) {
    throw EndpointUnavailable(method + ": HTTP " + std::to_string(response->status));
  }
  if (response->status != 200) {
    throw RpcError(response->status, "HTTP status for " + method);
  }

  json body;
  try {
    body = json::parse(response->body);
  } catch (const json::parse_error& e) {
    throw EndpointUnavailable(method + ": unparseable response: " + e.what());
  }
  if (body.contains("error") && !body["error"].is_null()) {
    const auto& error = body["error"];
    const int code = error.value("code", 0);
    const auto message = error.value("message", std::string("unknown"));
    if (code == 429 || code == -32429) throw RateLimited(method + ": " + message, std::chrono::milliseconds(0));
    throw RpcError(code, message);
  }
  return body.value("result", json(nullptr));
}

TransactionCache::TransactionCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
}

std::optional<RawTransactionRecord> TransactionCache::get(const std::string& signature) const {
  const auto path = dir_ / signature;
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::stringstream buffer;
  buffer << in.rdbuf();
  auto text = buffer.str();
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
  return record_from_line(text);
}

namespace {

void write_atomically(const std::filesystem::path& target, const std::string& text) {
  std::ostringstream tmp_name;
  tmp_name << "." << target.filename().string() << ".tmp." << std::this_thread::get_id();
  const auto tmp = target.parent_path() / tmp_name.str();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write cache file " + tmp.string());
    out << text << '\n';
    if (!out) throw std::runtime_error("cache write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, target);
}

}  // namespace

void TransactionCache::put(const RawTransactionRecord& record) const {
  write_atomically(dir_ / record.signature, record_to_line(record));
}

std::optional<std::vector<std::string>> TransactionCache::get_listing(const std::string& key) const {
  std::ifstream in(dir_ / "listings" / (key + ".json"), std::ios::binary);
  if (!in) return std::nullopt;
  try {
    return json::parse(in).get<std::vector<std::string>>();
  } catch (const json::exception&) {
    return std::nullopt;
  }
}

void TransactionCache::put_listing(const std::string& key, const std::vector<std::string>& signatures) const {
  std::filesystem::create_directories(dir_ / "listings");
  write_atomically(dir_ / "listings" / (key + ".json"), json(signatures).dump());
}

namespace {

class Permit {
 public:
  explicit Permit(std::counting_semaphore<1 << 20>& sem) : sem_(sem) { sem_.acquire(); }
  ~Permit() { sem_.release(); }
  Permit(const Permit&) = delete;
  Permit& operator=(const Permit&) = delete;

 private:
  std::counting_semaphore<1 << 20>& sem_;
};

bool is_signature(const std::string& text) {
  if (text.size() < 64 || text.size() > 88) return false;
  auto bytes = base58::decode(text);
  return bytes && bytes->size() == 64;
}

UnixSeconds now_seconds() {
  return std::chrono::duration_cast<std::chrono::seconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

}  // namespace

RpcClient::RpcClient(IngestConfig config, std::shared_ptr<RpcTransport> transport, Sleeper sleeper)
    : config_(std::move(config)),
      transport_(std::move(transport)),
      sleeper_(std::move(sleeper)),
      in_flight_(static_cast<std::ptrdiff_t>(std::max<std::size_t>(config_.max_in_flight, 1))) {
  config_.check();
  if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  if (!config_.cache_dir.empty()) cache_.emplace(config_.cache_dir);
}

json RpcClient::call_with_retry(const std::string& method, const json& params) {
  for (int attempt = 0;; ++attempt) {
    std::chrono::milliseconds delay{config_.backoff_base_ms * (1LL << std::min(attempt, 20))};
    try {
      Permit permit(in_flight_);
      ++network_calls_;
      return transport_->call(method, params);
    } catch (const RateLimited& e) {
      if (attempt >= config_.retry_limit) throw;
      delay = std::max(delay, e.retry_after());
    } catch (const EndpointUnavailable&) {
      if (attempt >= config_.retry_limit) throw;
    }
    sleeper_(delay);
  }
}

std::vector<std::string> RpcClient::fetch_signatures(const Address& account, std::size_t limit,
                                                     const std::optional<std::string>& before) {
  const auto key = account.str() + "-" + std::to_string(limit);
  if (cache_ && config_.reuse_listings && !before) {
    if (auto hit = cache_->get_listing(key)) {
      ++cache_hits_;
      return *hit;
    }
  }
  std::vector<std::string> out;
  std::optional<std::string> cursor = before;
  while (out.size() < limit) {
    const auto page = std::min(config_.page_size, limit - out.size());
    json options = {{"limit", page}};
    if (cursor) options["before"] = *cursor;
    const auto result = call_with_retry("getSignaturesForAddress", json::array({account.str(), options}));
    if (!result.is_array()) throw EndpointUnavailable("getSignaturesForAddress: result is not an array");
    for (const auto& item : result) out.push_back(item.at("signature").get<std::string>());
    if (result.size() < page || result.empty()) break;
    cursor = out.back();
  }
  if (out.size() > limit) out.resize(limit);
  if (cache_ && !before) cache_->put_listing(key, out);
  return out;
}

RawTransactionRecord RpcClient::fetch_transaction(const std::string& signature) {
  if (!is_signature(signature)) throw NotFound(signature);
  if (cache_) {
    if (auto hit = cache_->get(signature)) {
      ++cache_hits_;
      return *hit;
    }
  }
  const json options = {{"encoding", "jsonParsed"}, {"maxSupportedTransactionVersion", 0}};
  const auto result = call_with_retry("getTransaction", json::array({signature, options}));
  if (result.is_null()) throw NotFound(signature);
  RawTransactionRecord record{signature, result.dump(), now_seconds()};
  if (cache_) cache_->put(record);
  return record;
}

std::vector<RawTransactionRecord> RpcClient::fetch_transactions(std::span<const std::string> signatures) {
  std::vector<RawTransactionRecord> results(signatures.size());
  std::vector<std::exception_ptr> errors(signatures.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (auto i = next++; i < signatures.size(); i = next++) {
      try {
        results[i] = fetch_transaction(signatures[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto workers = std::min(config_.max_in_flight, signatures.size());
  {
    std::vector<std::jthread> pool;
    for (std::size_t i = 1; i < workers; ++i) pool.emplace_back(worker);
    worker();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

std::vector<Transaction> ingest_account(RpcClient& client, const Address& account, std::size_t limit) {
  const auto signatures = client.fetch_signatures(account, limit);
  const auto records = client.fetch_transactions(signatures);
  std::vector<Transaction> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(normalize(r));
  return out;
}

}  // namespace solphish::ingest

#include <set>

#include "doctest.h"
#include "fake_endpoint.hpp"
#include "solphish/rpc.hpp"
#include "support.hpp"

using namespace solphish;
using ingest::IngestConfig;
using ingest::RpcClient;

namespace {

const Address kGck5 = Address::parse("Gck5PWhKL4Qn87bhFwpL19Y5gkAbFN93GXXsTzuJ1VX4");

// An account history of n generated transactions, newest first.
std::shared_ptr<testing::FakeEndpoint> endpoint_with_history(const Address& account, std::size_t n,
                                                               std::uint64_t seed = 1) {
  auto ep = std::make_shared<testing::FakeEndpoint>();
  synth::Rng rng(seed);
  synth::Context ctx;
  ctx.phisher = account;
  auto& list = ep->listings[account.str()];
  for (std::size_t i = 0; i < n; ++i) {
    ctx.block_time = 1709251200 - static_cast<UnixSeconds>(i) * 60;
    const auto g = synth::gen_stmt_phish(rng, ctx, {2});
    ep->transactions[g.tx.signature] = ingest::encode_payload(g.tx);
    list.push_back(g.tx.signature);
  }
  return ep;
}

IngestConfig config(std::size_t in_flight = 4) {
  IngestConfig c;
  c.endpoint_url = "fake://";
  c.max_in_flight = in_flight;
  c.retry_limit = 3;
  c.backoff_base_ms = 1;
  return c;
}

struct SleepLog {
  std::shared_ptr<std::vector<std::chrono::milliseconds>> delays = std::make_shared<std::vector<std::chrono::milliseconds>>();
  std::shared_ptr<std::mutex> mu = std::make_shared<std::mutex>();
  RpcClient::Sleeper sleeper() {
    return [d = delays, m = mu](std::chrono::milliseconds ms) {
      std::lock_guard lock(*m);
      d->push_back(ms);
    };
  }
};

}  // namespace

TEST_SUITE("rpc") {

TEST_CASE("config bounds") {
  auto c = config();
  CHECK_NOTHROW(c.check());
  c.max_in_flight = 0;
  CHECK_THROWS_AS(c.check(), std::invalid_argument);
  c = config();
  c.retry_limit = -1;
  CHECK_THROWS_AS(c.check(), std::invalid_argument);
}

TEST_CASE("signature listing honours the limit and pages without duplicates") {
  auto ep = endpoint_with_history(kGck5, 250);
  auto c = config();
  c.page_size = 100;
  RpcClient client(c, ep);

  const auto hundred = client.fetch_signatures(kGck5, 100);
  CHECK(hundred.size() == 100);

  ep->reset_counters();
  const auto all = client.fetch_signatures(kGck5, 250);
  CHECK(ep->calls_of("getSignaturesForAddress") == 3);
  CHECK(all.size() == 250);
  CHECK(std::set<std::string>(all.begin(), all.end()).size() == all.size());
  CHECK(all == ep->listings[kGck5.str()]);
}

TEST_CASE("account with no history") {
  auto ep = std::make_shared<testing::FakeEndpoint>();
  RpcClient client(config(), ep);
  const auto a = Address::parse("BNRThTYg9x49JYNkbDUYERb3X7JV2GYcEpFLAUHX5Rep");
  CHECK(client.fetch_signatures(a, 1000).empty());
  CHECK(ingest::ingest_account(client, a, 1000).empty());
}

TEST_CASE("in-flight requests never exceed max_in_flight") {
  auto ep = endpoint_with_history(kGck5, 120);
  ep->latency = std::chrono::microseconds(2000);
  for (std::size_t cap : {1u, 3u, 8u}) {
    ep->reset_counters();
    RpcClient client(config(cap), ep);
    const auto txs = ingest::ingest_account(client, kGck5, 120);
    CHECK(txs.size() == 120);
    CHECK(ep->peak_in_flight() <= static_cast<int>(cap));
    if (cap > 1) CHECK(ep->peak_in_flight() > 1);
  }
}

TEST_CASE("retries stop at retry_limit") {
  auto ep = endpoint_with_history(kGck5, 5);
  ep->unavailable_first = 100;
  SleepLog log;
  auto c = config();
  c.retry_limit = 2;
  RpcClient client(c, ep, log.sleeper());
  const auto sig = ep->listings[kGck5.str()].front();
  CHECK_THROWS_AS(client.fetch_transaction(sig), ingest::EndpointUnavailable);
  CHECK(ep->calls() == 3);
  CHECK(log.delays->size() == 2);
  // Exponential backoff from the base delay.
  CHECK(log.delays->at(0) == std::chrono::milliseconds(1));
  CHECK(log.delays->at(1) == std::chrono::milliseconds(2));
}

TEST_CASE("transient failures within the limit succeed") {
  auto ep = endpoint_with_history(kGck5, 20);
  ep->rate_limit_first = 1;
  ep->unavailable_first = 1;
  ep->retry_after = std::chrono::milliseconds(700);
  SleepLog log;
  RpcClient client(config(), ep, log.sleeper());
  const auto txs = ingest::ingest_account(client, kGck5, 20);
  CHECK(txs.size() == 20);
  CHECK(ep->max_attempts() == 3);
  CHECK(ep->max_attempts() <= client.config().retry_limit + 1);
  // Retry-After dominates the computed backoff.
  CHECK(std::count(log.delays->begin(), log.delays->end(), std::chrono::milliseconds(700)) == 21);
}

TEST_CASE("endpoint errors are not retried") {
  struct Unknown : ingest::RpcTransport {
    nlohmann::json call(const std::string&, const nlohmann::json&) override {
      ++n;
      throw ingest::RpcError(-32602, "invalid params");
    }
    int n = 0;
  };
  auto bad = std::make_shared<Unknown>();
  RpcClient strict(config(), bad);
  CHECK_THROWS_AS(strict.fetch_signatures(kGck5, 10), ingest::RpcError);
  CHECK(bad->n == 1);
}

TEST_CASE("garbage and unknown signatures are NotFound") {
  auto ep = endpoint_with_history(kGck5, 1);
  RpcClient client(config(), ep);
  CHECK_THROWS_AS(client.fetch_transaction("zzzz"), ingest::NotFound);
  CHECK(ep->calls() == 0);
  synth::Rng rng(1234);
  CHECK_THROWS_AS(client.fetch_transaction(synth::random_signature(rng)), ingest::NotFound);
}

TEST_CASE("cache serves repeat fetches without network calls") {
  testing::TempDir dir("cache");
  auto ep = endpoint_with_history(kGck5, 3);
  auto c = config();
  c.cache_dir = dir.path();
  RpcClient client(c, ep);
  const auto sig = ep->listings[kGck5.str()].front();
  const auto first = client.fetch_transaction(sig);
  const auto calls = client.network_calls();
  const auto second = client.fetch_transaction(sig);
  CHECK(second.payload == first.payload);
  CHECK(client.network_calls() == calls);
  CHECK(client.cache_hits() == 1);
}

TEST_CASE("second full ingest of a cached corpus makes zero network calls") {
  testing::TempDir dir("cache");
  auto ep = endpoint_with_history(kGck5, 150);
  auto c = config();
  c.cache_dir = dir.path();
  c.page_size = 64;
  c.reuse_listings = true;

  RpcClient first(c, ep);
  const auto a = ingest::ingest_account(first, kGck5, 150);
  CHECK(first.network_calls() > 0);

  ep->reset_counters();
  RpcClient second(c, ep);
  const auto b = ingest::ingest_account(second, kGck5, 150);
  CHECK(second.network_calls() == 0);
  CHECK(ep->calls() == 0);
  CHECK(a == b);
}

TEST_CASE("without listing reuse only the listing goes to the network") {
  testing::TempDir dir("cache");
  auto ep = endpoint_with_history(kGck5, 30);
  auto c = config();
  c.cache_dir = dir.path();
  RpcClient first(c, ep);
  ingest::ingest_account(first, kGck5, 30);
  ep->reset_counters();
  RpcClient second(c, ep);
  ingest::ingest_account(second, kGck5, 30);
  CHECK(ep->calls_of("getTransaction") == 0);
  CHECK(ep->calls_of("getSignaturesForAddress") == 1);
}

}

#include <chrono>
#include <numeric>

#include <boost/multiprecision/cpp_int.hpp>

#include "doctest.h"
#include "solphish/analysis.hpp"
#include "solphish/rules.hpp"
#include "support.hpp"

using namespace solphish;
using namespace solphish::analysis;
using boost::multiprecision::cpp_rational;
using testing::Sketch;

namespace {

const rules::RuleConfig& cfg() {
  static const auto c = synth::default_rule_config();
  return c;
}

PriceTable example_prices() { return PriceTable::load(testing::source_path("data/prices.example.json")); }

Detection at(UnixSeconds t, PhishType type, std::optional<Usd> loss = std::nullopt) {
  static synth::Rng rng(500);
  Detection d;
  d.signature = synth::random_signature(rng);
  d.block_time = t;
  d.phish_types = {type};
  d.victim = synth::random_address(rng);
  d.phisher = synth::random_address(rng);
  d.loss_usd = loss;
  return d;
}

// "0.9998" -> 9998/10000, exactly.
cpp_rational rational(const std::string& s) {
  const auto dot = s.find('.');
  if (dot == std::string::npos) return cpp_rational(std::stoll(s));
  auto digits = s.substr(0, dot) + s.substr(dot + 1);
  digits.erase(0, std::min(digits.find_first_not_of('0'), digits.size() - 1));
  cpp_rational den = 1;
  for (std::size_t i = dot + 1; i < s.size(); ++i) den *= 10;
  return cpp_rational(boost::multiprecision::cpp_int(digits)) / den;
}

Transaction sketch_transfer(Sketch& s, const Address& from, const Address& to) {
  s.transfer(from, to, 1);
  return s;
}

}  // namespace

TEST_SUITE("analysis") {

TEST_CASE("calendar helpers agree with std::chrono") {
  using namespace std::chrono;
  CHECK(analysis::utc_seconds(2024, 3, 1) == 1709251200);
  synth::Rng rng(31);
  for (int i = 0; i < 5000; ++i) {
    const auto t = static_cast<UnixSeconds>(rng.uniform(0, 4'102'444'800ULL));
    const sys_seconds tp{seconds{t}};
    const year_month_day ymd{floor<days>(tp)};
    const auto m = month_of(t);
    REQUIRE(m.year == static_cast<int>(ymd.year()));
    REQUIRE(m.month == static_cast<unsigned>(ymd.month()));
    const auto tod = hh_mm_ss{tp - floor<days>(tp)};
    CHECK(analysis::utc_seconds(m.year, m.month, static_cast<unsigned>(ymd.day()), static_cast<int>(tod.hours().count()),
                      static_cast<int>(tod.minutes().count()), static_cast<int>(tod.seconds().count())) == t);
    CHECK(parse_iso8601(format_iso8601(t)) == t);
  }
  CHECK(format_month({2024, 3}) == "2024-03");
  CHECK(format_date(1710662400) == "2024-03-17");
  CHECK(format_iso8601(1710662400 + 8 * 3600) == "2024-03-17T16:00:00Z");
  CHECK_THROWS(parse_iso8601("2024-13-01T00:00:00Z"));
}

TEST_CASE("monthly histogram") {
  CHECK(monthly_histogram({}).empty());
  const std::vector<Detection> ds = {at(utc_seconds(2024, 3, 2), PhishType::AAT),
                                     at(utc_seconds(2024, 3, 31, 23, 59, 59), PhishType::AAT),
                                     at(utc_seconds(2024, 4, 1), PhishType::STMT)};
  const auto h = monthly_histogram(ds);
  REQUIRE(h.size() == 2);
  CHECK(h.at({2024, 3}).at(PhishType::AAT) == 2);
  CHECK(h.at({2024, 4}).at(PhishType::STMT) == 1);
}

TEST_CASE("price table") {
  const auto p = example_prices();
  CHECK(p.price(Asset::token(testing::kUsdc)) == Usd("1.00"));
  CHECK_FALSE(p.price(Asset::token(Address::parse("BNRThTYg9x49JYNkbDUYERb3X7JV2GYcEpFLAUHX5Rep"))));
  CHECK(parse_usd("0.9998") * Usd(100) == Usd("99.98"));
  CHECK_THROWS_AS(parse_usd("-1"), std::invalid_argument);
  CHECK_THROWS_AS(parse_usd("abc"), std::invalid_argument);
  CHECK(format_usd(Usd("2.005")) == "2.01");
  CHECK(format_usd(Usd("-0.001")) == "0.00");
  CHECK(usd_to_string(Usd("12.50")) == "12.5");
}

TEST_CASE("loss of a plain token drain") {
  Sketch s;
  const auto v = s.addr();
  const auto p = s.addr();
  const auto src = s.addr();
  s.payer(v).token(src, v, testing::kUsdc, 100'000'000, 0).token(s.addr(), p, testing::kUsdc, 0, 100'000'000);
  s.transfer(src, p, 100'000'000, testing::kUsdc);
  Detection d = at(0, PhishType::STMT);
  d.victim = v;
  d.phisher = p;

  PriceTable prices;
  prices.set(Asset::token(testing::kUsdc), Usd("0.9998"));
  CHECK(compute_loss(d, s, prices).loss_usd == Usd("99.98"));

  const auto missing = compute_loss(d, s, PriceTable{});
  CHECK(missing.loss_usd == 0);
  CHECK(missing.unpriced_assets == std::vector<std::string>{testing::kUsdc.str()});
}

TEST_CASE("AAT loss is the value held by the reassigned account") {
  const auto tx = testing::fixture_tx("fixtures/payloads/aat_50usdc.jsonl");
  const auto d = rules::classify(tx, cfg()).detection;
  REQUIRE(d);
  REQUIRE(d->primary() == PhishType::AAT);
  const auto loss = compute_loss(*d, tx, example_prices());
  CHECK(loss.loss_usd == Usd(50));
  CHECK(format_usd(loss.loss_usd) == "50.00");
}

TEST_CASE("STMT loss matches an exact rational oracle") {
  const auto tx = testing::fixture_tx("fixtures/real/stmt_five_transfers.jsonl");
  const auto d = rules::classify(tx, cfg()).detection;
  REQUIRE(d);
  const std::map<std::string, std::string> price_text = {
      {"NATIVE", "189.31"},
      {"EPjFWdd5AufqSSqeM2qN1xzybapC8G4wEGGkZwyTDt1v", "1.00"},
      {"DezXAZ8z7PnrnRJjz3wXBoRgixCa6xjnB7YaB1pPB263", "0.00002675"},
      {"JUPyiwrYJFskUPiHa7hkeR8VUtAeFoSYbKedZNsDvCN", "0.7926"},
      {"EKpQGSJtjMFqKZ9KQanSqYXRcF8fBopzLHYxdM65zcjm", "1.72"}};
  cpp_rational expected = 0;
  for (const auto& e : tx.balances) {
    if (e.holder() != d->victim) continue;
    std::int64_t out = -e.delta();
    if (e.asset.is_native()) out -= static_cast<std::int64_t>(tx.fee);
    if (out <= 0) continue;
    cpp_rational scale = 1;
    for (int i = 0; i < e.decimals; ++i) scale *= 10;
    expected += cpp_rational(out) / scale * rational(price_text.at(e.asset.key()));
  }
  const auto got = compute_loss(*d, tx, example_prices()).loss_usd;
  const Usd oracle = Usd(boost::multiprecision::numerator(expected).str()) /
                     Usd(boost::multiprecision::denominator(expected).str());
  CHECK(abs(got - oracle) < Usd("1e-30"));
  CHECK(format_usd(got, 8) == format_usd(oracle, 8));
}

TEST_CASE("loss summary is additive") {
  synth::Rng rng(8);
  std::vector<Detection> ds;
  for (int i = 0; i < 300; ++i) {
    const auto type = static_cast<PhishType>(rng.uniform(0, 2));
    std::optional<Usd> loss;
    if (rng.chance(9, 10)) loss = Usd(rng.uniform(0, 10'000'000)) / Usd(rng.uniform(1, 997));
    ds.push_back(at(static_cast<UnixSeconds>(rng.uniform(1'700'000'000, 1'730'000'000)), type, loss));
  }
  const auto s = summarize_losses(ds);
  CHECK_FALSE(check_loss_consistency(s));
  Usd sum = 0;
  std::size_t n = 0;
  for (const auto& [type, t] : s.by_type) {
    sum += t.total;
    n += t.count;
    CHECK(abs(t.average() * Usd(t.count) - t.total) <= Usd("0.01"));
  }
  CHECK(abs(sum - s.grand_total) <= Usd("0.01"));
  CHECK(n == ds.size());

  auto broken = s;
  broken.grand_total += Usd(1);
  CHECK(check_loss_consistency(broken));

  const auto daily = daily_losses(ds);
  Usd daily_sum = 0;
  for (const auto& [_, v] : daily) daily_sum += v;
  CHECK(abs(daily_sum - s.grand_total) <= Usd("0.01"));
}

TEST_CASE("top tokens") {
  Detection d = at(0, PhishType::STMT);
  d.stmt = rules::StmtEvidence{3,
                               {{d.victim, Asset::token(testing::kUsdc)}, {d.victim, Asset::token(testing::kBonk)}},
                               false};
  const std::vector<Detection> one = {d};
  const auto top = top_tokens(one, 10);
  REQUIRE(top.size() == 2);
  CHECK(top[0].count == 1);
  CHECK(top[1].count == 1);
  CHECK(top_tokens(one, 1).size() == 1);
  CHECK(top_tokens({}, 5).empty());
}

TEST_CASE("top tokens recovers the generator's oversampled mint") {
  const auto corpus = synth::generate_corpus(synth::CorpusParams::mixed(11, 600));
  std::vector<Detection> ds;
  for (const auto& tx : corpus.transactions) {
    if (auto d = rules::classify(tx, cfg()).detection) ds.push_back(*d);
  }
  const auto top = top_tokens(ds, 3);
  REQUIRE_FALSE(top.empty());
  const auto& tally = corpus.manifest.mint_tally;
  const auto best = std::max_element(tally.begin(), tally.end(),
                                     [](const auto& a, const auto& b) { return a.second < b.second; });
  CHECK(top[0].asset.key() == synth::mint_pool().front().first.str());
  CHECK(top[0].asset.key() == best->first);
  CHECK(top[0].count == best->second);
}

TEST_CASE("phisher lifecycle") {
  auto d = at(1'700'000'000, PhishType::ISA);
  const std::vector<Detection> one = {d};
  const auto s = phisher_stats(one, {{d.phisher, {}}});
  REQUIRE(s.size() == 1);
  CHECK(s[0].phishing_period() == 0);
  CHECK(s[0].dormant_period() == 0);
  CHECK_FALSE(s[0].history_missing);
  CHECK(phisher_stats(one, {})[0].history_missing);

  const auto bnrt = Address::parse("BNRThTYg9x49JYNkbDUYERb3X7JV2GYcEpFLAUHX5Rep");
  std::vector<Detection> many;
  for (int i = 0; i < 931; ++i) {
    auto x = at(1'700'000'000 + i * 600, PhishType::AAT);
    x.phisher = bnrt;
    many.push_back(x);
  }
  many.push_back(at(1'700'000'000, PhishType::STMT));
  const auto stats = phisher_stats(many, {});
  CHECK(stats[0].account == bnrt);
  CHECK(stats[0].attempts == 931);
  CHECK(stats[0].dominant_type == PhishType::AAT);
  CHECK(stats[0].phishing_period() == 930 * 600);
}

TEST_CASE("scripted phisher periods are recovered exactly") {
  const auto corpus = synth::generate_corpus(synth::CorpusParams::mixed(42, 1000));
  std::vector<Detection> ds;
  for (const auto& tx : corpus.transactions) {
    if (auto d = rules::classify(tx, cfg()).detection) ds.push_back(*d);
  }
  Histories h;
  for (const auto& tx : corpus.transactions) {
    for (const auto& a : participants(tx)) h[a].push_back(tx);
  }
  const auto stats = phisher_stats(ds, h);
  REQUIRE(stats.size() == corpus.manifest.phishers.size());
  for (const auto& script : corpus.manifest.phishers) {
    const auto it = std::find_if(stats.begin(), stats.end(), [&](const auto& s) { return s.account == script.address; });
    REQUIRE(it != stats.end());
    CHECK(it->attempts == script.attempts);
    CHECK(it->first_phish == script.first_phish);
    CHECK(it->last_phish == script.last_phish);
    CHECK(it->last_activity == script.last_activity);
    CHECK(it->dominant_type == script.family);
  }
}

TEST_CASE("outcome classification") {
  auto d = at(0, PhishType::ISA);
  const auto vanity = Address::parse("9LMa3PfmGCA61itb479zZVU9Pjqg8j1fXzP1Ex11111");
  CHECK_THROWS_AS(classify_detections(std::vector<Detection>{d}, {}), std::invalid_argument);

  auto mutual = d;
  auto phishing = d;
  auto laundering = d;
  laundering.phisher = vanity;
  const std::set<Address> labeled = {d.victim, d.phisher};
  phishing.victim = Address::parse("BNRThTYg9x49JYNkbDUYERb3X7JV2GYcEpFLAUHX5Rep");
  const std::vector<Detection> ds = {mutual, phishing, laundering};
  const auto r = classify_detections(ds, labeled);
  CHECK(r.outcomes == std::vector<Outcome>{Outcome::MutualTransfer, Outcome::Phishing, Outcome::Laundering});
  CHECK(r.gang_candidates == std::set<Address>{vanity});
}

TEST_CASE("gang graph edges") {
  Sketch s;
  const auto a = s.addr();
  const auto b = s.addr();
  const auto c = s.addr();
  CHECK(build_gang_graph({a, b}, {}).edges.empty());
  CHECK(find_gangs(build_gang_graph({a, b}, {})).empty());

  Sketch t1(2), t2(3);
  t1.payer(a);
  t2.payer(a);
  const std::vector<Transaction> txs = {sketch_transfer(t1, a, b), sketch_transfer(t2, a, b),
                                        sketch_transfer(t2, a, b)};  // duplicate signature
  const auto g = build_gang_graph({a, b}, txs);
  REQUIRE(g.edges.size() == 1);
  CHECK(g.edges[0] == GangEdge{a, b, EdgeKind::Transfer, 2});

  Sketch f1(4), f2(5);
  f1.payer(a);
  f2.payer(b);
  const std::vector<Transaction> star = {sketch_transfer(f1, a, c), sketch_transfer(f2, b, c)};
  const auto sg = build_gang_graph({a, b, c}, star);
  std::size_t in_c = 0;
  for (const auto& e : sg.edges) in_c += e.to == c;
  CHECK(in_c == 2);
  const auto gangs = find_gangs(sg);
  REQUIRE(gangs.size() == 1);
  CHECK(gangs[0].topology == Topology::StarIn);
}

TEST_CASE("topology hints") {
  synth::Rng rng(9);
  std::vector<Address> n;
  for (int i = 0; i < 6; ++i) n.push_back(synth::random_address(rng));
  auto e = [&](int x, int y) { return GangEdge{n[x], n[y], EdgeKind::Transfer, 1}; };

  const std::vector<GangEdge> out = {e(0, 1), e(0, 2), e(0, 3), e(0, 4), e(0, 5)};
  CHECK(topology_hint(6, out) == Topology::StarOut);
  const std::vector<GangEdge> in = {e(1, 0), e(2, 0), e(3, 0), e(4, 0), e(5, 0)};
  CHECK(topology_hint(6, in) == Topology::StarIn);
  const std::vector<GangEdge> tree = {e(0, 1), e(1, 2), e(1, 3), e(3, 4)};
  CHECK(topology_hint(5, tree) == Topology::Tree);
  const std::vector<GangEdge> cycle = {e(0, 1), e(1, 2), e(2, 3), e(3, 0)};
  CHECK(topology_hint(4, cycle) == Topology::Other);
  CHECK(topology_hint(0, {}) == Topology::Other);
}

TEST_CASE("gang report JSON round-trip") {
  const auto scenario = synth::gen_gang_scenario(3);
  const auto graph = build_gang_graph(scenario.labeled, scenario.transactions);
  const auto gangs = find_gangs(graph);
  const auto back = gang_report_from_json(nlohmann::json::parse(gang_report_to_json(graph, gangs).dump()));
  CHECK(back.graph.nodes == graph.nodes);
  CHECK(back.graph.edges == graph.edges);
  REQUIRE(back.gangs.size() == gangs.size());
  for (std::size_t i = 0; i < gangs.size(); ++i) {
    CHECK(back.gangs[i].members == gangs[i].members);
    CHECK(back.gangs[i].edges == gangs[i].edges);
    CHECK(back.gangs[i].topology == gangs[i].topology);
  }
}

TEST_CASE("synthetic gangs are recovered with their topologies") {
  for (std::uint64_t seed : {1u, 2u, 3u, 42u}) {
    const auto scenario = synth::gen_gang_scenario(seed);
    CHECK(scenario.labeled.size() == 19);
    const auto gangs = find_gangs(build_gang_graph(scenario.labeled, scenario.transactions));
    REQUIRE(gangs.size() == scenario.gangs.size());
    for (const auto& expected : scenario.gangs) {
      const auto it = std::find_if(gangs.begin(), gangs.end(), [&](const Gang& g) {
        return std::set<Address>(g.members.begin(), g.members.end()) == expected.members;
      });
      REQUIRE(it != gangs.end());
      CHECK(to_string(it->topology) == expected.topology);
    }
    for (const auto& lone : scenario.isolated) {
      for (const auto& g : gangs) CHECK(std::find(g.members.begin(), g.members.end(), lone) == g.members.end());
    }
  }
}

}

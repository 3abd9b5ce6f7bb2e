#include <fstream>

#include "doctest.h"
#include "solphish/ingest.hpp"
#include "solphish/rules.hpp"
#include "support.hpp"

using namespace solphish;
using nlohmann::json;

namespace {

synth::Generated sample(std::uint64_t seed) {
  synth::Rng rng(seed);
  return synth::gen_stmt_phish(rng, {}, {3, true, true});
}

json payload_of(const Transaction& tx) { return ingest::encode_payload(tx); }

}  // namespace

TEST_SUITE("ingest") {

TEST_CASE("five-transfer STMT reconstruction has five transfer instructions") {
  const auto txs = ingest::load_fixture(testing::source_path("fixtures/real/stmt_five_transfers.jsonl"));
  REQUIRE(txs.size() == 1);
  CHECK(rules::count_transfers(txs[0]) == 5);
  CHECK(txs[0].signature == "f2MAMQZiDa3aoCY3JFSG2YVh6a8VaHCRDq4F8X4mjGcT3PgnwF1ZaqeufAWR1944tt22QkJRpHZKC5bm7rvPaiC");
}

TEST_CASE("fund transfer follow-up moves the victim's tokens to several accounts") {
  const auto tx = testing::fixture_tx("fixtures/real/fund_transfer_43mv.jsonl");
  CHECK(tx.signature ==
        "43MVswMUJwvjPAZqTPbKmGXaCbqshfQCPnBre9rEaEpmh3CbooYaivVw9k9cyVLSVnztVuBbQhySmQfVXA3AFDqy");
  std::set<Address> destinations;
  for (const auto& ins : tx.instructions) {
    if (ins.kind == InstructionKind::Transfer) destinations.insert(*ins.destination);
  }
  CHECK(destinations.size() >= 2);
}

TEST_CASE("normalize inverts encode_payload on canonical transactions") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto g = sample(seed);
    const auto back = ingest::normalize_payload(payload_of(g.tx));
    CHECK(back == g.tx);
  }
}

TEST_CASE("inner instructions follow their parent with stack depth") {
  const auto g = sample(3);
  const auto& ins = g.tx.instructions;
  // AdvanceNonce, compute budget, the program call, then its transfers.
  REQUIRE(ins.size() >= 4);
  CHECK(ins.front().kind == InstructionKind::AdvanceNonce);
  std::size_t inner = 0;
  for (std::size_t i = 0; i < ins.size(); ++i) {
    if (ins[i].depth == 0) continue;
    ++inner;
    CHECK(ins[i].kind == InstructionKind::Transfer);
    CHECK(ins[i - 1].depth <= ins[i].depth);
  }
  CHECK(inner == rules::count_transfers(g.tx));

  auto p = payload_of(g.tx);
  for (auto& group : p["meta"]["innerInstructions"]) {
    for (auto& i : group["instructions"]) i.erase("stackHeight");
  }
  for (const auto& i : ingest::normalize_payload(p).instructions) CHECK(i.depth <= 1);
}

TEST_CASE("system transfer and setAuthority map directly") {
  const auto tx = testing::fixture_tx("fixtures/real/aat_bnrt.jsonl");
  bool saw_set_authority = false;
  for (const auto& ins : tx.instructions) {
    if (ins.kind == InstructionKind::SetAuthority) {
      saw_set_authority = true;
      CHECK(ins.authority_type == std::string(kAccountOwnerAuthority));
    }
  }
  CHECK(saw_set_authority);

  synth::Rng rng(4);
  const auto g = synth::gen_benign_transfer(rng, {}, synth::BenignVariant::PartialSol);
  const auto& t = *std::find_if(g.tx.instructions.begin(), g.tx.instructions.end(),
                                [](const auto& i) { return i.kind == InstructionKind::Transfer; });
  CHECK(t.program == programs::kSystem);
  CHECK_FALSE(t.mint.has_value());
}

TEST_CASE("unrecognized and string-parsed instructions become Other") {
  auto p = payload_of(sample(5).tx);
  p["transaction"]["message"]["instructions"].push_back(
      {{"programId", programs::kMemo.str()}, {"program", "spl-memo"}, {"parsed", "gm"}});
  p["transaction"]["message"]["instructions"].push_back(
      {{"programId", programs::kSystem.str()}, {"program", "system"},
       {"parsed", {{"type", "allocate"}, {"info", json::object()}}}});
  const auto tx = ingest::normalize_payload(p);
  REQUIRE(tx.instructions.size() >= 2);
  const auto& memo = tx.instructions[tx.instructions.size() - 2];
  CHECK(memo.kind == InstructionKind::Other);
  CHECK(memo.other_name == "memo");
  CHECK(tx.instructions.back().other_name == "allocate");
}

TEST_CASE("failed transactions keep success = false") {
  auto tx = sample(6).tx;
  tx.success = false;
  const auto back = ingest::normalize_payload(payload_of(tx));
  CHECK_FALSE(back.success);
  CHECK(back == tx);
}

TEST_CASE("token side missing from pre balances counts as zero") {
  auto p = payload_of(sample(8).tx);
  const auto before = ingest::normalize_payload(p);
  p["meta"]["preTokenBalances"] = json::array();
  const auto tx = ingest::normalize_payload(p);
  for (const auto& e : tx.balances) {
    if (!e.asset.is_native()) CHECK(e.pre == 0);
  }
  CHECK(tx.balances.size() == before.balances.size());
}

TEST_CASE("malformed payloads name the offending path") {
  auto p = payload_of(sample(9).tx);
  p["meta"].erase("fee");
  try {
    ingest::normalize_payload(p);
    FAIL("no exception");
  } catch (const ingest::MalformedPayload& e) {
    CHECK(e.path() == "$.meta.fee");
  }

  p = payload_of(sample(9).tx);
  p["transaction"]["message"]["accountKeys"][0]["pubkey"] = "0OIl";
  CHECK_THROWS_AS(ingest::normalize_payload(p), ingest::MalformedPayload);

  p = payload_of(sample(9).tx);
  p["meta"]["postBalances"].erase(0);
  CHECK_THROWS_AS(ingest::normalize_payload(p), ingest::MalformedPayload);
}

TEST_CASE("fixture errors carry the line number") {
  testing::TempDir dir("ingest");
  const auto path = dir / "bad.jsonl";
  {
    std::ofstream out(path);
    out << ingest::record_to_line(ingest::make_record(sample(1).tx, 0)) << "\n";
    out << "\n";
    out << "{\"signature\": \"x\", \"fetched_at\": 0, \"payload\": {}}\n";
  }
  try {
    ingest::load_fixture(path);
    FAIL("no exception");
  } catch (const ingest::MalformedPayload& e) {
    CHECK(std::string(e.path()).rfind("line 3 ", 0) == 0);
  }
}

TEST_CASE("empty fixture file") {
  testing::TempDir dir("ingest");
  std::ofstream(dir / "empty.jsonl").close();
  CHECK(ingest::load_fixture(dir / "empty.jsonl").empty());
}

TEST_CASE("record lines round-trip") {
  const auto r = ingest::make_record(sample(10).tx, 1712345678);
  const auto back = ingest::record_from_line(ingest::record_to_line(r));
  CHECK(back == r);
  testing::TempDir dir("ingest");
  ingest::write_records(dir / "r.jsonl", {r, ingest::make_record(sample(11).tx, 1)});
  const auto read = ingest::read_records(dir / "r.jsonl");
  REQUIRE(read.size() == 2);
  CHECK(read[0] == r);
}

}

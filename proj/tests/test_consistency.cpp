#include <doctest.h>

#include <set>

#include "augmentor/consistency.hpp"
#include "augmentor/text_util.hpp"
#include "test_support.hpp"

using namespace augmentor;
using test_support::error_kind;
using test_support::source_path;
using test_support::TempDir;

namespace {

LabeledResponse synthetic(const std::string& id, int label, const std::string& text) {
  LabeledResponse r;
  r.id = id;
  r.label = label;
  r.text = text;
  r.source = Source::kSynthetic;
  r.temperature = 0.5;
  return r;
}

ConsistencyRecord record(const std::string& id, int intended, std::optional<int> score) {
  ConsistencyRecord r;
  r.sample_id = id;
  r.intended_label = intended;
  r.graded_score = score;
  r.parse_ok = score.has_value();
  r.raw_grading = score ? "{\"Score\": " + std::to_string(*score) + "}" : "no idea";
  return r;
}

std::vector<ConsistencyRecord> records_for(std::size_t tp, std::size_t fn, std::size_t fp,
                                           std::size_t tn) {
  std::vector<ConsistencyRecord> out;
  auto add = [&](std::size_t n, int intended, int score) {
    for (std::size_t i = 0; i < n; ++i) {
      out.push_back(record("s" + std::to_string(out.size()), intended, score));
    }
  };
  add(tp, 1, 1);
  add(fn, 1, 0);
  add(fp, 0, 1);
  add(tn, 0, 0);
  return out;
}

Pool demo_pool() { return load_pool(source_path("data/demo/pools/pool-t0.5.jsonl")); }

}  // namespace

TEST_CASE("parse_score examples") {
  CHECK(parse_score("{\"Score\": 1}") == 1);
  CHECK(parse_score("Here is my rating:\n```json\n{\"Score\": 0, \"Reason\": \"generic\"}\n```") == 0);
  CHECK(error_kind([] { parse_score("no json here"); }) == "ParseFailure");
  CHECK(error_kind([] { parse_score("{\"Score\": 2}"); }) == "ParseFailure");
  CHECK(error_kind([] { parse_score("{\"Score\": \"1\"}"); }) == "ParseFailure");
  CHECK(error_kind([] { parse_score("{\"Score\": 1"); }) == "ParseFailure");
  CHECK(error_kind([] { parse_score(""); }) == "ParseFailure");
}

TEST_CASE("parse_score skips objects without a usable score") {
  CHECK(parse_score("{\"note\": \"x\"} then {\"Score\": 0}") == 0);
  CHECK(parse_score("{\"Reason\": \"a } brace in a string\", \"Score\": 1}") == 1);
  CHECK(parse_score("{\"outer\": {\"Score\": 1}}") == 1);
  CHECK(parse_score("prefix { broken json } {\"Score\":0}") == 0);
}

TEST_CASE("grading prompt embeds rubric and response at temperature 0") {
  auto tpl = default_grading_template();
  auto req = render_grading_prompt(tpl, "Tell me about your hometown.");
  CHECK(req.temperature == 0.0);
  CHECK(req.user_prompt.find(tpl.rubric_text) != std::string::npos);
  CHECK(req.user_prompt.find("Tell me about your hometown.") != std::string::npos);
  tpl.user_text = "{{rubric}} only";
  CHECK(error_kind([&] { render_grading_prompt(tpl, "x"); }) == "TemplateError");
}

TEST_CASE("grade_pool: single sample, prose reply, missing fixture") {
  TempDir dir;
  FixtureStore store(dir.path().string());
  auto tpl = default_grading_template();
  Pool pool = {synthetic("a", 1, "Tell me about your family."),
               synthetic("b", 0, "Finish the worksheet.")};
  auto ra = render_grading_prompt(tpl, pool[0].text);
  auto rb = render_grading_prompt(tpl, pool[1].text);
  store.store(ra, fingerprint(ra), 0, "{\"Score\":1}");
  store.store(rb, fingerprint(rb), 0, "I think it is fine.");

  auto gw = Gateway::replay(dir.path().string());
  auto recs = grade_pool(pool, tpl, *gw);
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].consistent());
  CHECK(recs[0].graded_score == 1);
  CHECK(!recs[1].parse_ok);
  CHECK(!recs[1].graded_score);
  CHECK(recs[1].raw_grading == "I think it is fine.");

  Pool unknown = {synthetic("c", 1, "Never graded.")};
  auto gw2 = Gateway::replay(dir.path().string());
  try {
    grade_pool(unknown, tpl, *gw2);
    FAIL("expected FixtureMiss");
  } catch (const Error& e) {
    CHECK(e.kind() == "FixtureMiss");
    CHECK(e.detail().find("sample c") == 0);
  }
  CHECK(error_kind([&] { grade_pool({}, tpl, *gw2); }) == "EmptyInput");
}

TEST_CASE("grade_pool on the shipped fixtures finds 44 mismatches") {
  auto pool = demo_pool();
  REQUIRE(pool.size() == 1000);
  auto gw = Gateway::replay(source_path("data/demo/fixtures"));
  auto recs = grade_pool(pool, load_template(source_path("data/templates/grading.json")), *gw);
  REQUIRE(recs.size() == 1000);
  std::size_t mismatches = 0, failures = 0;
  for (const auto& r : recs) {
    if (!r.parse_ok) ++failures;
    else if (!r.consistent()) ++mismatches;
  }
  CHECK(mismatches == 44);
  CHECK(failures == 0);

  auto m = agreement_metrics(recs);
  CHECK(m.confusion == Confusion{456, 44, 0, 500});
  CHECK(m.precision == 1.0);

  auto f = filter_inconsistent(pool, recs);
  CHECK(f.retained.size() == 956);
  CHECK(f.removed.size() == 44);
  CHECK(f.retention() == 0.956);
}

TEST_CASE("agreement metrics: hand-computed cases") {
  auto perfect = agreement_metrics(records_for(50, 0, 0, 50));
  CHECK(perfect.kappa == 1.0);
  CHECK(perfect.accuracy == 1.0);

  auto chance = agreement_metrics(records_for(25, 25, 25, 25));
  CHECK(chance.kappa == 0.0);
  CHECK(chance.accuracy == 0.5);

  auto r = agreement_metrics(records_for(45, 5, 0, 50));
  CHECK(r.precision == 1.0);
  CHECK(r.recall == 0.9);
  CHECK(r.accuracy == 0.95);
  CHECK(r.f1 == doctest::Approx(0.947).epsilon(0.001));
  REQUIRE(r.kappa);
  CHECK(*r.kappa == doctest::Approx(0.9).epsilon(1e-15));
}

TEST_CASE("agreement metrics exclude parse failures") {
  auto recs = records_for(10, 0, 0, 10);
  recs.push_back(record("x", 1, std::nullopt));
  recs.push_back(record("y", 0, std::nullopt));
  auto m = agreement_metrics(recs);
  CHECK(m.n == 20);
  CHECK(m.kappa == 1.0);

  std::vector<ConsistencyRecord> only_failures = {record("z", 1, std::nullopt)};
  CHECK(error_kind([&] { agreement_metrics(only_failures); }) == "NoParsedRecords");

  auto one_sided = agreement_metrics(records_for(5, 0, 0, 0));
  CHECK(one_sided.degenerate_marginals);
  CHECK(!one_sided.kappa);
}

TEST_CASE("kappa is 1 exactly when the confusion is diagonal") {
  for (std::size_t off = 0; off < 4; ++off) {
    auto m = agreement_metrics(records_for(20, off, off % 2, 20));
    CHECK((m.kappa == 1.0) == (off == 0));
  }
}

TEST_CASE("filter: properties") {
  Pool pool;
  std::vector<ConsistencyRecord> recs;
  for (int i = 0; i < 30; ++i) {
    int label = i % 2;
    pool.push_back(synthetic("s" + std::to_string(i), label, "text " + std::to_string(i)));
    std::optional<int> score = label;
    if (i % 7 == 0) score = 1 - label;
    if (i % 11 == 0) score = std::nullopt;
    recs.push_back(record(pool.back().id, label, score));
  }
  auto once = filter_inconsistent(pool, recs);
  auto twice = filter_inconsistent(once.retained, recs);
  CHECK(twice.retained == once.retained);
  CHECK(twice.removed.empty());

  std::size_t mismatches = 0, failures = 0;
  for (const auto& r : once.removed) {
    (r.reason == RemovalReason::kMismatch ? mismatches : failures)++;
  }
  CHECK(failures == 3);  // 0, 11, 22
  CHECK(mismatches == 4);  // 7, 14, 21, 28
  CHECK(once.retention() ==
        doctest::Approx(1.0 - static_cast<double>(mismatches + failures) / 30.0).epsilon(1e-15));
  // Retained samples keep pool order.
  for (std::size_t i = 1; i < once.retained.size(); ++i) {
    CHECK(std::stoi(once.retained[i - 1].id.substr(1)) < std::stoi(once.retained[i].id.substr(1)));
  }
}

TEST_CASE("filter: all consistent, all parse failures, missing record") {
  Pool pool;
  std::vector<ConsistencyRecord> good, bad;
  for (int i = 0; i < 1000; ++i) {
    pool.push_back(synthetic("s" + std::to_string(i), i % 2, "t" + std::to_string(i)));
    good.push_back(record(pool.back().id, i % 2, i % 2));
    bad.push_back(record(pool.back().id, i % 2, std::nullopt));
  }
  auto all = filter_inconsistent(pool, good);
  CHECK(all.retained == pool);
  CHECK(all.removed.empty());

  auto none = filter_inconsistent(pool, bad);
  CHECK(none.retained.empty());
  CHECK(none.removed.size() == 1000);
  for (const auto& r : none.removed) CHECK(r.reason == RemovalReason::kParseFailure);

  good.pop_back();
  CHECK(error_kind([&] { filter_inconsistent(pool, good); }) == "MissingRecord");
}

TEST_CASE("records and manifest round-trip through files") {
  TempDir dir;
  auto recs = records_for(2, 1, 1, 2);
  recs.push_back(record("p", 1, std::nullopt));
  save_records(recs, dir.file("r.jsonl"));
  CHECK(load_records(dir.file("r.jsonl")) == recs);

  save_manifest({{"a", RemovalReason::kMismatch}, {"b", RemovalReason::kParseFailure}},
                dir.file("m.jsonl"));
  CHECK(read_file(dir.file("m.jsonl")) ==
        "{\"id\":\"a\",\"reason\":\"mismatch\"}\n{\"id\":\"b\",\"reason\":\"parse_failure\"}\n");

  write_file(dir.file("bad.jsonl"), "{\"sample_id\":\"x\"}\nnot json\n");
  CHECK(error_kind([&] { load_records(dir.file("bad.jsonl")); }) == "MalformedRecord");
}

TEST_CASE("sample_for_validation: stratified and seeded") {
  auto pool = demo_pool();
  auto s = sample_for_validation(pool, 100, 3);
  REQUIRE(s.size() == 100);
  int pos = 0;
  std::set<std::string> ids;
  for (const auto& r : s) {
    pos += r.label;
    ids.insert(r.id);
  }
  CHECK(pos == 50);
  CHECK(ids.size() == 100);
  CHECK(sample_for_validation(pool, 100, 3) == s);
  CHECK(sample_for_validation(pool, 100, 4) != s);
  CHECK(sample_for_validation(pool, 100, 3, true).size() == 200);

  Pool tiny = {synthetic("a", 1, "x"), synthetic("b", 0, "y")};
  CHECK(sample_for_validation(tiny, 2, 0).size() == 2);

  Pool lopsided;
  for (int i = 0; i < 100; ++i) lopsided.push_back(synthetic("l" + std::to_string(i), i < 40, "t"));
  CHECK(error_kind([&] { sample_for_validation(lopsided, 100, 0); }) == "InsufficientPool");
  CHECK(error_kind([&] { sample_for_validation(lopsided, 3, 0); }) == "InvalidConfig");
}

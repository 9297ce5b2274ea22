#include <gtest/gtest.h>

#include <json.hpp>

#include <algorithm>
#include <random>
#include <set>

#include "damr/dataset.hpp"
#include "damr/error.hpp"
#include "damr/evaluate.hpp"
#include "damr/metrics.hpp"
#include "damr/synth.hpp"
#include "fixtures.hpp"

using namespace damr;
using harness::QAItem;

namespace {

std::vector<std::string> v(std::initializer_list<const char*> xs) { return {xs.begin(), xs.end()}; }

planner::OraclePlanner oracle_for(const kg::KnowledgeGraph& g, const std::vector<QAItem>& items,
                                  std::size_t max_len, double noise = 0.0) {
  std::unordered_map<std::string, std::vector<std::vector<std::string>>> gold;
  for (const auto& it : items) {
    auto paths = harness::gold_relation_paths(g, it, max_len);
    auto& slot = gold[it.question];
    slot.insert(slot.end(), paths.begin(), paths.end());
  }
  return planner::OraclePlanner(std::move(gold), noise, 0);
}

}  // namespace

TEST(Dataset, ParsesItemsInOrder) {
  EXPECT_TRUE(harness::parse_dataset("").empty());
  const auto items = harness::parse_dataset(
      "{\"id\": \"a\", \"question\": \"q1\", \"topic_entities\": [\"t\"], \"answers\": [\"x\", \"y\"]}\n"
      "\n"
      "{\"id\": \"b\", \"question\": \"q2\", \"topic_entities\": [\"u\"], \"answers\": [\"z\"]}\n");
  ASSERT_EQ(items.size(), 2U);
  EXPECT_EQ(items[0], (QAItem{"a", "q1", v({"t"}), v({"x", "y"})}));
  EXPECT_EQ(items[1].id, "b");
}

TEST(Dataset, MissingAnswersNamesLine) {
  try {
    harness::parse_dataset(
        "{\"id\": \"a\", \"question\": \"q\", \"topic_entities\": [\"t\"], \"answers\": [\"x\"]}\n"
        "{\"id\": \"b\", \"question\": \"q\", \"topic_entities\": [\"t\"]}\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("2"), std::string::npos) << what;
    EXPECT_NE(what.find("answers"), std::string::npos) << what;
  }
}

TEST(Dataset, RejectsMalformedLines) {
  EXPECT_THROW(harness::parse_dataset("not json\n"), ParseError);
  EXPECT_THROW(harness::parse_dataset("[1, 2]\n"), ParseError);
  EXPECT_THROW(
      harness::parse_dataset("{\"id\": \"a\", \"question\": \"q\", \"topic_entities\": [], \"answers\": [\"x\"]}\n"),
      ParseError);
  EXPECT_THROW(
      harness::parse_dataset("{\"id\": 3, \"question\": \"q\", \"topic_entities\": [\"t\"], \"answers\": [\"x\"]}\n"),
      ParseError);
}

TEST(Dataset, FileRoundTrip) {
  testkit::TempDir dir;
  const std::vector<QAItem> items{{"1", "who \"quoted\"?", v({"a", "b"}), v({"c"})},
                                  {"2", "unicode \xc3\xa9", v({"d"}), v({"e", "f"})}};
  harness::save_dataset(items, dir / "d.jsonl");
  EXPECT_EQ(harness::load_dataset(dir / "d.jsonl"), items);
  EXPECT_THROW(harness::load_dataset(dir / "missing.jsonl"), IoError);
}

TEST(Metrics, HitsAtOne) {
  EXPECT_EQ(harness::hits_at_1(v({"A", "B"}), v({"A"})), 1.0);
  EXPECT_EQ(harness::hits_at_1(v({"B", "A"}), v({"A"})), 0.0);
  EXPECT_EQ(harness::hits_at_1({}, v({"A"})), 0.0);
}

TEST(Metrics, F1Examples) {
  EXPECT_EQ(harness::f1(v({"A"}), v({"A"})), 1.0);
  EXPECT_NEAR(harness::f1(v({"A", "B"}), v({"B", "C"})), 0.5, 1e-15);
  EXPECT_EQ(harness::f1({}, v({"A"})), 0.0);
  EXPECT_EQ(harness::f1(v({"X"}), v({"A"})), 0.0);
}

TEST(Metrics, MatchSetArithmeticOnRandomCases) {
  std::mt19937_64 rng(31);
  const std::vector<std::string> universe = v({"a", "b", "c", "d", "e", "f"});
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<std::string> pred, gold;
    for (const auto& x : universe) {
      if (rng() % 3 == 0) pred.push_back(x);
      if (rng() % 3 == 0) gold.push_back(x);
    }
    if (gold.empty()) gold.push_back("a");
    std::shuffle(pred.begin(), pred.end(), rng);
    const std::set<std::string> ps(pred.begin(), pred.end()), gs(gold.begin(), gold.end());
    std::size_t both = 0;
    for (const auto& x : ps) both += gs.count(x);
    double expect = 0.0;
    if (!ps.empty() && both > 0) {
      const double p = static_cast<double>(both) / static_cast<double>(ps.size());
      const double r = static_cast<double>(both) / static_cast<double>(gs.size());
      expect = 2 * p * r / (p + r);
    }
    EXPECT_NEAR(harness::f1(pred, gold), expect, 1e-12);
    const double hit = !pred.empty() && gs.contains(pred.front()) ? 1.0 : 0.0;
    EXPECT_EQ(harness::hits_at_1(pred, gold), hit);
  }
}

TEST(Synth, EveryQuestionHasExactlyOneGoldPath) {
  harness::SynthSpec spec;
  spec.entities = 60;
  spec.relations = 10;
  spec.questions = 15;
  spec.path_len = 3;
  spec.branching = 4;
  spec.seed = 5;
  const auto data = harness::generate_synthetic(spec);
  ASSERT_EQ(data.items.size(), 15U);
  for (const auto& item : data.items) {
    const auto topic = data.kg.entity(item.topic_entities.at(0));
    const auto answer = data.kg.entity(item.answers.at(0));
    const std::vector<kg::EntityId> target{answer};
    const auto within = kg::enumerate_paths(data.kg, topic, target, spec.path_len, 100);
    ASSERT_EQ(within.size(), 1U) << item.id;
    EXPECT_EQ(within[0].hops.size(), spec.path_len);
    // No longer detour through distractors reaches the answer either.
    EXPECT_EQ(kg::enumerate_paths(data.kg, topic, target, 6, 100).size(), 1U) << item.id;
    for (const auto& hop : within[0].hops) {
      EXPECT_NE(item.question.find(data.kg.relation_label(hop.relation)), std::string::npos);
    }
  }
}

TEST(Synth, BranchingZeroIsBareChain) {
  harness::SynthSpec spec;
  spec.entities = 10;
  spec.questions = 4;
  spec.branching = 0;
  const auto data = harness::generate_synthetic(spec);
  for (const auto& item : data.items) {
    kg::EntityId at = data.kg.entity(item.topic_entities[0]);
    for (std::size_t h = 0; h < spec.path_len; ++h) {
      const auto out = data.kg.neighbors(at);
      ASSERT_EQ(out.size(), 1U);
      at = out[0].target;
    }
    EXPECT_EQ(data.kg.entity_label(at), item.answers[0]);
    EXPECT_TRUE(data.kg.neighbors(at).empty());
  }
}

TEST(Synth, SameSeedSameBytes) {
  testkit::TempDir dir;
  harness::SynthSpec spec;
  spec.entities = 40;
  spec.questions = 10;
  spec.seed = 77;
  for (const char* name : {"a", "b"}) {
    const auto d = harness::generate_synthetic(spec);
    kg::save_kg(d.kg, dir / (std::string(name) + ".tsv"));
    harness::save_dataset(d.items, dir / (std::string(name) + ".jsonl"));
  }
  EXPECT_EQ(testkit::read_file(dir / "a.tsv"), testkit::read_file(dir / "b.tsv"));
  EXPECT_EQ(testkit::read_file(dir / "a.jsonl"), testkit::read_file(dir / "b.jsonl"));
  spec.seed = 78;
  const auto other = harness::generate_synthetic(spec);
  kg::save_kg(other.kg, dir / "c.tsv");
  EXPECT_NE(testkit::read_file(dir / "a.tsv"), testkit::read_file(dir / "c.tsv"));
}

TEST(Synth, DecoysNeverReachAnswer) {
  harness::SynthSpec spec;
  spec.entities = 50;
  spec.questions = 20;
  spec.decoy_rate = 1.0;
  spec.seed = 3;
  const auto data = harness::generate_synthetic(spec);
  for (const auto& item : data.items) {
    const std::vector<kg::EntityId> target{data.kg.entity(item.answers[0])};
    EXPECT_EQ(kg::enumerate_paths(data.kg, data.kg.entity(item.topic_entities[0]), target, 6, 100).size(),
              1U);
  }
}

TEST(Synth, InvalidSpecs) {
  harness::SynthSpec spec;
  spec.path_len = 0;
  EXPECT_THROW(harness::generate_synthetic(spec), InputError);
  spec = {};
  spec.relations = 1;
  EXPECT_THROW(harness::generate_synthetic(spec), InputError);
  spec = {};
  spec.entities = 0;
  EXPECT_THROW(harness::generate_synthetic(spec), InputError);
}

TEST(Evaluate, ReportAggregatesMatchRows) {
  harness::SynthSpec spec;
  spec.entities = 30;
  spec.relations = 8;
  spec.questions = 6;
  spec.branching = 2;
  spec.seed = 2;
  const auto data = harness::generate_synthetic(spec);
  auto items = data.items;
  items.push_back({"broken", "q", v({"no-such-entity"}), v({"x"})});
  testkit::StubEmbedding stub(12);
  const auto params = scorer::init_params(testkit::small_dims(), 1);
  harness::EvalConfig config;
  config.search.iterations = 8;
  config.search.max_len = 3;
  auto planner = oracle_for(data.kg, items, 3);
  planner::global_usage().reset();
  const auto report = harness::evaluate(data.kg, items, planner, params, stub.embedder(), config);

  ASSERT_EQ(report.per_question.size(), items.size());
  EXPECT_EQ(report.failures, 1U);
  const auto& broken = report.per_question.back();
  EXPECT_TRUE(broken.error.has_value());
  EXPECT_EQ(broken.hits_at_1, 0.0);
  EXPECT_EQ(broken.f1, 0.0);

  double hits = 0, f1 = 0, calls = 0;
  std::uint64_t total = 0;
  for (const auto& r : report.per_question) {
    hits += r.hits_at_1;
    f1 += r.f1;
    calls += static_cast<double>(r.usage.llm_calls);
    total += r.usage.llm_calls;
    EXPECT_LE(r.usage.llm_calls, config.search.iterations);
  }
  const double n = static_cast<double>(items.size());
  EXPECT_EQ(report.mean_hits_at_1, hits / n);
  EXPECT_EQ(report.mean_f1, f1 / n);
  EXPECT_EQ(report.mean_llm_calls, calls / n);
  EXPECT_EQ(report.total_llm_calls, total);
  EXPECT_EQ(report.counter_llm_calls, total);

  const auto doc = nlohmann::json::parse(harness::report_json(data.kg, report, config));
  EXPECT_EQ(doc["aggregate"]["questions"], items.size());
  EXPECT_EQ(doc["per_question"].size(), items.size());
  EXPECT_EQ(doc["aggregate"]["total_llm_calls"], total);
}

TEST(Evaluate, DeterministicAcrossRunsAndWorkers) {
  harness::SynthSpec spec;
  spec.entities = 30;
  spec.relations = 8;
  spec.questions = 5;
  spec.seed = 4;
  const auto data = harness::generate_synthetic(spec);
  testkit::StubEmbedding stub(12);
  const auto params = scorer::init_params(testkit::small_dims(), 1);
  harness::EvalConfig config;
  config.search.iterations = 6;
  config.search.max_len = 3;
  auto run = [&](std::size_t workers) {
    config.workers = workers;
    auto planner = oracle_for(data.kg, data.items, 3, 0.3);
    const auto r = harness::evaluate(data.kg, data.items, planner, params, stub.embedder(), config);
    config.workers = 1;
    return harness::report_json(data.kg, r, config);
  };
  const auto a = run(1);
  EXPECT_EQ(a, run(1));
  EXPECT_EQ(a, run(3));
}

TEST(Evaluate, PredictedSetUsesMargin) {
  harness::QuestionRecord r;
  r.answers = {{kg::EntityId{0}, 2.0, {}}, {kg::EntityId{1}, 1.95, {}}, {kg::EntityId{2}, 1.0, {}}};
  r.answer_labels = v({"a", "b", "c"});
  EXPECT_EQ(harness::predicted_set(r, 0.0), v({"a"}));
  EXPECT_EQ(harness::predicted_set(r, 0.1), v({"a", "b"}));
  EXPECT_EQ(harness::predicted_set(r, 5.0), v({"a", "b", "c"}));
  EXPECT_TRUE(harness::predicted_set({}, 1.0).empty());
}

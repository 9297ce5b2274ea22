#include <gtest/gtest.h>

#include <json.hpp>

#include <sstream>

#include "damr_cli/cli.hpp"
#include "fixtures.hpp"

using damr::cli::run_cli;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> small_model() {
  return {"--d-in", "16", "--d", "8", "--layers", "1", "--heads", "2", "--d-ff", "16", "--l-max", "4"};
}

class CliFlow : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto s = run({"synth", "--entities", "30", "--relations", "8", "--questions", "6",
                        "--path-len", "2", "--branch", "2", "--seed", "3", "--out-kg",
                        (dir / "kg.tsv").string(), "--out-data", (dir / "qa.jsonl").string()});
    ASSERT_EQ(s.code, 0) << s.err;
    auto args = std::vector<std::string>{"pretrain", "--kg", (dir / "kg.tsv").string(), "--train",
                                         (dir / "qa.jsonl").string(), "--out",
                                         (dir / "m.ckpt").string(), "--epochs", "3", "--max-len", "2"};
    const auto model = small_model();
    args.insert(args.end(), model.begin(), model.end());
    const auto p = run(args);
    ASSERT_EQ(p.code, 0) << p.err;
    pretrain_out = p.out;
  }

  std::vector<std::string> eval_args(const std::string& out) const {
    return {"eval", "--kg", (dir / "kg.tsv").string(), "--data", (dir / "qa.jsonl").string(),
            "--ckpt", (dir / "m.ckpt").string(), "--planner", "mock", "--iters", "5",
            "--max-len", "3", "--seed", "9", "--out", (dir / out).string()};
  }

  damr::testkit::TempDir dir;
  std::string pretrain_out;
};

}  // namespace

TEST_F(CliFlow, SynthAndPretrainReport) {
  const auto summary = nlohmann::json::parse(pretrain_out);
  EXPECT_EQ(summary["questions_used"], 6);
  EXPECT_EQ(summary["epoch_loss"].size(), 3U);
  EXPECT_GT(summary["triplets"].get<int>(), 0);
}

TEST_F(CliFlow, EvalIsByteIdentical) {
  const auto a = run(eval_args("a.json"));
  ASSERT_EQ(a.code, 0) << a.err;
  const auto b = run(eval_args("b.json"));
  ASSERT_EQ(b.code, 0) << b.err;
  const auto ra = damr::testkit::read_file(dir / "a.json");
  EXPECT_EQ(ra, damr::testkit::read_file(dir / "b.json"));
  const auto doc = nlohmann::json::parse(ra);
  EXPECT_EQ(doc["aggregate"]["questions"], 6);
  EXPECT_EQ(doc["aggregate"]["total_llm_calls"], doc["aggregate"]["usage_counter_llm_calls"]);
  EXPECT_LE(doc["aggregate"]["llm_calls"].get<double>(), 5.0);
}

TEST_F(CliFlow, AnswerPrintsRankedEntities) {
  const auto items = damr::testkit::read_file(dir / "qa.jsonl");
  const auto first = nlohmann::json::parse(items.substr(0, items.find('\n')));
  const auto r = run({"answer", "--kg", (dir / "kg.tsv").string(), "--ckpt",
                      (dir / "m.ckpt").string(), "--question", first["question"],
                      "--topics", first["topic_entities"][0], "--data",
                      (dir / "qa.jsonl").string(), "--planner", "mock", "--max-len", "3",
                      "--iters", "6"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = nlohmann::json::parse(r.out);
  ASSERT_FALSE(doc["answers"].empty());
  EXPECT_TRUE(doc["answers"][0].contains("path"));
  EXPECT_LE(doc["usage"]["llm_calls"].get<int>(), 6);
}

TEST_F(CliFlow, UnknownTopicFails) {
  const auto r = run({"answer", "--kg", (dir / "kg.tsv").string(), "--ckpt",
                      (dir / "m.ckpt").string(), "--question", "q", "--topics", "nowhere",
                      "--max-len", "3"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("nowhere"), std::string::npos);
}

TEST_F(CliFlow, MaxLenBeyondTableIsRejected) {
  auto args = eval_args("x.json");
  args[12] = "7";  // --max-len value; the model's table holds 4
  ASSERT_EQ(args[11], "--max-len");
  const auto r = run(args);
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("max path length"), std::string::npos) << r.err;
}

TEST(Cli, UsageErrors) {
  EXPECT_NE(run({}).code, 0);
  EXPECT_NE(run({"bogus"}).code, 0);
  EXPECT_NE(run({"synth"}).code, 0);
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST(Cli, MissingFilesAreReported) {
  damr::testkit::TempDir dir;
  const auto r = run({"eval", "--kg", (dir / "no.tsv").string(), "--data",
                      (dir / "no.jsonl").string(), "--ckpt", (dir / "no.ckpt").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("error:"), std::string::npos);
}

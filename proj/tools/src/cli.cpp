#include "damr_cli/cli.hpp"

#include <fstream>
#include <iostream>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "damr/checkpoint.hpp"
#include "damr/error.hpp"
#include "damr/evaluate.hpp"
#include "damr/synth.hpp"
#include "damr/training.hpp"
#include "options.hpp"

namespace damr::cli {

namespace {

std::vector<std::string> split_labels(const std::string& csv) {
  std::vector<std::string> out;
  std::size_t begin = 0;
  while (begin <= csv.size()) {
    const std::size_t end = std::min(csv.find(',', begin), csv.size());
    if (end > begin) out.push_back(csv.substr(begin, end - begin));
    begin = end + 1;
  }
  return out;
}

nlohmann::json answers_json(const kg::KnowledgeGraph& kg, const std::vector<mcts::Answer>& answers) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& a : answers) {
    nlohmann::json path = nlohmann::json::array();
    for (auto r : a.path) path.push_back(kg.relation_label(r));
    out.push_back({{"entity", kg.entity_label(a.entity)}, {"score", a.score}, {"path", path}});
  }
  return out;
}

struct SynthArgs {
  harness::SynthSpec spec;
  std::string out_kg, out_data;
};

int run_synth(const SynthArgs& a, std::ostream& out) {
  const auto data = harness::generate_synthetic(a.spec);
  kg::save_kg(data.kg, a.out_kg);
  harness::save_dataset(data.items, a.out_data);
  out << nlohmann::json{{"entities", data.kg.entity_count()},
                        {"relations", data.kg.relation_count()},
                        {"triples", data.kg.triple_count()},
                        {"questions", data.items.size()}}
             .dump()
      << '\n';
  return 0;
}

struct PretrainArgs {
  std::string kg_path, train_path, out;
  bool inverse = false;
  scorer::ScorerDims dims;
  training::TrainConfig train;
  training::MiningConfig mining;
  EmbedOptions embed;
};

int run_pretrain(PretrainArgs& a, std::ostream& out) {
  const auto kg = kg::load_kg(a.kg_path, a.inverse);
  const auto items = harness::load_dataset(a.train_path);
  EmbedContext ctx(a.embed, a.dims.d_in);
  const auto embedder = ctx.embedder();

  std::vector<training::TrainTriplet> triplets;
  std::size_t used = 0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    training::MiningQuery q{items[i].question, {}, {}};
    for (const auto& t : items[i].topic_entities) {
      if (auto id = kg.find_entity(t)) q.topics.push_back(*id);
    }
    for (const auto& ans : items[i].answers) {
      if (auto id = kg.find_entity(ans)) q.answers.push_back(*id);
    }
    if (q.topics.empty() || q.answers.empty()) {
      spdlog::warn("skipping training item {}: topic or answer not in graph", items[i].id);
      continue;
    }
    auto cfg = a.mining;
    cfg.seed = a.train.seed + i;
    auto mined = training::mine_triplets(kg, q, embedder, cfg);
    if (!mined.empty()) ++used;
    triplets.insert(triplets.end(), mined.begin(), mined.end());
  }
  if (triplets.empty()) throw InputError("no training triplets could be mined");

  auto params = scorer::init_params(a.dims, a.train.seed);
  const auto result = training::pretrain(params, triplets, a.train);
  checkpoint::save_checkpoint(params, a.out);
  out << nlohmann::json{{"questions_used", used},
                        {"triplets", triplets.size()},
                        {"epoch_loss", result.epoch_loss},
                        {"train_accuracy", training::ranking_accuracy(params, triplets)}}
             .dump()
      << '\n';
  return 0;
}

struct AnswerArgs {
  std::string kg_path, ckpt, question, topics, data;
  bool inverse = false;
  std::uint64_t seed = 0;
  SearchOptions search;
  PlannerOptions planner;
  EmbedOptions embed;
};

int run_answer(AnswerArgs& a, std::ostream& out) {
  const auto kg = kg::load_kg(a.kg_path, a.inverse);
  auto params = checkpoint::load_checkpoint(a.ckpt);
  const auto config = a.search.resolve();
  EmbedContext ctx(a.embed, params.dims.d_in);
  const auto embedder = ctx.embedder();
  GoldPaths gold;
  if (!a.data.empty()) gold = gold_paths(kg, harness::load_dataset(a.data), config.max_len);
  auto planner = make_planner(a.planner, embedder, std::move(gold), a.seed);

  std::vector<kg::EntityId> topics;
  for (const auto& label : split_labels(a.topics)) {
    const auto id = kg.find_entity(label);
    if (!id) throw InputError("topic entity '" + label + "' is not in the graph");
    topics.push_back(*id);
  }
  const auto result =
      mcts::search(kg, a.question, topics, *planner, params, embedder, config, a.seed);
  out << nlohmann::json{{"answers", answers_json(kg, result.answers)},
                        {"usage",
                         {{"llm_calls", result.usage.llm_calls},
                          {"tokens", result.usage.tokens()},
                          {"prompt_tokens", result.usage.prompt_tokens},
                          {"completion_tokens", result.usage.completion_tokens}}}}
             .dump(2)
      << '\n';
  return 0;
}

struct EvalArgs {
  std::string kg_path, data, ckpt, out;
  bool inverse = false;
  harness::EvalConfig eval;
  SearchOptions search;
  PlannerOptions planner;
  EmbedOptions embed;
};

int run_eval(EvalArgs& a, std::ostream& out) {
  const auto kg = kg::load_kg(a.kg_path, a.inverse);
  const auto items = harness::load_dataset(a.data);
  const auto params = checkpoint::load_checkpoint(a.ckpt);
  a.eval.search = a.search.resolve();
  EmbedContext ctx(a.embed, params.dims.d_in);
  const auto embedder = ctx.embedder();
  auto planner = make_planner(a.planner, embedder, gold_paths(kg, items, a.eval.search.max_len),
                              a.eval.seed);

  const auto report = harness::evaluate(kg, items, *planner, params, embedder, a.eval);
  const std::string doc = harness::report_json(kg, report, a.eval);
  if (a.out.empty()) {
    out << doc;
  } else {
    std::ofstream file(a.out, std::ios::binary | std::ios::trunc);
    if (!file) throw IoError("cannot write report " + a.out);
    file << doc;
    out << nlohmann::json{{"questions", report.per_question.size()},
                          {"hits_at_1", report.mean_hits_at_1},
                          {"f1", report.mean_f1},
                          {"llm_calls", report.mean_llm_calls},
                          {"failures", report.failures}}
               .dump()
        << '\n';
  }
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Knowledge-graph question answering with evaluator-guided MCTS", "damr"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string log_level = "warn";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off")
      ->capture_default_str();

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic KG and QA set");
  synth_cmd->add_option("--entities", synth.spec.entities, "Filler entities shared by all questions")
      ->capture_default_str();
  synth_cmd->add_option("--relations", synth.spec.relations, "Relation types")->capture_default_str();
  synth_cmd->add_option("--questions", synth.spec.questions, "Questions")->capture_default_str();
  synth_cmd->add_option("--path-len", synth.spec.path_len, "Gold path length")->capture_default_str();
  synth_cmd->add_option("--branch", synth.spec.branching, "Distractor edges per gold node")
      ->capture_default_str();
  synth_cmd->add_option("--decoy-rate", synth.spec.decoy_rate,
                        "Chance of a same-pool decoy edge at the last gold hop")
      ->capture_default_str();
  synth_cmd->add_option("--prefix", synth.spec.prefix, "Label prefix for question chains")
      ->capture_default_str();
  synth_cmd->add_option("--seed", synth.spec.seed, "Seed")->capture_default_str();
  synth_cmd->add_option("--out-kg", synth.out_kg, "KG output (TSV)")->required();
  synth_cmd->add_option("--out-data", synth.out_data, "Dataset output (JSON lines)")->required();

  PretrainArgs pre;
  auto* pre_cmd = app.add_subcommand("pretrain", "Mine triplets and pretrain the path evaluator");
  pre_cmd->add_option("--kg", pre.kg_path, "KG file")->required();
  pre_cmd->add_option("--train", pre.train_path, "Training dataset")->required();
  pre_cmd->add_option("--out", pre.out, "Checkpoint output")->required();
  pre_cmd->add_flag("--inverse", pre.inverse, "Add inverse edges");
  pre_cmd->add_option("--epochs", pre.train.epochs, "Epochs")->capture_default_str();
  pre_cmd->add_option("--lr", pre.train.lr, "Learning rate")->capture_default_str();
  pre_cmd->add_option("--batch", pre.train.batch_size, "Mini-batch size")->capture_default_str();
  pre_cmd->add_option("--seed", pre.train.seed, "Seed")->capture_default_str();
  pre_cmd->add_option("--max-len", pre.mining.max_len, "Hop limit for mined paths")
      ->capture_default_str();
  pre_cmd->add_option("--hard", pre.mining.hard_per_positive, "Hard negatives per positive")
      ->capture_default_str();
  pre_cmd->add_option("--random", pre.mining.random_per_positive, "Random negatives per positive")
      ->capture_default_str();
  pre_cmd->add_option("--d-in", pre.dims.d_in, "Input embedding size")->capture_default_str();
  pre_cmd->add_option("--d", pre.dims.d, "Model width")->capture_default_str();
  pre_cmd->add_option("--layers", pre.dims.layers, "Transformer layers")->capture_default_str();
  pre_cmd->add_option("--heads", pre.dims.heads, "Attention heads")->capture_default_str();
  pre_cmd->add_option("--d-ff", pre.dims.d_ff, "Feed-forward width")->capture_default_str();
  pre_cmd->add_option("--l-max", pre.dims.l_max, "Positional table length")->capture_default_str();
  add_embed_options(*pre_cmd, pre.embed);

  AnswerArgs ans;
  auto* ans_cmd = app.add_subcommand("answer", "Answer one question");
  ans_cmd->add_option("--kg", ans.kg_path, "KG file")->required();
  ans_cmd->add_option("--ckpt", ans.ckpt, "Scorer checkpoint")->required();
  ans_cmd->add_option("--question", ans.question, "Question text")->required();
  ans_cmd->add_option("--topics", ans.topics, "Comma-separated topic entity labels")->required();
  ans_cmd->add_option("--data", ans.data, "Dataset supplying gold paths to --planner mock");
  ans_cmd->add_flag("--inverse", ans.inverse, "Add inverse edges");
  ans_cmd->add_option("--seed", ans.seed, "Seed")->capture_default_str();
  add_search_options(*ans_cmd, ans.search);
  add_planner_options(*ans_cmd, ans.planner);
  add_embed_options(*ans_cmd, ans.embed);

  EvalArgs ev;
  auto* ev_cmd = app.add_subcommand("eval", "Evaluate a dataset");
  ev_cmd->add_option("--kg", ev.kg_path, "KG file")->required();
  ev_cmd->add_option("--data", ev.data, "Dataset")->required();
  ev_cmd->add_option("--ckpt", ev.ckpt, "Scorer checkpoint")->required();
  ev_cmd->add_option("--out", ev.out, "Report output (default: stdout)");
  ev_cmd->add_flag("--inverse", ev.inverse, "Add inverse edges");
  ev_cmd->add_option("--seed", ev.eval.seed, "Seed")->capture_default_str();
  ev_cmd->add_option("--workers", ev.eval.workers, "Parallel questions")->capture_default_str();
  ev_cmd->add_flag("--carry-scorer", ev.eval.carry_scorer,
                   "Keep fine-tuned weights from one question to the next");
  ev_cmd->add_option("--answer-margin", ev.eval.answer_margin,
                     "Score margin defining the predicted answer set")
      ->capture_default_str();
  ev_cmd->add_flag("--timing", ev.eval.record_timing, "Record per-question wall time");
  add_search_options(*ev_cmd, ev.search);
  add_planner_options(*ev_cmd, ev.planner);
  add_embed_options(*ev_cmd, ev.embed);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (*synth_cmd) return run_synth(synth, out);
    if (*pre_cmd) return run_pretrain(pre, out);
    if (*ans_cmd) return run_answer(ans, out);
    if (*ev_cmd) return run_eval(ev, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace damr::cli

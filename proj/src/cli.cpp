#include "sands/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "sands/common.hpp"

namespace sands {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string join_seeds(const std::vector<uint64_t>& seeds) {
  std::string s;
  for (size_t i = 0; i < seeds.size(); ++i) s += (i ? "," : "") + std::to_string(seeds[i]);
  return s;
}

std::ofstream open_artifact(const std::string& path) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path + "'");
  return out;
}

std::string in_output(const ExperimentConfig& c, const std::string& name) {
  return (fs::path(c.output_dir) / name).string();
}

void require_path(const std::string& value, const std::string& key) {
  if (value.empty()) throw UsageError("config field '" + key + "' must be set for this command");
}

// Rewrites the whole log from the state's history, so an interrupted and
// resumed run ends with the same file as an uninterrupted one.
void save_progress(const ExperimentConfig& config, uint64_t seed, const TrainState& state,
                   const std::string& metrics_path) {
  auto out = open_artifact(metrics_path);
  write_metrics_log(out, config, seed, config.split_sizes.front(), state.history);
}

Checkpoint make_checkpoint(const ExperimentConfig& config, uint64_t seed, const TrainState& state) {
  Checkpoint c;
  c.config_text = serialize(config);
  c.config_hash = config_hash(config);
  c.seed = seed;
  c.split_size = config.split_sizes.front();
  c.unlabeled_fraction = config.unlabeled_fractions.front();
  c.state = state;
  return c;
}

void check_hash(const Checkpoint& ck, const ExperimentConfig& config) {
  if (ck.config_hash == config_hash(config)) return;
  std::string msg = "config hash " + config_hash(config) + " does not match checkpoint hash " +
                    ck.config_hash + "; changed fields:";
  std::istringstream recorded(ck.config_text);
  for (const auto& line : diff(parse_config(recorded), config)) msg += "\n  " + line;
  throw UsageError(msg);
}

struct RunContext {
  LoadedData data;
  uint64_t seed = 0;
  TrainSplit split;
};

RunContext prepare_run(const ExperimentConfig& config) {
  RunContext ctx{load_data(config), config.seeds.front(), {}};
  ctx.split = make_split(ctx.data.dataset, config.split_sizes.front(), config.test_size,
                         config.unlabeled_fractions.front(), ctx.seed);
  return ctx;
}

RunOutcome continue_run(const ExperimentConfig& config, const Trainer& trainer, uint64_t seed,
                        TrainState state, std::optional<int> stop_after) {
  RunOutcome r;
  r.metrics_path = in_output(config, "metrics.csv");
  r.checkpoint_path = in_output(config, "checkpoint.bin");
  fs::create_directories(config.output_dir);
  trainer.train(state, stop_after, [&](const TrainState& s) {
    save_progress(config, seed, s, r.metrics_path);
    if (config.checkpoint_every > 0 && s.epoch % config.checkpoint_every == 0)
      save_checkpoint(in_output(config, "checkpoint-epoch-" + std::to_string(s.epoch) + ".bin"),
                      make_checkpoint(config, seed, s));
  });
  save_progress(config, seed, state, r.metrics_path);
  save_checkpoint(r.checkpoint_path, make_checkpoint(config, seed, state));
  r.state = std::move(state);
  return r;
}

json to_json(const EvalReport& r) {
  json per_class = json::array();
  for (const auto& s : r.scores.per_class)
    per_class.push_back(
        {{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}, {"support", s.support}});
  return {{"mode", r.mode},
          {"classifier", r.classifier},
          {"body", r.body},
          {"split_size", r.split_size},
          {"unlabeled_fraction", r.unlabeled_fraction},
          {"seed", r.seed},
          {"macro_f1", r.scores.macro_f1},
          {"per_class", per_class},
          {"confusion", r.scores.confusion},
          {"epoch_series", r.epoch_series},
          {"error", r.error}};
}

EvalReport from_json(const json& j) {
  EvalReport r;
  r.mode = j.at("mode").get<std::string>();
  r.classifier = j.at("classifier").get<int>();
  r.body = j.at("body").get<std::string>();
  r.split_size = j.at("split_size").get<size_t>();
  r.unlabeled_fraction = j.at("unlabeled_fraction").get<double>();
  r.seed = j.at("seed").get<uint64_t>();
  r.scores.macro_f1 = j.at("macro_f1").get<double>();
  for (const auto& s : j.at("per_class"))
    r.scores.per_class.push_back({s.at("precision").get<double>(), s.at("recall").get<double>(),
                                  s.at("f1").get<double>(), s.at("support").get<size_t>()});
  r.scores.confusion = j.at("confusion").get<std::vector<std::vector<size_t>>>();
  r.epoch_series = j.at("epoch_series").get<std::vector<double>>();
  r.error = j.at("error").get<std::string>();
  return r;
}

std::vector<EvalReport> evaluate_checkpoint(const ExperimentConfig& config,
                                            const std::string& checkpoint_path) {
  const Checkpoint ck = load_checkpoint(checkpoint_path);
  check_hash(ck, config);
  RunContext ctx = prepare_run(config);
  Trainer trainer(training_config(config, ctx.seed), ctx.data.dataset, ctx.data.graph, ctx.split);
  std::vector<int> gold;
  for (size_t i : ctx.split.test) gold.push_back(*ctx.data.dataset.tweets[i].label);
  const int labels = static_cast<int>(ctx.data.dataset.label_set.size());
  std::vector<EvalReport> reports;
  for (int k = 1; k <= 2; ++k) {
    const auto& params = k == 1 ? ck.state.first : ck.state.second;
    EvalReport r;
    r.mode = std::string(to_string(config.mode));
    r.classifier = k;
    r.body = std::string(to_string(params.body));
    r.split_size = config.split_sizes.front();
    r.unlabeled_fraction = config.unlabeled_fractions.front();
    r.seed = ctx.seed;
    r.scores = macro_f1(trainer.predict_labels(params, ctx.split.test), gold, labels);
    for (const auto& m : ck.state.history)
      r.epoch_series.push_back(k == 1 ? m.macro_f1_first : m.macro_f1_second);
    reports.push_back(std::move(r));
  }
  return reports;
}

ExperimentConfig resolve_config(const std::string& path, const std::vector<std::string>& sets) {
  ExperimentConfig config = path.empty() ? ExperimentConfig{} : load_config(path);
  apply_environment(config);
  for (const auto& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
    set_field(config, kv.substr(0, eq), kv.substr(eq + 1));
  }
  validate(config);
  return config;
}

void cmd_preprocess(const ExperimentConfig& config, std::ostream& out) {
  require_path(config.tweets_path, "tweets_path");
  LoadedData data{load_dataset(config.tweets_path,
                               config.labels_path.empty()
                                   ? std::nullopt
                                   : std::optional<std::string>(config.labels_path),
                               effective_label_set(config)),
                  {}};
  const Dataset& d = data.dataset;
  const std::string header = artifact_header(config, join_seeds(config.seeds));
  {
    auto f = open_artifact(in_output(config, "vocab.txt"));
    f << header << '\n';
    write_vocabulary(d.vocab, f);
  }
  {
    auto f = open_artifact(in_output(config, "encoded.tsv"));
    f << header << '\n';
    f << "# tweet_id\tuser_id\ttimestamp\tlabel\ttoken_ids\thashtag_ids\n";
    auto ids = [](const std::vector<int>& v) {
      std::string s;
      for (size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + std::to_string(v[i]);
      return s;
    };
    for (const auto& t : d.tweets)
      f << t.tweet_id << '\t' << t.user_id << '\t' << t.timestamp << '\t'
        << (t.label ? d.label_set[static_cast<size_t>(*t.label)] : "") << '\t' << ids(t.token_ids)
        << '\t' << ids(t.hashtag_ids) << '\n';
  }
  out << "preprocessed " << d.tweets.size() << " tweets (" << d.labeled_subset.size()
      << " labeled), " << d.vocab.words.size() << " words, " << d.vocab.hashtags.size()
      << " hashtags -> " << config.output_dir << '\n';
}

void cmd_synth(const ExperimentConfig& config, std::ostream& out) {
  SynthConfig sc = config.synth;
  const SynthData data = generate(sc);
  const auto paths = write_synth(data, config.synth_dir,
                                 {artifact_header(config, std::to_string(sc.seed)).substr(2)});
  out << "wrote " << data.tweets.size() << " tweets, " << data.edges.size() << " edges, "
      << data.users.size() << " users -> " << paths.tweets << ", " << paths.labels << ", "
      << paths.edges << '\n';
}

void print_history(const std::vector<EpochMetrics>& history, std::ostream& out) {
  for (const auto& m : history)
    out << "epoch " << m.epoch << ": macro_f1 c1=" << std::fixed << std::setprecision(4)
        << m.macro_f1_first << " c2=" << m.macro_f1_second << std::defaultfloat << '\n';
}

}  // namespace

std::string artifact_header(const ExperimentConfig& config, const std::string& seed) {
  return "# config_hash=" + config_hash(config) + " seed=" + seed;
}

LoadedData load_data(const ExperimentConfig& config) {
  require_path(config.tweets_path, "tweets_path");
  require_path(config.labels_path, "labels_path");
  std::optional<Vocabulary> vocab;
  if (!config.vocab_path.empty()) {
    std::ifstream in(config.vocab_path);
    if (!in) throw DataError("cannot open vocabulary '" + config.vocab_path + "'");
    vocab = read_vocabulary(in);
  }
  LoadedData d{load_dataset(config.tweets_path, config.labels_path, effective_label_set(config),
                            vocab ? &*vocab : nullptr),
               config.edges_path.empty() ? FollowGraph::from_edges({})
                                         : load_follow_graph(config.edges_path)};
  return d;
}

void write_metrics_log(std::ostream& out, const ExperimentConfig& config, uint64_t seed,
                       size_t split_size, const std::vector<EpochMetrics>& history) {
  out << artifact_header(config, std::to_string(seed)) << '\n';
  out << "epoch,mode,split_size,macro_f1_c1,macro_f1_c2,mean_loss_sup,mean_loss_semi,"
         "wall_seconds\n";
  const std::string mode(to_string(config.mode));
  for (const auto& m : history) {
    out << m.epoch << ',' << mode << ',' << split_size << std::setprecision(17) << ','
        << m.macro_f1_first << ',' << m.macro_f1_second << ',' << m.loss_supervised << ','
        << m.loss_semi << ',' << std::setprecision(3) << std::fixed << m.wall_seconds
        << std::defaultfloat << '\n';
  }
}

RunOutcome run_training(const ExperimentConfig& config, std::optional<int> stop_after) {
  RunContext ctx = prepare_run(config);
  Trainer trainer(training_config(config, ctx.seed), ctx.data.dataset, ctx.data.graph, ctx.split);
  std::optional<std::unordered_map<std::string, std::vector<double>>> pretrained;
  if (!config.embeddings_path.empty())
    pretrained = read_embeddings(config.embeddings_path, config.word_dim);
  TrainState state = trainer.init_state(pretrained ? &*pretrained : nullptr);
  return continue_run(config, trainer, ctx.seed, std::move(state), stop_after);
}

RunOutcome resume_training(const std::string& checkpoint_path, const ExperimentConfig& config,
                           std::optional<int> stop_after) {
  Checkpoint ck = load_checkpoint(checkpoint_path);
  check_hash(ck, config);
  RunContext ctx = prepare_run(config);
  Trainer trainer(training_config(config, ctx.seed), ctx.data.dataset, ctx.data.graph, ctx.split);
  return continue_run(config, trainer, ctx.seed, std::move(ck.state), stop_after);
}

void write_reports_json(std::ostream& out, const ExperimentConfig& config,
                        const std::vector<EvalReport>& reports) {
  json j;
  j["config_hash"] = config_hash(config);
  j["seed"] = join_seeds(config.seeds);
  j["label_set"] = effective_label_set(config);
  j["reports"] = json::array();
  for (const auto& r : reports) j["reports"].push_back(to_json(r));
  out << j.dump(1) << '\n';
}

std::vector<EvalReport> read_reports_json(std::istream& in) {
  std::vector<EvalReport> reports;
  try {
    const json j = json::parse(in);
    for (const auto& r : j.at("reports")) reports.push_back(from_json(r));
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed reports file: ") + e.what());
  }
  return reports;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Semi-supervised stance detection with follow-graph co-training", "sands"};
  app.require_subcommand(1);
  std::string config_path;
  std::vector<std::string> sets;
  std::optional<int> stop_after;
  std::string checkpoint_path;
  std::string reports_path;

  auto common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "Config file (defaults apply when omitted)");
    sub->add_option("--set", sets, "Override a config field, key=value (repeatable)")
        ->expected(1)
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  };
  auto* preprocess = app.add_subcommand("preprocess", "Clean tweets, build the vocabulary, encode");
  auto* synth = app.add_subcommand("synth", "Generate the synthetic benchmark files");
  auto* train = app.add_subcommand("train", "Train one run; writes metrics.csv and checkpoints");
  auto* evaluate = app.add_subcommand("evaluate", "Score a checkpoint, or run the experiment grid");
  auto* report = app.add_subcommand("report", "Comparison, per-class and convergence tables");
  auto* resume = app.add_subcommand("resume", "Continue training from a checkpoint");
  for (auto* sub : {preprocess, synth, train, evaluate, report, resume}) common(sub);
  for (auto* sub : {train, resume})
    sub->add_option("--stop-after", stop_after, "Stop after this many more epochs")
        ->check(CLI::PositiveNumber);
  resume->add_option("--checkpoint", checkpoint_path, "Checkpoint to continue")->required();
  evaluate->add_option("--checkpoint", checkpoint_path, "Score this checkpoint instead of the grid");
  report->add_option("--reports", reports_path, "reports.json (default: <output_dir>/reports.json)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    const ExperimentConfig config = resolve_config(config_path, sets);
    if (preprocess->parsed()) {
      cmd_preprocess(config, out);
    } else if (synth->parsed()) {
      cmd_synth(config, out);
    } else if (train->parsed()) {
      RunOutcome r = run_training(config, stop_after);
      print_history(r.state.history, out);
      out << "metrics -> " << r.metrics_path << ", checkpoint -> " << r.checkpoint_path << '\n';
    } else if (resume->parsed()) {
      RunOutcome r = resume_training(checkpoint_path, config, stop_after);
      print_history(r.state.history, out);
      out << "metrics -> " << r.metrics_path << ", checkpoint -> " << r.checkpoint_path << '\n';
    } else if (evaluate->parsed()) {
      std::vector<EvalReport> reports;
      std::string name = "eval";
      if (!checkpoint_path.empty()) {
        reports = evaluate_checkpoint(config, checkpoint_path);
      } else {
        name = "reports";
        LoadedData data = load_data(config);
        reports = run_experiment(experiment_grid(config), data.dataset, data.graph,
                                 [&](const EvalReport& r) {
                                   out << r.mode << " C" << r.classifier << " split="
                                       << r.split_size << " fraction=" << r.unlabeled_fraction
                                       << " seed=" << r.seed << ": "
                                       << (r.error.empty() ? std::to_string(r.scores.macro_f1)
                                                           : "error: " + r.error)
                                       << std::endl;
                                 });
      }
      {
        auto f = open_artifact(in_output(config, name + ".json"));
        write_reports_json(f, config, reports);
      }
      {
        auto f = open_artifact(in_output(config, name + ".csv"));
        f << artifact_header(config, join_seeds(config.seeds)) << '\n';
        write_reports(reports, effective_label_set(config), f);
      }
      for (const auto& r : reports)
        if (!checkpoint_path.empty())
          out << "C" << r.classifier << " (" << r.body << ") macro_f1=" << r.scores.macro_f1
              << '\n';
      out << "reports -> " << in_output(config, name + ".json") << '\n';
    } else if (report->parsed()) {
      const std::string path =
          reports_path.empty() ? in_output(config, "reports.json") : reports_path;
      std::ifstream in(path);
      if (!in) throw DataError("cannot open reports '" + path + "'");
      const auto reports = read_reports_json(in);
      const std::string header = artifact_header(config, join_seeds(config.seeds));
      {
        auto f = open_artifact(in_output(config, "comparison.csv"));
        f << header << '\n';
        write_comparison_table(reports, f);
      }
      {
        auto f = open_artifact(in_output(config, "per_class.csv"));
        f << header << '\n';
        write_class_table(reports, effective_label_set(config), f);
      }
      {
        auto f = open_artifact(in_output(config, "convergence.csv"));
        f << header << '\n';
        write_convergence(reports, f);
      }
      out << "tables -> " << config.output_dir << "/{comparison,per_class,convergence}.csv\n";
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace sands

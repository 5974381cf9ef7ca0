// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 when
// any criterion fails. Runs the frozen benchmark grid end to end.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "fixtures.hpp"
#include "oracle.hpp"
#include "sands/cli.hpp"
#include "sands/config.hpp"
#include "sands/eval.hpp"

using namespace sands;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::vector<std::pair<std::string, Outcome>> results;

void record(const std::string& name, Outcome o) {
  std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  results.emplace_back(name, std::move(o));
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

// ---- benchmark grid ----

struct Benchmark {
  ExperimentConfig config;
  LoadedData data;
  std::vector<EvalReport> reports;
};

double mean_f1(const std::vector<EvalReport>& reports, const std::string& mode, int classifier,
               double fraction, size_t* count = nullptr) {
  double sum = 0.0;
  size_t n = 0;
  for (const auto& r : reports) {
    if (r.mode != mode || r.classifier != classifier || r.unlabeled_fraction != fraction ||
        !r.error.empty())
      continue;
    sum += r.scores.macro_f1;
    ++n;
  }
  if (count) *count = n;
  return n ? sum / static_cast<double>(n) : std::nan("");
}

void run_grid(Benchmark& b, const std::vector<TrainingMode>& modes, std::vector<double> fractions) {
  ExperimentGrid grid = experiment_grid(b.config);
  grid.modes = modes;
  grid.unlabeled_fractions = std::move(fractions);
  auto reports = run_experiment(grid, b.data.dataset, b.data.graph, [](const EvalReport& r) {
    std::cout << "  " << r.mode << " C" << r.classifier << " fraction=" << r.unlabeled_fraction
              << " seed=" << r.seed << ": "
              << (r.error.empty() ? fmt(r.scores.macro_f1) : "error: " + r.error) << std::endl;
  });
  b.reports.insert(b.reports.end(), reports.begin(), reports.end());
}

void criterion_trend(const Benchmark& b, double runtime) {
  size_t n = 0;
  const double sands2 = mean_f1(b.reports, "sands", 2, 1.0, &n);
  const double sands1 = mean_f1(b.reports, "sands", 1, 1.0);
  const double sup2 = mean_f1(b.reports, "supervised", 2, 1.0);
  const double sup1 = mean_f1(b.reports, "supervised", 1, 1.0);
  const bool ok = n == b.config.seeds.size() && sands2 - sup2 >= 0.03 && sands1 - sup1 >= 0.02 &&
                  runtime <= 1800.0;
  record("[1] trend reproduction",
         {ok, "SANDS(C2) " + fmt(sands2) + " vs supervised BLSTM " + fmt(sup2) + " (gap " +
                  fmt(sands2 - sup2) + ", need >= 0.03); SANDS(C1) " + fmt(sands1) +
                  " vs supervised ConvNet " + fmt(sup1) + " (gap " + fmt(sands1 - sup1) +
                  ", need >= 0.02); single run " + fmt(runtime, 1) + " s (limit 1800 s)"});
}

void criterion_ablation(const Benchmark& b) {
  const double full = mean_f1(b.reports, "sands", 2, 1.0);
  const double cont = mean_f1(b.reports, "sands_cont", 2, 1.0);
  const double net = mean_f1(b.reports, "sands_net", 2, 1.0);
  const bool ok = full - cont >= -0.01 && cont - net >= -0.01;
  record("[2] ablation ordering",
         {ok, "SANDS(C2) " + fmt(full) + " >= SANDS/Cont(C2) " + fmt(cont) + " >= SANDS/Net(C2) " +
                  fmt(net) + " within -0.01"});
}

void criterion_fraction(const Benchmark& b) {
  const double all = mean_f1(b.reports, "sands", 2, 1.0);
  const double tenth = mean_f1(b.reports, "sands", 2, 0.1);
  record("[3] unlabeled-fraction monotonicity",
         {all - tenth >= 0.02, "SANDS(C2) at 1.0 " + fmt(all) + " vs at 0.1 " + fmt(tenth) +
                                   " (gap " + fmt(all - tenth) + ", need >= 0.02)"});
}

void criterion_stability(const Benchmark& b) {
  double worst = 0.0;
  size_t runs = 0;
  std::string where = "none";
  for (const auto& r : b.reports) {
    if (r.mode != "sands" || r.unlabeled_fraction != 1.0 || !r.error.empty()) continue;
    ++runs;
    const size_t n = r.epoch_series.size();
    const size_t tail = std::max<size_t>(1, (n + 3) / 4);
    const auto first = r.epoch_series.end() - static_cast<long>(tail);
    const double peak = *std::max_element(first, r.epoch_series.end());
    for (auto it = first; it != r.epoch_series.end(); ++it) {
      if (peak - *it > worst) {
        worst = peak - *it;
        where = "C" + std::to_string(r.classifier) + " seed " + std::to_string(r.seed);
      }
    }
  }
  record("[8] stability", {runs > 0 && worst <= 0.05,
                           "largest last-quarter drop below the last-quarter max " + fmt(worst) +
                               " (" + where + ", limit 0.05) over " + std::to_string(runs) +
                               " classifier runs"});
}

std::vector<std::string> metric_rows(const std::string& path) {
  std::vector<std::string> rows;
  std::ifstream in(path);
  for (std::string line; std::getline(in, line);) {
    if (line.empty() || line[0] == '#' || line.rfind("epoch,", 0) == 0) continue;
    rows.push_back(line.substr(0, line.rfind(',')));  // drop wall_seconds
  }
  return rows;
}

// ---- oracle criteria ----

int tally(const std::vector<RowVector>& preds, int labels) {
  std::vector<int> votes(static_cast<size_t>(labels), 0);
  for (const auto& p : preds) {
    int best = 0;
    for (int c = 1; c < labels; ++c)
      if (p(c) > p(best)) best = c;
    ++votes[static_cast<size_t>(best)];
  }
  int best = 0;
  for (int c = 1; c < labels; ++c)
    if (votes[static_cast<size_t>(c)] > votes[static_cast<size_t>(best)]) best = c;
  return best;
}

void criterion_formulas() {
  const double ws = supervised_class_weight(500, 320, 1e-8);
  const double wu = unsupervised_batch_weight(512, 100, 1e-8);
  bool ok = std::abs(ws - std::log(500.0 / 319.0)) <= 1e-9 && std::abs(wu - std::log(512.0 / 100.0)) <= 1e-9;
  size_t cases = 0, mismatches = 0;
  for (int labels = 1; labels <= 3; ++labels) {
    std::vector<RowVector> shapes;
    for (int mask = 0; mask < (1 << labels); ++mask) {
      RowVector v(labels);
      for (int c = 0; c < labels; ++c) v(c) = (mask >> c & 1) ? 2.0 : 1.0;
      shapes.push_back(v);
    }
    for (int voters = 1; voters <= 4; ++voters) {
      std::vector<size_t> pick(static_cast<size_t>(voters), 0);
      while (true) {
        std::vector<RowVector> preds;
        for (size_t s : pick) preds.push_back(shapes[s]);
        ++cases;
        mismatches += majority_vote(preds, labels) != tally(preds, labels);
        size_t pos = 0;
        while (pos < pick.size() && ++pick[pos] == shapes.size()) pick[pos++] = 0;
        if (pos == pick.size()) break;
      }
    }
  }
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 1000; ++trial) {
    const int labels = 4 + static_cast<int>(rng() % 5);
    const int voters = 5 + static_cast<int>(rng() % 46);
    std::vector<RowVector> preds;
    for (int v = 0; v < voters; ++v) {
      RowVector p(labels);
      for (int c = 0; c < labels; ++c) p(c) = static_cast<double>(rng() % 5);
      preds.push_back(p);
    }
    ++cases;
    mismatches += majority_vote(preds, labels) != tally(preds, labels);
  }
  ok = ok && mismatches == 0;
  std::ostringstream d;
  d << std::setprecision(12) << "omega_s(500,320)=" << ws << " omega_u(512,100)=" << wu
    << "; majority vote " << mismatches << " mismatches over " << cases << " cases";
  record("[4] formula oracles", {ok, d.str()});
}

std::string plan_violation(const BatchPlan& plan, const Dataset& d, const FollowGraph& g) {
  std::vector<size_t> seen;
  std::map<std::string, int64_t> last;
  for (const auto& batch : plan.batches) {
    if (batch.empty() || batch.size() > plan.max_size) return "batch size";
    for (size_t x = 0; x < batch.size(); ++x)
      for (size_t y = x + 1; y < batch.size(); ++y) {
        const auto& u = d.tweets[batch[x]].user_id;
        const auto& v = d.tweets[batch[y]].user_id;
        auto nu = g.find(u), nv = g.find(v);
        if (!nu || !nv) continue;
        auto fu = g.followees(*nu), fv = g.followees(*nv);
        if (std::find(fu.begin(), fu.end(), *nv) != fu.end() ||
            std::find(fv.begin(), fv.end(), *nu) != fv.end())
          return "connected authors share a batch";
      }
    for (size_t i : batch) {
      seen.push_back(i);
      auto it = last.find(d.tweets[i].user_id);
      if (it != last.end() && it->second > d.tweets[i].timestamp) return "time order";
      last[d.tweets[i].user_id] = d.tweets[i].timestamp;
    }
  }
  std::sort(seen.begin(), seen.end());
  for (size_t i = 0; i < seen.size(); ++i)
    if (seen[i] != i) return "coverage";
  return seen.size() == d.tweets.size() ? "" : "coverage";
}

void criterion_batch_plan() {
  std::mt19937_64 rng(5);
  size_t failures = 0;
  std::string first;
  for (int trial = 0; trial < 200; ++trial) {
    const int users = 2 + static_cast<int>(rng() % 199);
    const int tweets = 1 + static_cast<int>(rng() % 500);
    const double density = std::uniform_real_distribution<double>(0.0, 0.08)(rng);
    std::vector<std::pair<std::string, std::string>> edges;
    for (int a = 0; a < users; ++a)
      for (int b = 0; b < users; ++b)
        if (a != b && std::uniform_real_distribution<double>()(rng) < density)
          edges.emplace_back("u" + std::to_string(a), "u" + std::to_string(b));
    std::vector<RawTweet> raw;
    for (int i = 0; i < tweets; ++i)
      raw.push_back({"t" + std::to_string(i), "u" + std::to_string(rng() % static_cast<uint64_t>(users)),
                     static_cast<int64_t>(rng() % 100), "x"});
    const auto d = make_dataset(raw, {}, {"a", "b"});
    const auto g = FollowGraph::from_edges(edges);
    const auto v = plan_violation(plan_batches(d, g, 1 + rng() % 64), d, g);
    if (!v.empty()) {
      if (first.empty()) first = "trial " + std::to_string(trial) + ": " + v;
      ++failures;
    }
  }
  record("[5] batch-plan soundness",
         {failures == 0, std::to_string(200 - failures) + "/200 random plans satisfy all invariants" +
                             (first.empty() ? "" : "; first failure " + first)});
}

double gradient_error(BodyKind kind) {
  auto p = init_params(kind, testing::tiny_dims(), 91);
  testing::randomize(p, 92);
  const std::vector<std::pair<EncodedTweet, int>> data = {
      {testing::encoded({1, 2, 3, 4, 5, 0}, {1, 2, 0}), 0},
      {testing::encoded({6, 5, 2}, {3}), 2},
      {testing::encoded({3}, {}), 1},
      {testing::encoded({}, {4, 2, 1}), 0}};
  auto loss = [&] {
    double total = 0.0;
    for (const auto& [t, label] : data) total -= std::log(forward(p, t, {})(label));
    return total;
  };
  auto grads = p.zeros_like();
  for (const auto& [t, label] : data) {
    ForwardTrace trace;
    forward(p, t, {}, &trace);
    backward(p, trace, cross_entropy_logit_grad(trace.probs, one_hot(label, 3)), grads);
  }
  std::vector<Matrix*> values, analytic;
  p.visit([&](const std::string&, Matrix& m) { values.push_back(&m); });
  grads.visit([&](const std::string&, Matrix& m) { analytic.push_back(&m); });
  double worst = 0.0;
  for (size_t t = 0; t < values.size(); ++t)
    for (Eigen::Index i = 0; i < values[t]->size(); ++i) {
      double& x = values[t]->data()[i];
      const double saved = x;
      x = saved + 1e-4;
      const double up = loss();
      x = saved - 1e-4;
      const double down = loss();
      x = saved;
      const double numeric = (up - down) / 2e-4;
      const double a = analytic[t]->data()[i];
      worst = std::max(worst, std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6}));
    }
  return worst;
}

void criterion_gradients() {
  const auto start = Clock::now();
  const double conv = gradient_error(BodyKind::kConv);
  const double blstm = gradient_error(BodyKind::kBlstm);
  const double elapsed = seconds_since(start);
  record("[6] gradient correctness",
         {conv < 1e-3 && blstm < 1e-3 && elapsed < 60.0,
          "max relative error C1 " + fmt(conv, 8) + ", C2 " + fmt(blstm, 8) + " (limit 1e-3); " +
              fmt(elapsed, 2) + " s (limit 60 s)"});
}

void criterion_cache() {
  auto fx = testing::make_fixture(testing::small_synth(120, 1000, 8));
  auto cfg = testing::small_training();
  TrainSplit split = make_split(fx.dataset, 100, 200, 1.0, 1);
  Trainer trainer(cfg, fx.dataset, fx.graph, split);
  TrainState state = trainer.init_state();
  size_t mismatches = 0, checked = 0;
  bool counts_ok = true;
  std::map<int, std::pair<RowVector, RowVector>> expected;
  auto observer = [&](const TrainState& s, std::span<const size_t> batch) {
    std::map<int, size_t> last;
    for (size_t i : batch) last[trainer.author(i)] = i;
    for (const auto& [user, tweet] : last) {
      if (user < 0) continue;
      const RowVector first = forward(s.first, fx.dataset.tweets[tweet], {});
      const RowVector second = forward(s.second, fx.dataset.tweets[tweet], {});
      checked += 2;
      mismatches += s.first_cache.row(user) != first;
      mismatches += s.second_cache.row(user) != second;
      expected[user] = {first, second};
    }
  };
  for (int epoch = 0; epoch < 5; ++epoch) {
    trainer.supervised_pass(state);
    trainer.init_caches(state);
    const auto u1 = state.first_counters.cache_updates, u2 = state.second_counters.cache_updates;
    trainer.semi_supervised_pass(state, observer);
    counts_ok = counts_ok &&
                state.first_counters.cache_updates - u1 == static_cast<int64_t>(split.pool.size()) &&
                state.second_counters.cache_updates - u2 == static_cast<int64_t>(split.pool.size());
    // After the epoch, each row must still hold the pass taken right after the
    // author's last batch.
    for (const auto& [user, rows] : expected) {
      checked += 2;
      mismatches += state.first_cache.row(user) != rows.first;
      mismatches += state.second_cache.row(user) != rows.second;
    }
    expected.clear();
    ++state.epoch;
  }
  record("[7] cache consistency",
         {mismatches == 0 && checked > 0 && counts_ok,
          std::to_string(mismatches) + " mismatching rows of " + std::to_string(checked) +
              " checked over 5 epochs; cache updates per classifier per epoch " +
              (counts_ok ? "equal" : "differ from") + " |D| = " + std::to_string(split.pool.size())});
}

void criterion_invariants() {
  ModelDims dims = testing::tiny_dims(40, 20);
  dims.word_dim = 8;
  dims.hashtag_dim = 6;
  dims.attention_dim = 5;
  dims.conv_windows = {1, 3, 5};
  dims.conv_filters = {6, 5, 4};
  dims.lstm_hidden = 5;
  dims.label_count = 5;
  std::mt19937_64 rng(9);
  double worst_sum = 0.0, worst_pad = 0.0;
  for (BodyKind kind : {BodyKind::kConv, BodyKind::kBlstm}) {
    auto p = init_params(kind, dims, 10);
    testing::randomize(p, 11, 1.0);
    for (int trial = 0; trial < 500; ++trial) {
      auto ids = [&](int table, int max_len) {
        std::vector<int> v(rng() % static_cast<uint64_t>(max_len + 1));
        for (int& x : v) x = 1 + static_cast<int>(rng() % static_cast<uint64_t>(table - 1));
        return v;
      };
      auto t = testing::encoded(ids(40, 30), ids(20, 5));
      const RowVector out = kind == BodyKind::kConv ? classify_conv(t, p, 0.0, false, 0)
                                                    : classify_blstm(t, p, 0.0, false, 0);
      worst_sum = std::max(worst_sum, std::abs(out.sum() - 1.0));
      if (!(out.array() > 0.0).all()) worst_sum = 1.0;
      t.token_ids.resize(t.token_ids.size() + 1 + rng() % 10, 0);
      t.hashtag_ids.resize(t.hashtag_ids.size() + 1 + rng() % 3, 0);
      const RowVector padded = forward(p, t, {});
      worst_pad = std::max(worst_pad, (padded - out).cwiseAbs().maxCoeff());
    }
  }
  record("[9] normalization and padding invariants",
         {worst_sum <= 1e-6 && worst_pad <= 1e-6,
          "1000 cases; max |sum - 1| " + fmt(worst_sum, 12) + ", max padding change " +
              fmt(worst_pad, 12) + " (limits 1e-6)"});
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria for the stance detection pipeline"};
  std::string work_dir = "acceptance_work";
  std::string config_path = std::string(SANDS_SOURCE_DIR) + "/configs/benchmark.cfg";
  bool skip_benchmark = false;
  app.add_option("--work-dir", work_dir, "Scratch directory for data and runs");
  app.add_option("--config", config_path, "Frozen benchmark config");
  app.add_flag("--skip-benchmark", skip_benchmark, "Only run the oracle criteria (1-3, 8, 10 fail)");
  CLI11_PARSE(app, argc, argv);

  const auto start = Clock::now();
  criterion_formulas();
  criterion_batch_plan();
  criterion_gradients();
  criterion_cache();
  criterion_invariants();

  if (skip_benchmark) {
    for (const char* name : {"[1] trend reproduction", "[2] ablation ordering",
                             "[3] unlabeled-fraction monotonicity", "[8] stability",
                             "[10] determinism"})
      record(name, {false, "benchmark skipped"});
  } else {
    try {
      Benchmark b;
      b.config = load_config(config_path);
      const fs::path work = fs::absolute(work_dir);
      b.config.synth_dir = (work / "data").string();
      b.config.tweets_path = (work / "data" / "tweets.tsv").string();
      b.config.labels_path = (work / "data" / "labels.tsv").string();
      b.config.edges_path = (work / "data" / "edges.txt").string();
      b.config.output_dir = (work / "runs").string();
      validate(b.config);
      std::cout << "benchmark config hash " << config_hash(b.config) << std::endl;
      write_synth(generate(b.config.synth), b.config.synth_dir,
                  {artifact_header(b.config, std::to_string(b.config.synth.seed)).substr(2)});
      b.data = load_data(b.config);

      // Two identical end-to-end runs of the first seed; the first also
      // times a single run.
      ExperimentConfig first = b.config;
      first.output_dir = (work / "runs" / "determinism_a").string();
      const auto run_start = Clock::now();
      run_training(first, std::nullopt);
      const double runtime = seconds_since(run_start);
      ExperimentConfig second = first;
      second.output_dir = (work / "runs" / "determinism_b").string();
      run_training(second, std::nullopt);
      const auto rows_a = metric_rows(first.output_dir + "/metrics.csv");
      const auto rows_b = metric_rows(second.output_dir + "/metrics.csv");

      run_grid(b, b.config.compare_modes, {1.0});
      run_grid(b, {TrainingMode::kSands}, {0.1});
      {
        std::ofstream out(work / "runs" / "reports.json");
        write_reports_json(out, b.config, b.reports);
        std::ofstream csv(work / "runs" / "reports.csv");
        write_reports(b.reports, effective_label_set(b.config), csv);
        std::ofstream table(work / "runs" / "comparison.csv");
        write_comparison_table(b.reports, table);
      }

      criterion_trend(b, runtime);
      criterion_ablation(b);
      criterion_fraction(b);
      criterion_stability(b);
      record("[10] determinism",
             {!rows_a.empty() && rows_a == rows_b,
              std::to_string(rows_a.size()) + " metric rows per run; logs " +
                  (rows_a == rows_b ? "identical" : "differ") + " excluding wall_seconds"});
    } catch (const std::exception& e) {
      for (const char* name : {"[1] trend reproduction", "[2] ablation ordering",
                               "[3] unlabeled-fraction monotonicity", "[8] stability",
                               "[10] determinism"})
        record(name, {false, std::string("benchmark failed: ") + e.what()});
    }
  }

  std::sort(results.begin(), results.end(), [](const auto& a, const auto& b) {
    return std::stoi(a.first.substr(1)) < std::stoi(b.first.substr(1));
  });
  size_t passed = 0;
  std::cout << "\nsummary (" << fmt(seconds_since(start), 1) << " s)\n";
  for (const auto& [name, o] : results) {
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << '\n';
    passed += o.pass;
  }
  std::cout << passed << "/" << results.size() << " criteria passed" << std::endl;
  return passed == results.size() ? 0 : 1;
}

#include "sands/eval.hpp"

#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace sands {
namespace {

double safe_ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

std::string fmt(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(4) << v;
  return s.str();
}

// Keeps free-form error text inside one CSV cell.
std::string csv_cell(std::string s) {
  for (char& ch : s)
    if (ch == ',' || ch == '\n' || ch == '\r') ch = ch == ',' ? ';' : ' ';
  return s;
}

std::string row_name(const EvalReport& r) {
  return r.mode + "(C" + std::to_string(r.classifier) + ":" + r.body + ")";
}

}  // namespace

F1Report macro_f1(std::span<const int> predictions, std::span<const int> gold, int label_count) {
  if (predictions.empty() || gold.empty()) throw std::invalid_argument("macro_f1 on empty input");
  if (predictions.size() != gold.size())
    throw std::invalid_argument("macro_f1: predictions and gold differ in length");
  const auto n = static_cast<size_t>(label_count);
  F1Report r;
  r.confusion.assign(n, std::vector<size_t>(n, 0));
  for (size_t i = 0; i < gold.size(); ++i) {
    if (gold[i] < 0 || gold[i] >= label_count || predictions[i] < 0 ||
        predictions[i] >= label_count)
      throw std::invalid_argument("macro_f1: label index out of range");
    ++r.confusion[static_cast<size_t>(gold[i])][static_cast<size_t>(predictions[i])];
  }
  r.per_class.resize(n);
  double sum = 0.0;
  for (size_t c = 0; c < n; ++c) {
    size_t predicted = 0;
    size_t actual = 0;
    for (size_t k = 0; k < n; ++k) {
      predicted += r.confusion[k][c];
      actual += r.confusion[c][k];
    }
    const double tp = static_cast<double>(r.confusion[c][c]);
    auto& s = r.per_class[c];
    s.support = actual;
    s.precision = safe_ratio(tp, static_cast<double>(predicted));
    s.recall = safe_ratio(tp, static_cast<double>(actual));
    s.f1 = safe_ratio(2.0 * s.precision * s.recall, s.precision + s.recall);
    sum += s.f1;
  }
  r.macro_f1 = sum / static_cast<double>(n);
  return r;
}

std::vector<EvalReport> run_experiment(const ExperimentGrid& grid, const Dataset& dataset,
                                       const FollowGraph& graph, const CellCallback& on_cell) {
  std::vector<EvalReport> reports;
  for (TrainingMode mode : grid.modes) {
    for (size_t split_size : grid.split_sizes) {
      for (double fraction : grid.unlabeled_fractions) {
        for (uint64_t seed : grid.seeds) {
          TrainingConfig cfg = grid.base;
          cfg.mode = mode;
          cfg.seed = seed;
          EvalReport proto;
          proto.mode = std::string(to_string(mode));
          proto.split_size = split_size;
          proto.unlabeled_fraction = fraction;
          proto.seed = seed;
          std::vector<EvalReport> cell;
          try {
            TrainSplit split = make_split(dataset, split_size, grid.test_size, fraction, seed);
            Trainer trainer(cfg, dataset, graph, split);
            TrainState state = trainer.init_state();
            trainer.train(state);
            std::vector<int> gold;
            for (size_t i : split.test) gold.push_back(*dataset.tweets[i].label);
            const int labels = static_cast<int>(dataset.label_set.size());
            for (int k = 1; k <= 2; ++k) {
              EvalReport r = proto;
              r.classifier = k;
              const auto& params = k == 1 ? state.first : state.second;
              r.body = std::string(to_string(params.body));
              r.scores = macro_f1(trainer.predict_labels(params, split.test), gold, labels);
              for (const auto& m : state.history)
                r.epoch_series.push_back(k == 1 ? m.macro_f1_first : m.macro_f1_second);
              cell.push_back(std::move(r));
            }
          } catch (const std::exception& e) {
            cell.clear();
            EvalReport r = proto;
            r.error = e.what();
            cell.push_back(std::move(r));
          }
          for (auto& r : cell) {
            if (on_cell) on_cell(r);
            reports.push_back(std::move(r));
          }
        }
      }
    }
  }
  return reports;
}

void write_comparison_table(std::span<const EvalReport> reports, std::ostream& out) {
  std::map<size_t, int> splits;
  std::vector<std::tuple<std::string, double>> rows;
  std::map<std::tuple<std::string, double, size_t>, std::pair<double, int>> cells;
  for (const auto& r : reports) {
    if (!r.error.empty()) continue;
    splits[r.split_size] = 1;
    auto key = std::make_tuple(row_name(r), r.unlabeled_fraction);
    if (std::find(rows.begin(), rows.end(), key) == rows.end()) rows.push_back(key);
    auto& cell = cells[{row_name(r), r.unlabeled_fraction, r.split_size}];
    cell.first += r.scores.macro_f1;
    cell.second += 1;
  }
  out << "model,unlabeled_fraction";
  for (const auto& [split, _] : splits) out << ",train_" << split;
  out << '\n';
  for (const auto& [name, fraction] : rows) {
    out << name << ',' << fraction;
    for (const auto& [split, _] : splits) {
      auto it = cells.find({name, fraction, split});
      out << ',';
      if (it != cells.end()) out << fmt(it->second.first / it->second.second);
    }
    out << '\n';
  }
}

void write_class_table(std::span<const EvalReport> reports,
                       const std::vector<std::string>& label_set, std::ostream& out) {
  using Key = std::tuple<std::string, size_t, double>;
  std::vector<Key> order;
  std::map<Key, std::pair<std::vector<double>, int>> sums;
  for (const auto& r : reports) {
    if (!r.error.empty()) continue;
    Key key{row_name(r), r.split_size, r.unlabeled_fraction};
    auto& cell = sums[key];
    if (cell.second == 0) {
      order.push_back(key);
      cell.first.assign(label_set.size(), 0.0);
    }
    for (size_t c = 0; c < label_set.size() && c < r.scores.per_class.size(); ++c)
      cell.first[c] += r.scores.per_class[c].f1;
    cell.second += 1;
  }
  out << "model,split_size,unlabeled_fraction";
  for (const auto& l : label_set) out << ',' << l;
  out << '\n';
  for (const auto& key : order) {
    const auto& [values, count] = sums[key];
    out << std::get<0>(key) << ',' << std::get<1>(key) << ',' << std::get<2>(key);
    for (double v : values) out << ',' << fmt(v / count);
    out << '\n';
  }
}

void write_convergence(std::span<const EvalReport> reports, std::ostream& out) {
  out << "mode,classifier,body,split_size,unlabeled_fraction,seed,epoch,macro_f1\n";
  for (const auto& r : reports) {
    for (size_t e = 0; e < r.epoch_series.size(); ++e)
      out << r.mode << ",C" << r.classifier << ',' << r.body << ',' << r.split_size << ','
          << r.unlabeled_fraction << ',' << r.seed << ',' << e + 1 << ','
          << fmt(r.epoch_series[e]) << '\n';
  }
}

void write_reports(std::span<const EvalReport> reports, const std::vector<std::string>& label_set,
                   std::ostream& out) {
  out << "mode,classifier,body,split_size,unlabeled_fraction,seed,macro_f1";
  for (const auto& l : label_set) out << ",f1_" << l;
  out << ",error\n";
  for (const auto& r : reports) {
    out << r.mode << ",C" << r.classifier << ',' << r.body << ',' << r.split_size << ','
        << r.unlabeled_fraction << ',' << r.seed << ',';
    if (r.error.empty()) out << fmt(r.scores.macro_f1);
    for (size_t c = 0; c < label_set.size(); ++c) {
      out << ',';
      if (r.error.empty() && c < r.scores.per_class.size()) out << fmt(r.scores.per_class[c].f1);
    }
    out << ',' << csv_cell(r.error) << '\n';
  }
}

}  // namespace sands

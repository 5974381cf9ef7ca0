#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "sands/cli.hpp"
#include "sands/common.hpp"
#include "sands/config.hpp"
#include "sands/corpus.hpp"
#include "sands/eval.hpp"
#include "sands/models.hpp"
#include "sands/synthgen.hpp"
#include "sands/training.hpp"

namespace py = pybind11;

namespace {

sands::ExperimentConfig config_from(const std::string& text) {
  std::istringstream in(text);
  return sands::parse_config(in);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Semi-supervised stance detection core";

  m.def(
      "clean_tweet",
      [](const std::string& text) {
        const auto c = sands::clean_tweet({"", "", 0, text});
        return py::make_tuple(c.tokens, c.hashtags);
      },
      py::arg("text"), "Returns (tokens, hashtags) after cleaning.");

  m.def("supervised_class_weight", &sands::supervised_class_weight, py::arg("labeled_size"),
        py::arg("same_label_count"), py::arg("epsilon") = 1e-8, py::arg("clamp") = false);
  m.def("unsupervised_batch_weight", &sands::unsupervised_batch_weight, py::arg("batch_size"),
        py::arg("label_frequency"), py::arg("epsilon") = 1e-8);
  m.def(
      "majority_vote",
      [](const std::vector<sands::RowVector>& predictions, int label_count) {
        return sands::majority_vote(predictions, label_count);
      },
      py::arg("predictions"), py::arg("label_count"));

  m.def(
      "macro_f1",
      [](const std::vector<int>& predictions, const std::vector<int>& gold, int label_count) {
        const auto r = sands::macro_f1(predictions, gold, label_count);
        std::vector<double> f1;
        for (const auto& c : r.per_class) f1.push_back(c.f1);
        py::dict d;
        d["macro_f1"] = r.macro_f1;
        d["per_class_f1"] = f1;
        d["confusion"] = r.confusion;
        return d;
      },
      py::arg("predictions"), py::arg("gold"), py::arg("label_count"));

  py::class_<sands::ClassifierParams>(m, "ClassifierParams")
      .def_property_readonly("body",
                             [](const sands::ClassifierParams& p) { return std::string(sands::to_string(p.body)); })
      .def_property_readonly("parameter_count", &sands::ClassifierParams::parameter_count);

  m.def(
      "init_classifier",
      [](const std::string& body, int word_table, int hashtag_table, int label_count, uint64_t seed,
         int word_dim, int hashtag_dim, int attention_dim, std::vector<int> conv_filters,
         int lstm_hidden) {
        sands::ModelDims d;
        d.word_table = word_table;
        d.hashtag_table = hashtag_table;
        d.label_count = label_count;
        d.word_dim = word_dim;
        d.hashtag_dim = hashtag_dim;
        d.attention_dim = attention_dim;
        d.conv_filters = std::move(conv_filters);
        d.lstm_hidden = lstm_hidden;
        return sands::init_params(sands::parse_body_kind(body), d, seed);
      },
      py::arg("body"), py::arg("word_table"), py::arg("hashtag_table"), py::arg("label_count"),
      py::arg("seed") = 1, py::arg("word_dim") = 200, py::arg("hashtag_dim") = 128,
      py::arg("attention_dim") = 128, py::arg("conv_filters") = std::vector<int>{128, 64, 32},
      py::arg("lstm_hidden") = 100);

  m.def(
      "classify",
      [](const sands::ClassifierParams& params, const std::vector<int>& token_ids,
         const std::vector<int>& hashtag_ids) {
        sands::EncodedTweet t;
        t.token_ids = token_ids;
        t.hashtag_ids = hashtag_ids;
        for (int id : token_ids)
          if (id < 0 || id >= params.dims.word_table) throw py::value_error("token id out of range");
        for (int id : hashtag_ids)
          if (id < 0 || id >= params.dims.hashtag_table) throw py::value_error("hashtag id out of range");
        return sands::RowVector(sands::forward(params, t, {}));
      },
      py::arg("params"), py::arg("token_ids"), py::arg("hashtag_ids"),
      "Inference-mode stance distribution.");

  m.def(
      "config_hash", [](const std::string& text) { return sands::config_hash(config_from(text)); },
      py::arg("config_text"));
  m.def(
      "canonical_config", [](const std::string& text) { return sands::serialize(config_from(text)); },
      py::arg("config_text"));

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = sands::run_cli(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs a sands command; returns (exit_code, stdout, stderr).");

  py::register_exception<sands::UsageError>(m, "UsageError", PyExc_ValueError);
  py::register_exception<sands::DataError>(m, "DataError", PyExc_RuntimeError);
}

#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "sands/corpus.hpp"
#include "sands/models.hpp"
#include "sands/socialgraph.hpp"
#include "sands/synthgen.hpp"
#include "sands/training.hpp"

namespace sands::testing {

inline RawTweet raw(std::string id, std::string user, int64_t ts, std::string text) {
  return {std::move(id), std::move(user), ts, std::move(text)};
}

// Tiny dimensions used by the oracle and gradient tests.
inline ModelDims tiny_dims(int word_table = 7, int hashtag_table = 5) {
  ModelDims d;
  d.word_table = word_table;
  d.hashtag_table = hashtag_table;
  d.word_dim = 3;
  d.hashtag_dim = 3;
  d.attention_dim = 3;
  d.conv_windows = {1, 3};
  d.conv_filters = {2, 2, 2};
  d.lstm_hidden = 2;
  d.label_count = 3;
  return d;
}

inline EncodedTweet encoded(std::vector<int> tokens, std::vector<int> hashtags,
                            std::optional<int> label = std::nullopt) {
  EncodedTweet t;
  t.tweet_id = "t";
  t.user_id = "u";
  t.token_ids = std::move(tokens);
  t.hashtag_ids = std::move(hashtags);
  t.label = label;
  return t;
}

// Randomizes every tensor, including biases that init leaves at zero, so
// oracles exercise all terms.
inline void randomize(ClassifierParams& p, uint64_t seed, double scale = 0.5) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  p.visit([&](const std::string& name, Matrix& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
    if (name == "word_embedding" || name == "hashtag_embedding") m.row(0).setZero();
    if (name == "norm_gain") m.array() += 1.0;
  });
}

// Small generated corpus with every tweet labeled.
struct Fixture {
  Dataset dataset;
  FollowGraph graph;
};

inline SynthConfig small_synth(int users = 120, int tweets = 1000, uint64_t seed = 3) {
  SynthConfig c;
  c.user_count = users;
  c.tweet_count = tweets;
  c.label_count = 3;
  c.mean_out_degree = 12;
  c.vocab_size = 300;
  c.hashtag_vocab_size = 40;
  c.topic_words_per_class = 30;
  c.topic_hashtags_per_class = 5;
  c.seed = seed;
  return c;
}

inline Fixture make_fixture(const SynthConfig& config) {
  const SynthData data = generate(config);
  std::vector<std::pair<std::string, std::string>> labels;
  for (size_t i = 0; i < data.tweets.size(); ++i)
    labels.emplace_back(data.tweets[i].tweet_id, data.label_names[static_cast<size_t>(data.labels[i])]);
  std::vector<std::pair<std::string, std::string>> edges;
  for (const auto& [a, b] : data.edges) edges.emplace_back(data.users[static_cast<size_t>(a)], data.users[static_cast<size_t>(b)]);
  return {make_dataset(data.tweets, labels, data.label_names), FollowGraph::from_edges(edges)};
}

inline TrainingConfig small_training(TrainingMode mode = TrainingMode::kSands) {
  TrainingConfig c;
  c.mode = mode;
  c.dims.word_dim = 8;
  c.dims.hashtag_dim = 4;
  c.dims.attention_dim = 4;
  c.dims.conv_filters = {6, 4, 4};
  c.dims.lstm_hidden = 4;
  c.supervised_batch = 16;
  c.semi_max_batch = 64;
  c.adam.learning_rate = 1e-3;
  c.min_degree = 5;
  c.epochs = 3;
  return c;
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("sands_test_" + tag + "_" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace sands::testing

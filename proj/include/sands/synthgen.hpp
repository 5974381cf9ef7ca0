#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sands/corpus.hpp"

namespace sands {

struct SynthConfig {
  int user_count = 2000;
  int label_count = 5;
  std::vector<double> class_prior;  // empty means uniform
  double homophily = 0.8;           // P(a follow edge targets a same-stance user)
  double mean_out_degree = 25.0;
  // Pareto density exponents: p(x) ~ x^-exponent.
  double degree_exponent = 3.5;      // out-degrees
  double popularity_exponent = 2.0;  // followee attractiveness
  int tweet_count = 30000;
  double activity_exponent = 2.3;    // tweets per user
  int vocab_size = 2000;
  int hashtag_vocab_size = 200;
  int topic_words_per_class = 150;
  int topic_hashtags_per_class = 15;
  double topic_overlap = 0.8;    // P(a token comes from the shared background)
  double noise_rate = 0.1;       // P(a tweet's tokens come from a random class)
  double switch_rate = 0.08;     // P(a tweet's label differs from its author's stance)
  int min_tokens = 6;
  int max_tokens = 18;
  int max_hashtags = 3;
  int64_t time_horizon = 1000000;
  uint64_t seed = 1;

  bool operator==(const SynthConfig&) const = default;
};

std::vector<std::string> synth_label_names(int label_count);

struct SynthData {
  std::vector<std::string> users;
  std::vector<int> stance;  // base stance per user
  std::vector<std::pair<int, int>> edges;  // follower -> followee
  std::vector<RawTweet> tweets;            // in generation order
  std::vector<int> labels;                 // per tweet
  std::vector<std::string> label_names;
};

// Throws UsageError for invalid settings, including a mean out-degree that
// is not below the user count.
void validate(const SynthConfig& config);

// Deterministic in config.seed.
SynthData generate(const SynthConfig& config);

struct SynthPaths {
  std::string tweets;
  std::string labels;
  std::string edges;
};

// Writes tweets.tsv, labels.tsv (ground truth for every tweet) and
// edges.txt into `dir`. `header` lines are emitted as '#' comments.
SynthPaths write_synth(const SynthData& data, const std::string& dir,
                       const std::vector<std::string>& header = {});

}  // namespace sands

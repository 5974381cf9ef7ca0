#include "sands/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <unordered_set>

#include "sands/common.hpp"

namespace sands {
namespace {

enum Stream : uint64_t {
  kStance = 1,
  kDegree,
  kPopularity,
  kEdges,
  kActivity,
  kTweets,
};

std::string letters(int index) {
  std::string s;
  do {
    s.push_back(static_cast<char>('a' + index % 26));
    index /= 26;
  } while (index > 0);
  return s;
}

std::string word_form(int index) { return "w" + letters(index); }
std::string hashtag_form(int index) { return "ht" + letters(index); }

// Pareto draw with minimum `x_min` and density tail exponent `alpha` > 1.
double pareto(std::mt19937_64& rng, double x_min, double alpha) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double v = 1.0 - u(rng);  // (0, 1]
  return x_min * std::pow(v, -1.0 / (alpha - 1.0));
}

std::vector<double> zipf_weights(int n) {
  std::vector<double> w(static_cast<size_t>(n));
  for (int r = 0; r < n; ++r) w[static_cast<size_t>(r)] = 1.0 / (r + 1.0);
  return w;
}

// Draws `count` distinct members of `pool` (excluding `self`) with
// probability proportional to `weights`. Takes the whole pool when it is
// too small.
std::vector<int> sample_distinct(const std::vector<int>& pool, std::discrete_distribution<int>& pick,
                                 int self, int count, std::mt19937_64& rng) {
  std::vector<int> out;
  const int available =
      static_cast<int>(pool.size()) -
      static_cast<int>(std::find(pool.begin(), pool.end(), self) != pool.end());
  if (count >= available) {
    for (int v : pool)
      if (v != self) out.push_back(v);
    return out;
  }
  std::unordered_set<int> chosen;
  long attempts = 0;
  const long budget = 64L * count + 1024;
  while (static_cast<int>(out.size()) < count && attempts++ < budget) {
    const int v = pool[static_cast<size_t>(pick(rng))];
    if (v != self && chosen.insert(v).second) out.push_back(v);
  }
  // Heavy-tailed weights can starve the rejection loop; finish in pool order.
  for (size_t i = 0; static_cast<int>(out.size()) < count && i < pool.size(); ++i) {
    const int v = pool[i];
    if (v != self && chosen.insert(v).second) out.push_back(v);
  }
  return out;
}

}  // namespace

std::vector<std::string> synth_label_names(int label_count) {
  std::vector<std::string> names;
  for (int c = 0; c < label_count; ++c) names.push_back("stance" + std::to_string(c));
  return names;
}

void validate(const SynthConfig& c) {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw UsageError("synth config: " + what);
  };
  require(c.user_count >= 2, "user_count must be at least 2");
  require(c.label_count >= 2, "label_count must be at least 2");
  require(c.class_prior.empty() || static_cast<int>(c.class_prior.size()) == c.label_count,
          "class_prior needs label_count entries");
  for (double p : c.class_prior) require(p >= 0.0, "class_prior entries must be non-negative");
  require(c.homophily >= 0.0 && c.homophily <= 1.0, "homophily must be in [0, 1]");
  require(c.noise_rate >= 0.0 && c.noise_rate <= 1.0, "noise_rate must be in [0, 1]");
  require(c.switch_rate >= 0.0 && c.switch_rate <= 1.0, "switch_rate must be in [0, 1]");
  require(c.topic_overlap >= 0.0 && c.topic_overlap <= 1.0, "topic_overlap must be in [0, 1]");
  require(c.mean_out_degree > 0.0, "mean_out_degree must be positive");
  require(c.mean_out_degree < c.user_count, "mean_out_degree must be below user_count");
  require(c.degree_exponent > 2.0, "degree_exponent must exceed 2");
  require(c.popularity_exponent > 1.0, "popularity_exponent must exceed 1");
  require(c.activity_exponent > 1.0, "activity_exponent must exceed 1");
  require(c.tweet_count >= c.user_count, "tweet_count must be at least user_count");
  require(c.vocab_size >= c.label_count * c.topic_words_per_class,
          "vocab_size too small for the topic words");
  require(c.hashtag_vocab_size >= c.label_count * c.topic_hashtags_per_class,
          "hashtag_vocab_size too small for the topic hashtags");
  require(c.topic_words_per_class > 0 && c.topic_hashtags_per_class > 0,
          "topic sets must be non-empty");
  require(c.min_tokens >= 1 && c.max_tokens >= c.min_tokens, "bad token length range");
  require(c.max_hashtags >= 0, "max_hashtags must be non-negative");
  require(c.time_horizon > 0, "time_horizon must be positive");
}

SynthData generate(const SynthConfig& c) {
  validate(c);
  SynthData d;
  d.label_names = synth_label_names(c.label_count);
  const int n = c.user_count;
  for (int u = 0; u < n; ++u) {
    std::string id = std::to_string(u);
    d.users.push_back("u" + std::string(5 - std::min<size_t>(5, id.size()), '0') + id);
  }

  // Base stances.
  std::vector<double> prior = c.class_prior;
  if (prior.empty()) prior.assign(static_cast<size_t>(c.label_count), 1.0);
  std::mt19937_64 stance_rng(derive_seed({c.seed, kStance}));
  std::discrete_distribution<int> stance_dist(prior.begin(), prior.end());
  for (int u = 0; u < n; ++u) d.stance.push_back(stance_dist(stance_rng));

  // Follow edges: per-user Pareto out-degree, homophilous target choice
  // weighted by a heavy-tailed popularity.
  std::mt19937_64 degree_rng(derive_seed({c.seed, kDegree}));
  const double alpha = c.degree_exponent;
  const double d_min = c.mean_out_degree * (alpha - 2.0) / (alpha - 1.0);
  const int d_cap = std::max(1, std::min(n - 1, static_cast<int>(20 * c.mean_out_degree)));
  std::vector<int> degree(static_cast<size_t>(n));
  for (auto& k : degree)
    k = std::clamp(static_cast<int>(std::lround(pareto(degree_rng, d_min, alpha))), 1, d_cap);

  std::mt19937_64 pop_rng(derive_seed({c.seed, kPopularity}));
  std::vector<double> popularity(static_cast<size_t>(n));
  for (auto& w : popularity) w = pareto(pop_rng, 1.0, c.popularity_exponent);

  std::vector<std::vector<int>> same_pool(static_cast<size_t>(c.label_count));
  std::vector<std::vector<int>> other_pool(static_cast<size_t>(c.label_count));
  for (int u = 0; u < n; ++u)
    for (int s = 0; s < c.label_count; ++s)
      (s == d.stance[static_cast<size_t>(u)] ? same_pool : other_pool)[static_cast<size_t>(s)]
          .push_back(u);
  auto make_picker = [&](const std::vector<int>& pool) {
    std::vector<double> w;
    for (int v : pool) w.push_back(popularity[static_cast<size_t>(v)]);
    if (w.empty()) w.push_back(1.0);
    return std::discrete_distribution<int>(w.begin(), w.end());
  };
  std::vector<std::discrete_distribution<int>> same_pick, other_pick;
  for (int s = 0; s < c.label_count; ++s) {
    same_pick.push_back(make_picker(same_pool[static_cast<size_t>(s)]));
    other_pick.push_back(make_picker(other_pool[static_cast<size_t>(s)]));
  }

  std::mt19937_64 edge_rng(derive_seed({c.seed, kEdges}));
  for (int u = 0; u < n; ++u) {
    const auto s = static_cast<size_t>(d.stance[static_cast<size_t>(u)]);
    std::binomial_distribution<int> same_count(degree[static_cast<size_t>(u)], c.homophily);
    const int k_same = same_count(edge_rng);
    const int k_other = degree[static_cast<size_t>(u)] - k_same;
    for (int v : sample_distinct(same_pool[s], same_pick[s], u, k_same, edge_rng))
      d.edges.emplace_back(u, v);
    for (int v : sample_distinct(other_pool[s], other_pick[s], u, k_other, edge_rng))
      d.edges.emplace_back(u, v);
  }

  // Tweets per user: one each, the rest by heavy-tailed activity.
  std::mt19937_64 act_rng(derive_seed({c.seed, kActivity}));
  std::vector<double> activity(static_cast<size_t>(n));
  for (auto& w : activity) w = pareto(act_rng, 1.0, c.activity_exponent);
  std::vector<int> per_user(static_cast<size_t>(n), 1);
  std::discrete_distribution<int> author_dist(activity.begin(), activity.end());
  for (int t = n; t < c.tweet_count; ++t) ++per_user[static_cast<size_t>(author_dist(act_rng))];

  // Token model: class topic words live at the tail of the vocabulary.
  const int topic_base = c.vocab_size - c.label_count * c.topic_words_per_class;
  const int tag_base = c.hashtag_vocab_size - c.label_count * c.topic_hashtags_per_class;
  auto bg_w = zipf_weights(c.vocab_size);
  auto bg_h = zipf_weights(c.hashtag_vocab_size);
  auto topic_w = zipf_weights(c.topic_words_per_class);
  auto topic_h = zipf_weights(c.topic_hashtags_per_class);
  std::discrete_distribution<int> background_word(bg_w.begin(), bg_w.end());
  std::discrete_distribution<int> background_tag(bg_h.begin(), bg_h.end());
  std::discrete_distribution<int> topic_word(topic_w.begin(), topic_w.end());
  std::discrete_distribution<int> topic_tag(topic_h.begin(), topic_h.end());

  std::mt19937_64 rng(derive_seed({c.seed, kTweets}));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int64_t> when(0, c.time_horizon);
  std::uniform_int_distribution<int> length(c.min_tokens, c.max_tokens);
  std::uniform_int_distribution<int> tag_count(0, c.max_hashtags);
  std::uniform_int_distribution<int> any_class(0, c.label_count - 1);
  std::uniform_int_distribution<int> other_class(0, c.label_count - 2);
  std::uniform_int_distribution<int> any_user(0, n - 1);

  int next_id = 0;
  for (int u = 0; u < n; ++u) {
    for (int k = 0; k < per_user[static_cast<size_t>(u)]; ++k) {
      int label = d.stance[static_cast<size_t>(u)];
      if (unit(rng) < c.switch_rate) {
        const int o = other_class(rng);
        label = o >= label ? o + 1 : o;
      }
      const int source = unit(rng) < c.noise_rate ? any_class(rng) : label;

      std::vector<std::string> parts;
      const int len = length(rng);
      for (int i = 0; i < len; ++i) {
        const int w = unit(rng) < c.topic_overlap
                          ? background_word(rng)
                          : topic_base + source * c.topic_words_per_class + topic_word(rng);
        parts.push_back(word_form(w));
      }
      const int tags = tag_count(rng);
      for (int i = 0; i < tags; ++i) {
        const int h = unit(rng) < c.topic_overlap
                          ? background_tag(rng)
                          : tag_base + source * c.topic_hashtags_per_class + topic_tag(rng);
        const auto pos = static_cast<size_t>(std::uniform_int_distribution<size_t>(0, parts.size())(rng));
        std::string tag = "#" + hashtag_form(h);
        if (unit(rng) < 0.3) tag[1] = static_cast<char>(std::toupper(tag[1]));
        parts.insert(parts.begin() + static_cast<long>(pos), tag);
      }
      // Surface noise that the cleaning pipeline strips.
      if (unit(rng) < 0.2) parts.insert(parts.begin(), "@" + d.users[static_cast<size_t>(any_user(rng))]);
      if (unit(rng) < 0.15) parts.push_back("https://t.co/" + letters(next_id));
      if (unit(rng) < 0.2) parts.back() += "!!";
      if (unit(rng) < 0.1) parts.push_back(std::to_string(2000 + any_class(rng)));
      if (unit(rng) < 0.2) parts.front()[0] = static_cast<char>(std::toupper(parts.front()[0]));

      std::string text;
      for (const auto& p : parts) {
        if (!text.empty()) text.push_back(' ');
        text += p;
      }
      RawTweet t;
      std::string id = std::to_string(next_id++);
      t.tweet_id = "t" + std::string(7 - std::min<size_t>(7, id.size()), '0') + id;
      t.user_id = d.users[static_cast<size_t>(u)];
      t.timestamp = when(rng);
      t.text = std::move(text);
      d.tweets.push_back(std::move(t));
      d.labels.push_back(label);
    }
  }
  return d;
}

SynthPaths write_synth(const SynthData& data, const std::string& dir,
                       const std::vector<std::string>& header) {
  std::filesystem::create_directories(dir);
  SynthPaths paths{dir + "/tweets.tsv", dir + "/labels.tsv", dir + "/edges.txt"};
  auto open = [&](const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path + "'");
    for (const auto& h : header) out << "# " << h << '\n';
    return out;
  };
  {
    auto out = open(paths.tweets);
    for (const auto& t : data.tweets) write_tweet_line(out, t);
  }
  {
    auto out = open(paths.labels);
    for (size_t i = 0; i < data.tweets.size(); ++i)
      out << data.tweets[i].tweet_id << '\t'
          << data.label_names[static_cast<size_t>(data.labels[i])] << '\n';
  }
  {
    auto out = open(paths.edges);
    for (const auto& [u, v] : data.edges)
      out << data.users[static_cast<size_t>(u)] << ' ' << data.users[static_cast<size_t>(v)]
          << '\n';
  }
  return paths;
}

}  // namespace sands

#include "sands/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <istream>
#include <sstream>

#include "sands/common.hpp"

namespace sands {
namespace {

std::string trim(const std::string& s) {
  size_t b = 0;
  size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& what,
                            const std::string& value) {
  throw UsageError("config field '" + key + "': expected " + what + ", got '" + value + "'");
}

// Text codecs. Doubles use the shortest representation that round-trips.
template <typename T>
struct Codec;

template <>
struct Codec<std::string> {
  static std::string format(const std::string& v) { return v; }
  static std::string parse(const std::string&, const std::string& s) { return s; }
};

template <>
struct Codec<bool> {
  static std::string format(bool v) { return v ? "true" : "false"; }
  static bool parse(const std::string& key, const std::string& s) {
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    bad_value(key, "true or false", s);
  }
};

template <typename T>
  requires std::is_integral_v<T>
struct Codec<T> {
  static std::string format(T v) { return std::to_string(v); }
  static T parse(const std::string& key, const std::string& s) {
    T v{};
    auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || end != s.data() + s.size() || s.empty())
      bad_value(key, std::is_signed_v<T> ? "an integer" : "a non-negative integer", s);
    return v;
  }
};

template <>
struct Codec<double> {
  static std::string format(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
  }
  static double parse(const std::string& key, const std::string& s) {
    double v = 0.0;
    const char* first = s.data();
    if (!s.empty() && s[0] == '+') ++first;
    auto [end, ec] = std::from_chars(first, s.data() + s.size(), v);
    if (ec != std::errc() || end != s.data() + s.size() || s.empty())
      bad_value(key, "a number", s);
    return v;
  }
};

template <>
struct Codec<TrainingMode> {
  static std::string format(TrainingMode v) { return std::string(to_string(v)); }
  static TrainingMode parse(const std::string& key, const std::string& s) {
    try {
      return parse_training_mode(s);
    } catch (const UsageError&) {
      bad_value(key, "sands|sands_net|sands_cont|supervised|self_training", s);
    }
  }
};

template <>
struct Codec<BodyKind> {
  static std::string format(BodyKind v) { return std::string(to_string(v)); }
  static BodyKind parse(const std::string& key, const std::string& s) {
    try {
      return parse_body_kind(s);
    } catch (const UsageError&) {
      bad_value(key, "conv|blstm", s);
    }
  }
};

template <typename T>
struct Codec<std::vector<T>> {
  static std::string format(const std::vector<T>& v) {
    std::string out;
    for (size_t i = 0; i < v.size(); ++i) {
      if (i) out += ", ";
      out += Codec<T>::format(v[i]);
    }
    return out;
  }
  static std::vector<T> parse(const std::string& key, const std::string& s) {
    std::vector<T> out;
    if (trim(s).empty()) return out;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) out.push_back(Codec<T>::parse(key, trim(item)));
    return out;
  }
};

struct Field {
  std::string section;
  std::string key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

template <typename Access>
Field field(std::string section, std::string key, Access access) {
  Field f;
  f.section = std::move(section);
  f.key = key;
  f.get = [access](const ExperimentConfig& c) {
    using T = std::decay_t<decltype(access(c))>;
    return Codec<T>::format(access(c));
  };
  f.set = [access, key](ExperimentConfig& c, const std::string& text) {
    using T = std::decay_t<decltype(access(c))>;
    access(c) = Codec<T>::parse(key, text);
  };
  return f;
}

#define SANDS_FIELD(section, name, expr) \
  field(section, name, [](auto& c) -> auto& { return expr; })

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      SANDS_FIELD("experiment", "mode", c.mode),
      SANDS_FIELD("experiment", "compare_modes", c.compare_modes),
      SANDS_FIELD("experiment", "first_body", c.first_body),
      SANDS_FIELD("experiment", "second_body", c.second_body),
      SANDS_FIELD("experiment", "label_set", c.label_set),
      SANDS_FIELD("experiment", "split_sizes", c.split_sizes),
      SANDS_FIELD("experiment", "test_size", c.test_size),
      SANDS_FIELD("experiment", "unlabeled_fractions", c.unlabeled_fractions),
      SANDS_FIELD("experiment", "seeds", c.seeds),
      SANDS_FIELD("experiment", "epochs", c.epochs),
      SANDS_FIELD("experiment", "checkpoint_every", c.checkpoint_every),

      SANDS_FIELD("model", "word_dim", c.word_dim),
      SANDS_FIELD("model", "hashtag_dim", c.hashtag_dim),
      SANDS_FIELD("model", "attention_dim", c.attention_dim),
      SANDS_FIELD("model", "conv_windows", c.conv_windows),
      SANDS_FIELD("model", "conv_filters", c.conv_filters),
      SANDS_FIELD("model", "lstm_hidden", c.lstm_hidden),
      SANDS_FIELD("model", "scale_attention", c.scale_attention),

      SANDS_FIELD("training", "supervised_batch", c.supervised_batch),
      SANDS_FIELD("training", "semi_max_batch", c.semi_max_batch),
      SANDS_FIELD("training", "supervised_dropout", c.supervised_dropout),
      SANDS_FIELD("training", "semi_dropout", c.semi_dropout),
      SANDS_FIELD("training", "learning_rate", c.learning_rate),
      SANDS_FIELD("training", "adam_beta1", c.adam_beta1),
      SANDS_FIELD("training", "adam_beta2", c.adam_beta2),
      SANDS_FIELD("training", "adam_epsilon", c.adam_epsilon),
      SANDS_FIELD("training", "min_degree", c.min_degree),
      SANDS_FIELD("training", "weight_epsilon", c.weight_epsilon),
      SANDS_FIELD("training", "clamp_supervised_weight", c.clamp_supervised_weight),
      SANDS_FIELD("training", "self_training_k", c.self_training_k),

      SANDS_FIELD("data", "tweets_path", c.tweets_path),
      SANDS_FIELD("data", "labels_path", c.labels_path),
      SANDS_FIELD("data", "edges_path", c.edges_path),
      SANDS_FIELD("data", "embeddings_path", c.embeddings_path),
      SANDS_FIELD("data", "vocab_path", c.vocab_path),
      SANDS_FIELD("data", "output_dir", c.output_dir),

      SANDS_FIELD("synth", "synth_users", c.synth.user_count),
      SANDS_FIELD("synth", "synth_labels", c.synth.label_count),
      SANDS_FIELD("synth", "synth_prior", c.synth.class_prior),
      SANDS_FIELD("synth", "synth_homophily", c.synth.homophily),
      SANDS_FIELD("synth", "synth_mean_out_degree", c.synth.mean_out_degree),
      SANDS_FIELD("synth", "synth_degree_exponent", c.synth.degree_exponent),
      SANDS_FIELD("synth", "synth_popularity_exponent", c.synth.popularity_exponent),
      SANDS_FIELD("synth", "synth_tweets", c.synth.tweet_count),
      SANDS_FIELD("synth", "synth_activity_exponent", c.synth.activity_exponent),
      SANDS_FIELD("synth", "synth_vocab", c.synth.vocab_size),
      SANDS_FIELD("synth", "synth_hashtag_vocab", c.synth.hashtag_vocab_size),
      SANDS_FIELD("synth", "synth_topic_words", c.synth.topic_words_per_class),
      SANDS_FIELD("synth", "synth_topic_hashtags", c.synth.topic_hashtags_per_class),
      SANDS_FIELD("synth", "synth_topic_overlap", c.synth.topic_overlap),
      SANDS_FIELD("synth", "synth_noise", c.synth.noise_rate),
      SANDS_FIELD("synth", "synth_switch", c.synth.switch_rate),
      SANDS_FIELD("synth", "synth_min_tokens", c.synth.min_tokens),
      SANDS_FIELD("synth", "synth_max_tokens", c.synth.max_tokens),
      SANDS_FIELD("synth", "synth_max_hashtags", c.synth.max_hashtags),
      SANDS_FIELD("synth", "synth_time_horizon", c.synth.time_horizon),
      SANDS_FIELD("synth", "synth_seed", c.synth.seed),
      SANDS_FIELD("synth", "synth_dir", c.synth_dir),
  };
  return table;
}

#undef SANDS_FIELD

const Field* find_field(const std::string& key) {
  for (const auto& f : fields())
    if (f.key == key) return &f;
  return nullptr;
}

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw UsageError("config field '" + key + "' " + what);
}

}  // namespace

void set_field(ExperimentConfig& config, const std::string& key, const std::string& value) {
  const Field* f = find_field(key);
  if (!f) throw UsageError("unknown config field '" + key + "'");
  f->set(config, trim(value));
}

ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig config;
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    const std::string where = "config line " + std::to_string(line_no) + ": ";
    if (t.front() == '[') {
      if (t.back() != ']') throw UsageError(where + "unterminated section header");
      section = trim(t.substr(1, t.size() - 2));
      const bool known = std::any_of(fields().begin(), fields().end(),
                                     [&](const Field& f) { return f.section == section; });
      if (!known) throw UsageError(where + "unknown section [" + section + "]");
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw UsageError(where + "expected 'key = value'");
    const std::string key = trim(t.substr(0, eq));
    const Field* f = find_field(key);
    if (!f) throw UsageError(where + "unknown config field '" + key + "'");
    if (f->section != section)
      throw UsageError(where + "config field '" + key + "' belongs to section [" + f->section +
                       "]");
    f->set(config, trim(t.substr(eq + 1)));
  }
  return config;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config '" + path + "'");
  return parse_config(in);
}

void apply_environment(ExperimentConfig& config) {
  for (const auto& f : fields()) {
    std::string name = "SANDS_";
    for (char ch : f.key) name.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(ch))));
    if (const char* v = std::getenv(name.c_str())) f.set(config, trim(v));
  }
}

void validate(const ExperimentConfig& c) {
  require(c.label_set.empty() || c.label_set.size() >= 2, "label_set", "needs at least two labels");
  for (const auto& l : c.label_set)
    require(!l.empty() && l.find_first_of(" \t,") == std::string::npos, "label_set",
            "entries must be non-empty without spaces or commas");
  {
    auto sorted = c.label_set;
    std::sort(sorted.begin(), sorted.end());
    require(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(), "label_set",
            "has duplicate entries");
  }
  require(!c.split_sizes.empty(), "split_sizes", "must list at least one size");
  for (size_t s : c.split_sizes) require(s > 0, "split_sizes", "entries must be positive");
  require(c.test_size > 0, "test_size", "must be positive");
  require(!c.unlabeled_fractions.empty(), "unlabeled_fractions", "must list at least one value");
  for (double f : c.unlabeled_fractions)
    require(f >= 0.0 && f <= 1.0, "unlabeled_fractions", "entries must be in [0, 1]");
  require(!c.seeds.empty(), "seeds", "must list at least one seed");
  require(c.epochs > 0, "epochs", "must be positive");
  require(c.checkpoint_every >= 0, "checkpoint_every", "must be non-negative");

  require(c.word_dim > 0, "word_dim", "must be positive");
  require(c.hashtag_dim > 0, "hashtag_dim", "must be positive");
  require(c.attention_dim > 0, "attention_dim", "must be positive");
  require(!c.conv_windows.empty(), "conv_windows", "must list at least one window");
  for (int w : c.conv_windows)
    require(w > 0 && w % 2 == 1, "conv_windows", "entries must be positive and odd");
  require(c.conv_filters.size() == 3, "conv_filters", "must list three block widths");
  for (int f : c.conv_filters) require(f > 0, "conv_filters", "entries must be positive");
  require(c.lstm_hidden > 0, "lstm_hidden", "must be positive");

  require(c.supervised_batch > 0, "supervised_batch", "must be positive");
  require(c.semi_max_batch > 0, "semi_max_batch", "must be positive");
  require(c.supervised_dropout >= 0.0 && c.supervised_dropout < 1.0, "supervised_dropout",
          "must be in [0, 1)");
  require(c.semi_dropout >= 0.0 && c.semi_dropout < 1.0, "semi_dropout", "must be in [0, 1)");
  require(c.learning_rate > 0.0, "learning_rate", "must be positive");
  require(c.adam_beta1 >= 0.0 && c.adam_beta1 < 1.0, "adam_beta1", "must be in [0, 1)");
  require(c.adam_beta2 >= 0.0 && c.adam_beta2 < 1.0, "adam_beta2", "must be in [0, 1)");
  require(c.adam_epsilon > 0.0, "adam_epsilon", "must be positive");
  require(c.min_degree >= 0, "min_degree", "must be non-negative");
  require(c.weight_epsilon > 0.0, "weight_epsilon", "must be positive");
  require(c.self_training_k > 0, "self_training_k", "must be positive");
  require(!c.output_dir.empty(), "output_dir", "must not be empty");
  require(!c.synth_dir.empty(), "synth_dir", "must not be empty");
  try {
    validate(c.synth);
  } catch (const UsageError& e) {
    throw UsageError(std::string(e.what()) + " (synth_* fields)");
  }
}

std::string serialize(const ExperimentConfig& config) {
  std::string out;
  std::string section;
  for (const auto& f : fields()) {
    if (f.section != section) {
      if (!section.empty()) out += '\n';
      section = f.section;
      out += "[" + section + "]\n";
    }
    out += f.key + " = " + f.get(config) + "\n";
  }
  return out;
}

std::string config_hash(const ExperimentConfig& config) {
  static const char* hex = "0123456789abcdef";
  uint64_t h = fnv1a(serialize(config));
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<size_t>(i)] = hex[h & 0xf];
  return out;
}

std::vector<std::string> diff(const ExperimentConfig& before, const ExperimentConfig& after) {
  std::vector<std::string> out;
  for (const auto& f : fields()) {
    const std::string a = f.get(before);
    const std::string b = f.get(after);
    if (a != b) out.push_back(f.key + ": " + a + " -> " + b);
  }
  return out;
}

TrainingConfig training_config(const ExperimentConfig& c, uint64_t seed) {
  TrainingConfig t;
  t.mode = c.mode;
  t.first_body = c.first_body;
  t.second_body = c.second_body;
  t.dims.word_dim = c.word_dim;
  t.dims.hashtag_dim = c.hashtag_dim;
  t.dims.attention_dim = c.attention_dim;
  t.dims.conv_windows = c.conv_windows;
  t.dims.conv_filters = c.conv_filters;
  t.dims.lstm_hidden = c.lstm_hidden;
  t.dims.scale_attention = c.scale_attention;
  t.supervised_batch = c.supervised_batch;
  t.semi_max_batch = c.semi_max_batch;
  t.supervised_dropout = c.supervised_dropout;
  t.semi_dropout = c.semi_dropout;
  t.adam = AdamConfig{c.learning_rate, c.adam_beta1, c.adam_beta2, c.adam_epsilon};
  t.min_degree = c.min_degree;
  t.epsilon = c.weight_epsilon;
  t.clamp_supervised_weight = c.clamp_supervised_weight;
  t.epochs = c.epochs;
  t.seed = seed;
  t.self_training_k = c.self_training_k;
  return t;
}

ExperimentGrid experiment_grid(const ExperimentConfig& c) {
  ExperimentGrid g;
  g.base = training_config(c, c.seeds.front());
  g.modes = c.compare_modes.empty() ? std::vector<TrainingMode>{c.mode} : c.compare_modes;
  g.split_sizes = c.split_sizes;
  g.unlabeled_fractions = c.unlabeled_fractions;
  g.seeds = c.seeds;
  g.test_size = c.test_size;
  return g;
}

std::vector<std::string> effective_label_set(const ExperimentConfig& config) {
  return config.label_set.empty() ? synth_label_names(config.synth.label_count)
                                  : config.label_set;
}

}  // namespace sands

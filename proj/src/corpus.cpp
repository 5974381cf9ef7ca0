#include "sands/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <regex>
#include <sstream>
#include <unordered_set>

#include "sands/common.hpp"

namespace sands {
namespace {

const std::regex& url_pattern() {
  static const std::regex re(R"((https?://|www\.)\S*)");
  return re;
}

const std::regex& hashtag_pattern() {
  static const std::regex re(R"(#([a-z0-9_]+))");
  return re;
}

const std::regex& mention_pattern() {
  static const std::regex re(R"(@\S+)");
  return re;
}

bool is_ascii(const std::string& s) {
  return std::all_of(s.begin(), s.end(),
                     [](char c) { return static_cast<unsigned char>(c) < 0x80; });
}

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    size_t pos = line.find('\t', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

bool skippable(const std::string& line) {
  return line.empty() || line[0] == '#';
}

// Sort by descending frequency, then term.
std::vector<VocabEntry> rank_terms(const std::map<std::string, int64_t>& counts,
                                   int64_t min_frequency) {
  std::vector<VocabEntry> entries;
  for (const auto& [term, freq] : counts) {
    if (freq >= min_frequency && is_ascii(term)) entries.push_back({term, 0, freq});
  }
  std::stable_sort(entries.begin(), entries.end(),
                   [](const VocabEntry& a, const VocabEntry& b) {
                     return a.frequency > b.frequency;
                   });
  for (size_t i = 0; i < entries.size(); ++i) entries[i].id = static_cast<int>(i) + 2;
  return entries;
}

std::vector<int> encode_terms(const std::vector<std::string>& terms,
                              const std::unordered_map<std::string, int>& index,
                              int length) {
  std::vector<int> ids(static_cast<size_t>(length), Vocabulary::kPadId);
  const size_t n = std::min(terms.size(), ids.size());
  for (size_t i = 0; i < n; ++i) {
    auto it = index.find(terms[i]);
    ids[i] = it == index.end() ? Vocabulary::kUnknownId : it->second;
  }
  return ids;
}

}  // namespace

CleanTweet clean_tweet(const RawTweet& raw) {
  CleanTweet out;
  out.tweet_id = raw.tweet_id;
  out.user_id = raw.user_id;
  out.timestamp = raw.timestamp;

  std::string text = raw.text;
  for (char& c : text) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  text = std::regex_replace(text, url_pattern(), " ");

  for (std::sregex_iterator it(text.begin(), text.end(), hashtag_pattern()), end;
       it != end; ++it) {
    out.hashtags.push_back((*it)[1].str());
  }
  text = std::regex_replace(text, hashtag_pattern(), " ");
  text = std::regex_replace(text, mention_pattern(), " ");

  std::string kept;
  kept.reserve(text.size());
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (u < 0x80 && (std::ispunct(u) || std::isdigit(u))) continue;
    kept.push_back(c);
  }

  std::string token;
  auto flush = [&] {
    if (!token.empty() && is_ascii(token)) out.tokens.push_back(token);
    token.clear();
  };
  for (char c : kept) {
    if (is_space(c)) {
      flush();
    } else {
      token.push_back(c);
    }
  }
  flush();
  return out;
}

Vocabulary build_vocabulary(std::span<const CleanTweet> tweets) {
  std::map<std::string, int64_t> word_counts;
  std::map<std::string, int64_t> hashtag_counts;
  Vocabulary vocab;
  for (const auto& t : tweets) {
    for (const auto& w : t.tokens) ++word_counts[w];
    for (const auto& h : t.hashtags) ++hashtag_counts[h];
    vocab.max_tweet_len = std::max(vocab.max_tweet_len, static_cast<int>(t.tokens.size()));
    vocab.max_hashtag_len =
        std::max(vocab.max_hashtag_len, static_cast<int>(t.hashtags.size()));
  }
  vocab.words = rank_terms(word_counts, Vocabulary::kMinWordFrequency);
  vocab.hashtags = rank_terms(hashtag_counts, Vocabulary::kMinHashtagFrequency);
  for (const auto& e : vocab.words) vocab.word_index.emplace(e.term, e.id);
  for (const auto& e : vocab.hashtags) vocab.hashtag_index.emplace(e.term, e.id);
  return vocab;
}

void write_vocabulary(const Vocabulary& vocab, std::ostream& out) {
  out << "max_tweet_len\t" << vocab.max_tweet_len << '\n';
  out << "max_hashtag_len\t" << vocab.max_hashtag_len << '\n';
  out << "[words]\n";
  for (const auto& e : vocab.words) out << e.term << '\t' << e.id << '\t' << e.frequency << '\n';
  out << "[hashtags]\n";
  for (const auto& e : vocab.hashtags)
    out << e.term << '\t' << e.id << '\t' << e.frequency << '\n';
}

Vocabulary read_vocabulary(std::istream& in) {
  Vocabulary vocab;
  std::vector<VocabEntry>* section = nullptr;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (skippable(line)) continue;
    if (line == "[words]") {
      section = &vocab.words;
      continue;
    }
    if (line == "[hashtags]") {
      section = &vocab.hashtags;
      continue;
    }
    auto fields = split_tabs(line);
    try {
      if (!section && fields.size() == 2 && fields[0] == "max_tweet_len") {
        vocab.max_tweet_len = std::stoi(fields[1]);
      } else if (!section && fields.size() == 2 && fields[0] == "max_hashtag_len") {
        vocab.max_hashtag_len = std::stoi(fields[1]);
      } else if (section && fields.size() == 3) {
        section->push_back({fields[0], std::stoi(fields[1]), std::stoll(fields[2])});
      } else {
        throw std::invalid_argument("bad field count");
      }
    } catch (const std::logic_error&) {
      throw DataError("vocabulary line " + std::to_string(line_no) + ": malformed record");
    }
  }
  for (const auto* entries : {&vocab.words, &vocab.hashtags}) {
    for (size_t i = 0; i < entries->size(); ++i) {
      if ((*entries)[i].id != static_cast<int>(i) + 2)
        throw DataError("vocabulary ids are not contiguous from 2");
    }
  }
  for (const auto& e : vocab.words) vocab.word_index.emplace(e.term, e.id);
  for (const auto& e : vocab.hashtags) vocab.hashtag_index.emplace(e.term, e.id);
  return vocab;
}

EncodedTweet encode_tweet(const CleanTweet& tweet, const Vocabulary& vocab) {
  EncodedTweet out;
  out.tweet_id = tweet.tweet_id;
  out.user_id = tweet.user_id;
  out.timestamp = tweet.timestamp;
  out.label = tweet.label;
  out.token_ids = encode_terms(tweet.tokens, vocab.word_index, vocab.max_tweet_len);
  out.hashtag_ids = encode_terms(tweet.hashtags, vocab.hashtag_index, vocab.max_hashtag_len);
  return out;
}

std::string escape_field(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\\': out += "\\\\"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string unescape_field(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  for (size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '\\' && i + 1 < text.size()) {
      const char next = text[i + 1];
      if (next == 't' || next == 'n' || next == '\\') {
        out.push_back(next == 't' ? '\t' : next == 'n' ? '\n' : '\\');
        ++i;
        continue;
      }
    }
    out.push_back(text[i]);
  }
  return out;
}

void write_tweet_line(std::ostream& out, const RawTweet& tweet) {
  out << tweet.tweet_id << '\t' << tweet.user_id << '\t' << tweet.timestamp << '\t'
      << escape_field(tweet.text) << '\n';
}

std::vector<RawTweet> read_tweets(std::istream& in) {
  std::vector<RawTweet> out;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (skippable(line)) continue;
    auto fields = split_tabs(line);
    auto fail = [&](const std::string& why) {
      return DataError("tweets line " + std::to_string(line_no) + ": " + why);
    };
    if (fields.size() != 4) throw fail("expected 4 tab separated fields");
    if (fields[0].empty() || fields[1].empty()) throw fail("empty id");
    RawTweet t;
    t.tweet_id = fields[0];
    t.user_id = fields[1];
    const auto& ts = fields[2];
    auto [ptr, ec] = std::from_chars(ts.data(), ts.data() + ts.size(), t.timestamp);
    if (ec != std::errc() || ptr != ts.data() + ts.size() || ts.empty())
      throw fail("bad timestamp '" + ts + "'");
    if (t.timestamp < 0) throw fail("negative timestamp");
    t.text = unescape_field(fields[3]);
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> read_labels(std::istream& in) {
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (skippable(line)) continue;
    auto fields = split_tabs(line);
    if (fields.size() != 2 || fields[0].empty() || fields[1].empty())
      throw DataError("labels line " + std::to_string(line_no) +
                      ": expected `tweet_id<TAB>label_name`");
    out.emplace_back(fields[0], fields[1]);
  }
  return out;
}

Dataset make_dataset(const std::vector<RawTweet>& raw,
                     const std::vector<std::pair<std::string, std::string>>& labels,
                     const std::vector<std::string>& label_set,
                     const Vocabulary* fixed_vocab) {
  if (raw.empty()) throw DataError("no records");
  if (label_set.size() < 2) throw DataError("label set needs at least two labels");

  std::unordered_map<std::string, size_t> by_id;
  std::vector<CleanTweet> clean;
  clean.reserve(raw.size());
  for (const auto& r : raw) {
    if (!by_id.emplace(r.tweet_id, clean.size()).second)
      throw DataError("duplicate tweet_id '" + r.tweet_id + "'");
    clean.push_back(clean_tweet(r));
  }

  std::unordered_map<std::string, int> label_ids;
  for (size_t i = 0; i < label_set.size(); ++i) label_ids[label_set[i]] = static_cast<int>(i);
  for (const auto& [tweet_id, name] : labels) {
    auto it = by_id.find(tweet_id);
    if (it == by_id.end()) throw DataError("label references unknown tweet_id '" + tweet_id + "'");
    auto lit = label_ids.find(name);
    if (lit == label_ids.end()) throw DataError("unknown label name '" + name + "'");
    auto& slot = clean[it->second].label;
    if (slot) throw DataError("tweet_id '" + tweet_id + "' labeled twice");
    slot = lit->second;
  }

  Dataset ds;
  ds.label_set = label_set;
  ds.vocab = fixed_vocab ? *fixed_vocab : build_vocabulary(clean);

  std::vector<size_t> order(clean.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return clean[a].timestamp < clean[b].timestamp;
  });
  ds.tweets.reserve(clean.size());
  for (size_t idx : order) {
    ds.tweets.push_back(encode_tweet(clean[idx], ds.vocab));
    if (ds.tweets.back().label) ds.labeled_subset.push_back(ds.tweets.size() - 1);
  }
  ds.horizon_start = 0;
  ds.horizon_end = ds.tweets.back().timestamp;
  return ds;
}

Dataset load_dataset(const std::string& tweets_path,
                     const std::optional<std::string>& labels_path,
                     const std::vector<std::string>& label_set,
                     const Vocabulary* fixed_vocab) {
  std::ifstream tin(tweets_path);
  if (!tin) throw DataError("cannot open tweets file '" + tweets_path + "'");
  auto raw = read_tweets(tin);
  std::vector<std::pair<std::string, std::string>> labels;
  if (labels_path) {
    std::ifstream lin(*labels_path);
    if (!lin) throw DataError("cannot open labels file '" + *labels_path + "'");
    labels = read_labels(lin);
  }
  return make_dataset(raw, labels, label_set, fixed_vocab);
}

std::vector<int> strip_padding(std::span<const int> ids) {
  std::vector<int> out;
  out.reserve(ids.size());
  for (int id : ids) {
    if (id != Vocabulary::kPadId) out.push_back(id);
  }
  return out;
}

}  // namespace sands

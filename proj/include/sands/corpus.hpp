#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace sands {

struct RawTweet {
  std::string tweet_id;
  std::string user_id;
  int64_t timestamp = 0;
  std::string text;
};

struct CleanTweet {
  std::string tweet_id;
  std::string user_id;
  int64_t timestamp = 0;
  std::vector<std::string> tokens;
  std::vector<std::string> hashtags;  // lowercase, leading '#' stripped
  std::optional<int> label;
};

// Lowercase, drop URLs, pull hashtags out of the text, drop mentions,
// delete punctuation and digits, split on whitespace. Tokens containing
// non-ASCII bytes are dropped.
CleanTweet clean_tweet(const RawTweet& raw);

struct VocabEntry {
  std::string term;
  int id = 0;
  int64_t frequency = 0;
};

struct Vocabulary {
  static constexpr int kPadId = 0;
  static constexpr int kUnknownId = 1;
  static constexpr int kMinWordFrequency = 2;
  static constexpr int kMinHashtagFrequency = 6;

  std::unordered_map<std::string, int> word_index;
  std::unordered_map<std::string, int> hashtag_index;
  // Entries in id order (descending frequency, then lexicographic).
  std::vector<VocabEntry> words;
  std::vector<VocabEntry> hashtags;
  int max_tweet_len = 0;
  int max_hashtag_len = 0;

  // Row counts of the embedding tables, including the two reserved ids.
  int word_table_size() const { return static_cast<int>(words.size()) + 2; }
  int hashtag_table_size() const { return static_cast<int>(hashtags.size()) + 2; }
};

Vocabulary build_vocabulary(std::span<const CleanTweet> tweets);

// Dump format: "[words]" and "[hashtags]" sections of tab separated
// `term id frequency` lines, preceded by `max_tweet_len` / `max_hashtag_len`
// lines. Lines starting with '#' are comments.
void write_vocabulary(const Vocabulary& vocab, std::ostream& out);
Vocabulary read_vocabulary(std::istream& in);

struct EncodedTweet {
  std::string tweet_id;
  std::string user_id;
  int64_t timestamp = 0;
  std::vector<int> token_ids;    // length max_tweet_len, 0-padded
  std::vector<int> hashtag_ids;  // length max_hashtag_len, 0-padded
  std::optional<int> label;
};

EncodedTweet encode_tweet(const CleanTweet& tweet, const Vocabulary& vocab);

struct Dataset {
  std::vector<EncodedTweet> tweets;  // stable-sorted by timestamp
  std::vector<std::string> label_set;
  std::vector<size_t> labeled_subset;  // ascending tweet indices
  int64_t horizon_start = 0;
  int64_t horizon_end = 0;
  Vocabulary vocab;
};

// Tab separated `tweet_id user_id timestamp text`; the text field escapes
// tab, newline and backslash as \t, \n and \\.
std::vector<RawTweet> read_tweets(std::istream& in);
void write_tweet_line(std::ostream& out, const RawTweet& tweet);
std::string escape_field(const std::string& text);
std::string unescape_field(const std::string& text);

// Tab separated `tweet_id label_name`.
std::vector<std::pair<std::string, std::string>> read_labels(std::istream& in);

// Builds a dataset in memory: cleans, builds the vocabulary over every
// tweet, encodes, sorts by timestamp and joins labels by tweet id.
Dataset make_dataset(const std::vector<RawTweet>& raw,
                     const std::vector<std::pair<std::string, std::string>>& labels,
                     const std::vector<std::string>& label_set,
                     const Vocabulary* fixed_vocab = nullptr);

Dataset load_dataset(const std::string& tweets_path,
                     const std::optional<std::string>& labels_path,
                     const std::vector<std::string>& label_set,
                     const Vocabulary* fixed_vocab = nullptr);

// Non-padding ids of an encoded sequence, in order.
std::vector<int> strip_padding(std::span<const int> ids);

}  // namespace sands

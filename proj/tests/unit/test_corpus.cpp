#include <doctest.h>

#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "sands/common.hpp"
#include "sands/corpus.hpp"

using namespace sands;
using sands::testing::raw;

namespace {

using Strings = std::vector<std::string>;

CleanTweet clean(const std::string& text) { return clean_tweet(raw("t", "u", 0, text)); }

std::string detokenize(const CleanTweet& c) {
  std::string s;
  for (const auto& t : c.tokens) s += t + " ";
  for (const auto& h : c.hashtags) s += "#" + h + " ";
  return s;
}

}  // namespace

TEST_CASE("clean_tweet applies the cleaning rules in order") {
  auto c = clean("Check THIS out!! https://t.co/xyz #MAGA @user 2020");
  CHECK(c.tokens == Strings{"check", "this", "out"});
  CHECK(c.hashtags == Strings{"maga"});

  auto empty = clean("");
  CHECK(empty.tokens.empty());
  CHECK(empty.hashtags.empty());

  auto folded = clean("#Vote #vote");
  CHECK(folded.tokens.empty());
  CHECK(folded.hashtags == Strings{"vote", "vote"});
}

TEST_CASE("clean_tweet edge cases") {
  CHECK(clean("don't stop").tokens == Strings{"dont", "stop"});
  CHECK(clean("see www.example.com now").tokens == Strings{"see", "now"});
  CHECK(clean("café ok").tokens == Strings{"ok"});
  CHECK(clean("a@b c").tokens == Strings{"a", "c"});
  CHECK(clean("#tag_1,#two").hashtags == Strings{"tag_1", "two"});
  CHECK(clean("tab\tand\nnewline").tokens == Strings{"tab", "and", "newline"});
}

TEST_CASE("clean_tweet is idempotent on its detokenized output") {
  std::mt19937_64 rng(7);
  const std::string alphabet = "abcXYZ019 #@!.,'_/:\t";
  const Strings pieces = {"http://x.y/z", "www.q.com", "#Tag", "@who", "é", "2021", "it's"};
  for (int trial = 0; trial < 500; ++trial) {
    std::string text;
    const int n = std::uniform_int_distribution<int>(0, 40)(rng);
    for (int i = 0; i < n; ++i) {
      if (rng() % 6 == 0)
        text += pieces[rng() % pieces.size()];
      else
        text.push_back(alphabet[rng() % alphabet.size()]);
    }
    const CleanTweet once = clean(text);
    const CleanTweet twice = clean(detokenize(once));
    CHECK(twice.tokens == once.tokens);
    CHECK(twice.hashtags == once.hashtags);
    for (const auto& tok : once.tokens) {
      for (char ch : tok) {
        const auto u = static_cast<unsigned char>(ch);
        CHECK(u < 0x80);
        CHECK_FALSE(std::ispunct(u));
        CHECK_FALSE(std::isdigit(u));
        CHECK_FALSE(std::isspace(u));
      }
    }
  }
}

TEST_CASE("vocabulary frequency thresholds") {
  SUBCASE("one tweet of unique tokens indexes nothing") {
    std::vector<CleanTweet> corpus{clean("alpha beta gamma")};
    auto v = build_vocabulary(corpus);
    CHECK(v.words.empty());
    CHECK(v.max_tweet_len == 3);
  }
  SUBCASE("vote twice and poll six times are indexed") {
    std::vector<CleanTweet> corpus{clean("vote #poll #poll"), clean("vote #poll #poll"),
                                   clean("#poll #poll #rare")};
    auto v = build_vocabulary(corpus);
    CHECK(v.word_index.count("vote") == 1);
    CHECK(v.hashtag_index.count("poll") == 1);
    CHECK(v.hashtag_index.count("rare") == 0);
    CHECK(v.max_hashtag_len == 3);
  }
  SUBCASE("five occurrences of a hashtag are not enough") {
    std::vector<CleanTweet> corpus{clean("#five #five #five #five #five")};
    CHECK(build_vocabulary(corpus).hashtags.empty());
  }
  SUBCASE("empty corpus") {
    auto v = build_vocabulary(std::vector<CleanTweet>{});
    CHECK(v.words.empty());
    CHECK(v.hashtags.empty());
    CHECK(v.max_tweet_len == 0);
    CHECK(v.max_hashtag_len == 0);
  }
}

TEST_CASE("vocabulary ids are contiguous, reserved ids unused, ranked by frequency") {
  std::vector<CleanTweet> corpus{clean("b b b a a c c d"), clean("d")};
  auto v = build_vocabulary(corpus);
  // b:3, a:2, c:2, d:2 -> b first, then a, c, d lexicographically.
  REQUIRE(v.words.size() == 4);
  CHECK(v.words[0].term == "b");
  CHECK(v.words[1].term == "a");
  CHECK(v.words[2].term == "c");
  CHECK(v.words[3].term == "d");
  for (size_t i = 0; i < v.words.size(); ++i) {
    CHECK(v.words[i].id == static_cast<int>(i) + 2);
    CHECK(v.word_index.at(v.words[i].term) == v.words[i].id);
    CHECK(v.words[i].frequency >= Vocabulary::kMinWordFrequency);
  }
  CHECK(v.word_table_size() == 6);
}

TEST_CASE("encode_tweet pads, truncates and maps unknowns") {
  std::vector<CleanTweet> corpus{clean("x y x y"), clean("x")};
  auto v = build_vocabulary(corpus);
  REQUIRE(v.max_tweet_len == 4);

  auto empty = encode_tweet(clean(""), v);
  CHECK(empty.token_ids == std::vector<int>{0, 0, 0, 0});

  auto oov = encode_tweet(clean("x zzz"), v);
  CHECK(oov.token_ids == std::vector<int>{v.word_index.at("x"), Vocabulary::kUnknownId, 0, 0});

  Vocabulary small = v;
  small.max_tweet_len = 2;
  auto cut = encode_tweet(clean("y x zzz"), small);
  CHECK(cut.token_ids == std::vector<int>{v.word_index.at("y"), v.word_index.at("x")});

  for (const auto& t : corpus) {
    auto e = encode_tweet(t, v);
    for (int id : e.token_ids) CHECK(id < v.word_table_size());
    for (int id : e.hashtag_ids) CHECK(id < v.hashtag_table_size());
  }
}

TEST_CASE("vocabulary dump round trip") {
  std::vector<CleanTweet> corpus{clean("a a b b #h #h #h #h #h #h"), clean("c c")};
  auto v = build_vocabulary(corpus);
  std::stringstream s;
  write_vocabulary(v, s);
  auto back = read_vocabulary(s);
  CHECK(back.max_tweet_len == v.max_tweet_len);
  CHECK(back.max_hashtag_len == v.max_hashtag_len);
  CHECK(back.word_index == v.word_index);
  CHECK(back.hashtag_index == v.hashtag_index);
}

TEST_CASE("tweet file parsing") {
  SUBCASE("escapes round trip") {
    const std::string text = "tab\there\nnew\\line";
    CHECK(unescape_field(escape_field(text)) == text);
    std::stringstream s;
    write_tweet_line(s, raw("1", "u", 9, text));
    auto back = read_tweets(s);
    REQUIRE(back.size() == 1);
    CHECK(back[0].text == text);
    CHECK(back[0].timestamp == 9);
  }
  SUBCASE("malformed record names the line") {
    std::stringstream s("# comment\n1\tu\t5\tok\n2\tu\tnotanumber\tbad\n");
    try {
      read_tweets(s);
      FAIL("expected a data error");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
  }
  SUBCASE("wrong field count") {
    std::stringstream s("1\tu\t5\n");
    CHECK_THROWS_AS(read_tweets(s), DataError);
  }
}

TEST_CASE("make_dataset sorts, joins labels and rejects bad input") {
  const Strings labels = {"pro", "anti"};
  std::vector<RawTweet> tweets = {raw("a", "u1", 5, "x"), raw("b", "u2", 1, "y"),
                                  raw("c", "u1", 3, "z")};
  auto d = make_dataset(tweets, {{"a", "pro"}, {"b", "anti"}}, labels);
  REQUIRE(d.tweets.size() == 3);
  CHECK(d.tweets[0].timestamp == 1);
  CHECK(d.tweets[1].timestamp == 3);
  CHECK(d.tweets[2].timestamp == 5);
  CHECK(d.labeled_subset.size() == 2);
  CHECK(d.tweets[0].label == 1);
  CHECK(d.tweets[2].label == 0);
  CHECK_FALSE(d.tweets[1].label.has_value());

  CHECK_THROWS_WITH_AS(make_dataset({}, {}, labels), "no records", DataError);
  CHECK_THROWS_AS(make_dataset({raw("a", "u", 1, ""), raw("a", "u", 2, "")}, {}, labels),
                  DataError);
  CHECK_THROWS_AS(make_dataset(tweets, {{"zz", "pro"}}, labels), DataError);
  CHECK_THROWS_AS(make_dataset(tweets, {{"a", "maybe"}}, labels), DataError);
  CHECK_THROWS_AS(make_dataset(tweets, {}, {"only"}), DataError);
}

TEST_CASE("dataset order is stable for equal timestamps") {
  std::vector<RawTweet> tweets;
  for (int i = 0; i < 20; ++i)
    tweets.push_back(raw("t" + std::to_string(i), "u", i % 3, "w"));
  auto d = make_dataset(tweets, {}, {"a", "b"});
  for (size_t i = 1; i < d.tweets.size(); ++i) {
    CHECK(d.tweets[i - 1].timestamp <= d.tweets[i].timestamp);
    if (d.tweets[i - 1].timestamp == d.tweets[i].timestamp)
      CHECK(std::stoi(d.tweets[i - 1].tweet_id.substr(1)) <
            std::stoi(d.tweets[i].tweet_id.substr(1)));
  }
}

TEST_CASE("strip_padding keeps non-padding ids in order") {
  const std::vector<int> ids{4, 0, 2, 0, 0};
  CHECK(strip_padding(ids) == std::vector<int>{4, 2});
}

#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace sands {

// Directed follow network in compressed sparse row form. An edge u -> v
// means u follows v; followees(u) are the out-neighbours of u.
class FollowGraph {
 public:
  FollowGraph() = default;

  // Duplicate edges are merged. Self-loops are rejected.
  static FollowGraph from_edges(const std::vector<std::pair<std::string, std::string>>& edges);

  size_t user_count() const { return names_.size(); }
  size_t edge_count() const { return targets_.size(); }

  std::optional<int> find(const std::string& user_id) const;
  int index_of(const std::string& user_id) const;  // throws DataError when unknown
  const std::string& name(int node) const { return names_.at(static_cast<size_t>(node)); }

  // Sorted, duplicate-free dense ids.
  std::span<const int> followees(int node) const;
  std::span<const int> followers(int node) const;
  std::vector<std::string> followees(const std::string& user_id) const;

  size_t out_degree(int node) const { return followees(node).size(); }

  bool vote_eligible(int node, int min_degree) const;
  bool vote_eligible(const std::string& user_id, int min_degree) const;

 private:
  void check_node(int node) const;

  std::vector<std::string> names_;
  std::unordered_map<std::string, int> index_;
  std::vector<size_t> out_offsets_{0};
  std::vector<int> targets_;
  std::vector<size_t> in_offsets_{0};
  std::vector<int> sources_;
};

// Whitespace separated `follower followee` pairs, '#' starts a comment.
FollowGraph read_follow_graph(std::istream& in);
FollowGraph load_follow_graph(const std::string& path);

}  // namespace sands

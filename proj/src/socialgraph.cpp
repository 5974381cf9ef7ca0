#include "sands/socialgraph.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <sstream>

#include "sands/common.hpp"

namespace sands {
namespace {

void build_csr(size_t n, std::vector<std::pair<int, int>>& edges, std::vector<size_t>& offsets,
               std::vector<int>& targets) {
  std::sort(edges.begin(), edges.end());
  offsets.assign(n + 1, 0);
  targets.clear();
  targets.reserve(edges.size());
  for (const auto& [u, v] : edges) {
    ++offsets[static_cast<size_t>(u) + 1];
    targets.push_back(v);
  }
  for (size_t i = 0; i < n; ++i) offsets[i + 1] += offsets[i];
}

}  // namespace

FollowGraph FollowGraph::from_edges(
    const std::vector<std::pair<std::string, std::string>>& edges) {
  FollowGraph g;
  auto intern = [&g](const std::string& name) {
    auto [it, inserted] = g.index_.emplace(name, static_cast<int>(g.names_.size()));
    if (inserted) g.names_.push_back(name);
    return it->second;
  };
  std::vector<std::pair<int, int>> dense;
  dense.reserve(edges.size());
  for (const auto& [from, to] : edges) {
    if (from == to) throw DataError("self-loop on user '" + from + "'");
    const int u = intern(from);
    const int v = intern(to);
    dense.emplace_back(u, v);
  }
  std::sort(dense.begin(), dense.end());
  dense.erase(std::unique(dense.begin(), dense.end()), dense.end());

  build_csr(g.names_.size(), dense, g.out_offsets_, g.targets_);
  for (auto& e : dense) std::swap(e.first, e.second);
  build_csr(g.names_.size(), dense, g.in_offsets_, g.sources_);
  return g;
}

std::optional<int> FollowGraph::find(const std::string& user_id) const {
  auto it = index_.find(user_id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

int FollowGraph::index_of(const std::string& user_id) const {
  auto node = find(user_id);
  if (!node) throw DataError("unknown user '" + user_id + "'");
  return *node;
}

void FollowGraph::check_node(int node) const {
  if (node < 0 || static_cast<size_t>(node) >= names_.size())
    throw DataError("unknown user node " + std::to_string(node));
}

std::span<const int> FollowGraph::followees(int node) const {
  check_node(node);
  const auto u = static_cast<size_t>(node);
  return {targets_.data() + out_offsets_[u], out_offsets_[u + 1] - out_offsets_[u]};
}

std::span<const int> FollowGraph::followers(int node) const {
  check_node(node);
  const auto u = static_cast<size_t>(node);
  return {sources_.data() + in_offsets_[u], in_offsets_[u + 1] - in_offsets_[u]};
}

std::vector<std::string> FollowGraph::followees(const std::string& user_id) const {
  std::vector<std::string> out;
  for (int v : followees(index_of(user_id))) out.push_back(names_[static_cast<size_t>(v)]);
  return out;
}

bool FollowGraph::vote_eligible(int node, int min_degree) const {
  return out_degree(node) >= static_cast<size_t>(std::max(min_degree, 0));
}

bool FollowGraph::vote_eligible(const std::string& user_id, int min_degree) const {
  return vote_eligible(index_of(user_id), min_degree);
}

FollowGraph read_follow_graph(std::istream& in) {
  std::vector<std::pair<std::string, std::string>> edges;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::string from, to, extra;
    if (!(fields >> from)) continue;
    if (!(fields >> to) || (fields >> extra))
      throw DataError("edge list line " + std::to_string(line_no) +
                      ": expected `follower followee`");
    if (from == to)
      throw DataError("edge list line " + std::to_string(line_no) + ": self-loop on '" + from +
                      "'");
    edges.emplace_back(std::move(from), std::move(to));
  }
  return FollowGraph::from_edges(edges);
}

FollowGraph load_follow_graph(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open edge list '" + path + "'");
  return read_follow_graph(in);
}

}  // namespace sands

#include <algorithm>
#include <numeric>
#include <unordered_map>

#include "sands/training.hpp"

namespace sands {
namespace {

// Smallest non-full batch index >= b; batches.size() means "open a new one".
class OpenBatches {
 public:
  size_t find(size_t b) {
    size_t root = b;
    while (root < next_.size() && next_[root] != root) root = next_[root];
    while (b < next_.size() && next_[b] != b) {
      const size_t up = next_[b];
      next_[b] = root;
      b = up;
    }
    return root;
  }
  void add_batch() { next_.push_back(next_.size()); }
  void seal(size_t b) { next_[b] = b + 1; }

 private:
  std::vector<size_t> next_;
};

}  // namespace

BatchPlan plan_batches(const Dataset& dataset, const FollowGraph& graph, size_t max_size,
                       std::span<const size_t> subset) {
  BatchPlan plan;
  plan.max_size = std::max<size_t>(max_size, 1);
  std::vector<size_t> order(subset.begin(), subset.end());
  std::sort(order.begin(), order.end());

  const size_t graph_users = graph.user_count();
  std::unordered_map<std::string, size_t> outsiders;
  // Batches each user appears in; non-decreasing because a user's tweets
  // never move to an earlier batch.
  std::vector<std::vector<size_t>> appears(graph_users);
  auto key_of = [&](const std::string& user) -> size_t {
    if (auto node = graph.find(user)) return static_cast<size_t>(*node);
    auto [it, inserted] = outsiders.emplace(user, graph_users + outsiders.size());
    if (inserted) appears.emplace_back();
    return it->second;
  };
  auto in_batch = [&](int user, size_t b) {
    const auto& a = appears[static_cast<size_t>(user)];
    return std::binary_search(a.begin(), a.end(), b);
  };
  auto conflicts = [&](size_t key, size_t b) {
    if (key >= graph_users || b >= plan.batches.size()) return false;
    const int node = static_cast<int>(key);
    for (int v : graph.followees(node))
      if (in_batch(v, b)) return true;
    for (int v : graph.followers(node))
      if (in_batch(v, b)) return true;
    return false;
  };

  OpenBatches open;
  for (size_t tweet : order) {
    const size_t key = key_of(dataset.tweets.at(tweet).user_id);
    auto& mine = appears[key];
    size_t b = open.find(mine.empty() ? 0 : mine.back());
    while (conflicts(key, b)) b = open.find(b + 1);
    if (b == plan.batches.size()) {
      plan.batches.emplace_back();
      open.add_batch();
    }
    plan.batches[b].push_back(tweet);
    if (plan.batches[b].size() >= plan.max_size) open.seal(b);
    if (mine.empty() || mine.back() != b) mine.push_back(b);
  }
  return plan;
}

BatchPlan plan_batches(const Dataset& dataset, const FollowGraph& graph, size_t max_size) {
  std::vector<size_t> all(dataset.tweets.size());
  std::iota(all.begin(), all.end(), 0);
  return plan_batches(dataset, graph, max_size, all);
}

}  // namespace sands

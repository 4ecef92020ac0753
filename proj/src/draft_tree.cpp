#include "stand/draft_tree.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <numeric>
#include <queue>

#include <json.hpp>

namespace stand {

int TreeTopology::max_depth() const {
  int d = 0;
  for (const auto& n : nodes) d = std::max(d, n.depth);
  return d;
}

void validate_topology(const TreeTopology& topology) {
  const auto& nodes = topology.nodes;
  if (nodes.empty()) throw std::invalid_argument("topology has no root");
  if (nodes[0].parent != -1 || nodes[0].depth != 0)
    throw std::invalid_argument("node 0 must be the depth-0 root");
  std::vector<int> seen_as_child(nodes.size(), 0);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& n = nodes[i];
    if (n.id != static_cast<int>(i))
      throw std::invalid_argument("node ids must be dense and in order");
    if (i > 0) {
      if (n.parent < 0 || n.parent >= static_cast<int>(nodes.size()))
        throw std::invalid_argument("node parent out of range");
      if (n.depth != nodes[n.parent].depth + 1)
        throw std::invalid_argument("depth(child) must be depth(parent)+1");
    }
    for (int c : n.children) {
      if (c <= 0 || c >= static_cast<int>(nodes.size()))
        throw std::invalid_argument("child id out of range");
      if (nodes[c].parent != n.id)
        throw std::invalid_argument("child/parent link mismatch");
      if (seen_as_child[c]++)
        throw std::invalid_argument("node listed as child twice");
    }
  }
  for (std::size_t i = 1; i < nodes.size(); ++i)
    if (!seen_as_child[i])
      throw std::invalid_argument("non-root node missing from child lists");
}

void record_acceptance(NodeStats& stats, const TreeTopology& topology,
                       const std::vector<int>& accepted_path,
                       const std::vector<int>& drafted_nodes) {
  if (!accepted_path.empty()) {
    if (topology.nodes[accepted_path[0]].parent != 0)
      throw std::invalid_argument("accepted path must start at level 1");
    for (std::size_t i = 1; i < accepted_path.size(); ++i)
      if (topology.nodes[accepted_path[i]].parent != accepted_path[i - 1])
        throw std::invalid_argument("accepted path is disconnected");
  }
  for (int id : drafted_nodes) stats.visits.at(id) += 1;
  for (int id : accepted_path) stats.acceptance.at(id) += 1;
}

namespace {

std::vector<int> bfs_rank(const TreeTopology& topology) {
  std::vector<int> rank(topology.nodes.size(), 0);
  std::queue<int> queue;
  queue.push(0);
  int next = 0;
  while (!queue.empty()) {
    int id = queue.front();
    queue.pop();
    rank[id] = next++;
    for (int c : topology.nodes[id].children) queue.push(c);
  }
  return rank;
}

// Rebuilds a topology from a selected node set, keeping only selected
// children in `child_order`, relabeling ids breadth-first.
TreeTopology rebuild(const TreeTopology& topology,
                     const std::vector<char>& selected,
                     const std::vector<std::vector<int>>& child_order) {
  TreeTopology out;
  std::queue<int> queue;
  queue.push(0);
  std::vector<int> order;
  while (!queue.empty()) {
    int id = queue.front();
    queue.pop();
    order.push_back(id);
    for (int c : child_order[id])
      if (selected[c]) queue.push(c);
  }
  std::vector<int> new_id(topology.nodes.size(), -1);
  for (std::size_t i = 0; i < order.size(); ++i) new_id[order[i]] = i;

  out.nodes.resize(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& old = topology.nodes[order[i]];
    auto& node = out.nodes[i];
    node.id = static_cast<int>(i);
    node.parent = old.parent < 0 ? -1 : new_id[old.parent];
    node.depth = node.parent < 0 ? 0 : out.nodes[node.parent].depth + 1;
    for (int c : child_order[order[i]])
      if (selected[c]) node.children.push_back(new_id[c]);
  }
  return out;
}

}  // namespace

TreeTopology prune_to_top_k(const TreeTopology& topology,
                            const NodeStats& stats, std::size_t k) {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  if (stats.acceptance.size() != topology.nodes.size())
    throw std::invalid_argument("stats do not cover the topology");
  validate_topology(topology);

  std::size_t budget = std::min(k, topology.draft_node_count());
  auto rank = bfs_rank(topology);

  std::vector<int> candidates(topology.nodes.size() - 1);
  std::iota(candidates.begin(), candidates.end(), 1);
  std::sort(candidates.begin(), candidates.end(), [&](int a, int b) {
    if (stats.acceptance[a] != stats.acceptance[b])
      return stats.acceptance[a] > stats.acceptance[b];
    return rank[a] < rank[b];
  });

  std::vector<char> selected(topology.nodes.size(), 0);
  selected[0] = 1;
  std::size_t count = 0;
  for (int cand : candidates) {
    if (count >= budget) break;
    if (selected[cand]) continue;
    std::vector<int> chain;
    for (int id = cand; id != 0 && !selected[id];
         id = topology.nodes[id].parent)
      chain.push_back(id);
    if (count + chain.size() > budget) continue;  // does not fit, try next
    for (int id : chain) selected[id] = 1;
    count += chain.size();
  }

  // Children reordered by descending acceptance, ties by original order.
  std::vector<std::vector<int>> child_order(topology.nodes.size());
  for (const auto& node : topology.nodes) {
    child_order[node.id] = node.children;
    std::stable_sort(child_order[node.id].begin(), child_order[node.id].end(),
                     [&](int a, int b) {
                       return stats.acceptance[a] > stats.acceptance[b];
                     });
  }
  TreeTopology out = rebuild(topology, selected, child_order);
  validate_topology(out);
  return out;
}

std::vector<std::size_t> depth_histogram(const TreeTopology& topology) {
  std::vector<std::size_t> hist(topology.max_depth(), 0);
  for (const auto& n : topology.nodes)
    if (n.depth > 0) hist[n.depth - 1] += 1;
  return hist;
}

TreeTopology build_uniform_tree(const std::vector<int>& children_per_depth) {
  TreeTopology t;
  t.nodes.push_back({0, -1, 0, {}});
  std::vector<int> frontier{0};
  for (std::size_t d = 0; d < children_per_depth.size(); ++d) {
    std::vector<int> next;
    for (int parent : frontier) {
      for (int c = 0; c < children_per_depth[d]; ++c) {
        int id = static_cast<int>(t.nodes.size());
        t.nodes.push_back({id, parent, static_cast<int>(d) + 1, {}});
        t.nodes[parent].children.push_back(id);
        next.push_back(id);
      }
    }
    frontier = std::move(next);
  }
  validate_topology(t);
  return t;
}

TreeTopology build_initial_tree() {
  // Per-depth draft-node counts, depth 1..20. Wide levels 1-4, narrowing
  // tail down to depth 20; totals exactly 625.
  static constexpr int kProfile[20] = {60, 100, 110, 100, 80, 50, 30,
                                       20, 15,  12,  10,  8,  6,  5,
                                       4,  4,   3,   3,   3,  2};
  TreeTopology t;
  t.nodes.push_back({0, -1, 0, {}});
  std::vector<int> frontier{0};
  for (int d = 0; d < 20; ++d) {
    int count = kProfile[d];
    std::vector<int> level;
    level.reserve(count);
    for (int i = 0; i < count; ++i) {
      int parent = frontier[i % frontier.size()];
      int id = static_cast<int>(t.nodes.size());
      t.nodes.push_back({id, parent, d + 1, {}});
      t.nodes[parent].children.push_back(id);
      level.push_back(id);
    }
    frontier = std::move(level);
  }
  validate_topology(t);
  return t;
}

TreeTopology random_subtree(const TreeTopology& topology, std::size_t k,
                            Rng& rng) {
  std::size_t budget = std::min(k, topology.draft_node_count());
  std::vector<char> selected(topology.nodes.size(), 0);
  selected[0] = 1;
  // Grow by repeatedly attaching a uniformly random frontier node.
  std::vector<int> frontier = topology.nodes[0].children;
  std::size_t count = 0;
  while (count < budget && !frontier.empty()) {
    std::uniform_int_distribution<std::size_t> pick(0, frontier.size() - 1);
    std::size_t i = pick(rng);
    int id = frontier[i];
    frontier.erase(frontier.begin() + i);
    selected[id] = 1;
    ++count;
    for (int c : topology.nodes[id].children) frontier.push_back(c);
  }
  std::vector<std::vector<int>> child_order(topology.nodes.size());
  for (const auto& node : topology.nodes) child_order[node.id] = node.children;
  TreeTopology out = rebuild(topology, selected, child_order);
  validate_topology(out);
  return out;
}

std::string topology_to_json(const TreeTopology& topology) {
  nlohmann::json j;
  j["format"] = "stand-tree";
  j["version"] = 1;
  auto& nodes = j["nodes"] = nlohmann::json::array();
  for (const auto& n : topology.nodes) {
    nlohmann::json rec;
    rec["id"] = n.id;
    if (n.parent < 0)
      rec["parent"] = nullptr;
    else
      rec["parent"] = n.parent;
    rec["children"] = n.children;
    nodes.push_back(std::move(rec));
  }
  return j.dump(2);
}

void save_topology(const TreeTopology& topology, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write tree file: " + path);
  out << topology_to_json(topology) << '\n';
}

TreeTopology parse_topology_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  if (j.value("format", "") != "stand-tree")
    throw ProtocolError("not a stand-tree document");
  if (j.value("version", -1) != 1)
    throw ProtocolError("unsupported stand-tree version");
  TreeTopology t;
  t.nodes.resize(j.at("nodes").size());
  for (const auto& rec : j.at("nodes")) {
    int id = rec.at("id").get<int>();
    if (id < 0 || id >= static_cast<int>(t.nodes.size()))
      throw ProtocolError("tree node id out of range");
    auto& n = t.nodes[id];
    n.id = id;
    n.parent = rec.at("parent").is_null() ? -1 : rec.at("parent").get<int>();
    n.children = rec.at("children").get<std::vector<int>>();
  }
  for (auto& n : t.nodes)
    n.depth = n.parent < 0 ? 0 : -1;
  // Depths follow parent links; ids are BFS-ish but not guaranteed sorted
  // by depth, so iterate until settled.
  bool changed = true;
  while (changed) {
    changed = false;
    for (auto& n : t.nodes) {
      if (n.depth >= 0 || n.parent < 0) continue;
      if (t.nodes[n.parent].depth >= 0) {
        n.depth = t.nodes[n.parent].depth + 1;
        changed = true;
      }
    }
  }
  validate_topology(t);
  return t;
}

TreeTopology load_topology(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open tree file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return parse_topology_json(text);
}

void save_stats(const NodeStats& stats, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write stats file: " + path);
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t i = 0; i < stats.acceptance.size(); ++i)
    j[std::to_string(i)] = {{"accept", stats.acceptance[i]},
                            {"visit", stats.visits[i]}};
  out << j.dump(2) << '\n';
}

NodeStats load_stats(const std::string& path, std::size_t n_nodes) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open stats file: " + path);
  nlohmann::json j = nlohmann::json::parse(in);
  NodeStats stats(n_nodes);
  for (const auto& [key, rec] : j.items()) {
    std::size_t id = std::stoul(key);
    if (id >= n_nodes) throw ProtocolError("stats node id out of range");
    stats.acceptance[id] = rec.at("accept").get<std::uint64_t>();
    stats.visits[id] = rec.at("visit").get<std::uint64_t>();
  }
  return stats;
}

}  // namespace stand

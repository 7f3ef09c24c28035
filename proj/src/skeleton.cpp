#include "smd/skeleton.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "smd/errors.hpp"

namespace smd {

Skeleton build_skeleton(const std::vector<std::pair<long, long>>& edges, long root,
                        long joint_count) {
  if (joint_count < 1) throw InvalidSize("joint_count must be >= 1");
  if (root < 0 || root >= joint_count) throw IndexOutOfRange("root index out of range");

  std::set<std::pair<long, long>> seen;
  std::vector<long> uf(joint_count);
  std::iota(uf.begin(), uf.end(), 0);
  auto find = [&](long x) {
    while (uf[x] != x) x = uf[x] = uf[uf[x]];
    return x;
  };

  std::vector<std::vector<long>> adj(joint_count);
  for (auto [a, b] : edges) {
    if (a < 0 || a >= joint_count || b < 0 || b >= joint_count)
      throw IndexOutOfRange("edge endpoint out of range");
    if (a == b) throw SelfLoop("edge (" + std::to_string(a) + "," + std::to_string(b) + ")");
    std::pair<long, long> key{std::min(a, b), std::max(a, b)};
    if (!seen.insert(key).second)
      throw DuplicateEdge("edge (" + std::to_string(a) + "," + std::to_string(b) + ") repeated");
    long ra = find(a), rb = find(b);
    if (ra == rb)
      throw CycleDetected("edge (" + std::to_string(a) + "," + std::to_string(b) +
                          ") closes a cycle");
    uf[ra] = rb;
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  if (static_cast<long>(edges.size()) != joint_count - 1)
    throw Disconnected("expected " + std::to_string(joint_count - 1) + " edges, got " +
                       std::to_string(edges.size()));

  Skeleton s;
  s.joint_count = joint_count;
  s.root = root;
  s.parent.assign(joint_count, -1);
  s.children.assign(joint_count, {});

  // Orient edges away from the root.
  std::vector<long> stack = {root};
  std::vector<char> visited(joint_count, 0);
  visited[root] = 1;
  long reached = 1;
  while (!stack.empty()) {
    long v = stack.back();
    stack.pop_back();
    for (long u : adj[v]) {
      if (visited[u]) continue;
      visited[u] = 1;
      ++reached;
      s.parent[u] = v;
      s.children[v].push_back(u);
      stack.push_back(u);
    }
  }
  if (reached != joint_count) throw Disconnected("graph does not reach all joints from the root");
  for (auto& c : s.children) std::sort(c.begin(), c.end());
  return s;
}

ScanPlan make_scan_plan(const Skeleton& s) {
  ScanPlan p;
  p.joint_count = s.joint_count;
  p.tour.reserve(2 * s.joint_count - 1);

  // Iterative DFS; the parent is appended again after every finished child
  // subtree, including the final return to the root.
  struct Frame {
    long joint;
    size_t next_child;
  };
  std::vector<Frame> stack;
  p.tour.push_back(s.root);
  stack.push_back({s.root, 0});
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_child < s.children[f.joint].size()) {
      long c = s.children[f.joint][f.next_child++];
      p.tour.push_back(c);
      stack.push_back({c, 0});
    } else {
      stack.pop_back();
      if (!stack.empty()) p.tour.push_back(stack.back().joint);
    }
  }

  p.repeat_count.assign(s.joint_count, 0);
  p.select_index.assign(s.joint_count, -1);
  for (size_t i = 0; i < p.tour.size(); ++i) {
    ++p.repeat_count[p.tour[i]];
    p.select_index[p.tour[i]] = static_cast<long>(i);
  }
  return p;
}

Tensor expand_features(const Tensor& features, const ScanPlan& plan) {
  if (features.rows() != plan.joint_count)
    throw ShapeMismatch("expand_features expects " + std::to_string(plan.joint_count) +
                        " rows, got " + std::to_string(features.rows()));
  long d = features.cols();
  Tensor out({plan.length(), d});
  for (long p = 0; p < plan.length(); ++p) {
    const double* src = features.data.data() + plan.tour[p] * d;
    std::copy(src, src + d, out.data.data() + p * d);
  }
  return out;
}

Tensor contract_features(const Tensor& tour_features, const ScanPlan& plan) {
  if (tour_features.rows() != plan.length())
    throw ShapeMismatch("contract_features expects " + std::to_string(plan.length()) +
                        " rows, got " + std::to_string(tour_features.rows()));
  long d = tour_features.cols();
  Tensor out({plan.joint_count, d});
  for (long v = 0; v < plan.joint_count; ++v) {
    const double* src = tour_features.data.data() + plan.select_index[v] * d;
    std::copy(src, src + d, out.data.data() + v * d);
  }
  return out;
}

Skeleton load_skeleton(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open skeleton file " + path);
  long v = -1, root = -1;
  std::vector<std::pair<long, long>> edges;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok)) continue;
    auto where = [&] { return path + ":" + std::to_string(lineno); };
    if (tok == "V") {
      if (!(ls >> v)) throw ConfigError("bad V line at " + where());
    } else if (tok == "root") {
      if (!(ls >> root)) throw ConfigError("bad root line at " + where());
    } else if (tok == "edge") {
      long a, b;
      if (!(ls >> a >> b)) throw ConfigError("bad edge line at " + where());
      edges.emplace_back(a, b);
    } else {
      throw ConfigError("unknown directive '" + tok + "' at " + where());
    }
  }
  if (v < 0 || root < 0) throw ConfigError("skeleton file " + path + " missing V or root line");
  return build_skeleton(edges, root, v);
}

void save_skeleton(const Skeleton& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write skeleton file " + path);
  out << "V " << s.joint_count << "\n";
  out << "root " << s.root << "\n";
  for (long j = 0; j < s.joint_count; ++j)
    if (s.parent[j] >= 0) out << "edge " << s.parent[j] << " " << j << "\n";
  if (!out) throw IoError("write failed for " + path);
}

Skeleton canonical_17joint() {
  // Hip-rooted edge list of the 17-joint reduction, re-rooted at the head
  // (joint 10) so the scan starts there.
  static const std::vector<std::pair<long, long>> edges = {
      {0, 1},  {1, 2},  {2, 3},   {0, 4},   {4, 5},   {5, 6},   {0, 7},   {7, 8},
      {8, 9},  {9, 10}, {8, 11},  {11, 12}, {12, 13}, {8, 14},  {14, 15}, {15, 16}};
  Skeleton s = build_skeleton(edges, /*root=*/10, /*joint_count=*/17);
  s.joint_names = {"hip",       "rhip",     "rknee",  "rfoot",     "lhip",      "lknee",
                   "lfoot",     "spine",    "thorax", "neck",      "head",      "lshoulder",
                   "lelbow",    "lwrist",   "rshoulder", "relbow", "rwrist"};
  return s;
}

}  // namespace smd

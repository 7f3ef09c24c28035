#pragma once

#include <string>
#include <utility>
#include <vector>

#include "smd/tensor.hpp"

namespace smd {

// Rooted joint tree. parent[root] == -1; children lists are sorted ascending
// so every derived scan order is reproducible.
struct Skeleton {
  long joint_count = 0;
  long root = 0;
  std::vector<long> parent;
  std::vector<std::vector<long>> children;
  std::vector<std::string> joint_names;  // optional

  bool operator==(const Skeleton& o) const {
    return joint_count == o.joint_count && root == o.root && parent == o.parent;
  }
};

// Depth-first tour with backtracking ("draw the stickman without lifting the
// pen"). The tour starts and ends at the root and has length 2V-1; a joint is
// re-entered after each completed child subtree. repeat_count is the visit
// multiplicity, select_index the position of the last visit.
struct ScanPlan {
  long joint_count = 0;
  std::vector<long> tour;
  std::vector<long> repeat_count;
  std::vector<long> select_index;

  long length() const { return static_cast<long>(tour.size()); }
};

Skeleton build_skeleton(const std::vector<std::pair<long, long>>& edges, long root,
                        long joint_count);
ScanPlan make_scan_plan(const Skeleton& s);

// Joint Repeat gather: row p of the result is features[tour[p]].
Tensor expand_features(const Tensor& features, const ScanPlan& plan);
// Joint Select: row v of the result is tour_features[select_index[v]].
Tensor contract_features(const Tensor& tour_features, const ScanPlan& plan);

// Plain-text topology file: "V <count>", "root <index>", V-1 "edge <a> <b>"
// lines; '#' starts a comment.
Skeleton load_skeleton(const std::string& path);
void save_skeleton(const Skeleton& s, const std::string& path);

// The 17-joint reduction used by the common mocap evaluation protocols,
// re-rooted at the head so the scan starts there. A dataset convention, kept
// in code so tools work without a topology file.
Skeleton canonical_17joint();

}  // namespace smd

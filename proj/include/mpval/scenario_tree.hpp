#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mpval/mappings.hpp"

namespace mpval {

/// Filtration-respecting scenario tree of (x_t, y_t) increments. Nodes live in
/// a flat arena laid out level by level, children of a node contiguous; the
/// tree is immutable once built.
class ScenarioTree {
  public:
    using NodeId = std::int64_t;

    int horizon() const { return horizon_; }
    int aux_dim() const { return aux_dim_; }
    std::int64_t node_count() const { return static_cast<std::int64_t>(x_.size()); }
    NodeId root() const { return 0; }

    int depth(NodeId id) const;
    double x(NodeId id) const { return x_[static_cast<std::size_t>(id)]; }
    Eigen::Map<const Eigen::VectorXd> y(NodeId id) const {
        return Eigen::Map<const Eigen::VectorXd>(y_.data() + static_cast<std::size_t>(id) * aux_dim_,
                                                 aux_dim_);
    }
    NodeId parent(NodeId id) const { return parent_[static_cast<std::size_t>(id)]; }
    /// Probability of this node given its parent (1 at the root).
    double weight(NodeId id) const { return weight_[static_cast<std::size_t>(id)]; }
    NodeId first_child(NodeId id) const { return first_child_[static_cast<std::size_t>(id)]; }
    std::int32_t child_count(NodeId id) const { return child_count_[static_cast<std::size_t>(id)]; }

    NodeId level_begin(int t) const { return level_offsets_[static_cast<std::size_t>(t)]; }
    NodeId level_end(int t) const { return level_offsets_[static_cast<std::size_t>(t) + 1]; }

    /// Assembles a tree from arrays already in level order (children of each
    /// node contiguous). Validates all structural invariants.
    static ScenarioTree from_arrays(int horizon, int aux_dim, std::vector<std::int64_t> level_offsets,
                                    std::vector<double> x, std::vector<double> y,
                                    std::vector<std::int64_t> parent,
                                    std::vector<std::int64_t> first_child,
                                    std::vector<std::int32_t> child_count, std::vector<double> weight);

    /// Incremental construction in any order; finish() relayouts the arena
    /// breadth-first and validates.
    class Builder {
      public:
        Builder(int horizon, int aux_dim);
        NodeId add_root();
        NodeId add_child(NodeId parent, double weight, double x, const Eigen::VectorXd& y);
        NodeId add_child(NodeId parent, double weight, double x);
        ScenarioTree finish();

      private:
        int horizon_;
        int aux_dim_;
        std::int64_t root_ = -1;
        std::vector<double> x_;
        std::vector<double> y_;
        std::vector<std::int64_t> parent_;
        std::vector<double> weight_;
        std::vector<std::vector<std::int64_t>> children_;
    };

  private:
    ScenarioTree() = default;

    int horizon_ = 0;
    int aux_dim_ = 0;
    std::vector<std::int64_t> level_offsets_;  // size horizon_ + 2
    std::vector<double> x_;
    std::vector<double> y_;  // aux_dim_ entries per node
    std::vector<std::int64_t> parent_;
    std::vector<std::int64_t> first_child_;  // -1 for leaves
    std::vector<std::int32_t> child_count_;
    std::vector<double> weight_;
};

struct ValuationResult {
    double v0 = 0.0;
    /// V_t at each node, indexed by node id.
    Eigen::VectorXd node_values;
    /// psi_t = sum of x along the root path + V_t, indexed by node id.
    Eigen::VectorXd psi_values;
};

/// Backward recursion V_t = phi_t(X_{t+1} + V_{t+1}) over the tree. Each
/// node's value is a deterministic fold over its children in child order, so
/// the result is bit-identical for any worker count.
ValuationResult backward_value(const ScenarioTree& tree, const ValuationSchedule& schedule,
                               int workers = 0);

/// Maps x increments at depth t to a*x + b[t-1]; structure, weights and y
/// unchanged.
ScenarioTree affine_transform(const ScenarioTree& tree, double a, const Eigen::VectorXd& b);

/// Exact law of the sum of x over strict descendants of the node, weighted by
/// products of child weights along each descending path.
WeightedSample path_law(const ScenarioTree& tree, ScenarioTree::NodeId node);

void dump_tree(const ScenarioTree& tree, std::ostream& out);
void dump_tree(const ScenarioTree& tree, const std::string& path);
ScenarioTree load_tree(std::istream& in);
ScenarioTree load_tree(const std::string& path);

}  // namespace mpval

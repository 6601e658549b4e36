#include "mpval/scenario_tree.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "mpval/parallel.hpp"

namespace mpval {

namespace {

constexpr double kWeightHardLimit = 1e-6;

[[noreturn]] void malformed(const std::string& why) {
    throw std::invalid_argument("ScenarioTree: " + why);
}

}  // namespace

int ScenarioTree::depth(NodeId id) const {
    const auto it = std::upper_bound(level_offsets_.begin(), level_offsets_.end(), id);
    return static_cast<int>(it - level_offsets_.begin()) - 1;
}

ScenarioTree ScenarioTree::from_arrays(int horizon, int aux_dim,
                                       std::vector<std::int64_t> level_offsets, std::vector<double> x,
                                       std::vector<double> y, std::vector<std::int64_t> parent,
                                       std::vector<std::int64_t> first_child,
                                       std::vector<std::int32_t> child_count,
                                       std::vector<double> weight) {
    if (horizon <= 0) malformed("horizon must be positive");
    if (aux_dim < 0) malformed("aux_dim must be >= 0");
    const std::int64_t n = static_cast<std::int64_t>(x.size());
    if (level_offsets.size() != static_cast<std::size_t>(horizon) + 2) malformed("bad level offsets");
    if (level_offsets.front() != 0 || level_offsets.back() != n) malformed("bad level offsets");
    if (y.size() != x.size() * static_cast<std::size_t>(aux_dim) ||
        parent.size() != x.size() || first_child.size() != x.size() ||
        child_count.size() != x.size() || weight.size() != x.size())
        malformed("array length mismatch");
    if (level_offsets[1] - level_offsets[0] != 1) malformed("exactly one root required");

    ScenarioTree tree;
    tree.horizon_ = horizon;
    tree.aux_dim_ = aux_dim;
    tree.level_offsets_ = std::move(level_offsets);
    tree.x_ = std::move(x);
    tree.y_ = std::move(y);
    tree.parent_ = std::move(parent);
    tree.first_child_ = std::move(first_child);
    tree.child_count_ = std::move(child_count);
    tree.weight_ = std::move(weight);

    for (double v : tree.x_)
        if (!std::isfinite(v)) malformed("non-finite x increment");
    for (double v : tree.y_)
        if (!std::isfinite(v)) malformed("non-finite y increment");

    // Structural pass: children contiguous in the next level, leaves exactly
    // at depth T, child weights positive and summing to one.
    for (int t = 0; t <= horizon; ++t) {
        for (NodeId id = tree.level_begin(t); id < tree.level_end(t); ++id) {
            const auto i = static_cast<std::size_t>(id);
            const std::int32_t nc = tree.child_count_[i];
            if (t == horizon) {
                if (nc != 0) malformed("node beyond horizon has children");
                continue;
            }
            if (nc <= 0) malformed("interior node without children");
            const NodeId fc = tree.first_child_[i];
            if (fc < tree.level_begin(t + 1) || fc + nc > tree.level_end(t + 1))
                malformed("children outside next level");
            double sum = 0.0;
            for (NodeId c = fc; c < fc + nc; ++c) {
                if (tree.parent_[static_cast<std::size_t>(c)] != id) malformed("child/parent mismatch");
                const double w = tree.weight_[static_cast<std::size_t>(c)];
                if (!(w > 0.0) || !std::isfinite(w)) malformed("child weight must be positive");
                sum += w;
            }
            if (std::abs(sum - 1.0) > kWeightHardLimit) malformed("child weights must sum to 1");
            for (NodeId c = fc; c < fc + nc; ++c) tree.weight_[static_cast<std::size_t>(c)] /= sum;
        }
    }
    tree.parent_[0] = -1;
    tree.weight_[0] = 1.0;
    return tree;
}

ScenarioTree::Builder::Builder(int horizon, int aux_dim) : horizon_(horizon), aux_dim_(aux_dim) {
    if (horizon <= 0) malformed("horizon must be positive");
    if (aux_dim < 0) malformed("aux_dim must be >= 0");
}

ScenarioTree::NodeId ScenarioTree::Builder::add_root() {
    if (root_ != -1) malformed("root already added");
    root_ = static_cast<NodeId>(x_.size());
    x_.push_back(0.0);
    y_.insert(y_.end(), static_cast<std::size_t>(aux_dim_), 0.0);
    parent_.push_back(-1);
    weight_.push_back(1.0);
    children_.emplace_back();
    return root_;
}

ScenarioTree::NodeId ScenarioTree::Builder::add_child(NodeId parent, double weight, double x,
                                                      const Eigen::VectorXd& y) {
    if (parent < 0 || parent >= static_cast<NodeId>(x_.size())) malformed("invalid parent id");
    if (y.size() != aux_dim_) malformed("aux vector length mismatch");
    const NodeId id = static_cast<NodeId>(x_.size());
    x_.push_back(x);
    y_.insert(y_.end(), y.data(), y.data() + y.size());
    parent_.push_back(parent);
    weight_.push_back(weight);
    children_.emplace_back();
    children_[static_cast<std::size_t>(parent)].push_back(id);
    return id;
}

ScenarioTree::NodeId ScenarioTree::Builder::add_child(NodeId parent, double weight, double x) {
    return add_child(parent, weight, x, Eigen::VectorXd::Zero(aux_dim_));
}

ScenarioTree ScenarioTree::Builder::finish() {
    if (root_ == -1) malformed("no root");
    const std::int64_t n = static_cast<std::int64_t>(x_.size());

    // Breadth-first relayout so children end up contiguous and levels ordered.
    std::vector<std::int64_t> bfs;
    bfs.reserve(static_cast<std::size_t>(n));
    bfs.push_back(root_);
    for (std::size_t head = 0; head < bfs.size(); ++head) {
        for (std::int64_t c : children_[static_cast<std::size_t>(bfs[head])]) bfs.push_back(c);
    }
    if (static_cast<std::int64_t>(bfs.size()) != n) malformed("unreachable nodes");

    std::vector<std::int64_t> new_id(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) new_id[static_cast<std::size_t>(bfs[static_cast<std::size_t>(i)])] = i;

    std::vector<int> depth(static_cast<std::size_t>(n), 0);
    std::vector<double> x(static_cast<std::size_t>(n));
    std::vector<double> y(static_cast<std::size_t>(n) * static_cast<std::size_t>(aux_dim_));
    std::vector<std::int64_t> parent(static_cast<std::size_t>(n));
    std::vector<std::int64_t> first_child(static_cast<std::size_t>(n), -1);
    std::vector<std::int32_t> child_count(static_cast<std::size_t>(n), 0);
    std::vector<double> weight(static_cast<std::size_t>(n));

    for (std::int64_t i = 0; i < n; ++i) {
        const auto old_id = static_cast<std::size_t>(bfs[static_cast<std::size_t>(i)]);
        const auto ni = static_cast<std::size_t>(i);
        x[ni] = x_[old_id];
        for (int j = 0; j < aux_dim_; ++j)
            y[ni * static_cast<std::size_t>(aux_dim_) + static_cast<std::size_t>(j)] =
                y_[old_id * static_cast<std::size_t>(aux_dim_) + static_cast<std::size_t>(j)];
        weight[ni] = weight_[old_id];
        const std::int64_t op = parent_[old_id];
        parent[ni] = op == -1 ? -1 : new_id[static_cast<std::size_t>(op)];
        if (op != -1) {
            depth[ni] = depth[static_cast<std::size_t>(parent[ni])] + 1;
            if (depth[ni] > horizon_) malformed("node deeper than horizon");
        }
        const auto& kids = children_[old_id];
        child_count[ni] = static_cast<std::int32_t>(kids.size());
        if (!kids.empty()) first_child[ni] = new_id[static_cast<std::size_t>(kids.front())];
    }

    std::vector<std::int64_t> level_offsets(static_cast<std::size_t>(horizon_) + 2, 0);
    for (std::int64_t i = 0; i < n; ++i)
        level_offsets[static_cast<std::size_t>(depth[static_cast<std::size_t>(i)]) + 1]++;
    for (std::size_t t = 1; t < level_offsets.size(); ++t) level_offsets[t] += level_offsets[t - 1];

    // BFS order visits levels in order, so offsets are consistent by
    // construction; from_arrays re-checks everything else.
    return from_arrays(horizon_, aux_dim_, std::move(level_offsets), std::move(x), std::move(y),
                       std::move(parent), std::move(first_child), std::move(child_count),
                       std::move(weight));
}

ValuationResult backward_value(const ScenarioTree& tree, const ValuationSchedule& schedule,
                               int workers) {
    if (schedule.horizon() != tree.horizon())
        throw std::invalid_argument("backward_value: schedule length must equal tree horizon");
    const std::int64_t n = tree.node_count();
    ValuationResult result;
    result.node_values = Eigen::VectorXd::Zero(n);
    result.psi_values = Eigen::VectorXd::Zero(n);

    for (int t = tree.horizon() - 1; t >= 0; --t) {
        const OneStepMapping& phi = schedule.at(t);
        parallel_for(tree.level_begin(t), tree.level_end(t), workers, [&](std::int64_t id) {
            const std::int32_t nc = tree.child_count(id);
            const ScenarioTree::NodeId fc = tree.first_child(id);
            Eigen::VectorXd values(nc);
            Eigen::VectorXd weights(nc);
            for (std::int32_t k = 0; k < nc; ++k) {
                const ScenarioTree::NodeId c = fc + k;
                values[k] = tree.x(c) + result.node_values[c];
                weights[k] = tree.weight(c);
            }
            result.node_values[id] = apply_mapping(phi, WeightedSample(std::move(values), std::move(weights)));
        });
    }
    result.v0 = result.node_values[tree.root()];

    // psi_t = path sum of x up to the node plus V_t; computed level by level.
    for (int t = 0; t <= tree.horizon(); ++t) {
        parallel_for(tree.level_begin(t), tree.level_end(t), workers, [&](std::int64_t id) {
            const ScenarioTree::NodeId p = tree.parent(id);
            const double path = p < 0 ? 0.0 : result.psi_values[p] - result.node_values[p];
            result.psi_values[id] = path + tree.x(id) + result.node_values[id];
        });
    }
    // root has no increment of its own
    result.psi_values[tree.root()] = result.node_values[tree.root()];
    return result;
}

ScenarioTree affine_transform(const ScenarioTree& tree, double a, const Eigen::VectorXd& b) {
    if (a < 0.0) throw std::invalid_argument("affine_transform: a must be >= 0");
    if (b.size() != tree.horizon())
        throw std::invalid_argument("affine_transform: b must have length equal to the horizon");
    const std::int64_t n = tree.node_count();
    std::vector<std::int64_t> level_offsets;
    std::vector<double> x(static_cast<std::size_t>(n));
    std::vector<double> y(static_cast<std::size_t>(n) * static_cast<std::size_t>(tree.aux_dim()));
    std::vector<std::int64_t> parent(static_cast<std::size_t>(n));
    std::vector<std::int64_t> first_child(static_cast<std::size_t>(n));
    std::vector<std::int32_t> child_count(static_cast<std::size_t>(n));
    std::vector<double> weight(static_cast<std::size_t>(n));
    level_offsets.reserve(static_cast<std::size_t>(tree.horizon()) + 2);
    for (int t = 0; t <= tree.horizon() + 1; ++t)
        level_offsets.push_back(t <= tree.horizon() ? tree.level_begin(t) : tree.node_count());
    for (std::int64_t id = 0; id < n; ++id) {
        const auto i = static_cast<std::size_t>(id);
        const int t = tree.depth(id);
        x[i] = t == 0 ? 0.0 : a * tree.x(id) + b[t - 1];
        for (int j = 0; j < tree.aux_dim(); ++j)
            y[i * static_cast<std::size_t>(tree.aux_dim()) + static_cast<std::size_t>(j)] = tree.y(id)[j];
        parent[i] = tree.parent(id);
        first_child[i] = tree.first_child(id);
        child_count[i] = tree.child_count(id);
        weight[i] = tree.weight(id);
    }
    return ScenarioTree::from_arrays(tree.horizon(), tree.aux_dim(), std::move(level_offsets),
                                     std::move(x), std::move(y), std::move(parent),
                                     std::move(first_child), std::move(child_count), std::move(weight));
}

WeightedSample path_law(const ScenarioTree& tree, ScenarioTree::NodeId node) {
    if (node < 0 || node >= tree.node_count()) throw std::invalid_argument("path_law: invalid node id");
    std::vector<double> sums;
    std::vector<double> probs;
    // iterative DFS carrying (node, partial sum below the start node, prob)
    struct Frame {
        ScenarioTree::NodeId id;
        double sum;
        double prob;
    };
    std::vector<Frame> stack{{node, 0.0, 1.0}};
    while (!stack.empty()) {
        const Frame f = stack.back();
        stack.pop_back();
        const std::int32_t nc = tree.child_count(f.id);
        if (nc == 0) {
            sums.push_back(f.sum);
            probs.push_back(f.prob);
            continue;
        }
        const ScenarioTree::NodeId fc = tree.first_child(f.id);
        for (std::int32_t k = nc - 1; k >= 0; --k) {
            const ScenarioTree::NodeId c = fc + k;
            stack.push_back({c, f.sum + tree.x(c), f.prob * tree.weight(c)});
        }
    }
    return WeightedSample(
        Eigen::Map<const Eigen::VectorXd>(sums.data(), static_cast<Eigen::Index>(sums.size())),
        Eigen::Map<const Eigen::VectorXd>(probs.data(), static_cast<Eigen::Index>(probs.size())));
}

void dump_tree(const ScenarioTree& tree, std::ostream& out) {
    out << "mpvtree 1 " << tree.horizon() << ' ' << tree.aux_dim() << ' ' << tree.node_count() << '\n';
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (ScenarioTree::NodeId id = 0; id < tree.node_count(); ++id) {
        out << id << ' ' << tree.parent(id) << ' ' << tree.weight(id) << ' ' << tree.x(id);
        for (int j = 0; j < tree.aux_dim(); ++j) out << ' ' << tree.y(id)[j];
        out << '\n';
    }
}

void dump_tree(const ScenarioTree& tree, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("dump_tree: cannot open " + path);
    dump_tree(tree, out);
}

ScenarioTree load_tree(std::istream& in) {
    std::string magic;
    int version = 0, horizon = 0, aux_dim = 0;
    std::int64_t n = 0;
    in >> magic >> version >> horizon >> aux_dim >> n;
    if (!in || magic != "mpvtree" || version != 1) malformed("bad tree file header");
    if (n <= 0) malformed("bad node count");

    struct Record {
        std::int64_t parent;
        double weight;
        double x;
        Eigen::VectorXd y;
        bool seen = false;
    };
    std::vector<Record> records(static_cast<std::size_t>(n));
    for (std::int64_t row = 0; row < n; ++row) {
        std::int64_t id = 0, parent = 0;
        double weight = 0.0, x = 0.0;
        in >> id >> parent >> weight >> x;
        if (!in) malformed("truncated tree file");
        if (id < 0 || id >= n) malformed("node id out of range");
        Record& r = records[static_cast<std::size_t>(id)];
        if (r.seen) malformed("duplicate node id");
        r.seen = true;
        r.parent = parent;
        r.weight = weight;
        r.x = x;
        r.y.resize(aux_dim);
        for (int j = 0; j < aux_dim; ++j) in >> r.y[j];
        if (!in) malformed("truncated tree file");
    }

    ScenarioTree::Builder builder(horizon, aux_dim);
    // ids become builder ids through a first pass that inserts in id order;
    // parents must therefore have smaller ids than their children.
    std::vector<ScenarioTree::NodeId> mapped(static_cast<std::size_t>(n), -1);
    for (std::int64_t id = 0; id < n; ++id) {
        const Record& r = records[static_cast<std::size_t>(id)];
        if (r.parent == -1) {
            mapped[static_cast<std::size_t>(id)] = builder.add_root();
        } else {
            if (r.parent < 0 || r.parent >= n || mapped[static_cast<std::size_t>(r.parent)] == -1)
                malformed("parent must precede child in tree file");
            mapped[static_cast<std::size_t>(id)] =
                builder.add_child(mapped[static_cast<std::size_t>(r.parent)], r.weight, r.x, r.y);
        }
    }
    return builder.finish();
}

ScenarioTree load_tree(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_tree: cannot open " + path);
    return load_tree(in);
}

}  // namespace mpval

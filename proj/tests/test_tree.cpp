#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <sstream>
#include <vector>

#include "mpval/rng.hpp"
#include "mpval/scenario_tree.hpp"

using namespace mpval;

namespace {

ScenarioTree two_child_tree() {
    ScenarioTree::Builder builder(1, 0);
    const auto root = builder.add_root();
    builder.add_child(root, 0.5, -1.0);
    builder.add_child(root, 0.5, 1.0);
    return builder.finish();
}

/// Random tree with 1..3 children per node and zero-d aux.
ScenarioTree random_tree(KeyedRng& rng, int horizon) {
    ScenarioTree::Builder builder(horizon, 0);
    std::vector<ScenarioTree::NodeId> frontier{builder.add_root()};
    for (int t = 0; t < horizon; ++t) {
        std::vector<ScenarioTree::NodeId> next;
        for (const auto node : frontier) {
            const int children = 1 + static_cast<int>(rng.uniform() * 3);
            Eigen::VectorXd weights(children);
            for (int k = 0; k < children; ++k) weights[k] = 0.2 + rng.uniform();
            weights /= weights.sum();
            for (int k = 0; k < children; ++k)
                next.push_back(builder.add_child(node, weights[k], 2.0 * rng.normal()));
        }
        frontier = std::move(next);
    }
    return builder.finish();
}

ValuationSchedule quantile_schedule(int horizon) {
    std::vector<OneStepMapping> ms;
    for (int t = 0; t < horizon; ++t) {
        if (t % 2 == 0)
            ms.push_back(OneStepMapping::cost_of_capital(0.06, SpectralMeasure::point_mass(0.8)));
        else
            ms.push_back(OneStepMapping::coc_limited_liability(0.1, SpectralMeasure::tail_uniform(0.3)));
    }
    return ValuationSchedule(std::move(ms));
}

}  // namespace

TEST_CASE("two-child tree reproduces the one-step mapping value") {
    const ScenarioTree tree = two_child_tree();
    const ValuationSchedule schedule = ValuationSchedule::repeat(
        OneStepMapping::cost_of_capital(0.1, SpectralMeasure::point_mass(0.75)), 1);
    const ValuationResult result = backward_value(tree, schedule);
    CHECK(result.v0 == doctest::Approx(1.0 / 11.0).epsilon(1e-12));
    CHECK(result.node_values[1] == 0.0);  // leaves carry no value
    CHECK(result.node_values[2] == 0.0);
}

TEST_CASE("deterministic chain collapses to the sum of increments") {
    const Eigen::Vector3d b(0.7, -1.3, 2.1);
    ScenarioTree::Builder builder(3, 0);
    auto node = builder.add_root();
    for (int t = 0; t < 3; ++t) node = builder.add_child(node, 1.0, b[t]);
    const ScenarioTree tree = builder.finish();
    for (const auto& schedule :
         {quantile_schedule(3), ValuationSchedule::repeat(OneStepMapping::mean_std(2.0), 3)}) {
        CHECK(backward_value(tree, schedule).v0 == doctest::Approx(b.sum()).epsilon(1e-12));
    }
}

TEST_CASE("zero-loading mean-std values the expected path sum") {
    KeyedRng rng(3, 0);
    const ScenarioTree tree = random_tree(rng, 3);
    const ValuationSchedule schedule = ValuationSchedule::repeat(OneStepMapping::mean_std(0.0), 3);
    const double expected = path_law(tree, tree.root()).mean();
    CHECK(backward_value(tree, schedule).v0 == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("affine transform") {
    KeyedRng rng(5, 1);
    const ScenarioTree tree = random_tree(rng, 3);
    const ValuationSchedule schedule = quantile_schedule(3);
    const double v0 = backward_value(tree, schedule).v0;

    SUBCASE("identity") {
        const ScenarioTree same = affine_transform(tree, 1.0, Eigen::Vector3d::Zero());
        CHECK(backward_value(same, schedule).v0 == v0);
    }
    SUBCASE("a = 0 gives the deterministic sum") {
        const Eigen::Vector3d b(0.4, 1.1, -0.6);
        const ScenarioTree flat = affine_transform(tree, 0.0, b);
        CHECK(backward_value(flat, schedule).v0 == doctest::Approx(b.sum()).epsilon(1e-12));
    }
    SUBCASE("a = 2, b = 1 scales and shifts") {
        const ScenarioTree scaled = affine_transform(tree, 2.0, Eigen::Vector3d::Ones());
        CHECK(backward_value(scaled, schedule).v0 == doctest::Approx(2.0 * v0 + 3.0).epsilon(1e-11));
    }
    SUBCASE("input validation") {
        CHECK_THROWS_AS(affine_transform(tree, -1.0, Eigen::Vector3d::Zero()), std::invalid_argument);
        CHECK_THROWS_AS(affine_transform(tree, 1.0, Eigen::Vector2d::Zero()), std::invalid_argument);
    }
}

TEST_CASE("affine equivariance holds at every node") {
    KeyedRng rng(7, 2);
    for (int trial = 0; trial < 100; ++trial) {
        const ScenarioTree tree = random_tree(rng, 3);
        const double a = 2.0 * rng.uniform();
        Eigen::Vector3d b;
        for (int t = 0; t < 3; ++t) b[t] = 2.0 * rng.normal();
        const ValuationSchedule schedule = quantile_schedule(3);
        const ValuationResult base = backward_value(tree, schedule);
        const ValuationResult shifted = backward_value(affine_transform(tree, a, b), schedule);
        for (ScenarioTree::NodeId id = 0; id < tree.node_count(); ++id) {
            const int t = tree.depth(id);
            double tail = 0.0;
            for (int s = t + 1; s <= 3; ++s) tail += b[s - 1];
            CHECK(shifted.node_values[id] ==
                  doctest::Approx(a * base.node_values[id] + tail).epsilon(1e-9));
        }
    }
}

TEST_CASE("psi recursion identity and leaf condition") {
    KeyedRng rng(11, 3);
    const ScenarioTree tree = random_tree(rng, 4);
    const ValuationSchedule schedule = quantile_schedule(4);
    const ValuationResult result = backward_value(tree, schedule);

    // leaves: V_T = 0 and psi equals the path sum of x
    for (auto id = tree.level_begin(4); id < tree.level_end(4); ++id) {
        CHECK(result.node_values[id] == 0.0);
        double path = 0.0;
        for (auto node = id; node != tree.root(); node = tree.parent(node)) path += tree.x(node);
        CHECK(result.psi_values[id] == doctest::Approx(path).epsilon(1e-12));
    }

    // interior: psi_t is the phi_t image of the children's psi_{t+1}
    for (int t = 0; t < 4; ++t) {
        for (auto id = tree.level_begin(t); id < tree.level_end(t); ++id) {
            const int nc = tree.child_count(id);
            Eigen::VectorXd values(nc), weights(nc);
            for (int k = 0; k < nc; ++k) {
                values[k] = result.psi_values[tree.first_child(id) + k];
                weights[k] = tree.weight(tree.first_child(id) + k);
            }
            const double phi = apply_mapping(schedule.at(t), WeightedSample(values, weights));
            CHECK(result.psi_values[id] == doctest::Approx(phi).epsilon(1e-12));
        }
    }
}

TEST_CASE("psi is bounded by the mapping constant times the child mean") {
    KeyedRng rng(13, 4);
    for (int trial = 0; trial < 25; ++trial) {
        const ScenarioTree tree = random_tree(rng, 3);
        const ValuationSchedule schedule = quantile_schedule(3);
        const ValuationResult result = backward_value(tree, schedule);
        for (int t = 0; t < 3; ++t) {
            const double c = *l1_bound_constant(schedule.at(t));
            for (auto id = tree.level_begin(t); id < tree.level_end(t); ++id) {
                double child_abs_mean = 0.0;
                for (int k = 0; k < tree.child_count(id); ++k) {
                    const auto cid = tree.first_child(id) + k;
                    child_abs_mean += tree.weight(cid) * std::abs(result.psi_values[cid]);
                }
                CHECK(std::abs(result.psi_values[id]) <= c * child_abs_mean + 1e-10);
            }
        }
    }
}

TEST_CASE("valuation is bit-identical for any worker count") {
    KeyedRng rng(17, 5);
    const ScenarioTree tree = random_tree(rng, 4);
    const ValuationSchedule schedule = quantile_schedule(4);
    const ValuationResult serial = backward_value(tree, schedule, 1);
    const ValuationResult parallel = backward_value(tree, schedule, 3);
    CHECK(serial.v0 == parallel.v0);
    for (ScenarioTree::NodeId id = 0; id < tree.node_count(); ++id) {
        CHECK(serial.node_values[id] == parallel.node_values[id]);
        CHECK(serial.psi_values[id] == parallel.psi_values[id]);
    }
}

TEST_CASE("path law") {
    const ScenarioTree tree = two_child_tree();
    SUBCASE("root law lists the leaf sums") {
        const WeightedSample law = path_law(tree, tree.root());
        CHECK(law.sorted_values()[0] == -1.0);
        CHECK(law.sorted_values()[1] == 1.0);
        CHECK(law.sorted_weights()[0] == doctest::Approx(0.5));
    }
    SUBCASE("a leaf is a point mass at zero") {
        const WeightedSample law = path_law(tree, 1);
        CHECK(law.size() == 1);
        CHECK(law.values()[0] == 0.0);
        CHECK(law.weights()[0] == 1.0);
    }
    SUBCASE("leaf probabilities multiply along branches and sum to one") {
        KeyedRng rng(19, 6);
        const ScenarioTree big = random_tree(rng, 3);
        const WeightedSample law = path_law(big, big.root());
        CHECK(law.weights().sum() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(static_cast<std::int64_t>(law.size()) == big.level_end(3) - big.level_begin(3));
        // spot-check one leaf probability
        const auto leaf = big.level_begin(3);
        double p = 1.0;
        for (auto node = leaf; node != big.root(); node = big.parent(node)) p *= big.weight(node);
        bool found = false;
        for (Eigen::Index i = 0; i < law.size(); ++i)
            found = found || std::abs(law.weights()[i] - p) < 1e-12;
        CHECK(found);
    }
    SUBCASE("invalid node id") {
        CHECK_THROWS_AS(path_law(tree, 99), std::invalid_argument);
    }
}

TEST_CASE("serialization round trip") {
    KeyedRng rng(23, 7);
    const ScenarioTree tree = random_tree(rng, 3);
    std::ostringstream first;
    dump_tree(tree, first);
    std::istringstream in(first.str());
    const ScenarioTree loaded = load_tree(in);
    std::ostringstream second;
    dump_tree(loaded, second);
    CHECK(first.str() == second.str());

    const ValuationSchedule schedule = quantile_schedule(3);
    CHECK(backward_value(tree, schedule).v0 == backward_value(loaded, schedule).v0);
}

TEST_CASE("malformed trees are rejected") {
    SUBCASE("schedule length mismatch") {
        const ScenarioTree tree = two_child_tree();
        CHECK_THROWS_AS(
            backward_value(tree, ValuationSchedule::repeat(OneStepMapping::mean_std(1.0), 2)),
            std::invalid_argument);
    }
    SUBCASE("leaf above the horizon") {
        ScenarioTree::Builder builder(2, 0);
        const auto root = builder.add_root();
        builder.add_child(root, 1.0, 0.0);  // depth 1 leaf in a T=2 tree
        CHECK_THROWS_AS(builder.finish(), std::invalid_argument);
    }
    SUBCASE("node deeper than the horizon") {
        ScenarioTree::Builder builder(1, 0);
        const auto root = builder.add_root();
        const auto child = builder.add_child(root, 1.0, 0.0);
        builder.add_child(child, 1.0, 0.0);
        CHECK_THROWS_AS(builder.finish(), std::invalid_argument);
    }
    SUBCASE("child weights off by more than the hard limit") {
        ScenarioTree::Builder builder(1, 0);
        const auto root = builder.add_root();
        builder.add_child(root, 0.4, -1.0);
        builder.add_child(root, 0.4, 1.0);
        CHECK_THROWS_AS(builder.finish(), std::invalid_argument);
    }
    SUBCASE("no root") {
        ScenarioTree::Builder builder(1, 0);
        CHECK_THROWS_AS(builder.finish(), std::invalid_argument);
    }
    SUBCASE("bad file header") {
        std::istringstream in("nottree 1 1 0 1\n0 -1 1 0\n");
        CHECK_THROWS_AS(load_tree(in), std::invalid_argument);
    }
}

#include "mpval/ordering.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mpval/parallel.hpp"

namespace mpval {

namespace {

constexpr double kSimplexTolerance = 1e-12;

/// Enumerates compositions of `units` into the trailing coordinates of grid
/// starting at position pos, calling visit(grid) for each complete profile.
template <typename Visit>
void enumerate_compositions(std::vector<int>& grid, std::size_t pos, int units, Visit&& visit) {
    if (pos + 1 == grid.size()) {
        grid[pos] = units;
        visit(grid);
        return;
    }
    for (int k = units; k >= 0; --k) {
        grid[pos] = k;
        enumerate_compositions(grid, pos + 1, units - k, visit);
    }
}

Eigen::MatrixXd x_block_cov(const GaussianModel& m) {
    Eigen::MatrixXd out(m.horizon(), m.horizon());
    for (int t = 1; t <= m.horizon(); ++t)
        for (int s = 1; s <= m.horizon(); ++s) out(t - 1, s - 1) = m.cov()(m.x_index(t), m.x_index(s));
    return out;
}

Eigen::VectorXd x_block_mean(const GaussianModel& m) {
    Eigen::VectorXd out(m.horizon());
    for (int t = 1; t <= m.horizon(); ++t) out[t - 1] = m.mean()[m.x_index(t)];
    return out;
}

}  // namespace

DeltaProfile::DeltaProfile(Eigen::VectorXd c) : c_(std::move(c)) {
    if (c_.size() == 0) throw std::invalid_argument("DeltaProfile: empty profile");
    if ((c_.array() < 0.0).any()) throw std::invalid_argument("DeltaProfile: entries must be >= 0");
    if (std::abs(c_.sum() - 1.0) > kSimplexTolerance)
        throw std::invalid_argument("DeltaProfile: entries must sum to 1");
}

bool DeltaProfile::nonincreasing() const {
    for (int t = 0; t + 1 < size(); ++t)
        if (c_[t + 1] > c_[t] + kSimplexTolerance) return false;
    return true;
}

double objective(const DeltaProfile& c) { return c.c().array().sqrt().sum(); }

bool is_majorized_feasible(const DeltaProfile& d, const DeltaProfile& c) {
    if (d.size() != c.size()) throw std::invalid_argument("is_majorized_feasible: length mismatch");
    double pd = 0.0, pc = 0.0;
    for (int t = 0; t < d.size(); ++t) {
        pd += d.c()[t];
        pc += c.c()[t];
        if (pd < pc - kSimplexTolerance) return false;
    }
    return true;
}

LemmaCheckReport lemma_check(const DeltaProfile& c, double grid_step, int workers) {
    const int horizon = c.size();
    if (horizon > 5) throw std::invalid_argument("lemma_check: grid enumeration supports T <= 5");
    const double inv = 1.0 / grid_step;
    const int units = static_cast<int>(std::lround(inv));
    if (!(grid_step > 0.0) || std::abs(units * grid_step - 1.0) > 1e-9)
        throw std::invalid_argument("lemma_check: grid_step must divide 1");

    LemmaCheckReport report;
    report.hypothesis_ok = c.nonincreasing();

    // Prefix-sum targets in grid units, with a slack for rounding of c.
    Eigen::VectorXd c_prefix(horizon);
    double acc = 0.0;
    for (int t = 0; t < horizon; ++t) {
        acc += c.c()[t];
        c_prefix[t] = acc;
    }

    struct Best {
        double value = -1.0;
        std::vector<int> grid;
    };
    // Parallel over the leading coordinate; each slot is reduced sequentially
    // afterwards, so the result does not depend on the worker count.
    std::vector<Best> best_per_lead(static_cast<std::size_t>(units) + 1);
    parallel_for(0, units + 1, workers, [&](std::int64_t lead) {
        Best& best = best_per_lead[static_cast<std::size_t>(lead)];
        std::vector<int> grid(static_cast<std::size_t>(horizon), 0);
        grid[0] = static_cast<int>(lead);
        if (horizon == 1) {
            if (lead != units) return;
        }
        auto consider = [&](const std::vector<int>& g) {
            double prefix = 0.0;
            for (int t = 0; t < horizon; ++t) {
                prefix += g[static_cast<std::size_t>(t)] * grid_step;
                if (prefix < c_prefix[t] - 1e-12) return;
            }
            double value = 0.0;
            for (int t = 0; t < horizon; ++t)
                value += std::sqrt(g[static_cast<std::size_t>(t)] * grid_step);
            if (value > best.value || (value == best.value && (best.grid.empty() || g < best.grid))) {
                best.value = value;
                best.grid = g;
            }
        };
        if (horizon == 1) {
            consider(grid);
        } else {
            enumerate_compositions(grid, 1, units - static_cast<int>(lead), consider);
        }
    });

    Best overall;
    for (const Best& b : best_per_lead) {
        if (b.value < 0.0) continue;
        if (b.value > overall.value || (b.value == overall.value && (overall.grid.empty() || b.grid < overall.grid))) {
            overall = b;
        }
    }
    report.max_found = overall.value;
    report.argmax = Eigen::VectorXd::Zero(horizon);
    for (int t = 0; t < horizon; ++t)
        report.argmax[t] = overall.grid.empty() ? 0.0 : overall.grid[static_cast<std::size_t>(t)] * grid_step;
    report.c_is_max = objective(c) >= report.max_found - 1e-12;
    return report;
}

FiltrationComparison compare_filtrations(const GaussianModel& model_f, const GaussianModel& model_g,
                                         const OneStepMapping& mapping) {
    if (model_f.horizon() != model_g.horizon())
        throw std::invalid_argument("compare_filtrations: horizons differ");
    const Eigen::MatrixXd cov_f = x_block_cov(model_f);
    const Eigen::MatrixXd cov_g = x_block_cov(model_g);
    const double scale = std::max({cov_f.cwiseAbs().maxCoeff(), cov_g.cwiseAbs().maxCoeff(), 1.0});
    if ((cov_f - cov_g).cwiseAbs().maxCoeff() > 1e-10 * scale ||
        (x_block_mean(model_f) - x_block_mean(model_g)).cwiseAbs().maxCoeff() > 1e-10)
        throw std::invalid_argument("compare_filtrations: models must share the X marginal");

    const int horizon = model_f.horizon();
    const ValuationSchedule schedule = ValuationSchedule::repeat(mapping, horizon);

    FiltrationComparison cmp;
    cmp.phi0 = mapping_of_standard_normal(mapping);
    cmp.v0_f = limit_value(model_f, schedule);
    cmp.v0_g = limit_value(model_g, schedule);

    const VarianceSchedule vs_f = variance_schedule(model_f);
    const VarianceSchedule vs_g = variance_schedule(model_g);
    if (vs_f.total > 0.0) {
        cmp.profile_f = vs_f.deltas / vs_f.total;
        cmp.profile_g = vs_g.deltas / vs_g.total;
    } else {
        cmp.profile_f = Eigen::VectorXd::Zero(horizon);
        cmp.profile_g = Eigen::VectorXd::Zero(horizon);
    }

    cmp.convexity_holds = true;
    for (int t = 0; t + 1 < horizon; ++t)
        if (cmp.profile_f[t + 1] > cmp.profile_f[t] + 1e-10) cmp.convexity_holds = false;
    cmp.prefix_domination_holds = true;
    double pf = 0.0, pg = 0.0;
    for (int t = 0; t < horizon; ++t) {
        pf += cmp.profile_f[t];
        pg += cmp.profile_g[t];
        if (pg < pf - 1e-10) cmp.prefix_domination_holds = false;
    }
    cmp.ordering_holds = cmp.v0_f >= cmp.v0_g - 1e-10;
    return cmp;
}

}  // namespace mpval

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mpval/mappings.hpp"
#include "mpval/scenario_tree.hpp"

namespace mpval {

/// Gaussian law of the stacked vector (X, Y) in time-blocked coordinate order
/// (x_1, y_1.., x_2, y_2.., ..., x_T, y_T..), so that conditioning sets for
/// time prefixes are contiguous index ranges.
class GaussianModel {
  public:
    GaussianModel(int horizon, int aux_dim, Eigen::VectorXd mean, Eigen::MatrixXd cov);

    int horizon() const { return horizon_; }
    int aux_dim() const { return aux_dim_; }
    int block_size() const { return 1 + aux_dim_; }
    int dim() const { return horizon_ * block_size(); }

    const Eigen::VectorXd& mean() const { return mean_; }
    const Eigen::MatrixXd& cov() const { return cov_; }

    /// Flat index of x_t, t in 1..T.
    int x_index(int t) const { return (t - 1) * block_size(); }
    /// Number of coordinates revealed up to and including time t.
    int prefix_size(int t) const { return t * block_size(); }

    /// E[sum_t X_t].
    double mean_x_total() const;
    /// Coefficient vector of sum_{u=t}^T X_u as a linear functional of (X,Y).
    Eigen::VectorXd tail_sum_coefficients(int t) const;

    void save(std::ostream& out) const;
    void save(const std::string& path) const;
    static GaussianModel load(std::istream& in);
    static GaussianModel load(const std::string& path);

  private:
    int horizon_;
    int aux_dim_;
    Eigen::VectorXd mean_;
    Eigen::MatrixXd cov_;
};

/// Nonrandom conditional-variance decrements of the aggregate cashflow:
/// deltas[t-1] = Var(sum_{u>=t} X_u | Z_{<=t-1}) - Var(sum_{u>=t} X_u | Z_{<=t}).
struct VarianceSchedule {
    Eigen::VectorXd deltas;
    /// Unconditional Var(sum_t X_t); equals deltas.sum() by telescoping.
    double total = 0.0;
};

/// Var(S | coordinates in `conditioning`) for S = target_coeffs' (X,Y), via a
/// symmetric eigen pseudoinverse of the conditioning block (relative cutoff
/// 1e-10). Independent of the model mean.
double conditional_variance(const GaussianModel& model, const Eigen::VectorXd& target_coeffs,
                            const std::vector<int>& conditioning);

VarianceSchedule variance_schedule(const GaussianModel& model);

/// Closed-form limit value: E[sum X_t] + sum_t phi_{t-1}(eps) sqrt(deltas[t-1]).
double limit_value(const GaussianModel& model, const ValuationSchedule& schedule);

struct ConditionalLaw {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

/// Law of (x_{t+1}, y_{t+1}) given the realized history (x, y)_{<=t}; history
/// is the stacked realization of the first t blocks (t may be 0). The
/// conditional covariance depends only on t, the mean is affine in history.
ConditionalLaw conditional_law(const GaussianModel& model, const Eigen::VectorXd& history);

/// Samples a scenario tree with branching[t] children per depth-t node, drawn
/// iid from the exact one-step conditional law. Node streams are keyed by the
/// path, so the tree is reproducible for any traversal or thread order.
ScenarioTree build_tree(const GaussianModel& model, const std::vector<int>& branching,
                        std::uint64_t seed, int workers = 0);

}  // namespace mpval

#pragma once

#include <Eigen/Core>

namespace mpval {

/// Finite weighted empirical distribution. Weights are normalized to sum to
/// one at construction; a sorted view with duplicate values merged and
/// cumulative weights precomputed is kept alongside the raw data. Immutable
/// after construction and safe to share across threads.
class WeightedSample {
  public:
    WeightedSample(Eigen::VectorXd values, Eigen::VectorXd weights);

    /// Equal weights 1/n.
    explicit WeightedSample(Eigen::VectorXd values);

    Eigen::Index size() const { return values_.size(); }
    const Eigen::VectorXd& values() const { return values_; }
    const Eigen::VectorXd& weights() const { return weights_; }

    /// Sorted view: strictly increasing values, tied entries merged.
    const Eigen::VectorXd& sorted_values() const { return sorted_values_; }
    const Eigen::VectorXd& sorted_weights() const { return sorted_weights_; }
    /// Cumulative weights of the sorted view; last entry is exactly 1.
    const Eigen::VectorXd& cumulative() const { return cumulative_; }

    double mean() const;
    /// Population standard deviation (weights are an exact law, not a sample).
    double stdev() const;
    double abs_mean() const;

    /// Distribution of -Y; reuses the sorted view by reversal.
    WeightedSample negated() const;

    /// Distribution of a*Y + b, a >= 0.
    WeightedSample affine(double a, double b) const;

  private:
    struct presorted_tag {};
    WeightedSample(presorted_tag, Eigen::VectorXd values, Eigen::VectorXd weights,
                   Eigen::VectorXd sorted_values, Eigen::VectorXd sorted_weights);

    Eigen::VectorXd values_;
    Eigen::VectorXd weights_;
    Eigen::VectorXd sorted_values_;
    Eigen::VectorXd sorted_weights_;
    Eigen::VectorXd cumulative_;
};

/// Generalized inverse min{m : F(m) >= p}, exact on the merged sorted view.
double quantile(const WeightedSample& sample, double p);

}  // namespace mpval

#pragma once

#include <vector>

#include <Eigen/Core>

#include "mpval/gaussian_model.hpp"
#include "mpval/mappings.hpp"

namespace mpval {

/// Normalized variance decrements: a point of the simplex.
class DeltaProfile {
  public:
    explicit DeltaProfile(Eigen::VectorXd c);

    int size() const { return static_cast<int>(c_.size()); }
    const Eigen::VectorXd& c() const { return c_; }
    bool nonincreasing() const;

  private:
    Eigen::VectorXd c_;
};

/// sum_t sqrt(c_t).
double objective(const DeltaProfile& c);

/// True iff every prefix sum of d dominates the corresponding prefix sum of c.
bool is_majorized_feasible(const DeltaProfile& d, const DeltaProfile& c);

struct LemmaCheckReport {
    double max_found = 0.0;
    Eigen::VectorXd argmax;
    bool c_is_max = false;
    /// False when c violates the nonincreasing hypothesis; the enumeration
    /// still runs so the necessity of the hypothesis can be exhibited.
    bool hypothesis_ok = false;
};

/// Brute-force maximization of sum sqrt(d_t) over the grid of the simplex at
/// resolution grid_step, restricted to profiles whose prefix sums dominate c.
LemmaCheckReport lemma_check(const DeltaProfile& c, double grid_step, int workers = 0);

struct FiltrationComparison {
    double v0_f = 0.0;
    double v0_g = 0.0;
    double phi0 = 0.0;
    Eigen::VectorXd profile_f;
    Eigen::VectorXd profile_g;
    /// Convex decay of t -> Var(sum X | F_t), i.e. profile_f nonincreasing.
    bool convexity_holds = false;
    /// Prefix sums of G's profile dominate F's (the nested-information proxy).
    bool prefix_domination_holds = false;
    bool ordering_holds = false;
};

/// Compares closed-form values under two information structures sharing the
/// same X marginal, with a time-constant one-step mapping.
FiltrationComparison compare_filtrations(const GaussianModel& model_f, const GaussianModel& model_g,
                                         const OneStepMapping& mapping);

}  // namespace mpval

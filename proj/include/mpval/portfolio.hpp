#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "mpval/gaussian_model.hpp"
#include "mpval/mappings.hpp"
#include "mpval/rng.hpp"
#include "mpval/scenario_tree.hpp"

namespace mpval {

struct SeverityLaw {
    enum class Kind { Lognormal, Gamma };

    static SeverityLaw lognormal(double mu, double sigma);
    static SeverityLaw gamma(double shape, double scale);

    double mean() const;
    double second_moment() const;
    double sample(KeyedRng& rng) const;
    /// Density at z > 0; degenerate laws (sigma or scale zero) have none and
    /// are special-cased by the factor posterior.
    double density(double z) const;
    bool degenerate() const;
    /// The single atom of a degenerate law.
    double atom() const;

    Kind kind;
    double p1;  // lognormal: mu,    gamma: shape
    double p2;  // lognormal: sigma, gamma: scale
};

/// Per-claim lognormal multiplier acting on all of the claim's payments.
struct FactorLaw {
    double mu;
    double sigma;

    double mean() const;
    double second_moment() const;
    double sample(KeyedRng& rng) const;
};

/// Compound claims-runoff model: Poisson(n * intensity) claims; each claim
/// draws a delay from `delays`, a severity per payment, and an optional common
/// factor. With spread_theta < 1 a claim with delay d < T pays the fraction
/// theta at d and 1 - theta at d + 1 (separate severities, same factor);
/// claims with delay T pay once in full.
class PortfolioModel {
  public:
    PortfolioModel(int horizon, double intensity, Eigen::VectorXd delays, SeverityLaw severity,
                   std::optional<FactorLaw> factor = std::nullopt, double spread_theta = 1.0,
                   std::optional<Eigen::VectorXd> discount = std::nullopt);

    int horizon() const { return horizon_; }
    double intensity() const { return intensity_; }
    const Eigen::VectorXd& delays() const { return delays_; }
    const SeverityLaw& severity() const { return severity_; }
    const std::optional<FactorLaw>& factor() const { return factor_; }
    double spread_theta() const { return spread_theta_; }
    const Eigen::VectorXd& discount() const { return discount_; }

    /// Payment periods and undiscounted weights of one claim with the given
    /// delay (1-based periods).
    std::vector<std::pair<int, double>> payment_pattern(int delay) const;

    /// E[H_t]: expected discounted payment of a single claim per period.
    Eigen::VectorXd expected_claim_payment() const;
    /// E[G_t]: expected number of payments of a single claim per period.
    Eigen::VectorXd expected_claim_counts() const;

    int sample_delay(KeyedRng& rng) const;

  private:
    int horizon_;
    double intensity_;
    Eigen::VectorXd delays_;
    Eigen::VectorXd delay_cumulative_;
    SeverityLaw severity_;
    std::optional<FactorLaw> factor_;
    double spread_theta_;
    Eigen::VectorXd discount_;
};

/// Centering and scaling X^n = (C^n - b_n) / a_n with b_n = n lambda E[H] and
/// a_n = sqrt(n lambda).
struct ScalingPair {
    double a_n = 1.0;
    Eigen::VectorXd b_n;
};

struct CashflowSample {
    /// Discounted payments per period.
    Eigen::VectorXd c;
    /// Number of payments per period.
    Eigen::VectorXi counts;
    /// Number of claims drawn (equals counts.sum() when spread_theta == 1).
    std::int64_t claim_count = 0;
};

CashflowSample simulate_cashflow(const PortfolioModel& model, std::int64_t exposure,
                                 std::uint64_t seed);

ScalingPair clt_scaling(const PortfolioModel& model, std::int64_t exposure);

/// Zero-mean Gaussian limit of the scaled cashflow, with the scaled count
/// process as auxiliary information when include_counts is set (aux_dim 1,
/// otherwise 0). All moments are analytic in the model parameters.
GaussianModel gaussian_limit_of(const PortfolioModel& model, bool include_counts = true);

/// Nested-simulation scenario tree of the scaled process (X^n, Y^n). Children
/// are drawn by conditional resampling at claim level: first payments per
/// period are independent compound draws, pending second payments carry over,
/// and with a factor the per-claim factor posterior is approximated by
/// sampling-importance-resampling on 16 prior particles.
ScenarioTree build_portfolio_tree(const PortfolioModel& model, std::int64_t exposure,
                                  const std::vector<int>& branching, std::uint64_t seed,
                                  bool include_counts = false, int workers = 0);

struct EmpiricalValuation {
    /// V_0^n of the scaled process X^n from the nested tree.
    double v0_scaled = 0.0;
    /// V_0^n of the raw cashflow C^n, recovered by cash additivity.
    double v0_raw = 0.0;
    /// Closed-form limit value V_0(X) of the Gaussian limit.
    double limit_v0 = 0.0;
    /// a_n V_0(X) + sum_t b_{n,t}.
    double approx_raw = 0.0;
    /// |V_0^n(C^n) - approx_raw| / a_n = |v0_scaled - limit_v0|.
    double gap_normalized = 0.0;
    double a_n = 1.0;
    double b_total = 0.0;
};

EmpiricalValuation empirical_value(const PortfolioModel& model, std::int64_t exposure,
                                   const ValuationSchedule& schedule, const std::vector<int>& branching,
                                   std::uint64_t seed, bool include_counts = false, int workers = 0);

}  // namespace mpval

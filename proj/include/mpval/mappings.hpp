#pragma once

#include <optional>
#include <variant>
#include <vector>

#include "mpval/spectral_measure.hpp"
#include "mpval/weighted_sample.hpp"

namespace mpval {

/// Cost-of-capital acceptability: excess return eta, capital set by the
/// spectral risk measure rho of the provider's position.
struct CostOfCapital {
    double eta;
    SpectralMeasure rho;
};

/// Limited-liability family: value = r - gamma * E[((r - Y)^+)^beta]^(1/beta)
/// with r the rho-implied capital requirement. gamma = 1/(1+eta), beta = 1
/// recovers cost-of-capital with limited liability; gamma = 1 recovers the
/// power-utility criterion.
struct GeneralLimitedLiability {
    double gamma;
    double beta;
    SpectralMeasure rho;
};

/// Mean plus a multiple of the conditional standard deviation. Not monotone.
struct MeanStd {
    double c;
};

/// lambda * ∫F⁻¹_Y dmu1 + (1-lambda) * ∫F⁻¹_Y dmu2: a mixture of quantile
/// integrals of the payoff, with mu2 playing the role of the capital measure
/// rho(-Y). Cost of capital is mu1 = Lebesgue, lambda = 1/(1+eta).
struct QuantileMixture {
    double lambda;
    SpectralMeasure mu1;
    SpectralMeasure mu2;
};

/// One-step valuation operator phi_t: positively homogeneous and
/// conditionally cash additive in all variants.
class OneStepMapping {
  public:
    using Node = std::variant<CostOfCapital, GeneralLimitedLiability, MeanStd, QuantileMixture>;

    static OneStepMapping cost_of_capital(double eta, SpectralMeasure rho);
    static OneStepMapping general_limited_liability(double gamma, double beta, SpectralMeasure rho);
    /// gamma = 1/(1+eta), beta = 1.
    static OneStepMapping coc_limited_liability(double eta, SpectralMeasure rho);
    /// gamma = 1.
    static OneStepMapping power_utility(double beta, SpectralMeasure rho);
    static OneStepMapping mean_std(double c);
    static OneStepMapping quantile_mixture(double lambda, SpectralMeasure mu1, SpectralMeasure mu2);

    const Node& node() const { return node_; }

  private:
    explicit OneStepMapping(Node node) : node_(std::move(node)) {}
    Node node_;
};

/// phi(Y) for the one-step-ahead conditional law of Y = X_{t+1} + V_{t+1}.
double apply_mapping(const OneStepMapping& m, const WeightedSample& law);

/// phi(eps) for a standard normal eps, in closed form where available (exact
/// quantile integrals; the beta < 1 limited-liability case uses deterministic
/// Gauss-Legendre quadrature).
double mapping_of_standard_normal(const OneStepMapping& m);

/// Constant c with |phi(law)| <= c E|Y|, when one exists (quantile-based
/// variants); MeanStd admits only a second-moment bound and returns nullopt.
std::optional<double> l1_bound_constant(const OneStepMapping& m);

/// The family (phi_t) for t = 0..T-1.
class ValuationSchedule {
  public:
    explicit ValuationSchedule(std::vector<OneStepMapping> mappings);
    static ValuationSchedule repeat(const OneStepMapping& m, int horizon);

    int horizon() const { return static_cast<int>(mappings_.size()); }
    const OneStepMapping& at(int t) const { return mappings_.at(static_cast<std::size_t>(t)); }

  private:
    std::vector<OneStepMapping> mappings_;
};

}  // namespace mpval

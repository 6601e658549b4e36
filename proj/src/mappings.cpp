#include "mpval/mappings.hpp"

#include <cmath>
#include <stdexcept>

#include "mpval/normal.hpp"

namespace mpval {

namespace {

/// E[((r - eps)^+)^beta] for standard normal eps by composite Gauss-Legendre
/// on [-12, r]; the integrand is smooth and the tail below -12 is negligible.
double expected_shortfall_power(double r, double beta) {
    static constexpr int kPanels = 64;
    static constexpr int kNodesPerPanel = 16;
    // 16-point Gauss-Legendre abscissae/weights on [-1, 1] (positive half).
    static constexpr double kX[8] = {
        0.0950125098376374401853193, 0.2816035507792589132304605,
        0.4580167776572273863424194, 0.6178762444026437484466718,
        0.7554044083550030338951012, 0.8656312023878317438804679,
        0.9445750230732325760779884, 0.9894009349916499325961542};
    static constexpr double kW[8] = {
        0.1894506104550684962853967, 0.1826034150449235888667637,
        0.1691565193950025381893121, 0.1495959888165767320815017,
        0.1246289712555338720524763, 0.0951585116824927848099251,
        0.0622535239386478928628438, 0.0271524594117540948517806};
    const double lo = -12.0;
    if (r <= lo) return 0.0;
    const double panel_width = (r - lo) / kPanels;
    double total = 0.0;
    for (int p = 0; p < kPanels; ++p) {
        const double mid = lo + (p + 0.5) * panel_width;
        const double half = panel_width / 2.0;
        for (int j = 0; j < kNodesPerPanel / 2; ++j) {
            for (int sign = -1; sign <= 1; sign += 2) {
                const double z = mid + sign * half * kX[j];
                total += kW[j] * half * std::pow(r - z, beta) * normal_pdf(z);
            }
        }
    }
    return total;
}

void require_law(const WeightedSample& law) {
    if (law.size() == 0) throw std::invalid_argument("apply_mapping: empty law");
}

}  // namespace

OneStepMapping OneStepMapping::cost_of_capital(double eta, SpectralMeasure rho) {
    if (!(eta >= 0.0)) throw std::invalid_argument("cost_of_capital: eta must be >= 0");
    return OneStepMapping(CostOfCapital{eta, std::move(rho)});
}

OneStepMapping OneStepMapping::general_limited_liability(double gamma, double beta, SpectralMeasure rho) {
    if (!(gamma >= 0.0)) throw std::invalid_argument("general_limited_liability: gamma must be >= 0");
    if (!(beta > 0.0 && beta <= 1.0))
        throw std::invalid_argument("general_limited_liability: beta must lie in (0,1]");
    return OneStepMapping(GeneralLimitedLiability{gamma, beta, std::move(rho)});
}

OneStepMapping OneStepMapping::coc_limited_liability(double eta, SpectralMeasure rho) {
    if (!(eta >= 0.0)) throw std::invalid_argument("coc_limited_liability: eta must be >= 0");
    return general_limited_liability(1.0 / (1.0 + eta), 1.0, std::move(rho));
}

OneStepMapping OneStepMapping::power_utility(double beta, SpectralMeasure rho) {
    return general_limited_liability(1.0, beta, std::move(rho));
}

OneStepMapping OneStepMapping::mean_std(double c) {
    if (!(c >= 0.0)) throw std::invalid_argument("mean_std: c must be >= 0");
    return OneStepMapping(MeanStd{c});
}

OneStepMapping OneStepMapping::quantile_mixture(double lambda, SpectralMeasure mu1, SpectralMeasure mu2) {
    if (!(lambda >= 0.0 && lambda <= 1.0))
        throw std::invalid_argument("quantile_mixture: lambda must lie in [0,1]");
    return OneStepMapping(QuantileMixture{lambda, std::move(mu1), std::move(mu2)});
}

double apply_mapping(const OneStepMapping& m, const WeightedSample& law) {
    require_law(law);
    return std::visit(
        [&law](const auto& v) -> double {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, CostOfCapital>) {
                // capital requirement is the risk of the provider position -Y,
                // i.e. the quantile integral of +Y
                const double r = quantile_integral(law, v.rho);
                return (law.mean() + v.eta * r) / (1.0 + v.eta);
            } else if constexpr (std::is_same_v<T, GeneralLimitedLiability>) {
                const double r = quantile_integral(law, v.rho);
                // shortfalls below rounding noise are treated as zero; with
                // beta < 1 the power map would otherwise blow 1-ulp residues
                // at atoms sitting exactly on r up to (1e-16)^beta
                const double snap = 1e-12 * (1.0 + std::abs(r));
                double s = 0.0;
                for (Eigen::Index i = 0; i < law.size(); ++i) {
                    const double short_fall = r - law.values()[i];
                    if (short_fall > snap) s += law.weights()[i] * std::pow(short_fall, v.beta);
                }
                if (s <= 0.0) return r;
                return r - v.gamma * std::pow(s, 1.0 / v.beta);
            } else if constexpr (std::is_same_v<T, MeanStd>) {
                return law.mean() + v.c * law.stdev();
            } else {
                // both terms integrate quantiles of +Y; the mu2 part is the
                // risk charge on the provider position -Y, which is what keeps
                // the mapping cash additive and recovers cost-of-capital for
                // mu1 = Lebesgue
                return v.lambda * quantile_integral(law, v.mu1) +
                       (1.0 - v.lambda) * quantile_integral(law, v.mu2);
            }
        },
        m.node());
}

double mapping_of_standard_normal(const OneStepMapping& m) {
    return std::visit(
        [](const auto& v) -> double {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, CostOfCapital>) {
                const double rho0 = standard_normal_quantile_integral(v.rho);
                return v.eta / (1.0 + v.eta) * rho0;
            } else if constexpr (std::is_same_v<T, GeneralLimitedLiability>) {
                const double rho0 = standard_normal_quantile_integral(v.rho);
                if (v.beta == 1.0)
                    return rho0 - v.gamma * (rho0 * normal_cdf(rho0) + normal_pdf(rho0));
                const double s = expected_shortfall_power(rho0, v.beta);
                if (s <= 0.0) return rho0;
                return rho0 - v.gamma * std::pow(s, 1.0 / v.beta);
            } else if constexpr (std::is_same_v<T, MeanStd>) {
                return v.c;
            } else {
                return v.lambda * standard_normal_quantile_integral(v.mu1) +
                       (1.0 - v.lambda) * standard_normal_quantile_integral(v.mu2);
            }
        },
        m.node());
}

std::optional<double> l1_bound_constant(const OneStepMapping& m) {
    return std::visit(
        [](const auto& v) -> std::optional<double> {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, CostOfCapital>) {
                return (1.0 + v.eta * v.rho.lemma_constant()) / (1.0 + v.eta);
            } else if constexpr (std::is_same_v<T, GeneralLimitedLiability>) {
                const double c = v.rho.lemma_constant();
                return c + v.gamma * (c + 1.0);
            } else if constexpr (std::is_same_v<T, MeanStd>) {
                return std::nullopt;
            } else {
                return v.lambda * v.mu1.lemma_constant() + (1.0 - v.lambda) * v.mu2.lemma_constant();
            }
        },
        m.node());
}

ValuationSchedule::ValuationSchedule(std::vector<OneStepMapping> mappings)
    : mappings_(std::move(mappings)) {
    if (mappings_.empty()) throw std::invalid_argument("ValuationSchedule: empty schedule");
}

ValuationSchedule ValuationSchedule::repeat(const OneStepMapping& m, int horizon) {
    if (horizon <= 0) throw std::invalid_argument("ValuationSchedule: horizon must be positive");
    return ValuationSchedule(std::vector<OneStepMapping>(static_cast<std::size_t>(horizon), m));
}

}  // namespace mpval

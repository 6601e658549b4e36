#pragma once

// Test-only oracles, independent of the library code paths they check.

#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "mpval/rng.hpp"
#include "mpval/spectral_measure.hpp"
#include "mpval/weighted_sample.hpp"

namespace oracles {

/// Inverse normal CDF by bisection on std::erfc; independent of the rational
/// approximation used by the library. Bisects in the lower tail where erfc is
/// fully accurate; the upper tail goes through the symmetry q(p) = -q(1-p)
/// (1-p is exact for p >= 0.5).
inline double normal_quantile_bisect(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("normal_quantile_bisect: p out of range");
    if (p > 0.5) return -normal_quantile_bisect(1.0 - p);
    auto cdf = [](double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); };
    double lo = -40.0, hi = 1.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = (lo + hi) / 2.0;
        if (cdf(mid) < p)
            lo = mid;
        else
            hi = mid;
    }
    return (lo + hi) / 2.0;
}

inline double normal_pdf_ref(double x) {
    return std::exp(-x * x / 2.0) / std::sqrt(2.0 * 3.14159265358979323846);
}

/// Riemann-sum evaluation of ∫ F⁻¹(p) μ(dp) with midpoint nodes; atoms are a
/// direct quantile lookup. Brute-force cross-check for the exact integrator.
inline double riemann_quantile_integral(const mpval::WeightedSample& sample,
                                        const mpval::SpectralMeasure& mu, int nodes) {
    if (mu.is_atom()) return mpval::quantile(sample, mu.atom_location());
    double total = 0.0;
    const double h = 1.0 / nodes;
    for (int i = 0; i < nodes; ++i) {
        const double p = (i + 0.5) * h;
        total += mpval::quantile(sample, p) * mu.density_at(p) * h;
    }
    return total;
}

/// Uniform draws packed into a WeightedSample of standard normals.
inline mpval::WeightedSample normal_sample(std::int64_t n, std::uint64_t seed, std::uint64_t stream) {
    mpval::KeyedRng rng(seed, stream);
    Eigen::VectorXd values(n);
    for (std::int64_t i = 0; i < n; ++i) values[i] = rng.normal();
    return mpval::WeightedSample(std::move(values));
}

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};

inline MeanSe mean_and_se(const std::vector<double>& xs) {
    MeanSe out;
    for (double x : xs) out.mean += x;
    out.mean /= static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double var = 0.0;
        for (double x : xs) var += (x - out.mean) * (x - out.mean);
        var /= static_cast<double>(xs.size() - 1);
        out.se = std::sqrt(var / static_cast<double>(xs.size()));
    }
    return out;
}

/// Symmetric pseudoinverse written independently of the library's.
inline Eigen::MatrixXd pinv_ref(const Eigen::MatrixXd& s, double rel_cutoff = 1e-12) {
    if (s.size() == 0) return s;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s);
    const Eigen::VectorXd& lambda = eig.eigenvalues();
    const double lmax = std::max(lambda.maxCoeff(), 0.0);
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(lambda.size());
    for (Eigen::Index i = 0; i < lambda.size(); ++i)
        if (lambda[i] > rel_cutoff * lmax && lambda[i] > 0.0) inv[i] = 1.0 / lambda[i];
    return eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace oracles

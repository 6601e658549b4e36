#pragma once

#include <vector>

#include "mpval/weighted_sample.hpp"

namespace mpval {

/// A probability measure on [0,1] used to weight quantiles: either an atom,
/// or a piecewise-constant density (bounded on (0,1), or supported on a
/// compact interval [a,b] inside (0,1)). These are exactly the measures for
/// which the quantile integral of an L1 variable is finite with an explicit
/// constant.
class SpectralMeasure {
  public:
    enum class Kind { PointMass, TailUniform, BoundedDensity, CompactSupport };

    static SpectralMeasure point_mass(double p);
    /// Density 1/u on [1-u, 1].
    static SpectralMeasure tail_uniform(double u);
    /// Piecewise-constant density on (0,1); breaks must start at 0 and end at
    /// 1, levels holds one value per interval. Integral must be 1 (within
    /// 1e-9; renormalized exactly).
    static SpectralMeasure bounded_density(std::vector<double> breaks, std::vector<double> levels);
    /// Piecewise-constant density with support [breaks.front(), breaks.back()]
    /// strictly inside (0,1).
    static SpectralMeasure compact_support(std::vector<double> breaks, std::vector<double> levels);

    Kind kind() const { return kind_; }
    bool is_atom() const { return kind_ == Kind::PointMass; }
    double atom_location() const;

    /// Piecewise data (empty for an atom).
    const std::vector<double>& breakpoints() const { return breaks_; }
    const std::vector<double>& levels() const { return levels_; }
    double density_at(double p) const;

    /// Mass of the interval (lo, hi].
    double mass_between(double lo, double hi) const;

    double support_lo() const { return support_lo_; }
    double support_hi() const { return support_hi_; }

    /// The constant c with |∫ F⁻¹_W dμ| <= c E|W|: the density bound for
    /// density variants, max(1/a, 1/(1-b)) for measures supported in [a,b].
    double lemma_constant() const;

  private:
    SpectralMeasure() = default;

    Kind kind_ = Kind::PointMass;
    double atom_ = 0.5;
    std::vector<double> breaks_;
    std::vector<double> levels_;
    double support_lo_ = 0.0;
    double support_hi_ = 1.0;
};

/// ∫ F⁻¹_W(p) μ(dp), computed exactly: the quantile function of a finite
/// sample is a step function of p, so the integral is a finite sum of step
/// value times μ-mass of the step's p-interval.
double quantile_integral(const WeightedSample& sample, const SpectralMeasure& mu);

/// ρ(Y) = ∫ F⁻¹_{-Y}(p) μ(dp); takes the sample of Y and negates internally.
double spectral_risk(const WeightedSample& sample_of_y, const SpectralMeasure& mu);

/// Value-at-Risk at level u: spectral risk with a point mass at 1-u.
double var_at_level(const WeightedSample& sample_of_y, double u);

/// Average Value-at-Risk at level u: spectral risk with the tail-uniform
/// measure of mass u.
double avar_at_level(const WeightedSample& sample_of_y, double u);

/// ∫ Φ⁻¹(p) μ(dp), exact per piece via the antiderivative of Φ⁻¹.
double standard_normal_quantile_integral(const SpectralMeasure& mu);

}  // namespace mpval

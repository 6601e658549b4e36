#include "mpval/spectral_measure.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mpval/normal.hpp"

namespace mpval {

namespace {

constexpr double kMassTolerance = 1e-9;

void validate_pieces(const std::vector<double>& breaks, const std::vector<double>& levels) {
    if (breaks.size() < 2 || levels.size() + 1 != breaks.size())
        throw std::invalid_argument("SpectralMeasure: need n+1 breakpoints for n levels");
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i)
        if (!(breaks[i] < breaks[i + 1]))
            throw std::invalid_argument("SpectralMeasure: breakpoints must be strictly increasing");
    for (double l : levels)
        if (!(l >= 0.0) || !std::isfinite(l))
            throw std::invalid_argument("SpectralMeasure: density levels must be finite and >= 0");
}

double piece_mass(const std::vector<double>& breaks, const std::vector<double>& levels) {
    double mass = 0.0;
    for (std::size_t i = 0; i < levels.size(); ++i) mass += levels[i] * (breaks[i + 1] - breaks[i]);
    return mass;
}

void normalize_levels(std::vector<double>& levels, double mass) {
    if (std::abs(mass - 1.0) > kMassTolerance)
        throw std::invalid_argument("SpectralMeasure: density must integrate to 1 (within 1e-9)");
    for (double& l : levels) l /= mass;
}

}  // namespace

SpectralMeasure SpectralMeasure::point_mass(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("SpectralMeasure: point mass needs p in (0,1)");
    SpectralMeasure m;
    m.kind_ = Kind::PointMass;
    m.atom_ = p;
    m.support_lo_ = p;
    m.support_hi_ = p;
    return m;
}

SpectralMeasure SpectralMeasure::tail_uniform(double u) {
    if (!(u > 0.0 && u < 1.0)) throw std::invalid_argument("SpectralMeasure: tail uniform needs u in (0,1)");
    SpectralMeasure m;
    m.kind_ = Kind::TailUniform;
    m.breaks_ = {1.0 - u, 1.0};
    m.levels_ = {1.0 / u};
    m.support_lo_ = 1.0 - u;
    m.support_hi_ = 1.0;
    return m;
}

SpectralMeasure SpectralMeasure::bounded_density(std::vector<double> breaks, std::vector<double> levels) {
    validate_pieces(breaks, levels);
    if (breaks.front() != 0.0 || breaks.back() != 1.0)
        throw std::invalid_argument("SpectralMeasure: bounded density must span [0,1]");
    normalize_levels(levels, piece_mass(breaks, levels));
    SpectralMeasure m;
    m.kind_ = Kind::BoundedDensity;
    m.breaks_ = std::move(breaks);
    m.levels_ = std::move(levels);
    m.support_lo_ = 0.0;
    m.support_hi_ = 1.0;
    return m;
}

SpectralMeasure SpectralMeasure::compact_support(std::vector<double> breaks, std::vector<double> levels) {
    validate_pieces(breaks, levels);
    if (!(breaks.front() > 0.0 && breaks.back() < 1.0))
        throw std::invalid_argument("SpectralMeasure: compact support must lie strictly inside (0,1)");
    normalize_levels(levels, piece_mass(breaks, levels));
    SpectralMeasure m;
    m.kind_ = Kind::CompactSupport;
    m.support_lo_ = breaks.front();
    m.support_hi_ = breaks.back();
    m.breaks_ = std::move(breaks);
    m.levels_ = std::move(levels);
    return m;
}

double SpectralMeasure::atom_location() const {
    if (!is_atom()) throw std::logic_error("SpectralMeasure: not an atom");
    return atom_;
}

double SpectralMeasure::density_at(double p) const {
    if (is_atom()) return 0.0;
    if (p < breaks_.front() || p >= breaks_.back()) {
        // right endpoint belongs to the last piece
        if (p == breaks_.back()) return levels_.back();
        return 0.0;
    }
    const auto it = std::upper_bound(breaks_.begin(), breaks_.end(), p);
    const auto idx = static_cast<std::size_t>(it - breaks_.begin()) - 1;
    return levels_[std::min(idx, levels_.size() - 1)];
}

double SpectralMeasure::mass_between(double lo, double hi) const {
    if (!(hi > lo)) return 0.0;
    if (is_atom()) return (atom_ > lo && atom_ <= hi) ? 1.0 : 0.0;
    double mass = 0.0;
    for (std::size_t i = 0; i < levels_.size(); ++i) {
        const double a = std::max(lo, breaks_[i]);
        const double b = std::min(hi, breaks_[i + 1]);
        if (b > a) mass += levels_[i] * (b - a);
    }
    return mass;
}

double SpectralMeasure::lemma_constant() const {
    switch (kind_) {
        case Kind::PointMass:
            return std::max(1.0 / atom_, 1.0 / (1.0 - atom_));
        case Kind::TailUniform:
        case Kind::BoundedDensity:
            return *std::max_element(levels_.begin(), levels_.end());
        case Kind::CompactSupport:
            return std::max(1.0 / support_lo_, 1.0 / (1.0 - support_hi_));
    }
    return 0.0;  // unreachable
}

double quantile_integral(const WeightedSample& sample, const SpectralMeasure& mu) {
    if (mu.is_atom()) return quantile(sample, mu.atom_location());
    const Eigen::VectorXd& values = sample.sorted_values();
    const Eigen::VectorXd& cum = sample.cumulative();
    double total = 0.0;
    double prev = 0.0;
    for (Eigen::Index k = 0; k < values.size(); ++k) {
        const double c = cum[k];
        if (c > prev) total += values[k] * mu.mass_between(prev, c);
        prev = c;
    }
    return total;
}

double spectral_risk(const WeightedSample& sample_of_y, const SpectralMeasure& mu) {
    return quantile_integral(sample_of_y.negated(), mu);
}

double var_at_level(const WeightedSample& sample_of_y, double u) {
    if (!(u > 0.0 && u < 1.0)) throw std::domain_error("var_at_level: u must lie in (0,1)");
    return spectral_risk(sample_of_y, SpectralMeasure::point_mass(1.0 - u));
}

double avar_at_level(const WeightedSample& sample_of_y, double u) {
    if (!(u > 0.0 && u < 1.0)) throw std::domain_error("avar_at_level: u must lie in (0,1)");
    return spectral_risk(sample_of_y, SpectralMeasure::tail_uniform(u));
}

double standard_normal_quantile_integral(const SpectralMeasure& mu) {
    if (mu.is_atom()) return normal_quantile(mu.atom_location());
    // ∫_l^r Φ⁻¹(p) dp = φ(Φ⁻¹(l)) - φ(Φ⁻¹(r)); the density is constant per piece.
    const auto pdf_at_quantile = [](double p) {
        if (p <= 0.0 || p >= 1.0) return 0.0;
        return normal_pdf(normal_quantile(p));
    };
    const auto& breaks = mu.breakpoints();
    const auto& levels = mu.levels();
    double total = 0.0;
    for (std::size_t i = 0; i < levels.size(); ++i)
        total += levels[i] * (pdf_at_quantile(breaks[i]) - pdf_at_quantile(breaks[i + 1]));
    return total;
}

}  // namespace mpval

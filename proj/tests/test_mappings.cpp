#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "mpval/mappings.hpp"
#include "mpval/normal.hpp"
#include "mpval/rng.hpp"
#include "support/oracles.hpp"

using namespace mpval;

namespace {

WeightedSample random_law(KeyedRng& rng, int max_size = 12) {
    const int n = 2 + static_cast<int>(rng.uniform() * (max_size - 2));
    Eigen::VectorXd values(n), weights(n);
    for (int i = 0; i < n; ++i) {
        values[i] = 3.0 * rng.normal();
        weights[i] = 0.05 + rng.uniform();
    }
    weights /= weights.sum();
    return WeightedSample(std::move(values), std::move(weights));
}

SpectralMeasure random_rho(KeyedRng& rng) {
    switch (static_cast<int>(rng.uniform() * 3)) {
        case 0:
            return SpectralMeasure::point_mass(0.5 + 0.45 * rng.uniform());
        case 1:
            return SpectralMeasure::tail_uniform(0.05 + 0.4 * rng.uniform());
        default: {
            const double a = 0.1 + 0.3 * rng.uniform();
            const double b = a + 0.2 + 0.3 * rng.uniform();
            return SpectralMeasure::compact_support({a, b}, {1.0 / (b - a)});
        }
    }
}

std::vector<OneStepMapping> mapping_zoo(KeyedRng& rng) {
    return {
        OneStepMapping::cost_of_capital(0.5 * rng.uniform(), random_rho(rng)),
        OneStepMapping::coc_limited_liability(0.5 * rng.uniform(), random_rho(rng)),
        OneStepMapping::power_utility(0.3 + 0.7 * rng.uniform(), random_rho(rng)),
        OneStepMapping::general_limited_liability(rng.uniform(), 0.3 + 0.7 * rng.uniform(),
                                                  random_rho(rng)),
        OneStepMapping::mean_std(2.0 * rng.uniform()),
        OneStepMapping::quantile_mixture(rng.uniform(), random_rho(rng), random_rho(rng)),
    };
}

}  // namespace

TEST_CASE("cost-of-capital on a hand-evaluated two-point law") {
    Eigen::VectorXd v(2);
    v << -1, 1;
    const WeightedSample law(v);
    const auto m = OneStepMapping::cost_of_capital(0.1, SpectralMeasure::point_mass(0.75));
    CHECK(apply_mapping(m, law) == doctest::Approx(1.0 / 11.0).epsilon(1e-12));
}

TEST_CASE("constant laws are reproduced by every variant") {
    KeyedRng rng(101, 0);
    for (double c : {-2.5, 0.0, 3.25}) {
        const WeightedSample law(Eigen::VectorXd::Constant(3, c));
        for (const auto& m : mapping_zoo(rng)) {
            CAPTURE(c);
            CHECK(apply_mapping(m, law) == doctest::Approx(c).epsilon(1e-12));
        }
    }
}

TEST_CASE("limited liability on a large normal sample matches the closed form") {
    const WeightedSample law = oracles::normal_sample(1000000, 7, 0);
    const auto m =
        OneStepMapping::coc_limited_liability(0.06, SpectralMeasure::point_mass(0.995));
    const double rho0 = oracles::normal_quantile_bisect(0.995);
    const double oracle =
        rho0 - (1.0 / 1.06) * (rho0 * 0.5 * std::erfc(-rho0 / std::sqrt(2.0)) +
                               oracles::normal_pdf_ref(rho0));
    CHECK(oracle == doctest::Approx(0.1443).epsilon(0.01));
    CHECK(apply_mapping(m, law) == doctest::Approx(oracle).epsilon(0.01 / oracle));
}

TEST_CASE("closed forms for a standard normal") {
    CHECK(mapping_of_standard_normal(OneStepMapping::mean_std(2.0)) == 2.0);

    const auto coc = OneStepMapping::cost_of_capital(0.06, SpectralMeasure::point_mass(0.995));
    const double coc_value = mapping_of_standard_normal(coc);
    CHECK(coc_value ==
          doctest::Approx(0.06 / 1.06 * oracles::normal_quantile_bisect(0.995)).epsilon(1e-12));
    CHECK(std::abs(coc_value - 0.145801) < 1e-5);

    const auto ll = OneStepMapping::coc_limited_liability(0.06, SpectralMeasure::point_mass(0.995));
    const double ll_value = mapping_of_standard_normal(ll);
    CHECK(std::abs(ll_value - 0.144310) < 1e-5);
    CHECK(ll_value <= coc_value);

    SUBCASE("beta < 1 quadrature against a fine midpoint oracle") {
        const auto pu = OneStepMapping::power_utility(0.6, SpectralMeasure::point_mass(0.9));
        const double rho0 = oracles::normal_quantile_bisect(0.9);
        const int n = 2000000;
        const double lo = -12.0, h = (rho0 - lo) / n;
        double integral = 0.0;
        for (int i = 0; i < n; ++i) {
            const double z = lo + (i + 0.5) * h;
            integral += std::pow(rho0 - z, 0.6) * oracles::normal_pdf_ref(z) * h;
        }
        const double oracle = rho0 - std::pow(integral, 1.0 / 0.6);
        // the endpoint kink of (rho0 - z)^beta caps the composite rule at
        // about 1e-6 relative accuracy
        CHECK(mapping_of_standard_normal(pu) == doctest::Approx(oracle).epsilon(1e-5));
    }
}

TEST_CASE("positive homogeneity and conditional cash additivity") {
    KeyedRng rng(103, 1);
    for (int trial = 0; trial < 100; ++trial) {
        const WeightedSample law = random_law(rng);
        const double a = 2.5 * rng.uniform();
        const double b = 4.0 * rng.normal();
        for (const auto& m : mapping_zoo(rng)) {
            const double direct = apply_mapping(m, law.affine(a, b));
            const double expected = a * apply_mapping(m, law) + b;
            CHECK(direct == doctest::Approx(expected).epsilon(1e-10));
        }
    }
}

TEST_CASE("monotone variants respond monotonically to pointwise bumps") {
    KeyedRng rng(107, 2);
    for (int trial = 0; trial < 100; ++trial) {
        const WeightedSample law = random_law(rng);
        Eigen::VectorXd bumped = law.values();
        for (Eigen::Index i = 0; i < bumped.size(); ++i) bumped[i] += 2.0 * rng.uniform();
        const WeightedSample better(bumped, law.weights());

        const std::vector<OneStepMapping> monotone = {
            OneStepMapping::cost_of_capital(0.5 * rng.uniform(), random_rho(rng)),
            OneStepMapping::coc_limited_liability(0.5 * rng.uniform(), random_rho(rng)),
            // gamma <= 1 keeps the shortfall penalty from dominating the
            // capital term
            OneStepMapping::general_limited_liability(rng.uniform(), 0.3 + 0.7 * rng.uniform(),
                                                      random_rho(rng)),
            OneStepMapping::quantile_mixture(rng.uniform(), random_rho(rng), random_rho(rng)),
        };
        for (const auto& m : monotone)
            CHECK(apply_mapping(m, better) >= apply_mapping(m, law) - 1e-10);
    }
}

TEST_CASE("mean-std violates monotonicity on a concrete pair") {
    Eigen::VectorXd y(2), y_better(2);
    y << 0, 10;
    y_better << 9, 10;  // pointwise >= y
    const auto m = OneStepMapping::mean_std(2.0);
    const double phi_y = apply_mapping(m, WeightedSample(y));
    const double phi_better = apply_mapping(m, WeightedSample(y_better));
    CHECK(phi_y == doctest::Approx(15.0));
    CHECK(phi_better == doctest::Approx(10.5));
    CHECK(phi_better < phi_y);  // the violating pair
}

TEST_CASE("limited liability never exceeds plain cost of capital") {
    KeyedRng rng(109, 3);
    for (int trial = 0; trial < 200; ++trial) {
        const WeightedSample law = random_law(rng);
        const double eta = 0.5 * rng.uniform();
        const SpectralMeasure rho = random_rho(rng);
        const double ll = apply_mapping(OneStepMapping::coc_limited_liability(eta, rho), law);
        const double coc = apply_mapping(OneStepMapping::cost_of_capital(eta, rho), law);
        CHECK(ll <= coc + 1e-12);
    }
}

TEST_CASE("first-moment bound with the explicit constant") {
    KeyedRng rng(113, 4);
    for (int trial = 0; trial < 200; ++trial) {
        const WeightedSample law = random_law(rng);
        for (const auto& m : mapping_zoo(rng)) {
            const auto c = l1_bound_constant(m);
            const double value = apply_mapping(m, law);
            if (c) {
                CHECK(std::abs(value) <= *c * law.abs_mean() + 1e-12);
            } else {
                // mean-std admits only a second-moment bound
                const double c_sd = std::get<MeanStd>(m.node()).c;
                const double second = (law.weights().array() * law.values().array().square()).sum();
                CHECK(value * value <= (2.0 + 2.0 * c_sd * c_sd) * second + 1e-12);
            }
        }
    }
}

TEST_CASE("standard-normal closed forms agree with sampling within 3 MC standard errors") {
    constexpr int kBatches = 20;
    constexpr std::int64_t kBatchSize = 500000;
    const std::vector<OneStepMapping> variants = {
        OneStepMapping::cost_of_capital(0.06, SpectralMeasure::tail_uniform(0.05)),
        OneStepMapping::general_limited_liability(0.9, 0.7, SpectralMeasure::point_mass(0.9)),
        OneStepMapping::mean_std(1.5),
        OneStepMapping::quantile_mixture(
            0.3, SpectralMeasure::bounded_density({0.0, 0.5, 1.0}, {0.6, 1.4}),
            SpectralMeasure::compact_support({0.6, 0.95}, {1.0 / 0.35})),
    };
    for (std::size_t vi = 0; vi < variants.size(); ++vi) {
        const double closed = mapping_of_standard_normal(variants[vi]);
        std::vector<double> batch_values;
        Eigen::VectorXd all(kBatches * kBatchSize);
        for (int b = 0; b < kBatches; ++b) {
            KeyedRng rng(211, 1000 * vi + static_cast<std::uint64_t>(b));
            Eigen::VectorXd draw(kBatchSize);
            for (std::int64_t i = 0; i < kBatchSize; ++i) draw[i] = rng.normal();
            all.segment(static_cast<Eigen::Index>(b) * kBatchSize, kBatchSize) = draw;
            batch_values.push_back(apply_mapping(variants[vi], WeightedSample(std::move(draw))));
        }
        const double full = apply_mapping(variants[vi], WeightedSample(std::move(all)));
        const auto stats = oracles::mean_and_se(batch_values);
        CAPTURE(vi);
        CHECK(std::abs(full - closed) <= 3.0 * stats.se + 1e-6);
    }
}

TEST_CASE("parameter validation") {
    CHECK_THROWS_AS(OneStepMapping::cost_of_capital(-0.1, SpectralMeasure::point_mass(0.9)),
                    std::invalid_argument);
    CHECK_THROWS_AS(
        OneStepMapping::general_limited_liability(0.5, 0.0, SpectralMeasure::point_mass(0.9)),
        std::invalid_argument);
    CHECK_THROWS_AS(
        OneStepMapping::general_limited_liability(0.5, 1.5, SpectralMeasure::point_mass(0.9)),
        std::invalid_argument);
    CHECK_THROWS_AS(OneStepMapping::mean_std(-1.0), std::invalid_argument);
    CHECK_THROWS_AS(OneStepMapping::quantile_mixture(1.2, SpectralMeasure::point_mass(0.5),
                                                     SpectralMeasure::point_mass(0.5)),
                    std::invalid_argument);
    CHECK_THROWS_AS(ValuationSchedule({}), std::invalid_argument);
    CHECK_THROWS_AS(ValuationSchedule::repeat(OneStepMapping::mean_std(1.0), 0),
                    std::invalid_argument);
}

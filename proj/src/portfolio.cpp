#include "mpval/portfolio.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mpval/normal.hpp"
#include "mpval/parallel.hpp"

namespace mpval {

namespace {

constexpr int kFactorParticles = 16;

/// One pending second payment: the claim's observed (undiscounted) first
/// payment, which carries the information about its factor.
using PendingSpills = std::vector<double>;

double lognormal_mean(double mu, double sigma) { return std::exp(mu + sigma * sigma / 2.0); }
double lognormal_second_moment(double mu, double sigma) { return std::exp(2.0 * mu + 2.0 * sigma * sigma); }

}  // namespace

SeverityLaw SeverityLaw::lognormal(double mu, double sigma) {
    if (!(sigma >= 0.0)) throw std::invalid_argument("SeverityLaw: sigma must be >= 0");
    return SeverityLaw{Kind::Lognormal, mu, sigma};
}

SeverityLaw SeverityLaw::gamma(double shape, double scale) {
    if (!(shape > 0.0)) throw std::invalid_argument("SeverityLaw: shape must be positive");
    if (!(scale >= 0.0)) throw std::invalid_argument("SeverityLaw: scale must be >= 0");
    return SeverityLaw{Kind::Gamma, shape, scale};
}

double SeverityLaw::mean() const {
    return kind == Kind::Lognormal ? lognormal_mean(p1, p2) : p1 * p2;
}

double SeverityLaw::second_moment() const {
    return kind == Kind::Lognormal ? lognormal_second_moment(p1, p2) : p1 * (p1 + 1.0) * p2 * p2;
}

double SeverityLaw::sample(KeyedRng& rng) const {
    if (kind == Kind::Lognormal) return std::exp(p1 + p2 * rng.normal());
    return rng.gamma(p1, p2);
}

bool SeverityLaw::degenerate() const { return kind == Kind::Lognormal ? p2 == 0.0 : p2 == 0.0; }

double SeverityLaw::atom() const { return kind == Kind::Lognormal ? std::exp(p1) : 0.0; }

double SeverityLaw::density(double z) const {
    if (z <= 0.0 || degenerate()) return 0.0;
    if (kind == Kind::Lognormal) {
        const double u = (std::log(z) - p1) / p2;
        return std::exp(-u * u / 2.0) * kInvSqrt2Pi / (z * p2);
    }
    return std::exp((p1 - 1.0) * std::log(z) - z / p2 - std::lgamma(p1) - p1 * std::log(p2));
}

double FactorLaw::mean() const { return lognormal_mean(mu, sigma); }
double FactorLaw::second_moment() const { return lognormal_second_moment(mu, sigma); }
double FactorLaw::sample(KeyedRng& rng) const { return std::exp(mu + sigma * rng.normal()); }

PortfolioModel::PortfolioModel(int horizon, double intensity, Eigen::VectorXd delays,
                               SeverityLaw severity, std::optional<FactorLaw> factor,
                               double spread_theta, std::optional<Eigen::VectorXd> discount)
    : horizon_(horizon),
      intensity_(intensity),
      delays_(std::move(delays)),
      severity_(severity),
      factor_(factor),
      spread_theta_(spread_theta) {
    if (horizon_ <= 0) throw std::invalid_argument("PortfolioModel: horizon must be positive");
    if (!(intensity_ > 0.0)) throw std::invalid_argument("PortfolioModel: intensity must be positive");
    if (delays_.size() != horizon_) throw std::invalid_argument("PortfolioModel: delays must have length T");
    if ((delays_.array() < 0.0).any()) throw std::invalid_argument("PortfolioModel: delay probabilities must be >= 0");
    const double sum = delays_.sum();
    if (!(sum > 0.0) || std::abs(sum - 1.0) > 1e-6)
        throw std::invalid_argument("PortfolioModel: delay probabilities must sum to 1");
    delays_ /= sum;
    if (!(spread_theta_ > 0.0 && spread_theta_ <= 1.0))
        throw std::invalid_argument("PortfolioModel: spread_theta must lie in (0,1]");
    if (factor_ && !(factor_->sigma >= 0.0))
        throw std::invalid_argument("PortfolioModel: factor sigma must be >= 0");
    if (discount) {
        discount_ = std::move(*discount);
        if (discount_.size() != horizon_)
            throw std::invalid_argument("PortfolioModel: discount must have length T");
        if (((discount_.array() <= 0.0) || (discount_.array() > 1.0)).any())
            throw std::invalid_argument("PortfolioModel: discount factors must lie in (0,1]");
    } else {
        discount_ = Eigen::VectorXd::Ones(horizon_);
    }
    delay_cumulative_.resize(horizon_);
    double acc = 0.0;
    for (int t = 0; t < horizon_; ++t) {
        acc += delays_[t];
        delay_cumulative_[t] = acc;
    }
    delay_cumulative_[horizon_ - 1] = 1.0;
}

std::vector<std::pair<int, double>> PortfolioModel::payment_pattern(int delay) const {
    if (delay < 1 || delay > horizon_) throw std::invalid_argument("payment_pattern: delay out of range");
    if (spread_theta_ == 1.0 || delay == horizon_) return {{delay, 1.0}};
    return {{delay, spread_theta_}, {delay + 1, 1.0 - spread_theta_}};
}

Eigen::VectorXd PortfolioModel::expected_claim_payment() const {
    const double ez = severity_.mean();
    const double ef = factor_ ? factor_->mean() : 1.0;
    Eigen::VectorXd h = Eigen::VectorXd::Zero(horizon_);
    for (int d = 1; d <= horizon_; ++d)
        for (const auto& [t, w] : payment_pattern(d)) h[t - 1] += delays_[d - 1] * w * ez * ef * discount_[t - 1];
    return h;
}

Eigen::VectorXd PortfolioModel::expected_claim_counts() const {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(horizon_);
    for (int d = 1; d <= horizon_; ++d)
        for (const auto& [t, w] : payment_pattern(d)) g[t - 1] += delays_[d - 1];
    return g;
}

int PortfolioModel::sample_delay(KeyedRng& rng) const {
    const double u = rng.uniform();
    const double* begin = delay_cumulative_.data();
    const double* end = begin + delay_cumulative_.size();
    return static_cast<int>(std::lower_bound(begin, end, u) - begin) + 1;
}

CashflowSample simulate_cashflow(const PortfolioModel& model, std::int64_t exposure,
                                 std::uint64_t seed) {
    if (exposure <= 0) throw std::invalid_argument("simulate_cashflow: exposure must be positive");
    KeyedRng rng(seed, 0);
    CashflowSample out;
    out.c = Eigen::VectorXd::Zero(model.horizon());
    out.counts = Eigen::VectorXi::Zero(model.horizon());
    out.claim_count = rng.poisson(static_cast<double>(exposure) * model.intensity());
    for (std::int64_t k = 0; k < out.claim_count; ++k) {
        const int delay = model.sample_delay(rng);
        const double f = model.factor() ? model.factor()->sample(rng) : 1.0;
        for (const auto& [t, w] : model.payment_pattern(delay)) {
            const double z = model.severity().sample(rng);
            out.c[t - 1] += f * z * w * model.discount()[t - 1];
            out.counts[t - 1] += 1;
        }
    }
    return out;
}

ScalingPair clt_scaling(const PortfolioModel& model, std::int64_t exposure) {
    if (exposure <= 0) throw std::invalid_argument("clt_scaling: exposure must be positive");
    const double mass = static_cast<double>(exposure) * model.intensity();
    ScalingPair s;
    s.a_n = std::sqrt(mass);
    s.b_n = mass * model.expected_claim_payment();
    return s;
}

GaussianModel gaussian_limit_of(const PortfolioModel& model, bool include_counts) {
    const int horizon = model.horizon();
    const double ez = model.severity().mean();
    const double ez2 = model.severity().second_moment();
    const double ef = model.factor() ? model.factor()->mean() : 1.0;
    const double ef2 = model.factor() ? model.factor()->second_moment() : 1.0;

    Eigen::MatrixXd kxx = Eigen::MatrixXd::Zero(horizon, horizon);
    Eigen::MatrixXd kxy = Eigen::MatrixXd::Zero(horizon, horizon);
    Eigen::MatrixXd kyy = Eigen::MatrixXd::Zero(horizon, horizon);
    for (int d = 1; d <= horizon; ++d) {
        const double pd = model.delays()[d - 1];
        if (pd == 0.0) continue;
        const auto pattern = model.payment_pattern(d);
        for (const auto& [t, wt] : pattern) {
            const double ht = wt * model.discount()[t - 1];
            for (const auto& [s, ws] : pattern) {
                const double hs = ws * model.discount()[s - 1];
                // same payment iff same period; distinct payments have
                // independent severities
                kxx(t - 1, s - 1) += pd * ef2 * ht * hs * (t == s ? ez2 : ez * ez);
                kxy(t - 1, s - 1) += pd * ef * ez * ht;
                kyy(t - 1, s - 1) += pd;
            }
        }
    }

    if (!include_counts)
        return GaussianModel(horizon, 0, Eigen::VectorXd::Zero(horizon), std::move(kxx));

    const int n = 2 * horizon;
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(n, n);
    for (int t = 1; t <= horizon; ++t) {
        for (int s = 1; s <= horizon; ++s) {
            const int xt = 2 * (t - 1), yt = xt + 1;
            const int xs = 2 * (s - 1), ys = xs + 1;
            cov(xt, xs) = kxx(t - 1, s - 1);
            cov(xt, ys) = kxy(t - 1, s - 1);
            cov(yt, xs) = kxy(s - 1, t - 1);
            cov(yt, ys) = kyy(t - 1, s - 1);
        }
    }
    return GaussianModel(horizon, 1, Eigen::VectorXd::Zero(n), std::move(cov));
}

namespace {

/// Draws one factor from the posterior given an observed first payment
/// `observed` = theta * F * Z, by importance resampling on prior particles.
double sample_factor_posterior(const PortfolioModel& model, double observed, double first_weight,
                               KeyedRng& rng) {
    const FactorLaw& prior = *model.factor();
    const SeverityLaw& severity = model.severity();
    if (severity.degenerate()) {
        const double atom = severity.atom();
        if (atom > 0.0 && first_weight > 0.0) return observed / (first_weight * atom);
        return prior.sample(rng);
    }
    double particles[kFactorParticles];
    double weights[kFactorParticles];
    double total = 0.0;
    for (int j = 0; j < kFactorParticles; ++j) {
        const double f = prior.sample(rng);
        particles[j] = f;
        const double implied = observed / (first_weight * f);
        weights[j] = severity.density(implied) / (first_weight * f);
        total += weights[j];
    }
    if (!(total > 0.0) || !std::isfinite(total)) return prior.sample(rng);
    const double u = rng.uniform() * total;
    double acc = 0.0;
    for (int j = 0; j < kFactorParticles; ++j) {
        acc += weights[j];
        if (u <= acc) return particles[j];
    }
    return particles[kFactorParticles - 1];
}

}  // namespace

ScenarioTree build_portfolio_tree(const PortfolioModel& model, std::int64_t exposure,
                                  const std::vector<int>& branching, std::uint64_t seed,
                                  bool include_counts, int workers) {
    const int horizon = model.horizon();
    if (exposure <= 0) throw std::invalid_argument("build_portfolio_tree: exposure must be positive");
    if (static_cast<int>(branching.size()) != horizon)
        throw std::invalid_argument("build_portfolio_tree: branching must have one entry per period");
    for (int b : branching)
        if (b <= 0) throw std::invalid_argument("build_portfolio_tree: branching factors must be positive");

    const double mass = static_cast<double>(exposure) * model.intensity();
    const ScalingPair scaling = clt_scaling(model, exposure);
    const Eigen::VectorXd count_center = mass * model.expected_claim_counts();
    const int d = include_counts ? 1 : 0;
    const bool spills_possible = model.spread_theta() < 1.0 && horizon > 1;

    std::vector<std::int64_t> level_offsets(static_cast<std::size_t>(horizon) + 2, 0);
    std::int64_t level_size = 1;
    for (int t = 0; t <= horizon; ++t) {
        level_offsets[static_cast<std::size_t>(t) + 1] = level_offsets[static_cast<std::size_t>(t)] + level_size;
        if (t < horizon) level_size *= branching[static_cast<std::size_t>(t)];
    }
    const std::int64_t n = level_offsets.back();

    std::vector<double> x(static_cast<std::size_t>(n), 0.0);
    std::vector<double> y(static_cast<std::size_t>(n) * static_cast<std::size_t>(d), 0.0);
    std::vector<std::int64_t> parent(static_cast<std::size_t>(n), -1);
    std::vector<std::int64_t> first_child(static_cast<std::size_t>(n), -1);
    std::vector<std::int32_t> child_count(static_cast<std::size_t>(n), 0);
    std::vector<double> weight(static_cast<std::size_t>(n), 1.0);

    std::vector<std::uint64_t> parent_streams{0};
    std::vector<PendingSpills> parent_spills(1);

    for (int t = 0; t < horizon; ++t) {
        const std::int64_t parents_begin = level_offsets[static_cast<std::size_t>(t)];
        const std::int64_t parents_count = level_offsets[static_cast<std::size_t>(t) + 1] - parents_begin;
        const std::int64_t children_begin = level_offsets[static_cast<std::size_t>(t) + 1];
        const int b = branching[static_cast<std::size_t>(t)];
        const double child_weight = 1.0 / static_cast<double>(b);
        const int period = t + 1;
        const double fresh_mean = mass * model.delays()[period - 1];
        const double disc = model.discount()[period - 1];
        const double theta = model.spread_theta();
        const bool child_keeps_spills = spills_possible && period < horizon;
        const double first_weight = (period == horizon) ? 1.0 : theta;

        std::vector<std::uint64_t> child_streams(static_cast<std::size_t>(parents_count) *
                                                 static_cast<std::size_t>(b));
        std::vector<PendingSpills> child_spills(child_keeps_spills ? child_streams.size() : 0);

        parallel_for(0, parents_count, workers, [&](std::int64_t i) {
            const std::int64_t pid = parents_begin + i;
            const std::uint64_t parent_stream = parent_streams[static_cast<std::size_t>(i)];
            const PendingSpills& pending = parent_spills[static_cast<std::size_t>(i)];
            const std::int64_t base_child = children_begin + i * b;
            first_child[static_cast<std::size_t>(pid)] = base_child;
            child_count[static_cast<std::size_t>(pid)] = b;

            for (int k = 0; k < b; ++k) {
                const std::uint64_t stream = substream(parent_stream, static_cast<std::uint64_t>(k));
                KeyedRng rng(seed, stream);
                double paid = 0.0;
                std::int64_t payments = 0;
                PendingSpills next_spills;

                // claims making their first payment this period
                const std::int64_t fresh = rng.poisson(fresh_mean);
                for (std::int64_t c = 0; c < fresh; ++c) {
                    const double f = model.factor() ? model.factor()->sample(rng) : 1.0;
                    const double z = model.severity().sample(rng);
                    const double undiscounted = first_weight * f * z;
                    paid += undiscounted * disc;
                    ++payments;
                    if (child_keeps_spills) next_spills.push_back(undiscounted);
                }
                // second payments of claims first observed last period
                for (double observed : pending) {
                    double f = 1.0;
                    if (model.factor())
                        f = sample_factor_posterior(model, observed, theta, rng);
                    const double z = model.severity().sample(rng);
                    paid += (1.0 - theta) * f * z * disc;
                    ++payments;
                }

                const std::int64_t cid = base_child + k;
                x[static_cast<std::size_t>(cid)] =
                    (paid - scaling.b_n[period - 1]) / scaling.a_n;
                if (include_counts)
                    y[static_cast<std::size_t>(cid)] =
                        (static_cast<double>(payments) - count_center[period - 1]) / scaling.a_n;
                parent[static_cast<std::size_t>(cid)] = pid;
                weight[static_cast<std::size_t>(cid)] = child_weight;
                child_streams[static_cast<std::size_t>(i * b + k)] = stream;
                if (child_keeps_spills)
                    child_spills[static_cast<std::size_t>(i * b + k)] = std::move(next_spills);
            }
        });
        parent_streams = std::move(child_streams);
        parent_spills = std::move(child_spills);
        if (!child_keeps_spills) parent_spills.assign(parent_streams.size(), {});
    }

    return ScenarioTree::from_arrays(horizon, d, std::move(level_offsets), std::move(x), std::move(y),
                                     std::move(parent), std::move(first_child), std::move(child_count),
                                     std::move(weight));
}

EmpiricalValuation empirical_value(const PortfolioModel& model, std::int64_t exposure,
                                   const ValuationSchedule& schedule, const std::vector<int>& branching,
                                   std::uint64_t seed, bool include_counts, int workers) {
    const ScenarioTree tree = build_portfolio_tree(model, exposure, branching, seed, include_counts, workers);
    const ValuationResult valuation = backward_value(tree, schedule, workers);
    const ScalingPair scaling = clt_scaling(model, exposure);
    const GaussianModel limit = gaussian_limit_of(model, include_counts);

    EmpiricalValuation out;
    out.a_n = scaling.a_n;
    out.b_total = scaling.b_n.sum();
    out.v0_scaled = valuation.v0;
    out.v0_raw = scaling.a_n * valuation.v0 + out.b_total;
    out.limit_v0 = limit_value(limit, schedule);
    out.approx_raw = scaling.a_n * out.limit_v0 + out.b_total;
    out.gap_normalized = std::abs(out.v0_scaled - out.limit_v0);
    return out;
}

}  // namespace mpval

#include "mpval/weighted_sample.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace mpval {

namespace {

constexpr double kNormalizationHardLimit = 1e-6;

void check_finite(const Eigen::VectorXd& v, const char* what) {
    if (!v.allFinite()) throw std::invalid_argument(std::string("WeightedSample: non-finite ") + what);
}

}  // namespace

WeightedSample::WeightedSample(Eigen::VectorXd values, Eigen::VectorXd weights)
    : values_(std::move(values)), weights_(std::move(weights)) {
    if (values_.size() == 0) throw std::invalid_argument("WeightedSample: empty sample");
    if (values_.size() != weights_.size())
        throw std::invalid_argument("WeightedSample: values/weights length mismatch");
    check_finite(values_, "values");
    check_finite(weights_, "weights");
    if ((weights_.array() < 0.0).any())
        throw std::invalid_argument("WeightedSample: negative weight");
    const double sum = weights_.sum();
    if (!(sum > 0.0) || std::abs(sum - 1.0) > kNormalizationHardLimit)
        throw std::invalid_argument("WeightedSample: weights must sum to 1 (within 1e-6)");
    weights_ /= sum;

    // Sorted view with exact ties merged.
    std::vector<Eigen::Index> order(static_cast<std::size_t>(values_.size()));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](Eigen::Index a, Eigen::Index b) { return values_[a] < values_[b]; });
    std::vector<double> sv, sw;
    sv.reserve(order.size());
    sw.reserve(order.size());
    for (Eigen::Index idx : order) {
        if (!sv.empty() && sv.back() == values_[idx]) {
            sw.back() += weights_[idx];
        } else {
            sv.push_back(values_[idx]);
            sw.push_back(weights_[idx]);
        }
    }
    sorted_values_ = Eigen::Map<const Eigen::VectorXd>(sv.data(), static_cast<Eigen::Index>(sv.size()));
    sorted_weights_ = Eigen::Map<const Eigen::VectorXd>(sw.data(), static_cast<Eigen::Index>(sw.size()));
    cumulative_.resize(sorted_weights_.size());
    double acc = 0.0;
    for (Eigen::Index i = 0; i < sorted_weights_.size(); ++i) {
        acc += sorted_weights_[i];
        cumulative_[i] = acc;
    }
    cumulative_[cumulative_.size() - 1] = 1.0;
}

WeightedSample::WeightedSample(Eigen::VectorXd values)
    : WeightedSample([](Eigen::VectorXd v) {
          const Eigen::Index n = std::max<Eigen::Index>(v.size(), 1);
          return WeightedSample(std::move(v),
                                Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n)));
      }(std::move(values))) {}

WeightedSample::WeightedSample(presorted_tag, Eigen::VectorXd values, Eigen::VectorXd weights,
                               Eigen::VectorXd sorted_values, Eigen::VectorXd sorted_weights)
    : values_(std::move(values)),
      weights_(std::move(weights)),
      sorted_values_(std::move(sorted_values)),
      sorted_weights_(std::move(sorted_weights)) {
    cumulative_.resize(sorted_weights_.size());
    double acc = 0.0;
    for (Eigen::Index i = 0; i < sorted_weights_.size(); ++i) {
        acc += sorted_weights_[i];
        cumulative_[i] = acc;
    }
    cumulative_[cumulative_.size() - 1] = 1.0;
}

double WeightedSample::mean() const { return weights_.dot(values_); }

double WeightedSample::stdev() const {
    const double m = mean();
    const double var = (weights_.array() * (values_.array() - m).square()).sum();
    return std::sqrt(std::max(var, 0.0));
}

double WeightedSample::abs_mean() const { return weights_.dot(values_.cwiseAbs()); }

WeightedSample WeightedSample::negated() const {
    return WeightedSample(presorted_tag{}, -values_, weights_, -sorted_values_.reverse(),
                          sorted_weights_.reverse());
}

WeightedSample WeightedSample::affine(double a, double b) const {
    if (a < 0.0) throw std::invalid_argument("WeightedSample::affine: a must be >= 0");
    if (a == 0.0) return WeightedSample(Eigen::VectorXd::Constant(1, b), Eigen::VectorXd::Constant(1, 1.0));
    return WeightedSample(presorted_tag{}, a * values_.array() + b, weights_,
                          a * sorted_values_.array() + b, sorted_weights_);
}

double quantile(const WeightedSample& sample, double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("quantile: p must lie in (0,1)");
    const Eigen::VectorXd& cum = sample.cumulative();
    const double* begin = cum.data();
    const double* end = begin + cum.size();
    const double* it = std::lower_bound(begin, end, p);
    // last cumulative is exactly 1 > p, so `it` is always valid
    return sample.sorted_values()[static_cast<Eigen::Index>(it - begin)];
}

}  // namespace mpval

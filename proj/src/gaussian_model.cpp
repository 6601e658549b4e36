#include "mpval/gaussian_model.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "mpval/parallel.hpp"
#include "mpval/rng.hpp"

namespace mpval {

namespace {

constexpr double kPinvRelCutoff = 1e-10;
constexpr double kPsdRelTolerance = 1e-8;

/// Symmetric pseudoinverse; eigenvalues below rel-tol are treated as zero,
/// eigenvalues below -kPsdRelTolerance * lambda_max are an error.
Eigen::MatrixXd psd_pseudo_inverse(const Eigen::MatrixXd& s, const char* what) {
    if (s.size() == 0) return s;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s);
    if (eig.info() != Eigen::Success) throw std::runtime_error(std::string(what) + ": eigendecomposition failed");
    const Eigen::VectorXd& lambda = eig.eigenvalues();
    const double lmax = std::max(lambda.maxCoeff(), 0.0);
    if (lambda.minCoeff() < -kPsdRelTolerance * std::max(lmax, 1.0))
        throw std::runtime_error(std::string(what) + ": conditioning block is not positive semidefinite");
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(lambda.size());
    for (Eigen::Index i = 0; i < lambda.size(); ++i)
        if (lambda[i] > kPinvRelCutoff * lmax && lambda[i] > 0.0) inv[i] = 1.0 / lambda[i];
    return eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
}

/// Symmetric square root with negative eigenvalues clamped to zero.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& s) {
    if (s.size() == 0) return s;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s);
    if (eig.info() != Eigen::Success) throw std::runtime_error("psd_sqrt: eigendecomposition failed");
    Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

std::vector<int> prefix_indices(int count) {
    std::vector<int> idx(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) idx[static_cast<std::size_t>(i)] = i;
    return idx;
}

}  // namespace

GaussianModel::GaussianModel(int horizon, int aux_dim, Eigen::VectorXd mean, Eigen::MatrixXd cov)
    : horizon_(horizon), aux_dim_(aux_dim), mean_(std::move(mean)), cov_(std::move(cov)) {
    if (horizon_ <= 0) throw std::invalid_argument("GaussianModel: horizon must be positive");
    if (aux_dim_ < 0) throw std::invalid_argument("GaussianModel: aux_dim must be >= 0");
    const int n = dim();
    if (mean_.size() != n) throw std::invalid_argument("GaussianModel: mean has wrong length");
    if (cov_.rows() != n || cov_.cols() != n)
        throw std::invalid_argument("GaussianModel: covariance has wrong order");
    if (!mean_.allFinite() || !cov_.allFinite())
        throw std::invalid_argument("GaussianModel: non-finite entries");
    const double scale = std::max(cov_.cwiseAbs().maxCoeff(), 1.0);
    if (((cov_ - cov_.transpose()).cwiseAbs().maxCoeff()) > 1e-10 * scale)
        throw std::invalid_argument("GaussianModel: covariance must be symmetric");
    cov_ = ((cov_ + cov_.transpose()) / 2.0).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov_, Eigen::EigenvaluesOnly);
    const double lmax = std::max(eig.eigenvalues().maxCoeff(), 0.0);
    if (eig.eigenvalues().minCoeff() < -kPsdRelTolerance * std::max(lmax, 1.0))
        throw std::invalid_argument("GaussianModel: covariance must be positive semidefinite");
}

double GaussianModel::mean_x_total() const {
    double total = 0.0;
    for (int t = 1; t <= horizon_; ++t) total += mean_[x_index(t)];
    return total;
}

Eigen::VectorXd GaussianModel::tail_sum_coefficients(int t) const {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(dim());
    for (int u = t; u <= horizon_; ++u) w[x_index(u)] = 1.0;
    return w;
}

void GaussianModel::save(std::ostream& out) const {
    out << "mpvgauss 1 " << horizon_ << ' ' << aux_dim_ << '\n';
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (int i = 0; i < dim(); ++i) out << (i ? " " : "") << mean_[i];
    out << '\n';
    for (int i = 0; i < dim(); ++i) {
        for (int j = 0; j < dim(); ++j) out << (j ? " " : "") << cov_(i, j);
        out << '\n';
    }
}

void GaussianModel::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("GaussianModel::save: cannot open " + path);
    save(out);
}

GaussianModel GaussianModel::load(std::istream& in) {
    std::string magic;
    int version = 0, horizon = 0, aux_dim = 0;
    in >> magic >> version >> horizon >> aux_dim;
    if (!in || magic != "mpvgauss" || version != 1)
        throw std::invalid_argument("GaussianModel::load: bad file header");
    if (horizon <= 0 || aux_dim < 0) throw std::invalid_argument("GaussianModel::load: bad dimensions");
    const int n = horizon * (1 + aux_dim);
    Eigen::VectorXd mean(n);
    Eigen::MatrixXd cov(n, n);
    for (int i = 0; i < n; ++i) in >> mean[i];
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) in >> cov(i, j);
    if (!in) throw std::invalid_argument("GaussianModel::load: truncated file");
    return GaussianModel(horizon, aux_dim, std::move(mean), std::move(cov));
}

GaussianModel GaussianModel::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("GaussianModel::load: cannot open " + path);
    return load(in);
}

double conditional_variance(const GaussianModel& model, const Eigen::VectorXd& target_coeffs,
                            const std::vector<int>& conditioning) {
    if (target_coeffs.size() != model.dim())
        throw std::invalid_argument("conditional_variance: coefficient length mismatch");
    for (int i : conditioning)
        if (i < 0 || i >= model.dim())
            throw std::invalid_argument("conditional_variance: conditioning index out of range");
    const Eigen::MatrixXd& cov = model.cov();
    const double unconditional = target_coeffs.dot(cov * target_coeffs);
    if (conditioning.empty()) return std::max(unconditional, 0.0);

    const Eigen::MatrixXd block = cov(conditioning, conditioning);
    const Eigen::VectorXd cross = cov(conditioning, Eigen::all) * target_coeffs;
    const Eigen::MatrixXd pinv = psd_pseudo_inverse(block, "conditional_variance");
    double value = unconditional - cross.dot(pinv * cross);
    if (value < 0.0) {
        const double tolerance = 1e-8 * std::max(unconditional, 1.0);
        if (value < -tolerance)
            throw std::runtime_error("conditional_variance: negative conditional variance");
        std::cerr << "mpval: warning: conditional variance " << value << " clamped to 0\n";
        value = 0.0;
    }
    return value;
}

VarianceSchedule variance_schedule(const GaussianModel& model) {
    const int horizon = model.horizon();
    VarianceSchedule schedule;
    schedule.deltas = Eigen::VectorXd::Zero(horizon);
    schedule.total = conditional_variance(model, model.tail_sum_coefficients(1), {});
    const double scale = std::max(schedule.total, 1.0);
    for (int t = 1; t <= horizon; ++t) {
        const Eigen::VectorXd w = model.tail_sum_coefficients(t);
        const double before = conditional_variance(model, w, prefix_indices(model.prefix_size(t - 1)));
        const double after = conditional_variance(model, w, prefix_indices(model.prefix_size(t)));
        double delta = before - after;
        if (delta < 0.0) {
            if (delta < -1e-8 * scale)
                throw std::runtime_error("variance_schedule: negative variance decrement");
            std::cerr << "mpval: warning: variance decrement " << delta << " clamped to 0\n";
            delta = 0.0;
        }
        schedule.deltas[t - 1] = delta;
    }
    if (std::abs(schedule.deltas.sum() - schedule.total) > 1e-8 * scale)
        throw std::runtime_error("variance_schedule: telescoping identity violated");
    return schedule;
}

double limit_value(const GaussianModel& model, const ValuationSchedule& schedule) {
    if (schedule.horizon() != model.horizon())
        throw std::invalid_argument("limit_value: schedule length must equal the horizon");
    const VarianceSchedule vs = variance_schedule(model);
    double value = model.mean_x_total();
    for (int t = 1; t <= model.horizon(); ++t)
        value += mapping_of_standard_normal(schedule.at(t - 1)) * std::sqrt(vs.deltas[t - 1]);
    return value;
}

ConditionalLaw conditional_law(const GaussianModel& model, const Eigen::VectorXd& history) {
    const int block = model.block_size();
    if (history.size() % block != 0)
        throw std::invalid_argument("conditional_law: history length must be a multiple of 1 + aux_dim");
    const int t = static_cast<int>(history.size()) / block;
    if (t >= model.horizon()) throw std::invalid_argument("conditional_law: history already covers the horizon");

    const int p = model.prefix_size(t);
    const Eigen::MatrixXd& cov = model.cov();
    ConditionalLaw law;
    if (t == 0) {
        law.mean = model.mean().head(block);
        law.cov = cov.topLeftCorner(block, block);
        return law;
    }
    const Eigen::MatrixXd prefix_block = cov.topLeftCorner(p, p);
    const Eigen::MatrixXd cross = cov.block(p, 0, block, p);
    const Eigen::MatrixXd gain = cross * psd_pseudo_inverse(prefix_block, "conditional_law");
    law.mean = model.mean().segment(p, block) + gain * (history - model.mean().head(p));
    law.cov = cov.block(p, p, block, block) - gain * cross.transpose();
    law.cov = ((law.cov + law.cov.transpose()) / 2.0).eval();
    return law;
}

ScenarioTree build_tree(const GaussianModel& model, const std::vector<int>& branching,
                        std::uint64_t seed, int workers) {
    const int horizon = model.horizon();
    const int d = model.aux_dim();
    const int block = model.block_size();
    if (static_cast<int>(branching.size()) != horizon)
        throw std::invalid_argument("build_tree: branching must have one entry per period");
    for (int b : branching)
        if (b <= 0) throw std::invalid_argument("build_tree: branching factors must be positive");

    std::vector<std::int64_t> level_offsets(static_cast<std::size_t>(horizon) + 2, 0);
    std::int64_t level_size = 1;
    level_offsets[0] = 0;
    for (int t = 0; t <= horizon; ++t) {
        level_offsets[static_cast<std::size_t>(t) + 1] = level_offsets[static_cast<std::size_t>(t)] + level_size;
        if (t < horizon) level_size *= branching[static_cast<std::size_t>(t)];
    }
    const std::int64_t n = level_offsets.back();

    // Per-level gain and conditional covariance square root (history
    // independent, so computed once).
    std::vector<Eigen::MatrixXd> gains(static_cast<std::size_t>(horizon));
    std::vector<Eigen::MatrixXd> roots(static_cast<std::size_t>(horizon));
    const Eigen::MatrixXd& cov = model.cov();
    for (int t = 0; t < horizon; ++t) {
        const int p = model.prefix_size(t);
        if (t == 0) {
            gains[0] = Eigen::MatrixXd::Zero(block, 0);
            roots[0] = psd_sqrt(cov.topLeftCorner(block, block));
        } else {
            const Eigen::MatrixXd cross = cov.block(p, 0, block, p);
            gains[static_cast<std::size_t>(t)] =
                cross * psd_pseudo_inverse(cov.topLeftCorner(p, p), "build_tree");
            Eigen::MatrixXd c =
                cov.block(p, p, block, block) - gains[static_cast<std::size_t>(t)] * cross.transpose();
            roots[static_cast<std::size_t>(t)] = psd_sqrt(((c + c.transpose()) / 2.0).eval());
        }
    }

    std::vector<double> x(static_cast<std::size_t>(n), 0.0);
    std::vector<double> y(static_cast<std::size_t>(n) * static_cast<std::size_t>(d), 0.0);
    std::vector<std::int64_t> parent(static_cast<std::size_t>(n), -1);
    std::vector<std::int64_t> first_child(static_cast<std::size_t>(n), -1);
    std::vector<std::int32_t> child_count(static_cast<std::size_t>(n), 0);
    std::vector<double> weight(static_cast<std::size_t>(n), 1.0);
    std::vector<std::uint64_t> parent_streams{0};

    for (int t = 0; t < horizon; ++t) {
        const std::int64_t parents_begin = level_offsets[static_cast<std::size_t>(t)];
        const std::int64_t parents_count = level_offsets[static_cast<std::size_t>(t) + 1] - parents_begin;
        const std::int64_t children_begin = level_offsets[static_cast<std::size_t>(t) + 1];
        const int b = branching[static_cast<std::size_t>(t)];
        const double child_weight = 1.0 / static_cast<double>(b);
        std::vector<std::uint64_t> child_streams(static_cast<std::size_t>(parents_count) *
                                                 static_cast<std::size_t>(b));
        const Eigen::MatrixXd& gain = gains[static_cast<std::size_t>(t)];
        const Eigen::MatrixXd& root = roots[static_cast<std::size_t>(t)];

        parallel_for(0, parents_count, workers, [&](std::int64_t i) {
            const std::int64_t pid = parents_begin + i;
            // stack the realized history blocks in time order
            Eigen::VectorXd history(model.prefix_size(t));
            std::int64_t node = pid;
            for (int u = t; u >= 1; --u) {
                const int base = model.prefix_size(u - 1);
                history[base] = x[static_cast<std::size_t>(node)];
                for (int j = 0; j < d; ++j)
                    history[base + 1 + j] =
                        y[static_cast<std::size_t>(node) * static_cast<std::size_t>(d) +
                          static_cast<std::size_t>(j)];
                node = parent[static_cast<std::size_t>(node)];
            }
            Eigen::VectorXd cond_mean = model.mean().segment(model.prefix_size(t), block);
            if (t > 0) cond_mean += gain * (history - model.mean().head(model.prefix_size(t)));

            const std::uint64_t parent_stream = parent_streams[static_cast<std::size_t>(i)];
            const std::int64_t base_child = children_begin + i * b;
            first_child[static_cast<std::size_t>(pid)] = base_child;
            child_count[static_cast<std::size_t>(pid)] = b;
            Eigen::VectorXd shock(block);
            for (int k = 0; k < b; ++k) {
                const std::uint64_t stream = substream(parent_stream, static_cast<std::uint64_t>(k));
                KeyedRng rng(seed, stream);
                for (int j = 0; j < block; ++j) shock[j] = rng.normal();
                const Eigen::VectorXd incr = cond_mean + root * shock;
                const std::int64_t cid = base_child + k;
                x[static_cast<std::size_t>(cid)] = incr[0];
                for (int j = 0; j < d; ++j)
                    y[static_cast<std::size_t>(cid) * static_cast<std::size_t>(d) +
                      static_cast<std::size_t>(j)] = incr[1 + j];
                parent[static_cast<std::size_t>(cid)] = pid;
                weight[static_cast<std::size_t>(cid)] = child_weight;
                child_streams[static_cast<std::size_t>(i * b + k)] = stream;
            }
        });
        parent_streams = std::move(child_streams);
    }

    return ScenarioTree::from_arrays(horizon, d, std::move(level_offsets), std::move(x), std::move(y),
                                     std::move(parent), std::move(first_child), std::move(child_count),
                                     std::move(weight));
}

}  // namespace mpval

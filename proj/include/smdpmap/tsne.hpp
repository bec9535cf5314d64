#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "smdpmap/dataset.hpp"
#include "smdpmap/errors.hpp"
#include "smdpmap/pca.hpp"

namespace smdpmap {

struct TsneConfig {
    double perplexity = 30.0;
    int iterations = 1000;
    double learning_rate = 200.0;
    double initial_momentum = 0.5;
    double final_momentum = 0.8;
    int momentum_switch_iter = 250;
    double early_exaggeration = 12.0;
    int exaggeration_iters = 250;
    double init_std = 1e-4;
    std::uint64_t seed = 0;
};

inline void validate(const TsneConfig& c) {
    if (c.iterations < 1) throw ConfigError("tsne: iterations must be positive");
    if (c.learning_rate <= 0.0) throw ConfigError("tsne: learning rate must be positive");
    if (c.initial_momentum < 0.0 || c.initial_momentum >= 1.0 ||
        c.final_momentum < 0.0 || c.final_momentum >= 1.0)
        throw ConfigError("tsne: momentum must lie in [0, 1)");
    if (c.early_exaggeration < 1.0) throw ConfigError("tsne: early exaggeration must be >= 1");
    if (c.exaggeration_iters >= c.iterations)
        throw ConfigError("tsne: exaggeration phase must be shorter than the run");
    if (!(c.perplexity > 1.0)) throw ConfigError("tsne: perplexity must exceed 1");
}

// Symmetric pairwise affinities P. Entries are >= 0, sum to 1, diagonal 0.
struct Affinities {
    Eigen::MatrixXd p;
    double perplexity = 0.0;
};

// 2-D map coordinates plus the objective trace, one entry per iteration.
struct Embedding {
    Eigen::MatrixXd y;  // N x 2
    std::vector<double> kl_history;
};

struct CalibratedRow {
    double sigma = 0.0;
    Eigen::VectorXd p;  // over the given neighbors, sums to 1
};

namespace detail {

// Gaussian row at bandwidth beta = 1/(2 sigma^2), with the achieved
// perplexity 2^H. Distances are shifted by their minimum before
// exponentiation; the kernel is exactly invariant under that shift.
inline std::pair<double, Eigen::VectorXd> gaussian_row(const Eigen::VectorXd& d2, double beta) {
    const double shift = d2.minCoeff();
    Eigen::VectorXd p = (-beta * (d2.array() - shift)).exp();
    double sum = p.sum();
    if (sum < 1e-12) sum = 1e-12;  // numerical floor for degenerate rows
    p /= sum;
    double h = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i)
        if (p(i) > 0.0) h -= p(i) * std::log2(p(i));
    return {std::exp2(h), std::move(p)};
}

}  // namespace detail

// Finds the Gaussian bandwidth whose conditional distribution over the given
// squared distances realizes the target perplexity (2^H within 1e-5), by
// bracketing and bisecting beta = 1/(2 sigma^2).
//
// Tie-degenerate rows where the perplexity does not respond to beta at all
// (e.g. all neighbors equidistant) return the best achievable row instead of
// failing; a target that is genuinely unreachable raises CalibrationFailed.
inline CalibratedRow perplexity_calibrate(const Eigen::VectorXd& distances_sq, double perplexity,
                                          std::size_t row_index = 0) {
    const Eigen::Index n = distances_sq.size();
    if (n < 2) throw CalibrationFailed(row_index, "fewer than two neighbors");
    if (!(perplexity > 1.0) || !(perplexity < static_cast<double>(n) + 1.0))
        throw CalibrationFailed(row_index, "target perplexity outside (1, N-1)");
    if (!(distances_sq.maxCoeff() > 0.0))
        throw CalibrationFailed(row_index, "all neighbor distances are zero");

    const double tol = 1e-5;
    auto excess = [&](double beta) { return detail::gaussian_row(distances_sq, beta).first - perplexity; };

    // Bracket: perplexity decreases as beta grows.
    double lo = 1.0, hi = 1.0;
    double f_lo = excess(1.0), f_hi = f_lo;
    int expansions = 0;
    if (f_lo > 0.0) {
        while (f_hi > 0.0 && expansions < 50) { hi *= 2.0; f_hi = excess(hi); ++expansions; }
    } else {
        while (f_lo < 0.0 && expansions < 50) { lo /= 2.0; f_lo = excess(lo); ++expansions; }
    }

    if (f_lo < 0.0 || f_hi > 0.0) {
        // No sign change. A flat response means distance ties pin the row
        // shape; return it rather than erroring out.
        if (std::abs(f_lo - f_hi) < 1e-9) {
            auto [pp, p] = detail::gaussian_row(distances_sq, 1.0);
            (void)pp;
            return {std::sqrt(0.5), std::move(p)};
        }
        throw CalibrationFailed(row_index, "cannot bracket target perplexity after 50 expansions");
    }

    double beta = 1.0;
    for (int it = 0; it < 200; ++it) {
        beta = 0.5 * (lo + hi);
        const double f = excess(beta);
        if (std::abs(f) <= tol) {
            auto [pp, p] = detail::gaussian_row(distances_sq, beta);
            (void)pp;
            return {std::sqrt(0.5 / beta), std::move(p)};
        }
        if (f > 0.0) lo = beta; else hi = beta;
    }
    throw CalibrationFailed(row_index, "bisection did not reach tolerance");
}

// Pairwise squared Euclidean distances between rows of x.
inline Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& x) {
    const Eigen::Index n = x.rows();
    Eigen::VectorXd sq = x.rowwise().squaredNorm();
    Eigen::MatrixXd d2 = sq.replicate(1, n) + sq.transpose().replicate(n, 1) -
                         2.0 * (x * x.transpose());
    d2 = d2.cwiseMax(0.0);
    d2.diagonal().setZero();
    return d2;
}

// Row-stochastic conditional affinities p_{j|i}, diagonal 0.
inline Eigen::MatrixXd conditional_affinities(const Eigen::MatrixXd& x, double perplexity) {
    const Eigen::Index n = x.rows();
    if (n < 3) throw DegenerateInput("need at least 3 points for affinities");
    const Eigen::MatrixXd d2 = squared_distances(x);
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd row(n - 1);
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::Index m = 0;
        for (Eigen::Index j = 0; j < n; ++j)
            if (j != i) row(m++) = d2(i, j);
        CalibratedRow c = perplexity_calibrate(row, perplexity, static_cast<std::size_t>(i));
        m = 0;
        for (Eigen::Index j = 0; j < n; ++j)
            if (j != i) p(i, j) = c.p(m++);
    }
    return p;
}

// Joint affinities p = (P + P^T) / 2N.
inline Affinities symmetrize(const Eigen::MatrixXd& p_conditional, double perplexity) {
    const double n = static_cast<double>(p_conditional.rows());
    Affinities a;
    a.p = (p_conditional + p_conditional.transpose()) / (2.0 * n);
    a.perplexity = perplexity;
    return a;
}

// KL(P || Q) with the Student-t low-dimensional kernel.
inline double kl_objective(const Eigen::MatrixXd& p, const Eigen::MatrixXd& y) {
    const Eigen::Index n = y.rows();
    double z = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j)
            z += 2.0 / (1.0 + (y.row(i) - y.row(j)).squaredNorm());
    double kl = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j == i || p(i, j) <= 0.0) continue;
            const double w = 1.0 / (1.0 + (y.row(i) - y.row(j)).squaredNorm());
            const double q = std::max(w / z, 1e-12);
            kl += p(i, j) * std::log(p(i, j) / q);
        }
    }
    return kl;
}

// Analytic gradient: dC/dy_i = 4 sum_j (p_ij - q_ij) w_ij (y_i - y_j).
inline Eigen::MatrixXd kl_gradient(const Eigen::MatrixXd& p, const Eigen::MatrixXd& y) {
    const Eigen::Index n = y.rows();
    Eigen::MatrixXd w(n, n);
    double z = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        w(i, i) = 0.0;
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double v = 1.0 / (1.0 + (y.row(i) - y.row(j)).squaredNorm());
            w(i, j) = v;
            w(j, i) = v;
            z += 2.0 * v;
        }
    }
    Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(n, y.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j == i) continue;
            const double mult = 4.0 * (p(i, j) - w(i, j) / z) * w(i, j);
            grad.row(i) += mult * (y.row(i) - y.row(j));
        }
    }
    return grad;
}

// Gradient descent with momentum and per-parameter gains, from an explicit
// initialization. kl_history records the objective against the plain
// (unexaggerated) P at every iteration.
inline Embedding tsne_embed_from(const Affinities& aff, Eigen::MatrixXd y,
                                 const TsneConfig& cfg) {
    validate(cfg);
    const Eigen::Index n = aff.p.rows();
    if (y.rows() != n || y.cols() != 2)
        throw DegenerateInput("tsne initialization shape mismatch");

    Eigen::MatrixXd velocity = Eigen::MatrixXd::Zero(n, 2);
    Eigen::MatrixXd gains = Eigen::MatrixXd::Ones(n, 2);
    Eigen::MatrixXd w(n, n);

    Embedding emb;
    emb.kl_history.reserve(static_cast<std::size_t>(cfg.iterations));

    for (int iter = 0; iter < cfg.iterations; ++iter) {
        const bool exaggerate = iter < cfg.exaggeration_iters;
        const double lie = exaggerate ? cfg.early_exaggeration : 1.0;
        const double momentum =
            iter < cfg.momentum_switch_iter ? cfg.initial_momentum : cfg.final_momentum;

        double z = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            w(i, i) = 0.0;
            for (Eigen::Index j = i + 1; j < n; ++j) {
                const double v = 1.0 / (1.0 + (y.row(i) - y.row(j)).squaredNorm());
                w(i, j) = v;
                w(j, i) = v;
                z += 2.0 * v;
            }
        }

        double kl = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            Eigen::RowVector2d g = Eigen::RowVector2d::Zero();
            for (Eigen::Index j = 0; j < n; ++j) {
                if (j == i) continue;
                const double q = w(i, j) / z;
                g += 4.0 * (lie * aff.p(i, j) - q) * w(i, j) * (y.row(i) - y.row(j));
                if (aff.p(i, j) > 0.0)
                    kl += aff.p(i, j) * std::log(aff.p(i, j) / std::max(q, 1e-12));
            }
            for (int d = 0; d < 2; ++d) {
                const bool same_sign = (g(d) > 0.0) == (velocity(i, d) > 0.0);
                gains(i, d) = same_sign ? std::max(gains(i, d) * 0.8, 0.01) : gains(i, d) + 0.2;
                velocity(i, d) = momentum * velocity(i, d) - cfg.learning_rate * gains(i, d) * g(d);
            }
        }
        if (!std::isfinite(kl))
            throw NumericalDivergence("tsne objective became non-finite at iteration " +
                                      std::to_string(iter));
        emb.kl_history.push_back(kl);

        y += velocity;
        y.rowwise() -= y.colwise().mean();
    }

    emb.y = std::move(y);
    return emb;
}

inline Embedding tsne_embed(const Affinities& aff, const TsneConfig& cfg) {
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> gauss(0.0, cfg.init_std);
    Eigen::MatrixXd y(aff.p.rows(), 2);
    for (Eigen::Index i = 0; i < y.rows(); ++i)
        for (int d = 0; d < 2; ++d) y(i, d) = gauss(rng);
    return tsne_embed_from(aff, std::move(y), cfg);
}

// Full reduction: PCA to min(pca_dim, F, N) dimensions, then exact t-SNE on
// the projected activations. Output rows follow dataset order.
inline Embedding reduce_pipeline(const Dataset& d, const TsneConfig& cfg,
                                 Eigen::Index pca_dim = 50) {
    if (pca_dim < 1) throw ConfigError("pca_dim must be positive");
    const Eigen::Index n = static_cast<Eigen::Index>(d.size());
    if (!(cfg.perplexity < static_cast<double>(n - 1)))
        throw ConfigError("perplexity must be below N-1");
    Eigen::MatrixXd x = feature_matrix(d);
    const Eigen::Index target = std::min({pca_dim, x.cols(), n});
    auto [pca, projected] = pca_fit_transform(x, target);
    (void)pca;
    Eigen::MatrixXd cond = conditional_affinities(projected, cfg.perplexity);
    Affinities aff = symmetrize(cond, cfg.perplexity);
    return tsne_embed(aff, cfg);
}

}  // namespace smdpmap

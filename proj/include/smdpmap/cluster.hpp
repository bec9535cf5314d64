#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "smdpmap/errors.hpp"
#include "smdpmap/smdp.hpp"
#include "smdpmap/tsne.hpp"

namespace smdpmap {

// N x 3 clustering features: the two map coordinates and the value estimate,
// each column standardized. Constant columns are left at zero and marked by
// scale = 0.
struct ClusterFeatures {
    Eigen::MatrixXd z;
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    Eigen::Vector3d scale = Eigen::Vector3d::Zero();
};

inline ClusterFeatures build_features(const Embedding& emb, const std::vector<double>& values) {
    const Eigen::Index n = emb.y.rows();
    if (static_cast<std::size_t>(n) != values.size())
        throw DegenerateInput("embedding and value lengths disagree");
    ClusterFeatures f;
    f.z.resize(n, 3);
    f.z.leftCols<2>() = emb.y;
    for (Eigen::Index i = 0; i < n; ++i) f.z(i, 2) = values[static_cast<std::size_t>(i)];
    for (int c = 0; c < 3; ++c) {
        const double mean = f.z.col(c).mean();
        const double var = (f.z.col(c).array() - mean).square().mean();
        const double sd = std::sqrt(var);
        f.mean(c) = mean;
        if (sd > 1e-12 * (1.0 + std::abs(mean))) {
            f.scale(c) = sd;
            f.z.col(c) = (f.z.col(c).array() - mean) / sd;
        } else {
            f.scale(c) = 0.0;
            f.z.col(c).setZero();
        }
    }
    return f;
}

// Assignment step of the spatio-temporal k-means: a point joins the cluster
// whose centroid is closest on average over its trajectory window
// [p-w, p+w], truncated at the point's episode boundaries. Ties break toward
// the lower cluster index. w = 0 reduces to nearest-centroid assignment.
inline std::vector<int> windowed_assign(const Eigen::MatrixXd& z, const Eigen::MatrixXd& centroids,
                                        const std::vector<EpisodeSpan>& episodes, int w) {
    if (w < 0) throw ConfigError("window radius must be non-negative");
    const Eigen::Index n = z.rows();
    const int k = static_cast<int>(centroids.rows());
    std::vector<int> labels(static_cast<std::size_t>(n), 0);

    // Squared distances point-to-centroid, then per-episode prefix sums so a
    // window cost is one subtraction per cluster.
    Eigen::MatrixXd d2(n, k);
    for (int j = 0; j < k; ++j)
        d2.col(j) = (z.rowwise() - centroids.row(j)).rowwise().squaredNorm();

    for (const auto& ep : episodes) {
        const std::size_t len = ep.size();
        Eigen::MatrixXd prefix = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(len) + 1, k);
        for (std::size_t i = 0; i < len; ++i)
            prefix.row(static_cast<Eigen::Index>(i) + 1) =
                prefix.row(static_cast<Eigen::Index>(i)) +
                d2.row(static_cast<Eigen::Index>(ep.begin + i));
        for (std::size_t i = 0; i < len; ++i) {
            const std::size_t lo = i >= static_cast<std::size_t>(w) ? i - static_cast<std::size_t>(w) : 0;
            const std::size_t hi = std::min(len - 1, i + static_cast<std::size_t>(w));
            const double width = static_cast<double>(hi - lo + 1);
            int best = 0;
            double best_cost = std::numeric_limits<double>::infinity();
            for (int j = 0; j < k; ++j) {
                const double cost = (prefix(static_cast<Eigen::Index>(hi) + 1, j) -
                                     prefix(static_cast<Eigen::Index>(lo), j)) / width;
                if (cost < best_cost) {
                    best_cost = cost;
                    best = j;
                }
            }
            labels[ep.begin + i] = best;
        }
    }
    return labels;
}

// Cluster assignment with per-point diagnostics.
struct Labeling {
    std::vector<int> labels;
    Eigen::MatrixXd centroids;  // k x 3
    double inertia = 0.0;
    int iterations = 0;
    std::uint64_t seed = 0;
};

namespace detail {

inline Eigen::MatrixXd kmeanspp_init(const Eigen::MatrixXd& z, int k, std::mt19937_64& rng) {
    const Eigen::Index n = z.rows();
    Eigen::MatrixXd centroids(k, z.cols());
    std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
    std::vector<bool> chosen(static_cast<std::size_t>(n), false);
    Eigen::Index c0 = first(rng);
    centroids.row(0) = z.row(c0);
    chosen[static_cast<std::size_t>(c0)] = true;

    Eigen::VectorXd mind2 = (z.rowwise() - centroids.row(0)).rowwise().squaredNorm();
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int m = 1; m < k; ++m) {
        const double total = mind2.sum();
        Eigen::Index pick = -1;
        if (total > 0.0) {
            double target = unit(rng) * total;
            for (Eigen::Index i = 0; i < n; ++i) {
                target -= mind2(i);
                if (target <= 0.0) {
                    pick = i;
                    break;
                }
            }
            if (pick < 0) pick = n - 1;
        } else {
            // All remaining mass is zero (duplicate points): take the first
            // index not yet chosen so the run stays deterministic.
            for (Eigen::Index i = 0; i < n; ++i)
                if (!chosen[static_cast<std::size_t>(i)]) {
                    pick = i;
                    break;
                }
            if (pick < 0) pick = 0;
        }
        centroids.row(m) = z.row(pick);
        chosen[static_cast<std::size_t>(pick)] = true;
        mind2 = mind2.cwiseMin((z.rowwise() - centroids.row(m)).rowwise().squaredNorm());
    }
    return centroids;
}

}  // namespace detail

// Lloyd-style loop alternating the windowed assignment with plain
// mean-centroid updates, k-means++ seeded. Empty clusters are reseeded at
// the point farthest from its assigned centroid. The windowed assignment is
// not guaranteed to reach a fixpoint, so the 300-iteration cap is
// load-bearing and reported via `iterations`.
inline Labeling st_kmeans(const Eigen::MatrixXd& z, const std::vector<EpisodeSpan>& episodes,
                          int k, int w, std::uint64_t seed) {
    const Eigen::Index n = z.rows();
    if (k < 2) throw ConfigError("k must be at least 2");
    if (n < k) throw ConfigError("fewer points than clusters");

    std::mt19937_64 rng(seed);
    Labeling lab;
    lab.seed = seed;
    lab.centroids = detail::kmeanspp_init(z, k, rng);

    std::vector<int> prev;
    constexpr int kMaxIterations = 300;
    for (int it = 0; it < kMaxIterations; ++it) {
        lab.iterations = it + 1;
        lab.labels = windowed_assign(z, lab.centroids, episodes, w);

        // Repair empty clusters before the update step so every index in
        // [0, k) stays populated.
        std::vector<int> count(static_cast<std::size_t>(k), 0);
        for (int l : lab.labels) ++count[static_cast<std::size_t>(l)];
        for (int c = 0; c < k; ++c) {
            if (count[static_cast<std::size_t>(c)] > 0) continue;
            Eigen::Index farthest = -1;
            double far_d2 = -1.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                const int l = lab.labels[static_cast<std::size_t>(i)];
                if (count[static_cast<std::size_t>(l)] <= 1) continue;  // keep donors non-empty
                const double d = (z.row(i) - lab.centroids.row(l)).squaredNorm();
                if (d > far_d2) {
                    far_d2 = d;
                    farthest = i;
                }
            }
            if (farthest < 0) continue;
            const int donor = lab.labels[static_cast<std::size_t>(farthest)];
            --count[static_cast<std::size_t>(donor)];
            lab.labels[static_cast<std::size_t>(farthest)] = c;
            ++count[static_cast<std::size_t>(c)];
            lab.centroids.row(c) = z.row(farthest);
        }

        // Update step: plain per-cluster means.
        Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, z.cols());
        for (Eigen::Index i = 0; i < n; ++i)
            sums.row(lab.labels[static_cast<std::size_t>(i)]) += z.row(i);
        for (int c = 0; c < k; ++c)
            if (count[static_cast<std::size_t>(c)] > 0)
                lab.centroids.row(c) = sums.row(c) / count[static_cast<std::size_t>(c)];

        if (lab.labels == prev) break;
        prev = lab.labels;
    }

    lab.inertia = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        lab.inertia += (z.row(i) - lab.centroids.row(lab.labels[static_cast<std::size_t>(i)])).squaredNorm();
    return lab;
}

struct RestartEntry {
    std::uint64_t seed = 0;
    double entropy = 0.0;
    double inertia = 0.0;
    double intensity = 0.0;
};

struct SearchResult {
    Labeling labeling;
    SmdpModel model;
    std::vector<RestartEntry> log;
};

// Multi-restart search: cluster with seeds base_seed .. base_seed+restarts-1,
// fit an SMDP per run, keep the run with minimum size-weighted entropy.
// Ties break by lower inertia, then lower seed.
inline SearchResult restart_search(const ClusterFeatures& features,
                                   const std::vector<EpisodeSpan>& episodes,
                                   const std::vector<double>& rewards, int k, int w, int restarts,
                                   std::uint64_t base_seed, const FitOptions& fit_opt = {}) {
    if (restarts < 1) throw ConfigError("restarts must be at least 1");
    SearchResult best;
    bool have = false;
    for (int r = 0; r < restarts; ++r) {
        const std::uint64_t seed = base_seed + static_cast<std::uint64_t>(r);
        Labeling lab = st_kmeans(features.z, episodes, k, w, seed);
        SmdpModel model = fit(lab.labels, episodes, rewards, features.z, lab.centroids, k, fit_opt);
        best.log.push_back({seed, model.entropy, lab.inertia, model.intensity});
        const bool better =
            !have || model.entropy < best.model.entropy ||
            (model.entropy == best.model.entropy && lab.inertia < best.labeling.inertia);
        if (better) {
            best.labeling = std::move(lab);
            best.model = std::move(model);
            have = true;
        }
    }
    return best;
}

}  // namespace smdpmap

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "smdpmap/dataset.hpp"
#include "smdpmap/errors.hpp"
#include "smdpmap/smdp.hpp"

namespace smdpmap {

namespace detail {

// Pearson correlation; nullopt when fewer than 3 pairs or either series is
// constant.
inline std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n < 3) return std::nullopt;
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace detail

// Per-episode empirical frequency of taking the greedy exit from each
// cluster. Entries where the episode never exits the cluster are undefined.
struct AdherenceMatrix {
    Eigen::MatrixXd value;  // episodes x k, meaningful only where defined
    std::vector<std::vector<bool>> defined;
};

inline AdherenceMatrix greedy_adherence(const std::vector<Segment>& segments,
                                        const std::vector<int>& greedy,
                                        std::size_t episode_count, int k) {
    AdherenceMatrix a;
    a.value = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(episode_count), k);
    a.defined.assign(episode_count, std::vector<bool>(static_cast<std::size_t>(k), false));
    Eigen::MatrixXd exits = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(episode_count), k);
    for (const auto& s : segments) {
        if (s.next_cluster == kTerminal) continue;
        exits(static_cast<Eigen::Index>(s.episode), s.cluster) += 1.0;
        if (s.next_cluster == greedy[static_cast<std::size_t>(s.cluster)])
            a.value(static_cast<Eigen::Index>(s.episode), s.cluster) += 1.0;
    }
    for (std::size_t e = 0; e < episode_count; ++e)
        for (int i = 0; i < k; ++i)
            if (exits(static_cast<Eigen::Index>(e), i) > 0.0) {
                a.value(static_cast<Eigen::Index>(e), i) /= exits(static_cast<Eigen::Index>(e), i);
                a.defined[e][static_cast<std::size_t>(i)] = true;
            }
    return a;
}

// corr_i = corr(P_i^j, R^j) over episodes; undefined entries are dropped
// pairwise. Needs at least 3 defined episodes and non-constant series.
inline std::vector<std::optional<double>> adherence_reward_correlation(
    const AdherenceMatrix& adherence, const std::vector<double>& episode_returns) {
    const int k = static_cast<int>(adherence.value.cols());
    std::vector<std::optional<double>> corr(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
        std::vector<double> x, y;
        for (std::size_t e = 0; e < episode_returns.size(); ++e) {
            if (!adherence.defined[e][static_cast<std::size_t>(i)]) continue;
            x.push_back(adherence.value(static_cast<Eigen::Index>(e), i));
            y.push_back(episode_returns[e]);
        }
        corr[static_cast<std::size_t>(i)] = detail::pearson(x, y);
    }
    return corr;
}

// Skill-transition matrices restricted to the k_traj top- and
// bottom-rewarded episodes. Return ties break by episode index so the
// selection is deterministic.
inline std::pair<SkillMatrix, SkillMatrix> extreme_trajectory_matrices(
    const std::vector<Segment>& segments, const std::vector<double>& episode_returns, int k_traj,
    int k) {
    const std::size_t e = episode_returns.size();
    if (k_traj < 1 || static_cast<std::size_t>(k_traj) > e)
        throw InsufficientEpisodes(k_traj, e);

    std::vector<std::size_t> order(e);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return episode_returns[a] > episode_returns[b];
    });

    std::vector<bool> in_top(e, false), in_bottom(e, false);
    for (int i = 0; i < k_traj; ++i) in_top[order[static_cast<std::size_t>(i)]] = true;
    for (int i = 0; i < k_traj; ++i)
        in_bottom[order[e - 1 - static_cast<std::size_t>(i)]] = true;

    std::vector<Segment> top, bottom;
    for (const auto& s : segments) {
        if (in_top[s.episode]) top.push_back(s);
        if (in_bottom[s.episode]) bottom.push_back(s);
    }
    return {skill_transition_matrix(top, k), skill_transition_matrix(bottom, k)};
}

// Pearson correlation between the flattened one-hot greedy matrix T^G and t,
// over rows that are non-absorbing in both. Zero variance on either side
// yields 0 (the centered covariance vanishes).
inline double greedy_matrix_correlation(const SkillMatrix& t, const std::vector<int>& greedy,
                                        const std::vector<bool>& model_absorbing) {
    const int k = static_cast<int>(t.p.rows());
    std::vector<double> x, y;
    for (int i = 0; i < k; ++i) {
        if (t.absorbing[static_cast<std::size_t>(i)] || model_absorbing[static_cast<std::size_t>(i)])
            continue;
        for (int j = 0; j < k; ++j) {
            x.push_back(greedy[static_cast<std::size_t>(i)] == j ? 1.0 : 0.0);
            y.push_back(t.p(i, j));
        }
    }
    const std::size_t n = x.size();
    if (n == 0) return 0.0;
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx <= 0.0 || syy <= 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

// Consistency diagnostics: value agreement, greedy/reward correlations and
// the T+/T- analysis across a sweep of trajectory counts.
struct EvalReport {
    double vmse = 0.0;
    Eigen::VectorXd v_dqn_clusters;
    Eigen::VectorXd v_smdp;
    std::vector<std::optional<double>> per_cluster_corr;
    std::vector<std::pair<int, double>> tg_top_corr;
    std::vector<std::pair<int, double>> tg_bottom_corr;
    std::vector<double> episode_returns;
    std::vector<int> skipped_k_traj;  // sweep entries beyond the episode count
};

inline EvalReport build_report(const SmdpModel& model, const Dataset& dataset,
                               const std::vector<int>& labels,
                               const std::vector<int>& k_traj_sweep) {
    EvalReport rep;
    const auto values = value_estimates(dataset);
    rep.v_dqn_clusters = cluster_dqn_values(values, labels, model.k);
    rep.v_smdp = model.v_smdp;
    rep.vmse = vmse(rep.v_dqn_clusters, model.v_smdp);
    rep.episode_returns = episode_returns(dataset);

    std::vector<double> rewards;
    rewards.reserve(dataset.size());
    for (const auto& r : dataset.records()) rewards.push_back(r.reward);
    const auto segs = segment(labels, dataset.episodes(), rewards, model.gamma);

    const auto adherence = greedy_adherence(segs, model.greedy, dataset.episodes().size(), model.k);
    rep.per_cluster_corr = adherence_reward_correlation(adherence, rep.episode_returns);

    for (int k_traj : k_traj_sweep) {
        if (k_traj < 1 || static_cast<std::size_t>(k_traj) > rep.episode_returns.size()) {
            rep.skipped_k_traj.push_back(k_traj);
            continue;
        }
        auto [t_plus, t_minus] =
            extreme_trajectory_matrices(segs, rep.episode_returns, k_traj, model.k);
        rep.tg_top_corr.emplace_back(
            k_traj, greedy_matrix_correlation(t_plus, model.greedy, model.absorbing));
        rep.tg_bottom_corr.emplace_back(
            k_traj, greedy_matrix_correlation(t_minus, model.greedy, model.absorbing));
    }
    return rep;
}

}  // namespace smdpmap

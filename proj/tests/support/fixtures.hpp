#pragma once

// Shared builders for synthetic ground truths and small hand datasets.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "smdpmap/dataset.hpp"
#include "smdpmap/synth.hpp"

namespace fixtures {

// Well-separated emission means on a circle: pairwise distance at least
// `margin` times the emission sigma.
inline Eigen::MatrixXd circle_emissions(int k, double sigma, double margin, int dims = 2) {
    Eigen::MatrixXd means = Eigen::MatrixXd::Zero(k, dims);
    // Chord between adjacent means is 2 R sin(pi/k); pick R to meet the margin.
    const double radius =
        margin * sigma / std::max(2.0 * std::sin(M_PI / std::max(k, 2)), 1e-9);
    for (int i = 0; i < k; ++i) {
        const double angle = 2.0 * M_PI * i / k;
        means(i, 0) = radius * std::cos(angle);
        means(i, 1) = radius * std::sin(angle);
    }
    return means;
}

// Deterministic cycle 0 -> 1 -> ... -> k-1 -> 0 with no terminal cluster;
// episodes end at the step cap.
inline smdpmap::GroundTruthSmdp cycle_gt(int k, double emission_sigma, double hold_mean,
                                         double qvalue_noise = 0.01) {
    smdpmap::GroundTruthSmdp gt;
    gt.k_true = k;
    gt.p_true = Eigen::MatrixXd::Zero(k, k);
    for (int i = 0; i < k; ++i) gt.p_true(i, (i + 1) % k) = 1.0;
    gt.hold_mean = Eigen::VectorXd::Constant(k, hold_mean);
    gt.step_reward = Eigen::VectorXd::LinSpaced(k, 0.0, 1.0);
    gt.emission_mean = circle_emissions(k, std::max(emission_sigma, 0.25), 4.0);
    gt.emission_sigma = emission_sigma;
    gt.gamma = 0.95;
    gt.qvalue_noise = qvalue_noise;
    gt.max_episode_steps = 60;
    gt.start_clusters = {0};
    return gt;
}

// Start cluster branches to a rewarded or an unrewarded arm, both falling
// into a terminal sink: bimodal episode returns.
inline smdpmap::GroundTruthSmdp branch_gt(double p_good = 0.5, double good_reward = 10.0,
                                          double emission_sigma = 0.15) {
    smdpmap::GroundTruthSmdp gt;
    gt.k_true = 4;  // 0 start, 1 rewarded arm, 2 dud arm, 3 sink
    gt.p_true = Eigen::MatrixXd::Zero(4, 4);
    gt.p_true(0, 1) = p_good;
    gt.p_true(0, 2) = 1.0 - p_good;
    gt.p_true(1, 3) = 1.0;
    gt.p_true(2, 3) = 1.0;
    gt.hold_mean = Eigen::VectorXd::Ones(4);
    gt.hold_mean(0) = 3.0;
    gt.step_reward = Eigen::VectorXd::Zero(4);
    gt.step_reward(1) = good_reward;
    gt.emission_mean = circle_emissions(4, std::max(emission_sigma, 0.25), 6.0);
    gt.emission_sigma = emission_sigma;
    gt.terminal_clusters = {3};
    gt.start_clusters = {0};
    gt.gamma = 0.95;
    gt.qvalue_noise = 0.005;
    return gt;
}

// Random ground truth with at most `max_succ` successors per cluster and a
// terminal sink reachable from everywhere.
inline smdpmap::GroundTruthSmdp random_gt(int k, std::uint64_t seed, int max_succ = 3,
                                          double emission_sigma = 0.2) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.05, 1.0);
    std::uniform_int_distribution<int> succ_count(1, max_succ);

    smdpmap::GroundTruthSmdp gt;
    gt.k_true = k;
    gt.p_true = Eigen::MatrixXd::Zero(k, k);
    const int sink = k - 1;
    for (int i = 0; i < sink; ++i) {
        const int n_succ = succ_count(rng);
        std::vector<int> candidates;
        for (int j = 0; j < k; ++j)
            if (j != i) candidates.push_back(j);
        std::shuffle(candidates.begin(), candidates.end(), rng);
        candidates.resize(static_cast<std::size_t>(n_succ));
        // Keep the sink reachable: force it in occasionally.
        if (i == 0 && std::find(candidates.begin(), candidates.end(), sink) == candidates.end())
            candidates.back() = sink;
        double total = 0.0;
        std::vector<double> mass;
        for (std::size_t c = 0; c < candidates.size(); ++c) {
            mass.push_back(unit(rng));
            total += mass.back();
        }
        for (std::size_t c = 0; c < candidates.size(); ++c)
            gt.p_true(i, candidates[c]) = mass[c] / total;
    }
    gt.terminal_clusters = {sink};
    gt.hold_mean = Eigen::VectorXd::Zero(k);
    gt.step_reward = Eigen::VectorXd::Zero(k);
    std::uniform_real_distribution<double> hold(1.0, 8.0), rew(-1.0, 1.0);
    for (int i = 0; i < k; ++i) {
        gt.hold_mean(i) = hold(rng);
        gt.step_reward(i) = rew(rng);
    }
    gt.emission_mean = circle_emissions(k, std::max(emission_sigma, 0.25), 5.0);
    gt.emission_sigma = emission_sigma;
    gt.gamma = 0.9;
    gt.max_episode_steps = 400;
    return gt;
}

// Hand dataset: explicit (episode lengths, F, A) with synthetic payloads.
inline smdpmap::Dataset tiny_dataset(const std::vector<int>& episode_lengths, int f = 3, int a = 2) {
    std::vector<smdpmap::TrajectoryRecord> records;
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    for (std::size_t e = 0; e < episode_lengths.size(); ++e) {
        for (int s = 0; s < episode_lengths[e]; ++s) {
            smdpmap::TrajectoryRecord r;
            r.episode_id = static_cast<std::int64_t>(e);
            r.step = s;
            for (int i = 0; i < f; ++i) r.features.push_back(unit(rng));
            for (int i = 0; i < a; ++i) r.qvalues.push_back(unit(rng));
            r.action = 0;
            r.reward = unit(rng);
            r.terminal = (s + 1 == episode_lengths[e]);
            records.push_back(std::move(r));
        }
    }
    return smdpmap::Dataset::from_records(std::move(records));
}

// Episode spans for a label vector treated as `episodes` equal chunks.
inline std::vector<smdpmap::EpisodeSpan> even_episodes(std::size_t n, std::size_t episodes) {
    std::vector<smdpmap::EpisodeSpan> spans;
    const std::size_t len = n / episodes;
    for (std::size_t e = 0; e < episodes; ++e)
        spans.push_back({e * len, e + 1 == episodes ? n : (e + 1) * len});
    return spans;
}

}  // namespace fixtures

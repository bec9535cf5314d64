#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/LU>

#include "smdpmap/dataset.hpp"
#include "smdpmap/errors.hpp"

namespace smdpmap {

// Known Semi-MDP to sample trajectories from, so recovery, entropy, value
// and correlation claims can be checked against ground truth.
struct GroundTruthSmdp {
    int k_true = 0;
    Eigen::MatrixXd p_true;             // k x k skill transitions, diagonal 0 on live rows
    Eigen::VectorXd hold_mean;          // geometric holding-time means, >= 1
    Eigen::VectorXd step_reward;        // per-step reward while inside a cluster
    Eigen::MatrixXd emission_mean;      // k x F feature-space means
    double emission_sigma = 0.1;        // isotropic emission noise
    std::vector<int> terminal_clusters; // the episode ends after their holding completes
    std::vector<int> start_clusters;    // uniform episode starts; empty = all non-terminal
    double gamma = 0.99;
    int action_count = 4;
    double qvalue_noise = 0.01;         // uniform bound on the max-q perturbation
    int max_episode_steps = 10000;
    bool raw_onehot = false;            // emit a one-hot true-cluster raw channel
    double emission_margin = 0.0;       // required pairwise mean separation, in sigmas
};

inline bool is_terminal(const GroundTruthSmdp& gt, int c) {
    return std::find(gt.terminal_clusters.begin(), gt.terminal_clusters.end(), c) !=
           gt.terminal_clusters.end();
}

inline void validate(const GroundTruthSmdp& gt) {
    const int k = gt.k_true;
    if (k < 1) throw ConfigError("synth: k_true must be positive");
    if (gt.p_true.rows() != k || gt.p_true.cols() != k)
        throw ConfigError("synth: p_true must be k x k");
    if (gt.hold_mean.size() != k || gt.step_reward.size() != k)
        throw ConfigError("synth: hold_mean and step_reward must have length k");
    if (gt.emission_mean.rows() != k) throw ConfigError("synth: emission_mean must have k rows");
    if (!(gt.gamma > 0.0) || gt.gamma > 1.0) throw ConfigError("synth: gamma must lie in (0, 1]");
    if (gt.action_count < 1) throw ConfigError("synth: action_count must be positive");
    for (int i = 0; i < k; ++i) {
        if (gt.hold_mean(i) < 1.0) throw ConfigError("synth: holding-time means must be >= 1");
        if (is_terminal(gt, i)) continue;
        const double row = gt.p_true.row(i).sum();
        if (std::abs(row - 1.0) > 1e-9)
            throw ConfigError("synth: p_true row " + std::to_string(i) + " is not stochastic");
        if (gt.p_true(i, i) != 0.0)
            throw ConfigError("synth: live p_true rows must have zero diagonal");
    }
    for (int c : gt.start_clusters)
        if (c < 0 || c >= k || is_terminal(gt, c))
            throw ConfigError("synth: start clusters must be live cluster indices");
    if (gt.emission_margin > 0.0) {
        const double required = gt.emission_margin * gt.emission_sigma;
        for (int i = 0; i < k; ++i)
            for (int j = i + 1; j < k; ++j)
                if ((gt.emission_mean.row(i) - gt.emission_mean.row(j)).norm() < required)
                    throw ConfigError("synth: emission means " + std::to_string(i) + " and " +
                                      std::to_string(j) + " are closer than the margin");
    }
}

// Expected per-visit discounted reward accrued inside each cluster, using
// the exact geometric E[gamma^L].
inline Eigen::VectorXd analytic_visit_rewards(const GroundTruthSmdp& gt) {
    Eigen::VectorXd r(gt.k_true);
    for (int i = 0; i < gt.k_true; ++i) {
        const double q = 1.0 / gt.hold_mean(i);
        if (gt.gamma < 1.0) {
            const double e_gamma_l = q * gt.gamma / (1.0 - gt.gamma * (1.0 - q));
            r(i) = gt.step_reward(i) * (1.0 - e_gamma_l) / (1.0 - gt.gamma);
        } else {
            r(i) = gt.step_reward(i) * gt.hold_mean(i);
        }
    }
    return r;
}

// Value of the ground-truth semi-Markov reward process under expected
// holding-time discounting: per-visit reward uses the exact geometric
// E[gamma^L]; the transition discount uses gamma^mean-hold, matching what a
// fit on infinitely many episodes converges to.
inline Eigen::VectorXd analytic_value(const GroundTruthSmdp& gt) {
    validate(gt);
    const int k = gt.k_true;
    const Eigen::VectorXd r = analytic_visit_rewards(gt);
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(k, k);
    for (int i = 0; i < k; ++i)
        if (!is_terminal(gt, i))
            a.row(i) -= std::pow(gt.gamma, gt.hold_mean(i)) * gt.p_true.row(i);
    Eigen::VectorXd v = a.partialPivLu().solve(r);
    if (!v.allFinite() || (a * v - r).norm() > 1e-8)
        throw SingularSystem("ground-truth value solve failed; gamma=" + std::to_string(gt.gamma));
    return v;
}

namespace detail {

// Geometric holding time on {1, 2, ...} with the given mean, by inverse CDF.
inline int sample_holding(double mean, std::mt19937_64& rng) {
    const double q = 1.0 / mean;
    if (q >= 1.0) return 1;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double u = unit(rng);
    if (u <= 0.0) u = std::numeric_limits<double>::min();
    return 1 + static_cast<int>(std::floor(std::log(u) / std::log(1.0 - q)));
}

inline int sample_categorical(const Eigen::VectorXd& p, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double target = unit(rng);
    for (Eigen::Index j = 0; j < p.size(); ++j) {
        target -= p(j);
        if (target <= 0.0) return static_cast<int>(j);
    }
    return static_cast<int>(p.size() - 1);
}

}  // namespace detail

// Simulates the cluster-level chain and emits per-step records. Q-values are
// synthesized so the per-step max equals the analytic cluster value plus
// bounded uniform noise; ground-truth labels ride along as `true_label`.
// Episode generation derives one RNG per episode from (seed, episode).
inline Dataset generate(const GroundTruthSmdp& gt, int episodes, std::uint64_t seed) {
    validate(gt);
    if (episodes < 1) throw ConfigError("synth: need at least one episode");

    std::vector<int> starts = gt.start_clusters;
    if (starts.empty())
        for (int c = 0; c < gt.k_true; ++c)
            if (!is_terminal(gt, c)) starts.push_back(c);
    if (starts.empty()) throw ConfigError("synth: every cluster is terminal");

    const Eigen::VectorXd v_true = analytic_value(gt);
    const Eigen::Index f = gt.emission_mean.cols();

    std::vector<TrajectoryRecord> records;
    std::vector<int> true_labels;

    for (int e = 0; e < episodes; ++e) {
        std::mt19937_64 rng(seed + 0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(e + 1));
        std::normal_distribution<double> gauss(0.0, 1.0);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::uniform_int_distribution<int> any_action(0, gt.action_count - 1);

        std::uniform_int_distribution<std::size_t> pick_start(0, starts.size() - 1);
        int cluster = starts[pick_start(rng)];
        int steps = 0;
        std::int64_t step_in_episode = 0;
        bool done = false;
        while (!done) {
            int holding = detail::sample_holding(gt.hold_mean(cluster), rng);
            holding = std::min(holding, gt.max_episode_steps - steps);
            const bool terminal_cluster = is_terminal(gt, cluster);

            for (int t = 0; t < holding; ++t) {
                TrajectoryRecord r;
                r.episode_id = e;
                r.step = step_in_episode++;
                r.features.resize(static_cast<std::size_t>(f));
                for (Eigen::Index d = 0; d < f; ++d)
                    r.features[static_cast<std::size_t>(d)] =
                        gt.emission_mean(cluster, d) + gt.emission_sigma * gauss(rng);
                const double vmax =
                    v_true(cluster) + (gt.qvalue_noise > 0.0
                                           ? gt.qvalue_noise * (2.0 * unit(rng) - 1.0)
                                           : 0.0);
                const int best_action = any_action(rng);
                r.qvalues.assign(static_cast<std::size_t>(gt.action_count), 0.0);
                for (int a = 0; a < gt.action_count; ++a)
                    r.qvalues[static_cast<std::size_t>(a)] =
                        a == best_action ? vmax : vmax - (0.1 + unit(rng));
                r.action = best_action;
                r.reward = gt.step_reward(cluster);
                if (gt.raw_onehot) {
                    r.raw.assign(static_cast<std::size_t>(gt.k_true), 0.0);
                    r.raw[static_cast<std::size_t>(cluster)] = 1.0;
                }
                records.push_back(std::move(r));
                true_labels.push_back(cluster);
            }
            steps += holding;

            if (terminal_cluster || steps >= gt.max_episode_steps) {
                records.back().terminal = true;
                done = true;
            } else {
                cluster = detail::sample_categorical(gt.p_true.row(cluster), rng);
            }
        }
    }
    return Dataset::from_records(std::move(records), std::move(true_labels));
}

}  // namespace smdpmap

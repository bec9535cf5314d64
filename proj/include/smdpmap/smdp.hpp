#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/LU>

#include "smdpmap/dataset.hpp"
#include "smdpmap/errors.hpp"

namespace smdpmap {

// Sentinel successor for the last segment of an episode.
inline constexpr int kTerminal = -1;

// One maximal run of identical labels inside an episode: the realized skill
// carrying the agent from `cluster` to `next_cluster`.
struct Segment {
    int cluster = 0;
    std::size_t episode = 0;  // ordinal into the episode index
    std::size_t start = 0;    // absolute record index of the first step
    int length = 1;           // holding time in steps
    double discounted_reward = 0.0;  // sum gamma^t r_t, t counted from the segment start
    double total_reward = 0.0;       // undiscounted within-segment sum
    int next_cluster = kTerminal;
};

// Run-length encodes labels per episode. Discounting restarts at each
// segment start; the last segment of an episode exits to kTerminal.
inline std::vector<Segment> segment(const std::vector<int>& labels,
                                    const std::vector<EpisodeSpan>& episodes,
                                    const std::vector<double>& rewards, double gamma) {
    if (!(gamma > 0.0) || gamma > 1.0) throw ConfigError("gamma must lie in (0, 1]");
    std::vector<Segment> out;
    for (std::size_t e = 0; e < episodes.size(); ++e) {
        const auto& ep = episodes[e];
        std::size_t i = ep.begin;
        while (i < ep.end) {
            Segment s;
            s.cluster = labels[i];
            s.episode = e;
            s.start = i;
            double disc = 1.0;
            std::size_t j = i;
            for (; j < ep.end && labels[j] == s.cluster; ++j) {
                s.discounted_reward += disc * rewards[j];
                s.total_reward += rewards[j];
                disc *= gamma;
            }
            s.length = static_cast<int>(j - i);
            s.next_cluster = (j < ep.end) ? labels[j] : kTerminal;
            out.push_back(s);
            i = j;
        }
    }
    return out;
}

// Skill-level transition matrix estimated from segments. Rows of clusters
// with no observed exit (terminal-only, or never visited) are absorbing:
// one-hot on the diagonal.
struct SkillMatrix {
    Eigen::MatrixXd p;
    std::vector<bool> absorbing;
};

inline SkillMatrix skill_transition_matrix(const std::vector<Segment>& segments, int k) {
    SkillMatrix m;
    m.p = Eigen::MatrixXd::Zero(k, k);
    m.absorbing.assign(static_cast<std::size_t>(k), false);
    for (const auto& s : segments)
        if (s.next_cluster != kTerminal) m.p(s.cluster, s.next_cluster) += 1.0;
    for (int i = 0; i < k; ++i) {
        const double total = m.p.row(i).sum();
        if (total > 0.0) {
            m.p.row(i) /= total;
        } else {
            m.absorbing[static_cast<std::size_t>(i)] = true;
            m.p(i, i) = 1.0;
        }
    }
    return m;
}

// Size-weighted Shannon entropy of the skill transition rows, with
// 0 log 0 = 0. Weights are |C_i| / N; absorbing (one-hot) rows contribute 0.
inline double entropy(const Eigen::MatrixXd& p_skill, const Eigen::VectorXi& sizes) {
    const double n = static_cast<double>(sizes.sum());
    if (n <= 0.0) return 0.0;
    double e = 0.0;
    for (Eigen::Index i = 0; i < p_skill.rows(); ++i) {
        double row = 0.0;
        for (Eigen::Index j = 0; j < p_skill.cols(); ++j) {
            const double p = p_skill(i, j);
            if (p > 0.0) row -= p * std::log(p);
        }
        e += (static_cast<double>(sizes(i)) / n) * row;
    }
    return e;
}

// Fraction of in- versus out-of-cluster stepping in the step-level matrix:
// the diagonal mass of each column over its column sum, summed over columns
// with any mass.
inline double intensity_factor(const Eigen::MatrixXd& p_step) {
    double f = 0.0;
    for (Eigen::Index j = 0; j < p_step.cols(); ++j) {
        const double col = p_step.col(j).sum();
        if (col > 0.0) f += p_step(j, j) / col;
    }
    return f;
}

// Solves v = r + diag(gamma^hold) P v by direct LU factorization. Rows
// flagged absorbing are excluded from the recursion (their value equals
// their reward). Residual above 1e-8 signals a singular system, e.g.
// gamma = 1 with a recurrent chain.
inline Eigen::VectorXd solve_value(const Eigen::MatrixXd& p_skill,
                                   const std::vector<bool>& absorbing,
                                   const Eigen::VectorXd& hold, const Eigen::VectorXd& reward,
                                   double gamma) {
    const Eigen::Index k = p_skill.rows();
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(k, k);
    for (Eigen::Index i = 0; i < k; ++i) {
        if (absorbing[static_cast<std::size_t>(i)]) continue;
        a.row(i) -= std::pow(gamma, hold(i)) * p_skill.row(i);
    }
    Eigen::VectorXd v = a.partialPivLu().solve(reward);
    const double residual = (a * v - reward).norm();
    if (!v.allFinite() || !(residual < 1e-8))
        throw SingularSystem("value solve residual " + std::to_string(residual) +
                             "; gamma=" + std::to_string(gamma));
    return v;
}

// The fitted Semi-MDP over cluster labels.
struct SmdpModel {
    int k = 0;
    double gamma = 0.99;
    Eigen::MatrixXd p_skill;       // k x k, absorbing rows one-hot on the diagonal
    Eigen::MatrixXd p_step;        // k x k from consecutive per-step label pairs
    Eigen::VectorXd hold;          // mean holding time per cluster
    Eigen::VectorXd reward;        // mean per-visit discounted reward
    Eigen::MatrixXd skill_hold;    // per-(i,j) mean segment length, 0 where unobserved
    Eigen::MatrixXd skill_reward;  // per-(i,j) mean segment reward
    Eigen::VectorXi sizes;         // point count per cluster
    std::vector<bool> absorbing;
    std::vector<int> unvisited;    // clusters with no points (DisconnectedModel warning)
    double entropy = 0.0;
    double intensity = 0.0;
    double inertia = 0.0;
    Eigen::VectorXd v_smdp;
    std::vector<int> greedy;
};

// Greedy cluster-level policy: argmax over observed successors of
// R_sigma(i,j) + gamma^k_sigma(i,j) v(j); ties toward the lower index,
// absorbing clusters map to themselves.
inline std::vector<int> greedy_policy(const SmdpModel& m) {
    std::vector<int> g(static_cast<std::size_t>(m.k));
    for (int i = 0; i < m.k; ++i) {
        if (m.absorbing[static_cast<std::size_t>(i)]) {
            g[static_cast<std::size_t>(i)] = i;
            continue;
        }
        int best = -1;
        double best_score = 0.0;
        for (int j = 0; j < m.k; ++j) {
            if (m.p_skill(i, j) <= 0.0) continue;
            const double score =
                m.skill_reward(i, j) + std::pow(m.gamma, m.skill_hold(i, j)) * m.v_smdp(j);
            if (best < 0 || score > best_score) {
                best = j;
                best_score = score;
            }
        }
        g[static_cast<std::size_t>(i)] = best < 0 ? i : best;
    }
    return g;
}

// Mean recorded value per cluster.
inline Eigen::VectorXd cluster_dqn_values(const std::vector<double>& values,
                                          const std::vector<int>& labels, int k) {
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(k);
    Eigen::VectorXd count = Eigen::VectorXd::Zero(k);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        sum(labels[i]) += values[i];
        count(labels[i]) += 1.0;
    }
    for (int j = 0; j < k; ++j)
        if (count(j) > 0.0) sum(j) /= count(j);
    return sum;
}

// Normalized L2 distance between the recorded and the SMDP value vectors.
inline double vmse(const Eigen::VectorXd& v_dqn_clusters, const Eigen::VectorXd& v_smdp) {
    const double ref = v_dqn_clusters.norm();
    if (ref == 0.0) throw ZeroNorm();
    return (v_dqn_clusters - v_smdp).norm() / ref;
}

// Per-cluster mean of the raw state channel.
inline Eigen::MatrixXd cluster_mean_state(const Eigen::MatrixXd& raw,
                                          const std::vector<int>& labels, int k) {
    if (raw.cols() == 0 || raw.rows() == 0) throw MissingRawChannel();
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(k, raw.cols());
    Eigen::VectorXd count = Eigen::VectorXd::Zero(k);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        sum.row(labels[i]) += raw.row(static_cast<Eigen::Index>(i));
        count(labels[i]) += 1.0;
    }
    for (int j = 0; j < k; ++j)
        if (count(j) > 0.0) sum.row(j) /= count(j);
    return sum;
}

inline double bellman_residual(const SmdpModel& m) {
    Eigen::VectorXd rhs = m.reward;
    for (int i = 0; i < m.k; ++i)
        if (!m.absorbing[static_cast<std::size_t>(i)])
            rhs(i) += std::pow(m.gamma, m.hold(i)) * m.p_skill.row(i).dot(m.v_smdp);
    return (m.v_smdp - rhs).norm();
}

struct FitOptions {
    double gamma = 0.99;
    // Eq-2 skill rewards are discounted within the skill by default; the
    // undiscounted reading is kept behind this flag.
    bool discounted_skill_reward = true;
};

// Fits the full SMDP: transition statistics, holding times, rewards,
// entropy/intensity/inertia, values and greedy policy.
inline SmdpModel fit(const std::vector<int>& labels, const std::vector<EpisodeSpan>& episodes,
                     const std::vector<double>& rewards, const Eigen::MatrixXd& z,
                     const Eigen::MatrixXd& centroids, int k, const FitOptions& opt = {}) {
    if (k < 1) throw ConfigError("k must be positive");
    for (int l : labels)
        if (l < 0 || l >= k) throw ConfigError("label " + std::to_string(l) + " outside [0, k)");

    SmdpModel m;
    m.k = k;
    m.gamma = opt.gamma;

    const auto segs = segment(labels, episodes, rewards, opt.gamma);
    SkillMatrix skill = skill_transition_matrix(segs, k);
    m.p_skill = std::move(skill.p);
    m.absorbing = std::move(skill.absorbing);

    // Per-cluster and per-pair segment statistics.
    Eigen::VectorXd hold_sum = Eigen::VectorXd::Zero(k), visit_count = Eigen::VectorXd::Zero(k);
    Eigen::VectorXd reward_sum = Eigen::VectorXd::Zero(k);
    Eigen::MatrixXd pair_count = Eigen::MatrixXd::Zero(k, k);
    m.skill_hold = Eigen::MatrixXd::Zero(k, k);
    m.skill_reward = Eigen::MatrixXd::Zero(k, k);
    for (const auto& s : segs) {
        hold_sum(s.cluster) += s.length;
        visit_count(s.cluster) += 1.0;
        reward_sum(s.cluster) += s.discounted_reward;
        if (s.next_cluster != kTerminal) {
            pair_count(s.cluster, s.next_cluster) += 1.0;
            m.skill_hold(s.cluster, s.next_cluster) += s.length;
            m.skill_reward(s.cluster, s.next_cluster) +=
                opt.discounted_skill_reward ? s.discounted_reward : s.total_reward;
        }
    }
    m.hold = Eigen::VectorXd::Zero(k);
    m.reward = Eigen::VectorXd::Zero(k);
    for (int i = 0; i < k; ++i) {
        if (visit_count(i) > 0.0) {
            m.hold(i) = hold_sum(i) / visit_count(i);
            m.reward(i) = reward_sum(i) / visit_count(i);
        } else {
            m.unvisited.push_back(i);
        }
        for (int j = 0; j < k; ++j) {
            if (pair_count(i, j) > 0.0) {
                m.skill_hold(i, j) /= pair_count(i, j);
                m.skill_reward(i, j) /= pair_count(i, j);
            }
        }
    }

    // Step-level matrix from consecutive same-episode label pairs.
    m.p_step = Eigen::MatrixXd::Zero(k, k);
    for (const auto& ep : episodes)
        for (std::size_t i = ep.begin; i + 1 < ep.end; ++i)
            m.p_step(labels[i], labels[i + 1]) += 1.0;
    for (int i = 0; i < k; ++i) {
        const double total = m.p_step.row(i).sum();
        if (total > 0.0) m.p_step.row(i) /= total;
    }

    m.sizes = Eigen::VectorXi::Zero(k);
    for (int l : labels) m.sizes(l) += 1;

    m.entropy = smdpmap::entropy(m.p_skill, m.sizes);
    m.intensity = intensity_factor(m.p_step);

    m.inertia = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i)
        m.inertia += (z.row(static_cast<Eigen::Index>(i)) - centroids.row(labels[i])).squaredNorm();

    m.v_smdp = solve_value(m.p_skill, m.absorbing, m.hold, m.reward, m.gamma);
    m.greedy = greedy_policy(m);
    return m;
}

}  // namespace smdpmap

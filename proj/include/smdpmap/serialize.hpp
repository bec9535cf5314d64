#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "smdpmap/cluster.hpp"
#include "smdpmap/errors.hpp"
#include "smdpmap/eval.hpp"
#include "smdpmap/smdp.hpp"
#include "smdpmap/synth.hpp"
#include "smdpmap/tsne.hpp"

namespace smdpmap {

using ordered_json = nlohmann::ordered_json;

namespace detail {

inline ordered_json matrix_to_json(const Eigen::MatrixXd& m) {
    ordered_json rows = ordered_json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        ordered_json row = ordered_json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
    const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
    if (rows == 0) return {};
    const Eigen::Index cols = static_cast<Eigen::Index>(j.at(0).size());
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index c = 0; c < cols; ++c)
            m(i, c) = j.at(static_cast<std::size_t>(i)).at(static_cast<std::size_t>(c)).get<double>();
    return m;
}

inline ordered_json vector_to_json(const Eigen::VectorXd& v) {
    ordered_json a = ordered_json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

inline Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = j.at(static_cast<std::size_t>(i)).get<double>();
    return v;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingInput(path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace detail

// ---- embedding ----

inline void write_embedding_jsonl(const Embedding& emb, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    for (Eigen::Index i = 0; i < emb.y.rows(); ++i) {
        ordered_json j;
        j["index"] = i;
        j["y"] = {emb.y(i, 0), emb.y(i, 1)};
        out << j.dump() << '\n';
    }
}

inline Embedding read_embedding_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw MissingInput(path.string());
    std::vector<std::pair<double, double>> pts;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("index") || !j.contains("y"))
            throw MalformedRecord(line_no, "invalid embedding row");
        if (j["index"].get<std::size_t>() != pts.size())
            throw MalformedRecord(line_no, "embedding rows out of order");
        pts.emplace_back(j["y"].at(0).get<double>(), j["y"].at(1).get<double>());
    }
    Embedding emb;
    emb.y.resize(static_cast<Eigen::Index>(pts.size()), 2);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        emb.y(static_cast<Eigen::Index>(i), 0) = pts[i].first;
        emb.y(static_cast<Eigen::Index>(i), 1) = pts[i].second;
    }
    return emb;
}

// ---- labeling ----

inline void write_labels_jsonl(const std::vector<int>& labels, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        ordered_json j;
        j["index"] = i;
        j["label"] = labels[i];
        out << j.dump() << '\n';
    }
}

inline std::vector<int> read_labels_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw MissingInput(path.string());
    std::vector<int> labels;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.contains("index") || !j.contains("label"))
            throw MalformedRecord(line_no, "invalid label row");
        if (j["index"].get<std::size_t>() != labels.size())
            throw MalformedRecord(line_no, "label rows out of order");
        labels.push_back(j["label"].get<int>());
    }
    return labels;
}

inline ordered_json labeling_sidecar_json(const Labeling& lab) {
    ordered_json j;
    j["centroids"] = detail::matrix_to_json(lab.centroids);
    j["inertia"] = lab.inertia;
    j["seed"] = lab.seed;
    j["iterations"] = lab.iterations;
    return j;
}

inline Labeling labeling_from_sidecar(const nlohmann::json& j, std::vector<int> labels) {
    Labeling lab;
    lab.labels = std::move(labels);
    lab.centroids = detail::matrix_from_json(j.at("centroids"));
    lab.inertia = j.at("inertia").get<double>();
    lab.seed = j.at("seed").get<std::uint64_t>();
    lab.iterations = j.at("iterations").get<int>();
    return lab;
}

// ---- SMDP model ----

inline ordered_json model_to_json(const SmdpModel& m) {
    ordered_json j;
    j["k"] = m.k;
    j["gamma"] = m.gamma;
    j["p_skill"] = detail::matrix_to_json(m.p_skill);
    j["p_step"] = detail::matrix_to_json(m.p_step);
    j["hold"] = detail::vector_to_json(m.hold);
    j["reward"] = detail::vector_to_json(m.reward);
    j["skill_hold"] = detail::matrix_to_json(m.skill_hold);
    j["skill_reward"] = detail::matrix_to_json(m.skill_reward);
    j["sizes"] = [&] {
        ordered_json a = ordered_json::array();
        for (Eigen::Index i = 0; i < m.sizes.size(); ++i) a.push_back(m.sizes(i));
        return a;
    }();
    j["absorbing"] = m.absorbing;
    j["unvisited"] = m.unvisited;
    j["entropy"] = m.entropy;
    j["intensity"] = m.intensity;
    j["inertia"] = m.inertia;
    j["v_smdp"] = detail::vector_to_json(m.v_smdp);
    j["greedy"] = m.greedy;
    return j;
}

inline SmdpModel model_from_json(const nlohmann::json& j) {
    SmdpModel m;
    m.k = j.at("k").get<int>();
    m.gamma = j.at("gamma").get<double>();
    m.p_skill = detail::matrix_from_json(j.at("p_skill"));
    m.p_step = detail::matrix_from_json(j.at("p_step"));
    m.hold = detail::vector_from_json(j.at("hold"));
    m.reward = detail::vector_from_json(j.at("reward"));
    m.skill_hold = detail::matrix_from_json(j.at("skill_hold"));
    m.skill_reward = detail::matrix_from_json(j.at("skill_reward"));
    const auto sizes = j.at("sizes");
    m.sizes.resize(static_cast<Eigen::Index>(sizes.size()));
    for (Eigen::Index i = 0; i < m.sizes.size(); ++i)
        m.sizes(i) = sizes.at(static_cast<std::size_t>(i)).get<int>();
    m.absorbing = j.at("absorbing").get<std::vector<bool>>();
    m.unvisited = j.at("unvisited").get<std::vector<int>>();
    m.entropy = j.at("entropy").get<double>();
    m.intensity = j.at("intensity").get<double>();
    m.inertia = j.at("inertia").get<double>();
    m.v_smdp = detail::vector_from_json(j.at("v_smdp"));
    m.greedy = j.at("greedy").get<std::vector<int>>();
    return m;
}

// Re-checks the model invariants, e.g. after loading from disk.
inline void validate(const SmdpModel& m) {
    if (m.k < 1 || m.p_skill.rows() != m.k || m.p_skill.cols() != m.k ||
        m.p_step.rows() != m.k || m.hold.size() != m.k || m.reward.size() != m.k ||
        m.v_smdp.size() != m.k || static_cast<int>(m.greedy.size()) != m.k ||
        static_cast<int>(m.absorbing.size()) != m.k)
        throw Error("model: inconsistent shapes");
    for (int i = 0; i < m.k; ++i) {
        const double row = m.p_skill.row(i).sum();
        if (std::abs(row - 1.0) > 1e-9)
            throw Error("model: p_skill row " + std::to_string(i) + " sums to " + std::to_string(row));
        if (m.absorbing[static_cast<std::size_t>(i)] && m.p_skill(i, i) != 1.0)
            throw Error("model: absorbing row " + std::to_string(i) + " is not one-hot");
        const double step_row = m.p_step.row(i).sum();
        if (step_row > 0.0 && std::abs(step_row - 1.0) > 1e-9)
            throw Error("model: p_step row " + std::to_string(i) + " sums to " + std::to_string(step_row));
    }
    if (m.entropy < 0.0) throw Error("model: negative entropy");
    if (bellman_residual(m) > 1e-8) throw Error("model: Bellman residual above tolerance");
}

// ---- evaluation report ----

inline ordered_json report_to_json(const EvalReport& r) {
    ordered_json j;
    j["vmse"] = r.vmse;
    j["v_dqn_clusters"] = detail::vector_to_json(r.v_dqn_clusters);
    j["v_smdp"] = detail::vector_to_json(r.v_smdp);
    ordered_json corr = ordered_json::array();
    for (const auto& c : r.per_cluster_corr) {
        if (c)
            corr.push_back(*c);
        else
            corr.push_back(nullptr);
    }
    j["per_cluster_corr"] = std::move(corr);
    ordered_json top = ordered_json::array(), bottom = ordered_json::array();
    for (const auto& [k_traj, c] : r.tg_top_corr) top.push_back({{"k_traj", k_traj}, {"corr", c}});
    for (const auto& [k_traj, c] : r.tg_bottom_corr)
        bottom.push_back({{"k_traj", k_traj}, {"corr", c}});
    j["tg_top_corr"] = std::move(top);
    j["tg_bottom_corr"] = std::move(bottom);
    j["episode_returns"] = r.episode_returns;
    j["skipped_k_traj"] = r.skipped_k_traj;
    return j;
}

inline EvalReport report_from_json(const nlohmann::json& j) {
    EvalReport r;
    r.vmse = j.at("vmse").get<double>();
    r.v_dqn_clusters = detail::vector_from_json(j.at("v_dqn_clusters"));
    r.v_smdp = detail::vector_from_json(j.at("v_smdp"));
    for (const auto& c : j.at("per_cluster_corr")) {
        if (c.is_null())
            r.per_cluster_corr.push_back(std::nullopt);
        else
            r.per_cluster_corr.push_back(c.get<double>());
    }
    for (const auto& e : j.at("tg_top_corr"))
        r.tg_top_corr.emplace_back(e.at("k_traj").get<int>(), e.at("corr").get<double>());
    for (const auto& e : j.at("tg_bottom_corr"))
        r.tg_bottom_corr.emplace_back(e.at("k_traj").get<int>(), e.at("corr").get<double>());
    r.episode_returns = j.at("episode_returns").get<std::vector<double>>();
    r.skipped_k_traj = j.at("skipped_k_traj").get<std::vector<int>>();
    return r;
}

inline bool report_equal(const EvalReport& a, const EvalReport& b) {
    return a.vmse == b.vmse && a.v_dqn_clusters == b.v_dqn_clusters && a.v_smdp == b.v_smdp &&
           a.per_cluster_corr == b.per_cluster_corr && a.tg_top_corr == b.tg_top_corr &&
           a.tg_bottom_corr == b.tg_bottom_corr && a.episode_returns == b.episode_returns &&
           a.skipped_k_traj == b.skipped_k_traj;
}

// CSV series backing the three evaluation panels.

inline std::string value_consistency_csv(const EvalReport& r) {
    std::string s = "cluster,v_dqn,v_smdp\n";
    for (Eigen::Index i = 0; i < r.v_dqn_clusters.size(); ++i)
        s += std::to_string(i) + "," + std::to_string(r.v_dqn_clusters(i)) + "," +
             std::to_string(r.v_smdp(i)) + "\n";
    return s;
}

inline std::string greedy_corr_csv(const EvalReport& r) {
    std::string s = "cluster,corr\n";
    for (std::size_t i = 0; i < r.per_cluster_corr.size(); ++i) {
        s += std::to_string(i) + ",";
        if (r.per_cluster_corr[i]) s += std::to_string(*r.per_cluster_corr[i]);
        s += "\n";
    }
    return s;
}

inline std::string tg_correlation_csv(const EvalReport& r) {
    std::string s = "k_traj,top_corr,bottom_corr\n";
    for (std::size_t i = 0; i < r.tg_top_corr.size(); ++i)
        s += std::to_string(r.tg_top_corr[i].first) + "," +
             std::to_string(r.tg_top_corr[i].second) + "," +
             std::to_string(r.tg_bottom_corr[i].second) + "\n";
    return s;
}

inline std::string mean_state_csv(const Eigen::MatrixXd& means) {
    std::string s = "cluster";
    for (Eigen::Index c = 0; c < means.cols(); ++c) s += ",mean_" + std::to_string(c);
    s += "\n";
    for (Eigen::Index i = 0; i < means.rows(); ++i) {
        s += std::to_string(i);
        for (Eigen::Index c = 0; c < means.cols(); ++c) s += "," + std::to_string(means(i, c));
        s += "\n";
    }
    return s;
}

// ---- synthetic ground truth ----

inline GroundTruthSmdp ground_truth_from_json(const nlohmann::json& j) {
    GroundTruthSmdp gt;
    gt.k_true = j.at("k_true").get<int>();
    gt.p_true = detail::matrix_from_json(j.at("p_true"));
    gt.hold_mean = detail::vector_from_json(j.at("hold_mean"));
    gt.step_reward = detail::vector_from_json(j.at("step_reward"));
    gt.emission_mean = detail::matrix_from_json(j.at("emission_mean"));
    gt.emission_sigma = j.value("emission_sigma", gt.emission_sigma);
    gt.terminal_clusters = j.value("terminal_clusters", gt.terminal_clusters);
    gt.start_clusters = j.value("start_clusters", gt.start_clusters);
    gt.gamma = j.value("gamma", gt.gamma);
    gt.action_count = j.value("action_count", gt.action_count);
    gt.qvalue_noise = j.value("qvalue_noise", gt.qvalue_noise);
    gt.max_episode_steps = j.value("max_episode_steps", gt.max_episode_steps);
    gt.raw_onehot = j.value("raw_onehot", gt.raw_onehot);
    gt.emission_margin = j.value("emission_margin", gt.emission_margin);
    validate(gt);
    return gt;
}

inline ordered_json ground_truth_to_json(const GroundTruthSmdp& gt) {
    ordered_json j;
    j["k_true"] = gt.k_true;
    j["p_true"] = detail::matrix_to_json(gt.p_true);
    j["hold_mean"] = detail::vector_to_json(gt.hold_mean);
    j["step_reward"] = detail::vector_to_json(gt.step_reward);
    j["emission_mean"] = detail::matrix_to_json(gt.emission_mean);
    j["emission_sigma"] = gt.emission_sigma;
    j["terminal_clusters"] = gt.terminal_clusters;
    j["start_clusters"] = gt.start_clusters;
    j["gamma"] = gt.gamma;
    j["action_count"] = gt.action_count;
    j["qvalue_noise"] = gt.qvalue_noise;
    j["max_episode_steps"] = gt.max_episode_steps;
    j["raw_onehot"] = gt.raw_onehot;
    j["emission_margin"] = gt.emission_margin;
    return j;
}

}  // namespace smdpmap

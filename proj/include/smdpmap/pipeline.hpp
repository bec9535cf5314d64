#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "smdpmap/cluster.hpp"
#include "smdpmap/dataset.hpp"
#include "smdpmap/errors.hpp"
#include "smdpmap/eval.hpp"
#include "smdpmap/serialize.hpp"
#include "smdpmap/smdp.hpp"
#include "smdpmap/synth.hpp"
#include "smdpmap/tsne.hpp"
#include "smdpmap/viz.hpp"

namespace smdpmap {

struct PipelineConfig {
    std::string input;      // dataset path
    std::string workspace;  // artifact directory
    TsneConfig tsne;
    int pca_dim = 50;
    struct Cluster {
        int k = 20;
        int w = 2;
        int restarts = 160;
        std::uint64_t seed = 1;
    } cluster;
    struct Smdp {
        double gamma = 0.99;
        bool discounted_skill_reward = true;
    } smdp;
    struct Viz {
        LayoutKind layout = LayoutKind::cluster_mean;
        double epsilon_edge = 0.05;
    } viz;
    struct Eval {
        std::vector<int> k_traj_sweep = {1, 2, 5, 10};
    } eval;
};

inline void validate(const PipelineConfig& c) {
    if (c.cluster.k < 2) throw ConfigError("cluster.k must be at least 2");
    if (c.cluster.w < 0) throw ConfigError("cluster.w must be non-negative");
    if (c.cluster.restarts < 1) throw ConfigError("cluster.restarts must be at least 1");
    if (!(c.smdp.gamma > 0.0) || c.smdp.gamma > 1.0)
        throw ConfigError("smdp.gamma must lie in (0, 1]");
    if (c.pca_dim < 1) throw ConfigError("tsne.pca_dim must be positive");
    if (c.viz.epsilon_edge < 0.0 || c.viz.epsilon_edge > 1.0)
        throw ConfigError("viz.epsilon_edge must lie in [0, 1]");
    validate(c.tsne);
}

inline PipelineConfig config_from_json(const nlohmann::json& j) {
    PipelineConfig c;
    c.input = j.value("input", c.input);
    c.workspace = j.value("workspace", c.workspace);
    if (j.contains("tsne")) {
        const auto& t = j["tsne"];
        c.tsne.perplexity = t.value("perplexity", c.tsne.perplexity);
        c.tsne.iterations = t.value("iterations", c.tsne.iterations);
        c.tsne.learning_rate = t.value("learning_rate", c.tsne.learning_rate);
        c.tsne.initial_momentum = t.value("initial_momentum", c.tsne.initial_momentum);
        c.tsne.final_momentum = t.value("final_momentum", c.tsne.final_momentum);
        c.tsne.momentum_switch_iter = t.value("momentum_switch_iter", c.tsne.momentum_switch_iter);
        c.tsne.early_exaggeration = t.value("early_exaggeration", c.tsne.early_exaggeration);
        c.tsne.exaggeration_iters = t.value("exaggeration_iters", c.tsne.exaggeration_iters);
        c.tsne.seed = t.value("seed", c.tsne.seed);
        c.pca_dim = t.value("pca_dim", c.pca_dim);
    }
    if (j.contains("cluster")) {
        const auto& l = j["cluster"];
        c.cluster.k = l.value("k", c.cluster.k);
        c.cluster.w = l.value("w", c.cluster.w);
        c.cluster.restarts = l.value("restarts", c.cluster.restarts);
        c.cluster.seed = l.value("seed", c.cluster.seed);
    }
    if (j.contains("smdp")) {
        const auto& s = j["smdp"];
        c.smdp.gamma = s.value("gamma", c.smdp.gamma);
        c.smdp.discounted_skill_reward =
            s.value("discounted_skill_reward", c.smdp.discounted_skill_reward);
    }
    if (j.contains("viz")) {
        const auto& v = j["viz"];
        if (v.contains("layout")) c.viz.layout = layout_kind_from_string(v["layout"].get<std::string>());
        c.viz.epsilon_edge = v.value("epsilon_edge", c.viz.epsilon_edge);
    }
    if (j.contains("eval")) c.eval.k_traj_sweep = j["eval"].value("k_traj_sweep", c.eval.k_traj_sweep);
    return c;
}

inline PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw MissingInput(path.string());
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ConfigError("config file " + path.string() + " is not valid JSON");
    return config_from_json(j);
}

// ---- content hashing (FNV-1a 64) ----

inline std::string content_hash(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingInput(path.string());
    std::uint64_t h = 0xcbf29ce484222325ull;
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ull;
        }
    }
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
    return hex;
}

// ---- workspace layout ----

struct Workspace {
    std::filesystem::path dir;

    std::filesystem::path embedding() const { return dir / "embedding.jsonl"; }
    std::filesystem::path embedding_meta() const { return dir / "embedding.meta.json"; }
    std::filesystem::path labeling() const { return dir / "labeling.jsonl"; }
    std::filesystem::path labeling_meta() const { return dir / "labeling.meta.json"; }
    std::filesystem::path model() const { return dir / "model.json"; }
    std::filesystem::path report() const { return dir / "report.json"; }
    std::filesystem::path value_consistency() const { return dir / "value_consistency.csv"; }
    std::filesystem::path greedy_corr() const { return dir / "greedy_reward_corr.csv"; }
    std::filesystem::path tg_correlation() const { return dir / "tg_correlation.csv"; }
    std::filesystem::path mean_state() const { return dir / "mean_state.csv"; }
    std::filesystem::path dot() const { return dir / "smdp.dot"; }
    std::filesystem::path svg() const { return dir / "smdp.svg"; }
    std::filesystem::path render_meta() const { return dir / "render.meta.json"; }
};

namespace detail {

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw MissingInput(path.string());
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw Error("corrupt artifact " + path.string());
    return j;
}

// An artifact is current when its recorded input hashes and config echo both
// match; reruns with unchanged inputs are then no-ops.
inline bool artifact_current(const std::filesystem::path& meta_path,
                             const nlohmann::json& expected_inputs,
                             const nlohmann::json& expected_config) {
    if (!std::filesystem::exists(meta_path)) return false;
    nlohmann::json meta = read_json_file(meta_path);
    return meta.value("inputs", nlohmann::json()) == expected_inputs &&
           meta.value("config", nlohmann::json()) == expected_config;
}

inline ordered_json tsne_config_echo(const PipelineConfig& c) {
    ordered_json j;
    j["perplexity"] = c.tsne.perplexity;
    j["iterations"] = c.tsne.iterations;
    j["learning_rate"] = c.tsne.learning_rate;
    j["initial_momentum"] = c.tsne.initial_momentum;
    j["final_momentum"] = c.tsne.final_momentum;
    j["momentum_switch_iter"] = c.tsne.momentum_switch_iter;
    j["early_exaggeration"] = c.tsne.early_exaggeration;
    j["exaggeration_iters"] = c.tsne.exaggeration_iters;
    j["seed"] = c.tsne.seed;
    j["pca_dim"] = c.pca_dim;
    return j;
}

inline ordered_json cluster_config_echo(const PipelineConfig& c) {
    ordered_json j;
    j["k"] = c.cluster.k;
    j["w"] = c.cluster.w;
    j["restarts"] = c.cluster.restarts;
    j["seed"] = c.cluster.seed;
    j["gamma"] = c.smdp.gamma;
    j["discounted_skill_reward"] = c.smdp.discounted_skill_reward;
    return j;
}

inline ordered_json smdp_config_echo(const PipelineConfig& c) {
    ordered_json j;
    j["gamma"] = c.smdp.gamma;
    j["k"] = c.cluster.k;
    j["w"] = c.cluster.w;
    j["seed"] = c.cluster.seed;
    j["discounted_skill_reward"] = c.smdp.discounted_skill_reward;
    return j;
}

inline std::vector<double> rewards_of(const Dataset& d) {
    std::vector<double> r;
    r.reserve(d.size());
    for (const auto& rec : d.records()) r.push_back(rec.reward);
    return r;
}

}  // namespace detail

// ---- stages ----
// Each stage returns true when it did work, false when the artifact was
// already current.

inline bool cmd_reduce(const PipelineConfig& cfg, std::ostream& out = std::cout) {
    validate(cfg);
    const Workspace ws{cfg.workspace};
    std::filesystem::create_directories(ws.dir);
    if (!std::filesystem::exists(cfg.input)) throw MissingInput(cfg.input);

    nlohmann::json inputs;
    inputs["dataset"] = content_hash(cfg.input);
    const nlohmann::json config = detail::tsne_config_echo(cfg);
    if (detail::artifact_current(ws.embedding_meta(), inputs, config)) {
        out << "reduce: up to date\n";
        return false;
    }

    const Dataset d = load_dataset(cfg.input);
    Embedding emb = reduce_pipeline(d, cfg.tsne, cfg.pca_dim);
    write_embedding_jsonl(emb, ws.embedding());

    ordered_json meta;
    meta["inputs"] = inputs;
    meta["config"] = config;
    meta["kl_history"] = emb.kl_history;
    detail::write_text(ws.embedding_meta(), meta.dump(2) + "\n");
    out << "reduce: embedded " << d.size() << " points, final KL "
        << (emb.kl_history.empty() ? 0.0 : emb.kl_history.back()) << "\n";
    return true;
}

inline bool cmd_cluster(const PipelineConfig& cfg, std::ostream& out = std::cout) {
    validate(cfg);
    const Workspace ws{cfg.workspace};
    if (!std::filesystem::exists(cfg.input)) throw MissingInput(cfg.input);
    if (!std::filesystem::exists(ws.embedding()) || !std::filesystem::exists(ws.embedding_meta()))
        throw MissingInput(ws.embedding().string());

    const std::string dataset_hash = content_hash(cfg.input);
    const nlohmann::json emb_meta = detail::read_json_file(ws.embedding_meta());
    if (emb_meta.value("inputs", nlohmann::json()).value("dataset", "") != dataset_hash)
        throw StaleArtifact("embedding predates the dataset; rerun reduce");

    nlohmann::json inputs;
    inputs["dataset"] = dataset_hash;
    inputs["embedding"] = content_hash(ws.embedding());
    const nlohmann::json config = detail::cluster_config_echo(cfg);
    if (detail::artifact_current(ws.labeling_meta(), inputs, config)) {
        out << "cluster: up to date\n";
        return false;
    }

    const Dataset d = load_dataset(cfg.input);
    const Embedding emb = read_embedding_jsonl(ws.embedding());
    if (static_cast<std::size_t>(emb.y.rows()) != d.size())
        throw StaleArtifact("embedding row count disagrees with the dataset");

    const ClusterFeatures features = build_features(emb, value_estimates(d));
    FitOptions fit_opt{cfg.smdp.gamma, cfg.smdp.discounted_skill_reward};
    SearchResult result =
        restart_search(features, d.episodes(), detail::rewards_of(d), cfg.cluster.k, cfg.cluster.w,
                       cfg.cluster.restarts, cfg.cluster.seed, fit_opt);

    write_labels_jsonl(result.labeling.labels, ws.labeling());
    ordered_json meta;
    meta["inputs"] = inputs;
    meta["config"] = config;
    meta["labeling"] = labeling_sidecar_json(result.labeling);
    ordered_json log = ordered_json::array();
    for (const auto& e : result.log) {
        ordered_json row;
        row["seed"] = e.seed;
        row["entropy"] = e.entropy;
        row["inertia"] = e.inertia;
        row["intensity"] = e.intensity;
        log.push_back(std::move(row));
    }
    meta["restart_log"] = std::move(log);
    detail::write_text(ws.labeling_meta(), meta.dump(2) + "\n");
    out << "cluster: best seed " << result.labeling.seed << ", entropy " << result.model.entropy
        << ", inertia " << result.labeling.inertia << "\n";
    return true;
}

inline bool cmd_model(const PipelineConfig& cfg, std::ostream& out = std::cout) {
    validate(cfg);
    const Workspace ws{cfg.workspace};
    if (!std::filesystem::exists(cfg.input)) throw MissingInput(cfg.input);
    for (const auto& p : {ws.embedding(), ws.labeling(), ws.labeling_meta()})
        if (!std::filesystem::exists(p)) throw MissingInput(p.string());

    const std::string dataset_hash = content_hash(cfg.input);
    const std::string embedding_hash = content_hash(ws.embedding());
    const nlohmann::json lab_meta = detail::read_json_file(ws.labeling_meta());
    const auto lab_inputs = lab_meta.value("inputs", nlohmann::json());
    if (lab_inputs.value("dataset", "") != dataset_hash ||
        lab_inputs.value("embedding", "") != embedding_hash)
        throw StaleArtifact("labeling predates its inputs; rerun cluster");

    nlohmann::json inputs;
    inputs["dataset"] = dataset_hash;
    inputs["embedding"] = embedding_hash;
    inputs["labeling"] = content_hash(ws.labeling());
    const nlohmann::json config = detail::smdp_config_echo(cfg);
    if (detail::artifact_current(ws.model(), inputs, config)) {
        out << "model: up to date\n";
        return false;
    }

    const Dataset d = load_dataset(cfg.input);
    const Embedding emb = read_embedding_jsonl(ws.embedding());
    const std::vector<int> labels = read_labels_jsonl(ws.labeling());
    const Labeling lab = labeling_from_sidecar(lab_meta.at("labeling"), labels);
    const ClusterFeatures features = build_features(emb, value_estimates(d));

    FitOptions fit_opt{cfg.smdp.gamma, cfg.smdp.discounted_skill_reward};
    SmdpModel model = fit(lab.labels, d.episodes(), detail::rewards_of(d), features.z,
                          lab.centroids, cfg.cluster.k, fit_opt);
    for (int c : model.unvisited)
        out << "warning: cluster " << c << " is never visited (disconnected model)\n";

    const Eigen::VectorXd v_dqn = cluster_dqn_values(value_estimates(d), lab.labels, model.k);
    const double v = vmse(v_dqn, model.v_smdp);

    ordered_json doc;
    doc["inputs"] = inputs;
    doc["config"] = config;
    doc["model"] = model_to_json(model);
    detail::write_text(ws.model(), doc.dump(2) + "\n");

    if (d.has_raw())
        detail::write_text(ws.mean_state(),
                           mean_state_csv(cluster_mean_state(raw_matrix(d), lab.labels, model.k)));

    char line[256];
    std::snprintf(line, sizeof line,
                  "model: k=%d entropy=%.3f intensity=%.3f vmse=%.3f inertia=%.3f\n", model.k,
                  model.entropy, model.intensity, v, model.inertia);
    out << line;
    return true;
}

namespace detail {

inline SmdpModel load_model_checked(const Workspace& ws, const PipelineConfig& cfg,
                                    nlohmann::json* inputs_out = nullptr) {
    if (!std::filesystem::exists(ws.model())) throw MissingInput(ws.model().string());
    nlohmann::json doc = read_json_file(ws.model());
    const std::string dataset_hash = content_hash(cfg.input);
    if (doc.value("inputs", nlohmann::json()).value("dataset", "") != dataset_hash)
        throw StaleArtifact("model predates the dataset; rerun the pipeline");
    SmdpModel m = model_from_json(doc.at("model"));
    validate(m);
    if (inputs_out) *inputs_out = doc["inputs"];
    return m;
}

}  // namespace detail

inline bool cmd_eval(const PipelineConfig& cfg, std::ostream& out = std::cout) {
    validate(cfg);
    const Workspace ws{cfg.workspace};
    if (!std::filesystem::exists(cfg.input)) throw MissingInput(cfg.input);
    if (!std::filesystem::exists(ws.labeling())) throw MissingInput(ws.labeling().string());

    nlohmann::json model_inputs;
    const SmdpModel model = detail::load_model_checked(ws, cfg, &model_inputs);

    nlohmann::json inputs = model_inputs;
    inputs["model"] = content_hash(ws.model());
    nlohmann::json config;
    config["k_traj_sweep"] = cfg.eval.k_traj_sweep;
    if (detail::artifact_current(ws.report(), inputs, config)) {
        out << "eval: up to date\n";
        return false;
    }

    const Dataset d = load_dataset(cfg.input);
    const std::vector<int> labels = read_labels_jsonl(ws.labeling());
    EvalReport rep = build_report(model, d, labels, cfg.eval.k_traj_sweep);
    for (int k_traj : rep.skipped_k_traj)
        out << "warning: k_traj=" << k_traj << " skipped (episode count "
            << rep.episode_returns.size() << ")\n";
    if (rep.tg_top_corr.empty()) out << "warning: no T+/T- curves (empty k_traj sweep)\n";

    ordered_json doc;
    doc["inputs"] = inputs;
    doc["config"] = config;
    doc["report"] = report_to_json(rep);
    detail::write_text(ws.report(), doc.dump(2) + "\n");
    detail::write_text(ws.value_consistency(), value_consistency_csv(rep));
    detail::write_text(ws.greedy_corr(), greedy_corr_csv(rep));
    detail::write_text(ws.tg_correlation(), tg_correlation_csv(rep));
    out << "eval: vmse=" << rep.vmse << ", " << rep.tg_top_corr.size() << " T+/T- points\n";
    return true;
}

inline bool cmd_render(const PipelineConfig& cfg, std::ostream& out = std::cout) {
    validate(cfg);
    const Workspace ws{cfg.workspace};
    if (!std::filesystem::exists(cfg.input)) throw MissingInput(cfg.input);
    for (const auto& p : {ws.embedding(), ws.labeling()})
        if (!std::filesystem::exists(p)) throw MissingInput(p.string());

    nlohmann::json model_inputs;
    const SmdpModel model = detail::load_model_checked(ws, cfg, &model_inputs);

    nlohmann::json inputs = model_inputs;
    inputs["model"] = content_hash(ws.model());
    nlohmann::json config;
    config["layout"] = to_string(cfg.viz.layout);
    config["epsilon_edge"] = cfg.viz.epsilon_edge;
    if (detail::artifact_current(ws.render_meta(), inputs, config)) {
        out << "render: up to date\n";
        return false;
    }

    const Embedding emb = read_embedding_jsonl(ws.embedding());
    const std::vector<int> labels = read_labels_jsonl(ws.labeling());
    const GraphLayout gl = layout(model, emb, labels, cfg.viz.layout, cfg.viz.epsilon_edge);
    detail::write_text(ws.dot(), render_dot(gl, model));
    detail::write_text(ws.svg(), render_svg(gl, emb, labels, model));

    ordered_json meta;
    meta["inputs"] = inputs;
    meta["config"] = config;
    detail::write_text(ws.render_meta(), meta.dump(2) + "\n");
    out << "render: " << gl.edges.size() << " edges, layout " << to_string(cfg.viz.layout) << "\n";
    return true;
}

inline void cmd_pipeline(const PipelineConfig& cfg, std::ostream& out = std::cout) {
    validate(cfg);
    cmd_reduce(cfg, out);
    cmd_cluster(cfg, out);
    cmd_model(cfg, out);
    cmd_eval(cfg, out);
    cmd_render(cfg, out);
}

inline void cmd_synth(const GroundTruthSmdp& gt, int episodes, std::uint64_t seed,
                      const std::filesystem::path& output, std::ostream& out = std::cout) {
    const Dataset d = generate(gt, episodes, seed);
    if (!output.parent_path().empty()) std::filesystem::create_directories(output.parent_path());
    save_dataset(d, output);
    out << "synth: wrote " << d.size() << " records over " << d.episodes().size()
        << " episodes to " << output.string() << "\n";
}

}  // namespace smdpmap

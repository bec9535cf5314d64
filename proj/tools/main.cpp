#include <cstdint>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "smdpmap/pipeline.hpp"
#include "smdpmap/serialize.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitInput = 3;
constexpr int kExitNumerical = 4;
constexpr int kExitStale = 5;

int run(int argc, char** argv) {
    CLI::App app{"trajectory-to-SMDP analysis pipeline"};
    app.require_subcommand(1);

    std::string config_path, workspace, input;
    std::uint64_t seed = 0;
    app.add_option("--config", config_path, "pipeline config JSON")->configurable(false);
    app.add_option("--workspace", workspace, "artifact directory");
    app.add_option("--input", input, "dataset JSON-lines file");
    auto* seed_opt = app.add_option("--seed", seed, "override the embedding and clustering seeds");

    double perplexity = 0, learning_rate = 0, gamma = 0, epsilon_edge = 0;
    int iterations = 0, pca_dim = 0, k = 0, w = -1, restarts = 0;
    std::string layout;
    std::vector<int> k_traj;
    auto* perplexity_opt = app.add_option("--perplexity", perplexity);
    auto* iterations_opt = app.add_option("--iterations", iterations);
    auto* lr_opt = app.add_option("--learning-rate", learning_rate);
    auto* pca_opt = app.add_option("--pca-dim", pca_dim);
    auto* k_opt = app.add_option("--k", k, "cluster count");
    auto* w_opt = app.add_option("--w", w, "temporal window radius");
    auto* restarts_opt = app.add_option("--restarts", restarts);
    auto* gamma_opt = app.add_option("--gamma", gamma);
    auto* layout_opt = app.add_option("--layout", layout, "cluster-mean|spring|spectral");
    auto* eps_opt = app.add_option("--epsilon-edge", epsilon_edge);
    auto* ktraj_opt = app.add_option("--k-traj", k_traj, "T+/T- sweep sizes");

    auto* c_reduce = app.add_subcommand("reduce", "embed the dataset (PCA + t-SNE)");
    auto* c_cluster = app.add_subcommand("cluster", "spatio-temporal clustering with restarts");
    auto* c_model = app.add_subcommand("model", "fit the SMDP over the best labeling");
    auto* c_eval = app.add_subcommand("eval", "consistency diagnostics and plot series");
    auto* c_render = app.add_subcommand("render", "DOT and SVG of the SMDP graph");
    auto* c_pipeline = app.add_subcommand("pipeline", "run all stages in order");

    auto* c_synth = app.add_subcommand("synth", "sample a dataset from a known SMDP");
    std::string gt_path, synth_out = "synthetic.jsonl";
    int episodes = 100;
    std::uint64_t synth_seed = 1;
    c_synth->add_option("--gt", gt_path, "ground-truth SMDP JSON")->required();
    c_synth->add_option("--episodes", episodes, "episode count");
    c_synth->add_option("--out", synth_out, "output dataset path");
    c_synth->add_option("--seed", synth_seed, "generator seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    if (*c_synth) {
        const auto gt = smdpmap::ground_truth_from_json(
            smdpmap::detail::read_json_file(gt_path));
        smdpmap::cmd_synth(gt, episodes, synth_seed, synth_out);
        return 0;
    }

    smdpmap::PipelineConfig cfg;
    if (!config_path.empty()) cfg = smdpmap::load_config(config_path);
    if (!workspace.empty()) cfg.workspace = workspace;
    if (!input.empty()) cfg.input = input;
    if (*seed_opt) {
        cfg.tsne.seed = seed;
        cfg.cluster.seed = seed;
    }
    if (*perplexity_opt) cfg.tsne.perplexity = perplexity;
    if (*iterations_opt) cfg.tsne.iterations = iterations;
    if (*lr_opt) cfg.tsne.learning_rate = learning_rate;
    if (*pca_opt) cfg.pca_dim = pca_dim;
    if (*k_opt) cfg.cluster.k = k;
    if (*w_opt) cfg.cluster.w = w;
    if (*restarts_opt) cfg.cluster.restarts = restarts;
    if (*gamma_opt) cfg.smdp.gamma = gamma;
    if (*layout_opt) cfg.viz.layout = smdpmap::layout_kind_from_string(layout);
    if (*eps_opt) cfg.viz.epsilon_edge = epsilon_edge;
    if (*ktraj_opt) cfg.eval.k_traj_sweep = k_traj;
    if (cfg.workspace.empty()) throw smdpmap::ConfigError("no workspace directory given");
    if (cfg.input.empty()) throw smdpmap::ConfigError("no input dataset given");

    if (*c_reduce) smdpmap::cmd_reduce(cfg);
    if (*c_cluster) smdpmap::cmd_cluster(cfg);
    if (*c_model) smdpmap::cmd_model(cfg);
    if (*c_eval) smdpmap::cmd_eval(cfg);
    if (*c_render) smdpmap::cmd_render(cfg);
    if (*c_pipeline) smdpmap::cmd_pipeline(cfg);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const smdpmap::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const smdpmap::InputError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitInput;
    } catch (const smdpmap::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const smdpmap::StaleArtifact& e) {
        std::cerr << "stale artifact: " << e.what() << "\n";
        return kExitStale;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

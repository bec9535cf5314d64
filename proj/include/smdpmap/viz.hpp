#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "smdpmap/errors.hpp"
#include "smdpmap/smdp.hpp"
#include "smdpmap/tsne.hpp"

namespace smdpmap {

enum class LayoutKind { cluster_mean, spring, spectral };

inline std::string to_string(LayoutKind k) {
    switch (k) {
        case LayoutKind::spring: return "spring";
        case LayoutKind::spectral: return "spectral";
        default: return "cluster-mean";
    }
}

inline LayoutKind layout_kind_from_string(const std::string& s) {
    if (s == "cluster-mean") return LayoutKind::cluster_mean;
    if (s == "spring") return LayoutKind::spring;
    if (s == "spectral") return LayoutKind::spectral;
    throw ConfigError("unknown layout kind '" + s + "'");
}

struct GraphEdge {
    int from = 0;
    int to = 0;
    double weight = 0.0;
};

struct GraphLayout {
    Eigen::MatrixXd node_pos;   // k x 2
    Eigen::VectorXd node_size;  // point count per cluster
    std::vector<GraphEdge> edges;
    LayoutKind kind = LayoutKind::cluster_mean;
    double epsilon_edge = 0.05;
};

namespace detail {

inline Eigen::MatrixXd cluster_mean_positions(const Eigen::MatrixXd& y,
                                              const std::vector<int>& labels, int k) {
    Eigen::MatrixXd pos = Eigen::MatrixXd::Zero(k, 2);
    Eigen::VectorXd count = Eigen::VectorXd::Zero(k);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        pos.row(labels[i]) += y.row(static_cast<Eigen::Index>(i));
        count(labels[i]) += 1.0;
    }
    const Eigen::RowVector2d overall = y.colwise().mean();
    for (int c = 0; c < k; ++c) {
        if (count(c) > 0.0)
            pos.row(c) /= count(c);
        else
            pos.row(c) = overall;  // unvisited cluster: park at the map center
    }
    return pos;
}

// Fruchterman-Reingold iterations seeded from the cluster means; no RNG, so
// the result is a pure function of its inputs.
inline Eigen::MatrixXd spring_positions(Eigen::MatrixXd pos, const Eigen::MatrixXd& weights) {
    const Eigen::Index k = pos.rows();
    if (k < 2) return pos;
    const Eigen::RowVector2d lo = pos.colwise().minCoeff();
    const Eigen::RowVector2d hi = pos.colwise().maxCoeff();
    const double span = std::max({hi(0) - lo(0), hi(1) - lo(1), 1e-6});
    const double ideal = span / std::sqrt(static_cast<double>(k));
    double temperature = 0.1 * span;
    constexpr int kRounds = 50;
    for (int round = 0; round < kRounds; ++round) {
        Eigen::MatrixXd disp = Eigen::MatrixXd::Zero(k, 2);
        for (Eigen::Index i = 0; i < k; ++i) {
            for (Eigen::Index j = 0; j < k; ++j) {
                if (i == j) continue;
                Eigen::RowVector2d delta = pos.row(i) - pos.row(j);
                double dist = delta.norm();
                if (dist < 1e-9) {
                    // Deterministic tie-break for coincident nodes.
                    delta = Eigen::RowVector2d(1e-6 * static_cast<double>(i - j), 0.0);
                    dist = delta.norm();
                }
                disp.row(i) += delta / dist * (ideal * ideal / dist);
                const double w = std::max(weights(i, j), weights(j, i));
                if (w > 0.0) disp.row(i) -= delta / dist * (dist * dist / ideal) * w;
            }
        }
        for (Eigen::Index i = 0; i < k; ++i) {
            const double len = disp.row(i).norm();
            if (len > 0.0) pos.row(i) += disp.row(i) / len * std::min(len, temperature);
        }
        temperature *= 0.95;
    }
    return pos;
}

// Two smallest nontrivial eigenvectors of the Laplacian of the symmetrized
// weighted adjacency.
inline Eigen::MatrixXd spectral_positions(const Eigen::MatrixXd& p_skill,
                                          const std::vector<bool>& absorbing) {
    const Eigen::Index k = p_skill.rows();
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(k, k);
    for (Eigen::Index i = 0; i < k; ++i)
        for (Eigen::Index j = 0; j < k; ++j)
            if (i != j && !absorbing[static_cast<std::size_t>(i)])
                w(i, j) = p_skill(i, j);
    w = 0.5 * (w + w.transpose());
    Eigen::MatrixXd lap = Eigen::MatrixXd(w.rowwise().sum().asDiagonal()) - w;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(lap);
    Eigen::MatrixXd pos = Eigen::MatrixXd::Zero(k, 2);
    if (k >= 2) pos.col(0) = es.eigenvectors().col(1);
    if (k >= 3) pos.col(1) = es.eigenvectors().col(2);
    return pos;
}

inline std::string fmt(double v, int precision) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", precision, v);
    return buf;
}

}  // namespace detail

// Places one node per cluster and keeps every skill edge heavier than
// epsilon_edge. The cluster-mean layout fuses the graph with the map;
// spring and spectral are self-contained alternatives.
inline GraphLayout layout(const SmdpModel& model, const Embedding& emb,
                          const std::vector<int>& labels, LayoutKind kind,
                          double epsilon_edge = 0.05) {
    GraphLayout gl;
    gl.kind = kind;
    gl.epsilon_edge = epsilon_edge;
    gl.node_size = model.sizes.cast<double>();

    switch (kind) {
        case LayoutKind::cluster_mean:
            gl.node_pos = detail::cluster_mean_positions(emb.y, labels, model.k);
            break;
        case LayoutKind::spring:
            gl.node_pos = detail::spring_positions(
                detail::cluster_mean_positions(emb.y, labels, model.k), model.p_skill);
            break;
        case LayoutKind::spectral:
            gl.node_pos = detail::spectral_positions(model.p_skill, model.absorbing);
            break;
    }

    for (int i = 0; i < model.k; ++i) {
        if (model.absorbing[static_cast<std::size_t>(i)]) continue;
        for (int j = 0; j < model.k; ++j)
            if (i != j && model.p_skill(i, j) > epsilon_edge)
                gl.edges.push_back({i, j, model.p_skill(i, j)});
    }
    return gl;
}

namespace detail {

// Categorical palette cycled by cluster index.
inline const char* palette_color(int index) {
    static constexpr const char* kPalette[] = {
        "#1f77b4", "#aec7e8", "#ff7f0e", "#ffbb78", "#2ca02c", "#98df8a", "#d62728",
        "#ff9896", "#9467bd", "#c5b0d5", "#8c564b", "#c49c94", "#e377c2", "#f7b6d2",
        "#7f7f7f", "#c7c7c7", "#bcbd22", "#dbdb8d", "#17becf", "#9edae5"};
    return kPalette[static_cast<std::size_t>(index) % (sizeof kPalette / sizeof kPalette[0])];
}

}  // namespace detail

// DOT digraph with pinned positions; node labels carry the cluster index and
// its SMDP value, greedy edges are marked by color.
inline std::string render_dot(const GraphLayout& gl, const SmdpModel& model) {
    std::string out = "digraph smdp {\n";
    out += "  graph [outputorder=edgesfirst];\n";
    out += "  node [shape=circle, style=filled, fontname=\"Helvetica\"];\n";
    const double max_size = std::max(gl.node_size.maxCoeff(), 1.0);
    for (int i = 0; i < model.k; ++i) {
        const double width = 0.4 + 0.8 * gl.node_size(i) / max_size;
        out += "  n" + std::to_string(i) + " [label=\"c" + std::to_string(i) + "\\nv=" +
               detail::fmt(model.v_smdp(i), 2) + "\", pos=\"" + detail::fmt(gl.node_pos(i, 0), 4) +
               "," + detail::fmt(gl.node_pos(i, 1), 4) + "!\", width=" + detail::fmt(width, 2) +
               ", fillcolor=\"" + detail::palette_color(i) + "\"];\n";
    }
    for (const auto& e : gl.edges) {
        const bool greedy = model.greedy[static_cast<std::size_t>(e.from)] == e.to;
        out += "  n" + std::to_string(e.from) + " -> n" + std::to_string(e.to) + " [label=\"" +
               detail::fmt(e.weight, 2) + "\", penwidth=" + detail::fmt(0.5 + 4.0 * e.weight, 2) +
               ", color=\"" + (greedy ? "crimson" : "gray40") + "\"" +
               (greedy ? ", greedy=\"1\"" : "") + "];\n";
    }
    out += "}\n";
    return out;
}

// SVG with the point scatter colored by cluster, the node/edge overlay with
// arrowheads, and a legend of cluster sizes and values. Coordinates are
// affinely mapped into the viewbox preserving the aspect ratio; identical
// inputs render byte-identical output.
inline std::string render_svg(const GraphLayout& gl, const Embedding& emb,
                              const std::vector<int>& labels, const SmdpModel& model) {
    constexpr double kWidth = 960.0, kHeight = 720.0, kMargin = 48.0, kLegendWidth = 190.0;
    const double plot_w = kWidth - kLegendWidth - 2.0 * kMargin;
    const double plot_h = kHeight - 2.0 * kMargin;

    // One affine for both layers when the overlay lives in map coordinates,
    // separate affines otherwise (spring/spectral coordinates are unrelated
    // to the map).
    struct Affine {
        double scale = 1.0, x0 = 0.0, y0 = 0.0, cx = 0.0, cy = 0.0;
        double x(double v) const { return x0 + (v - cx) * scale; }
        double y(double v) const { return y0 - (v - cy) * scale; }
    };
    auto fit = [&](const Eigen::MatrixXd& pts) {
        Affine a;
        const Eigen::RowVector2d lo = pts.colwise().minCoeff();
        const Eigen::RowVector2d hi = pts.colwise().maxCoeff();
        const double dx = std::max(hi(0) - lo(0), 1e-9);
        const double dy = std::max(hi(1) - lo(1), 1e-9);
        a.scale = std::min(plot_w / dx, plot_h / dy);
        a.cx = 0.5 * (lo(0) + hi(0));
        a.cy = 0.5 * (lo(1) + hi(1));
        a.x0 = kMargin + plot_w / 2.0;
        a.y0 = kMargin + plot_h / 2.0;
        return a;
    };

    Affine points_map, nodes_map;
    if (gl.kind == LayoutKind::cluster_mean) {
        Eigen::MatrixXd all(emb.y.rows() + gl.node_pos.rows(), 2);
        all << emb.y, gl.node_pos;
        points_map = nodes_map = fit(all);
    } else {
        points_map = fit(emb.y);
        nodes_map = fit(gl.node_pos);
    }

    using detail::fmt;
    std::string s;
    s += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    s += "<!-- smdpmap layout=" + to_string(gl.kind) + " -->\n";
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" + fmt(kWidth, 0) +
         "\" height=\"" + fmt(kHeight, 0) + "\" viewBox=\"0 0 " + fmt(kWidth, 0) + " " +
         fmt(kHeight, 0) + "\">\n";
    s += "<defs><marker id=\"arrow\" viewBox=\"0 0 10 10\" refX=\"9\" refY=\"5\" "
         "markerWidth=\"7\" markerHeight=\"7\" orient=\"auto-start-reverse\">"
         "<path d=\"M 0 0 L 10 5 L 0 10 z\" fill=\"#333333\"/></marker></defs>\n";
    s += "<rect x=\"0\" y=\"0\" width=\"" + fmt(kWidth, 0) + "\" height=\"" + fmt(kHeight, 0) +
         "\" fill=\"white\"/>\n";

    s += "<g id=\"points\">\n";
    for (Eigen::Index i = 0; i < emb.y.rows(); ++i) {
        s += "<circle cx=\"" + fmt(points_map.x(emb.y(i, 0)), 2) + "\" cy=\"" +
             fmt(points_map.y(emb.y(i, 1)), 2) + "\" r=\"2\" fill=\"" +
             detail::palette_color(labels[static_cast<std::size_t>(i)]) +
             "\" fill-opacity=\"0.55\"/>\n";
    }
    s += "</g>\n";

    const double max_size = std::max(gl.node_size.maxCoeff(), 1.0);
    s += "<g id=\"edges\">\n";
    for (const auto& e : gl.edges) {
        const double x1 = nodes_map.x(gl.node_pos(e.from, 0));
        const double y1 = nodes_map.y(gl.node_pos(e.from, 1));
        const double x2 = nodes_map.x(gl.node_pos(e.to, 0));
        const double y2 = nodes_map.y(gl.node_pos(e.to, 1));
        // Stop the line at the target node's rim so the arrowhead stays visible.
        const double r2 = 6.0 + 12.0 * std::sqrt(gl.node_size(e.to) / max_size);
        const double len = std::max(std::hypot(x2 - x1, y2 - y1), 1e-9);
        const double bx = x2 - (x2 - x1) / len * r2;
        const double by = y2 - (y2 - y1) / len * r2;
        const bool greedy = model.greedy[static_cast<std::size_t>(e.from)] == e.to;
        s += "<line x1=\"" + fmt(x1, 2) + "\" y1=\"" + fmt(y1, 2) + "\" x2=\"" + fmt(bx, 2) +
             "\" y2=\"" + fmt(by, 2) + "\" stroke=\"" + (greedy ? "#b2182b" : "#555555") +
             "\" stroke-width=\"" + fmt(0.8 + 4.0 * e.weight, 2) +
             "\" marker-end=\"url(#arrow)\"/>\n";
    }
    s += "</g>\n";

    s += "<g id=\"nodes\">\n";
    for (int i = 0; i < model.k; ++i) {
        const double r = 6.0 + 12.0 * std::sqrt(gl.node_size(i) / max_size);
        const double cx = nodes_map.x(gl.node_pos(i, 0));
        const double cy = nodes_map.y(gl.node_pos(i, 1));
        s += "<circle cx=\"" + fmt(cx, 2) + "\" cy=\"" + fmt(cy, 2) + "\" r=\"" + fmt(r, 2) +
             "\" fill=\"" + detail::palette_color(i) +
             "\" stroke=\"#222222\" stroke-width=\"1.2\"/>\n";
        s += "<text x=\"" + fmt(cx, 2) + "\" y=\"" + fmt(cy + 4.0, 2) +
             "\" text-anchor=\"middle\" font-family=\"Helvetica\" font-size=\"11\">c" +
             std::to_string(i) + "</text>\n";
    }
    s += "</g>\n";

    s += "<g id=\"legend\" font-family=\"Helvetica\" font-size=\"12\">\n";
    const double lx = kWidth - kLegendWidth + 8.0;
    s += "<text x=\"" + fmt(lx, 2) + "\" y=\"" + fmt(kMargin, 2) +
         "\" font-weight=\"bold\">clusters</text>\n";
    for (int i = 0; i < model.k; ++i) {
        const double ly = kMargin + 18.0 * static_cast<double>(i + 1);
        s += "<rect x=\"" + fmt(lx, 2) + "\" y=\"" + fmt(ly - 9.0, 2) +
             "\" width=\"10\" height=\"10\" fill=\"" + std::string(detail::palette_color(i)) +
             "\"/>\n";
        s += "<text x=\"" + fmt(lx + 16.0, 2) + "\" y=\"" + fmt(ly, 2) + "\">c" +
             std::to_string(i) + " n=" + std::to_string(model.sizes(i)) + " v=" +
             fmt(model.v_smdp(i), 2) + "</text>\n";
    }
    s += "</g>\n</svg>\n";
    return s;
}

}  // namespace smdpmap

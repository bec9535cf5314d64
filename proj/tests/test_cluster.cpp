#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <set>

#include "smdpmap/cluster.hpp"
#include "smdpmap/synth.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace smdpmap;

namespace {

Embedding embedding_from(const Eigen::MatrixXd& y) {
    Embedding e;
    e.y = y;
    return e;
}

// Features straight from a synthetic dataset: 2-D emissions plus the value
// estimate, standardized. Stands in for the t-SNE map in clustering tests.
ClusterFeatures synth_features(const Dataset& d) {
    Embedding emb;
    emb.y = feature_matrix(d).leftCols<2>();
    return build_features(emb, value_estimates(d));
}

std::vector<double> rewards_of(const Dataset& d) {
    std::vector<double> r;
    for (const auto& rec : d.records()) r.push_back(rec.reward);
    return r;
}

}  // namespace

TEST_CASE("build_features standardizes each column") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> gauss(5.0, 2.0);
    Eigen::MatrixXd y(200, 2);
    std::vector<double> values(200);
    for (int i = 0; i < 200; ++i) {
        y(i, 0) = gauss(rng);
        y(i, 1) = -3.0 * gauss(rng);
        values[static_cast<std::size_t>(i)] = 0.25 * gauss(rng);
    }
    const ClusterFeatures f = build_features(embedding_from(y), values);
    for (int c = 0; c < 3; ++c) {
        REQUIRE(f.z.col(c).mean() == Catch::Approx(0.0).margin(1e-8));
        const double sd = std::sqrt((f.z.col(c).array() - f.z.col(c).mean()).square().mean());
        REQUIRE(sd == Catch::Approx(1.0).margin(1e-6));
    }
}

TEST_CASE("constant value column maps to zeros") {
    Eigen::MatrixXd y(5, 2);
    y << 0, 1, 2, 3, 4, 5, 6, 7, 8, 9;
    const std::vector<double> values(5, 3.33);
    const ClusterFeatures f = build_features(embedding_from(y), values);
    REQUIRE(f.z.col(2).isZero(0.0));
    REQUIRE(f.scale(2) == 0.0);
}

TEST_CASE("stored mean and scale undo the standardization") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> unit(-4.0, 4.0);
    Eigen::MatrixXd y(50, 2);
    std::vector<double> values(50);
    for (int i = 0; i < 50; ++i) {
        y(i, 0) = 2.0 + 3.0 * unit(rng);
        y(i, 1) = -1.0 + 0.5 * unit(rng);
        values[static_cast<std::size_t>(i)] = 10.0 * unit(rng);
    }
    const ClusterFeatures f = build_features(embedding_from(y), values);
    for (int i = 0; i < 50; ++i) {
        REQUIRE(f.z(i, 0) * f.scale(0) + f.mean(0) == Catch::Approx(y(i, 0)).margin(1e-9));
        REQUIRE(f.z(i, 2) * f.scale(2) + f.mean(2) ==
                Catch::Approx(values[static_cast<std::size_t>(i)]).margin(1e-9));
    }
}

TEST_CASE("windowed assignment with w=0 is nearest-centroid") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    Eigen::MatrixXd z(100, 3);
    for (int i = 0; i < 100; ++i)
        for (int c = 0; c < 3; ++c) z(i, c) = unit(rng);
    Eigen::MatrixXd centroids(4, 3);
    for (int i = 0; i < 4; ++i)
        for (int c = 0; c < 3; ++c) centroids(i, c) = unit(rng);
    const auto episodes = fixtures::even_episodes(100, 4);
    const auto labels = windowed_assign(z, centroids, episodes, 0);
    for (int i = 0; i < 100; ++i) {
        int best = 0;
        double best_d = (z.row(i) - centroids.row(0)).squaredNorm();
        for (int j = 1; j < 4; ++j) {
            const double d = (z.row(i) - centroids.row(j)).squaredNorm();
            if (d < best_d) {
                best_d = d;
                best = j;
            }
        }
        REQUIRE(labels[static_cast<std::size_t>(i)] == best);
    }
}

TEST_CASE("window relabels the 1-D outlier by the hand computation") {
    // z = [0, 0, 10, 0, 0], centroids 0 and 10, w = 1: the middle point's
    // window cost is 100/3 toward centroid 0 vs 200/3 toward centroid 1.
    Eigen::MatrixXd z = Eigen::MatrixXd::Zero(5, 3);
    z(2, 0) = 10.0;
    Eigen::MatrixXd centroids = Eigen::MatrixXd::Zero(2, 3);
    centroids(1, 0) = 10.0;
    const auto labels = windowed_assign(z, centroids, {{0, 5}}, 1);
    REQUIRE(labels == std::vector<int>{0, 0, 0, 0, 0});
    const auto pointwise = windowed_assign(z, centroids, {{0, 5}}, 0);
    REQUIRE(pointwise == std::vector<int>{0, 0, 1, 0, 0});
}

TEST_CASE("windows truncate at episode boundaries") {
    // Second episode starts with a far point; with leakage from episode one
    // it would flip, truncated it stays with its own side.
    Eigen::MatrixXd z = Eigen::MatrixXd::Zero(6, 3);
    z(3, 0) = 10.0;
    z(4, 0) = 10.0;
    z(5, 0) = 10.0;
    Eigen::MatrixXd centroids = Eigen::MatrixXd::Zero(2, 3);
    centroids(1, 0) = 10.0;
    const auto labels = windowed_assign(z, centroids, {{0, 3}, {3, 6}}, 2);
    REQUIRE(labels == std::vector<int>{0, 0, 0, 1, 1, 1});
}

TEST_CASE("windowed assignment ties break toward the lower cluster") {
    Eigen::MatrixXd z = Eigen::MatrixXd::Zero(1, 3);
    Eigen::MatrixXd centroids(2, 3);
    centroids << 1, 0, 0, -1, 0, 0;  // equidistant from the origin
    const auto labels = windowed_assign(z, centroids, {{0, 1}}, 0);
    REQUIRE(labels[0] == 0);
}

TEST_CASE("update step never increases inertia for fixed labels") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> unit(-2.0, 2.0);
    for (int trial = 0; trial < 10; ++trial) {
        Eigen::MatrixXd z(60, 3);
        for (int i = 0; i < 60; ++i)
            for (int c = 0; c < 3; ++c) z(i, c) = unit(rng);
        Eigen::MatrixXd centroids(5, 3);
        for (int i = 0; i < 5; ++i)
            for (int c = 0; c < 3; ++c) centroids(i, c) = unit(rng);
        const auto labels = windowed_assign(z, centroids, {{0, 60}}, 0);

        auto inertia_for = [&](const Eigen::MatrixXd& cents) {
            double total = 0.0;
            for (int i = 0; i < 60; ++i)
                total += (z.row(i) - cents.row(labels[static_cast<std::size_t>(i)])).squaredNorm();
            return total;
        };
        Eigen::MatrixXd means = Eigen::MatrixXd::Zero(5, 3);
        Eigen::VectorXd count = Eigen::VectorXd::Zero(5);
        for (int i = 0; i < 60; ++i) {
            means.row(labels[static_cast<std::size_t>(i)]) += z.row(i);
            count(labels[static_cast<std::size_t>(i)]) += 1.0;
        }
        for (int c = 0; c < 5; ++c)
            means.row(c) = count(c) > 0 ? (means.row(c) / count(c)).eval() : centroids.row(c);
        REQUIRE(inertia_for(means) <= inertia_for(centroids) + 1e-9);
    }
}

TEST_CASE("st_kmeans recovers two well-separated temporal blobs") {
    // Fixed-length alternating segments, 8-sigma separation: every window is
    // dominated by its own blob, so recovery is exact.
    std::mt19937_64 rng(11);
    std::normal_distribution<double> noise(0.0, 0.2);
    const int episodes_n = 6, seg_len = 20;
    Eigen::MatrixXd z(episodes_n * 2 * seg_len, 3);
    std::vector<int> truth;
    std::vector<EpisodeSpan> episodes;
    Eigen::Index row = 0;
    for (int e = 0; e < episodes_n; ++e) {
        const std::size_t begin = static_cast<std::size_t>(row);
        for (int half = 0; half < 2; ++half) {
            const double center = half == 0 ? -0.8 : 0.8;
            for (int t = 0; t < seg_len; ++t, ++row) {
                z(row, 0) = center + noise(rng);
                z(row, 1) = noise(rng);
                z(row, 2) = half + noise(rng);
                truth.push_back(half);
            }
        }
        episodes.push_back({begin, static_cast<std::size_t>(row)});
    }
    const Labeling lab = st_kmeans(z, episodes, 2, 2, 5);
    REQUIRE(oracles::adjusted_rand_index(lab.labels, truth) == 1.0);
}

TEST_CASE("k equal to N with w=0 gives singleton clusters and zero inertia") {
    Eigen::MatrixXd z(6, 3);
    z << 0, 0, 0, 1, 0, 0, 2, 0, 0, 3, 0, 0, 4, 0, 0, 5, 0, 0;
    const Labeling lab = st_kmeans(z, {{0, 6}}, 6, 0, 3);
    REQUIRE(lab.inertia == 0.0);
    std::set<int> distinct(lab.labels.begin(), lab.labels.end());
    REQUIRE(distinct.size() == 6);
}

TEST_CASE("same seed reproduces the labeling") {
    const Dataset d = generate(fixtures::cycle_gt(3, 0.4, 5.0), 6, 2);
    const ClusterFeatures f = synth_features(d);
    const Labeling a = st_kmeans(f.z, d.episodes(), 3, 2, 42);
    const Labeling b = st_kmeans(f.z, d.episodes(), 3, 2, 42);
    REQUIRE(a.labels == b.labels);
    REQUIRE((a.centroids.array() == b.centroids.array()).all());
    REQUIRE(a.inertia == b.inertia);
    REQUIRE(a.iterations == b.iterations);
}

TEST_CASE("labeling invariants hold on noisy data") {
    const Dataset d = generate(fixtures::cycle_gt(4, 1.5, 4.0), 8, 7);
    const ClusterFeatures f = synth_features(d);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Labeling lab = st_kmeans(f.z, d.episodes(), 5, 2, seed);
        std::vector<int> count(5, 0);
        for (int l : lab.labels) {
            REQUIRE(l >= 0);
            REQUIRE(l < 5);
            ++count[static_cast<std::size_t>(l)];
        }
        for (int c = 0; c < 5; ++c) REQUIRE(count[static_cast<std::size_t>(c)] > 0);

        double inertia = 0.0;
        for (Eigen::Index i = 0; i < f.z.rows(); ++i)
            inertia += (f.z.row(i) - lab.centroids.row(lab.labels[static_cast<std::size_t>(i)]))
                           .squaredNorm();
        REQUIRE(lab.inertia == Catch::Approx(inertia).margin(1e-6));
        REQUIRE(lab.iterations >= 1);
        REQUIRE(lab.iterations <= 300);
    }
}

TEST_CASE("restart search selects the minimum entropy run and logs every restart") {
    const Dataset d = generate(fixtures::cycle_gt(3, 0.6, 6.0), 12, 3);
    const ClusterFeatures f = synth_features(d);
    FitOptions opt;
    opt.gamma = 0.95;
    const SearchResult res =
        restart_search(f, d.episodes(), rewards_of(d), 3, 2, 8, 100, opt);
    REQUIRE(res.log.size() == 8);
    double min_entropy = std::numeric_limits<double>::infinity();
    for (const auto& e : res.log) min_entropy = std::min(min_entropy, e.entropy);
    REQUIRE(res.model.entropy == min_entropy);
    // Seeds are contiguous from the base seed.
    for (std::size_t i = 0; i < res.log.size(); ++i) REQUIRE(res.log[i].seed == 100 + i);
    REQUIRE(res.labeling.labels.size() == d.size());

    const SearchResult single =
        restart_search(f, d.episodes(), rewards_of(d), 3, 2, 1, res.labeling.seed, opt);
    REQUIRE(single.model.entropy == res.model.entropy);
}

TEST_CASE("windowed restarts beat iid clustering on entropy for noisy chains") {
    // Paired seeds on overlapping emissions: the temporal window resolves
    // boundary ambiguity that w=0 cannot.
    int w2_not_worse = 0;
    const int pairs = 20;
    for (int pair = 0; pair < pairs; ++pair) {
        GroundTruthSmdp gt = fixtures::cycle_gt(3, 1.0, 8.0, /*qvalue_noise=*/2.0);
        gt.emission_mean = fixtures::circle_emissions(3, 1.0, 2.0);  // heavy overlap
        const Dataset d = generate(gt, 12, 900 + static_cast<std::uint64_t>(pair));
        const ClusterFeatures f = synth_features(d);
        FitOptions opt;
        opt.gamma = 0.95;
        const std::uint64_t seed = 5000 + static_cast<std::uint64_t>(pair);
        const SearchResult with_window =
            restart_search(f, d.episodes(), rewards_of(d), 3, 2, 3, seed, opt);
        const SearchResult without =
            restart_search(f, d.episodes(), rewards_of(d), 3, 0, 3, seed, opt);
        if (with_window.model.entropy <= without.model.entropy) ++w2_not_worse;
    }
    REQUIRE(w2_not_worse * 2 >= pairs);  // median comparison
}

TEST_CASE("degenerate clustering configs are rejected") {
    Eigen::MatrixXd z = Eigen::MatrixXd::Random(10, 3);
    REQUIRE_THROWS_AS(st_kmeans(z, {{0, 10}}, 1, 0, 0), ConfigError);
    REQUIRE_THROWS_AS(st_kmeans(z, {{0, 10}}, 11, 0, 0), ConfigError);
    REQUIRE_THROWS_AS(windowed_assign(z, Eigen::MatrixXd::Zero(2, 3), {{0, 10}}, -1), ConfigError);
}

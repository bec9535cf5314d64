#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "smdpmap/dataset.hpp"
#include "smdpmap/synth.hpp"
#include "support/fixtures.hpp"

using namespace smdpmap;
namespace fs = std::filesystem;

namespace {

fs::path scratch_file(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "smdpmap_tests";
    fs::create_directories(dir);
    return dir / name;
}

void write_lines(const fs::path& p, const std::vector<std::string>& lines) {
    std::ofstream out(p, std::ios::binary);
    for (const auto& l : lines) out << l << '\n';
}

std::string record_line(int episode, int step, bool terminal,
                        const std::string& features = "[0.0,1.0,2.0]",
                        const std::string& qvalues = "[0.5,0.25]") {
    return std::string("{\"episode\":") + std::to_string(episode) +
           ",\"step\":" + std::to_string(step) + ",\"features\":" + features +
           ",\"qvalues\":" + qvalues + ",\"action\":0,\"reward\":1.5,\"terminal\":" +
           (terminal ? "true" : "false") + "}";
}

}  // namespace

TEST_CASE("load parses two episodes with the right boundaries") {
    const auto path = scratch_file("two_episodes.jsonl");
    write_lines(path, {
                          record_line(0, 0, false),
                          record_line(0, 1, false),
                          record_line(0, 2, true),
                          record_line(1, 0, false),
                          record_line(1, 1, true),
                      });
    const Dataset d = load_dataset(path);
    REQUIRE(d.size() == 5);
    REQUIRE(d.feature_dim() == 3);
    REQUIRE(d.action_count() == 2);
    REQUIRE(d.episodes() == std::vector<EpisodeSpan>{{0, 3}, {3, 5}});
}

TEST_CASE("inconsistent feature dimension is rejected with the offending line") {
    const auto path = scratch_file("bad_dims.jsonl");
    write_lines(path, {
                          record_line(0, 0, false),
                          record_line(0, 1, false, "[0.0,1.0]"),
                          record_line(0, 2, true),
                      });
    REQUIRE_THROWS_MATCHES(load_dataset(path), InconsistentDimensions,
                           Catch::Matchers::MessageMatches(
                               Catch::Matchers::ContainsSubstring("line 2")));
}

TEST_CASE("malformed records carry the line number") {
    const auto path = scratch_file("bad_json.jsonl");
    write_lines(path, {record_line(0, 0, false), "not json at all"});
    try {
        load_dataset(path);
        FAIL("expected MalformedRecord");
    } catch (const MalformedRecord& e) {
        REQUIRE(e.line() == 2);
    }
}

TEST_CASE("broken episodes are rejected") {
    SECTION("non-consecutive steps") {
        const auto path = scratch_file("skip_step.jsonl");
        write_lines(path, {record_line(0, 0, false), record_line(0, 2, true)});
        REQUIRE_THROWS_AS(load_dataset(path), BrokenEpisode);
    }
    SECTION("missing terminal") {
        const auto path = scratch_file("no_terminal.jsonl");
        write_lines(path, {record_line(0, 0, false), record_line(0, 1, false)});
        REQUIRE_THROWS_AS(load_dataset(path), BrokenEpisode);
    }
    SECTION("terminal before the episode end") {
        const auto path = scratch_file("early_terminal.jsonl");
        write_lines(path, {record_line(0, 0, true), record_line(0, 1, true)});
        REQUIRE_THROWS_AS(load_dataset(path), BrokenEpisode);
    }
    SECTION("episode id going backwards") {
        const auto path = scratch_file("backwards.jsonl");
        write_lines(path, {record_line(1, 0, true), record_line(0, 0, true)});
        REQUIRE_THROWS_AS(load_dataset(path), BrokenEpisode);
    }
}

TEST_CASE("action outside [0, A) is malformed") {
    const auto path = scratch_file("bad_action.jsonl");
    std::string line = record_line(0, 0, true);
    line.replace(line.find("\"action\":0"), 10, "\"action\":7");
    write_lines(path, {line});
    REQUIRE_THROWS_AS(load_dataset(path), MalformedRecord);
}

TEST_CASE("value estimates take the per-record max") {
    std::vector<TrajectoryRecord> records(3);
    records[0] = {0, 0, {0.0}, {0.1, 0.9, 0.3}, 0, 0.0, false, {}};
    records[1] = {0, 1, {0.0}, {-1.0, -2.0, -1.5}, 1, 0.0, false, {}};
    records[2] = {0, 2, {0.0}, {2.0, 2.0, 2.0}, 2, 0.0, true, {}};
    const Dataset d = Dataset::from_records(std::move(records));
    REQUIRE(value_estimates(d) == std::vector<double>{0.9, -1.0, 2.0});
}

TEST_CASE("episode boundary index partitions the whole range") {
    const Dataset d = fixtures::tiny_dataset({4, 1, 6, 2});
    std::size_t expected_begin = 0;
    for (const auto& ep : d.episodes()) {
        REQUIRE(ep.begin == expected_begin);
        REQUIRE(ep.end > ep.begin);
        expected_begin = ep.end;
    }
    REQUIRE(expected_begin == d.size());
}

TEST_CASE("save then load round-trips structurally; save is byte-stable") {
    GroundTruthSmdp gt = fixtures::cycle_gt(3, 0.1, 4.0);
    gt.raw_onehot = true;
    const Dataset d = generate(gt, 5, 42);
    REQUIRE(!d.true_labels().empty());

    const auto p1 = scratch_file("roundtrip1.jsonl");
    const auto p2 = scratch_file("roundtrip2.jsonl");
    save_dataset(d, p1);
    const Dataset loaded = load_dataset(p1);
    REQUIRE(loaded == d);
    save_dataset(loaded, p2);

    std::ifstream a(p1, std::ios::binary), b(p2, std::ios::binary);
    const std::string bytes_a((std::istreambuf_iterator<char>(a)), {});
    const std::string bytes_b((std::istreambuf_iterator<char>(b)), {});
    REQUIRE(bytes_a == bytes_b);
    REQUIRE(!bytes_a.empty());
}

TEST_CASE("raw channel must be all-or-none") {
    std::vector<TrajectoryRecord> records(2);
    records[0] = {0, 0, {0.0}, {1.0}, 0, 0.0, false, {5.0, 6.0}};
    records[1] = {0, 1, {0.0}, {1.0}, 0, 0.0, true, {}};
    REQUIRE_THROWS_AS(Dataset::from_records(std::move(records)), InconsistentDimensions);
}

TEST_CASE("empty input is rejected") {
    const auto path = scratch_file("empty.jsonl");
    write_lines(path, {});
    REQUIRE_THROWS_AS(load_dataset(path), MalformedRecord);
}

TEST_CASE("missing file maps to MissingInput") {
    REQUIRE_THROWS_AS(load_dataset("/nonexistent/nowhere.jsonl"), MissingInput);
}

TEST_CASE("episode returns sum the per-step rewards") {
    std::vector<TrajectoryRecord> records(3);
    records[0] = {0, 0, {0.0}, {1.0}, 0, 1.0, false, {}};
    records[1] = {0, 1, {0.0}, {1.0}, 0, 2.5, true, {}};
    records[2] = {1, 0, {0.0}, {1.0}, 0, -1.0, true, {}};
    const Dataset d = Dataset::from_records(std::move(records));
    REQUIRE(episode_returns(d) == std::vector<double>{3.5, -1.0});
}

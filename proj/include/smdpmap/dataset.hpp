#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "smdpmap/errors.hpp"

namespace smdpmap {

// One agent step as recorded by the producer.
struct TrajectoryRecord {
    std::int64_t episode_id = 0;
    std::int64_t step = 0;
    std::vector<double> features;
    std::vector<double> qvalues;
    int action = 0;
    double reward = 0.0;
    bool terminal = false;
    std::vector<double> raw;  // optional channel, empty when the dataset has none

    bool operator==(const TrajectoryRecord&) const = default;
};

// Half-open range [begin, end) of record indices forming one episode.
struct EpisodeSpan {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t size() const { return end - begin; }
    bool operator==(const EpisodeSpan&) const = default;
};

// Immutable, validated trajectory collection in original visitation order.
class Dataset {
public:
    // Validates all record invariants. `line_of` maps a record index to the
    // source line it came from, for error messages; defaults to index + 1.
    static Dataset from_records(std::vector<TrajectoryRecord> records,
                                std::vector<int> true_labels = {},
                                const std::function<std::size_t(std::size_t)>& line_of = {}) {
        auto line = [&](std::size_t i) { return line_of ? line_of(i) : i + 1; };
        if (records.empty()) throw MalformedRecord(0, "dataset holds no records");

        Dataset d;
        d.feature_dim_ = static_cast<long>(records.front().features.size());
        d.action_count_ = static_cast<long>(records.front().qvalues.size());
        d.raw_dim_ = static_cast<long>(records.front().raw.size());
        if (d.action_count_ < 1)
            throw MalformedRecord(line(0), "qvalues must hold at least one entry");

        for (std::size_t i = 0; i < records.size(); ++i) {
            const auto& r = records[i];
            if (r.episode_id < 0) throw MalformedRecord(line(i), "negative episode id");
            if (static_cast<long>(r.features.size()) != d.feature_dim_)
                throw InconsistentDimensions(line(i), "features", d.feature_dim_,
                                             static_cast<long>(r.features.size()));
            if (static_cast<long>(r.qvalues.size()) != d.action_count_)
                throw InconsistentDimensions(line(i), "qvalues", d.action_count_,
                                             static_cast<long>(r.qvalues.size()));
            if (static_cast<long>(r.raw.size()) != d.raw_dim_)
                throw InconsistentDimensions(line(i), "raw", d.raw_dim_,
                                             static_cast<long>(r.raw.size()));
            if (r.action < 0 || r.action >= d.action_count_)
                throw MalformedRecord(line(i), "action " + std::to_string(r.action) +
                                                   " outside [0, " +
                                                   std::to_string(d.action_count_) + ")");
        }

        // Episode structure: ids strictly increase between blocks, steps count
        // up from 0, and exactly the last record of a block is terminal.
        std::size_t begin = 0;
        for (std::size_t i = 0; i < records.size(); ++i) {
            const auto& r = records[i];
            const bool is_first = (i == begin);
            if (is_first) {
                if (i > 0 && r.episode_id <= records[i - 1].episode_id)
                    throw BrokenEpisode("line " + std::to_string(line(i)) +
                                        ": episode " + std::to_string(r.episode_id) +
                                        " does not follow episode " +
                                        std::to_string(records[i - 1].episode_id));
                if (r.step != 0)
                    throw BrokenEpisode("line " + std::to_string(line(i)) + ": episode " +
                                        std::to_string(r.episode_id) +
                                        " starts at step " + std::to_string(r.step));
            } else {
                if (r.episode_id != records[i - 1].episode_id || r.step != records[i - 1].step + 1)
                    throw BrokenEpisode("line " + std::to_string(line(i)) +
                                        ": non-consecutive step in episode " +
                                        std::to_string(records[i - 1].episode_id));
            }
            if (r.terminal) {
                const bool is_last_of_block =
                    (i + 1 == records.size()) || (records[i + 1].episode_id != r.episode_id) ||
                    (records[i + 1].step != r.step + 1);
                if (!is_last_of_block)
                    throw BrokenEpisode("line " + std::to_string(line(i)) +
                                        ": terminal flag before the end of episode " +
                                        std::to_string(r.episode_id));
                d.episodes_.push_back({begin, i + 1});
                begin = i + 1;
            } else if (i + 1 == records.size()) {
                throw BrokenEpisode("episode " + std::to_string(r.episode_id) +
                                    " is missing its terminal record");
            }
        }

        if (!true_labels.empty() && true_labels.size() != records.size())
            throw MalformedRecord(0, "true_label present on some records but not all");

        d.records_ = std::move(records);
        d.true_labels_ = std::move(true_labels);
        return d;
    }

    const std::vector<TrajectoryRecord>& records() const { return records_; }
    const std::vector<EpisodeSpan>& episodes() const { return episodes_; }
    std::size_t size() const { return records_.size(); }
    long feature_dim() const { return feature_dim_; }
    long action_count() const { return action_count_; }
    long raw_dim() const { return raw_dim_; }
    bool has_raw() const { return raw_dim_ > 0; }

    // Ground-truth cluster labels, present only on synthetic datasets.
    const std::vector<int>& true_labels() const { return true_labels_; }

    bool operator==(const Dataset& o) const {
        return records_ == o.records_ && true_labels_ == o.true_labels_;
    }

private:
    std::vector<TrajectoryRecord> records_;
    std::vector<EpisodeSpan> episodes_;
    std::vector<int> true_labels_;
    long feature_dim_ = 0;
    long action_count_ = 0;
    long raw_dim_ = 0;
};

namespace detail {

inline double require_number(const nlohmann::json& j, const char* key, std::size_t line) {
    auto it = j.find(key);
    if (it == j.end()) throw MalformedRecord(line, std::string("missing key '") + key + "'");
    if (!it->is_number()) throw MalformedRecord(line, std::string("key '") + key + "' is not a number");
    return it->get<double>();
}

inline std::int64_t require_int(const nlohmann::json& j, const char* key, std::size_t line) {
    auto it = j.find(key);
    if (it == j.end()) throw MalformedRecord(line, std::string("missing key '") + key + "'");
    if (!it->is_number_integer()) throw MalformedRecord(line, std::string("key '") + key + "' is not an integer");
    return it->get<std::int64_t>();
}

inline std::vector<double> require_array(const nlohmann::json& j, const char* key, std::size_t line) {
    auto it = j.find(key);
    if (it == j.end()) throw MalformedRecord(line, std::string("missing key '") + key + "'");
    if (!it->is_array()) throw MalformedRecord(line, std::string("key '") + key + "' is not an array");
    std::vector<double> out;
    out.reserve(it->size());
    for (const auto& v : *it) {
        if (!v.is_number()) throw MalformedRecord(line, std::string("key '") + key + "' holds a non-number");
        out.push_back(v.get<double>());
    }
    return out;
}

}  // namespace detail

// Parses the canonical JSON-lines trajectory format.
inline Dataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw MissingInput(path.string());

    std::vector<TrajectoryRecord> records;
    std::vector<int> true_labels;
    std::vector<std::size_t> lines;
    std::string text;
    std::size_t line_no = 0;
    bool saw_true_label = false;
    while (std::getline(in, text)) {
        ++line_no;
        if (text.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
        if (j.is_discarded()) throw MalformedRecord(line_no, "invalid JSON");
        if (!j.is_object()) throw MalformedRecord(line_no, "record is not a JSON object");

        TrajectoryRecord r;
        r.episode_id = detail::require_int(j, "episode", line_no);
        r.step = detail::require_int(j, "step", line_no);
        r.features = detail::require_array(j, "features", line_no);
        r.qvalues = detail::require_array(j, "qvalues", line_no);
        r.action = static_cast<int>(detail::require_int(j, "action", line_no));
        r.reward = detail::require_number(j, "reward", line_no);
        auto t = j.find("terminal");
        if (t == j.end() || !t->is_boolean())
            throw MalformedRecord(line_no, "key 'terminal' missing or not a boolean");
        r.terminal = t->get<bool>();
        if (auto raw = j.find("raw"); raw != j.end())
            r.raw = detail::require_array(j, "raw", line_no);
        if (auto tl = j.find("true_label"); tl != j.end()) {
            if (!saw_true_label && !records.empty())
                throw MalformedRecord(line_no, "true_label present on some records but not all");
            saw_true_label = true;
            true_labels.push_back(static_cast<int>(detail::require_int(j, "true_label", line_no)));
        } else if (saw_true_label) {
            throw MalformedRecord(line_no, "true_label present on some records but not all");
        }
        records.push_back(std::move(r));
        lines.push_back(line_no);
    }
    return Dataset::from_records(std::move(records), std::move(true_labels),
                                 [lines](std::size_t i) { return i < lines.size() ? lines[i] : 0; });
}

// Canonical serialization: fixed key order, '\n' line endings, shortest
// round-trip number formatting, so save(load(x)) is byte-identical.
inline void save_dataset(const Dataset& d, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    const auto& labels = d.true_labels();
    for (std::size_t i = 0; i < d.size(); ++i) {
        const auto& r = d.records()[i];
        nlohmann::ordered_json j;
        j["episode"] = r.episode_id;
        j["step"] = r.step;
        j["features"] = r.features;
        j["qvalues"] = r.qvalues;
        j["action"] = r.action;
        j["reward"] = r.reward;
        j["terminal"] = r.terminal;
        if (d.has_raw()) j["raw"] = r.raw;
        if (!labels.empty()) j["true_label"] = labels[i];
        out << j.dump() << '\n';
    }
}

// Per-step value estimate of the recorded policy: max over qvalues.
inline std::vector<double> value_estimates(const Dataset& d) {
    std::vector<double> v;
    v.reserve(d.size());
    for (const auto& r : d.records())
        v.push_back(*std::max_element(r.qvalues.begin(), r.qvalues.end()));
    return v;
}

inline Eigen::MatrixXd feature_matrix(const Dataset& d) {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(d.size()), d.feature_dim());
    for (std::size_t i = 0; i < d.size(); ++i)
        for (long f = 0; f < d.feature_dim(); ++f)
            x(static_cast<Eigen::Index>(i), f) = d.records()[i].features[static_cast<std::size_t>(f)];
    return x;
}

inline Eigen::MatrixXd raw_matrix(const Dataset& d) {
    if (!d.has_raw()) throw MissingRawChannel();
    Eigen::MatrixXd x(static_cast<Eigen::Index>(d.size()), d.raw_dim());
    for (std::size_t i = 0; i < d.size(); ++i)
        for (long f = 0; f < d.raw_dim(); ++f)
            x(static_cast<Eigen::Index>(i), f) = d.records()[i].raw[static_cast<std::size_t>(f)];
    return x;
}

// Undiscounted return of each episode.
inline std::vector<double> episode_returns(const Dataset& d) {
    std::vector<double> out;
    out.reserve(d.episodes().size());
    for (const auto& ep : d.episodes()) {
        double sum = 0.0;
        for (std::size_t i = ep.begin; i < ep.end; ++i) sum += d.records()[i].reward;
        out.push_back(sum);
    }
    return out;
}

}  // namespace smdpmap

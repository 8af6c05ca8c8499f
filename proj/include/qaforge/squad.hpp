#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

namespace qaforge {

// SQuAD 2.0 containers. Fields outside the upstream schema are kept in
// `extra` at each level and written back unchanged.

struct SquadAnswer {
    std::string text;
    std::size_t answer_start = 0;
    nlohmann::json extra = nlohmann::json::object();
    bool operator==(const SquadAnswer&) const = default;
};

struct QaItem {
    std::string id;
    std::string question;
    bool is_impossible = false;
    std::vector<SquadAnswer> answers;
    std::optional<std::vector<SquadAnswer>> plausible_answers;
    nlohmann::json extra = nlohmann::json::object();
    bool operator==(const QaItem&) const = default;
};

struct Paragraph {
    std::string context;
    std::vector<QaItem> qas;
    nlohmann::json extra = nlohmann::json::object();
    bool operator==(const Paragraph&) const = default;
};

struct Article {
    std::string title;
    std::vector<Paragraph> paragraphs;
    nlohmann::json extra = nlohmann::json::object();
    bool operator==(const Article&) const = default;
};

struct SquadDataset {
    std::string version = "v2.0";
    std::vector<Article> articles;
    nlohmann::json extra = nlohmann::json::object();
    bool operator==(const SquadDataset&) const = default;

    std::size_t question_count() const;
    // Visits every (paragraph, qa) pair in document order.
    template <typename Fn>
    void for_each_qa(Fn&& fn) const {
        for (const auto& a : articles)
            for (const auto& p : a.paragraphs)
                for (const auto& q : p.qas) fn(p, q);
    }
};

// Schema violations name the JSON pointer of the offending node.
SquadDataset parse_squad(const nlohmann::json& j);
nlohmann::json squad_to_json(const SquadDataset& d);

SquadDataset read_squad(const std::filesystem::path& path);
// Canonical form: sorted keys, 2-space indent, UTF-8, trailing LF.
std::string canonical_squad(const SquadDataset& d);
void write_squad(const SquadDataset& d, const std::filesystem::path& path);

// Writes via a temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

enum class DatasetSource { Squad, Syfter };

std::string_view source_marker(DatasetSource s);
// question + " " + marker. Not idempotent.
std::string append_source_marker(std::string_view question, DatasetSource source);
SquadDataset mark_dataset(SquadDataset d, DatasetSource source);

struct MergeResult {
    SquadDataset dataset;
    std::size_t id_collisions = 0;
};
// Articles of `a` then `b`. Ids of `b` that collide get "-2", "-3", ...
MergeResult merge_datasets(const SquadDataset& a, const SquadDataset& b);

struct SplitResult {
    SquadDataset train;
    SquadDataset test;
};
// Whole-context assignment: no context string lands in both splits.
SplitResult split_by_document(const SquadDataset& d, double test_fraction, std::uint64_t seed);

struct ClassStats {
    std::size_t answerable = 0;
    std::size_t unanswerable = 0;
    double unanswerable_share = 0.0;
};
ClassStats class_stats(const SquadDataset& d);

}  // namespace qaforge

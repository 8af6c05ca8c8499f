#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "qaforge/corpus_filter.hpp"
#include "qaforge/document.hpp"
#include "qaforge/gateway.hpp"
#include "qaforge/squad.hpp"

namespace qaforge {

struct Sentence {
    std::string text;
    std::size_t offset = 0;  // byte offset into the document
    bool operator==(const Sentence&) const = default;
};

// Rule-based: a boundary follows '.', '?' or '!' (plus closing quotes or
// brackets) when whitespace and an uppercase letter or digit come next, unless
// the word before the dot is a known abbreviation. Line breaks are boundaries.
std::vector<Sentence> split_sentences(std::string_view text);

// Offset of the first exact, case-sensitive occurrence.
std::optional<std::size_t> validate_extractive(std::string_view candidate, std::string_view context);

// "generate question: " + context with "<hl>" around [answer_start, answer_start + answer_len).
std::string build_highlight_prompt(std::string_view context, std::size_t answer_start, std::size_t answer_len);

struct SyntheticQAPair {
    std::string pair_id;
    std::string doc_id;
    std::string context;
    std::string question;
    std::string answer_text;
    std::size_t answer_start = 0;
    std::size_t sentence_index = 0;
    std::size_t candidate_index = 0;
    std::optional<double> question_grammatical_prob;
    std::optional<double> answer_grammatical_prob;
};

struct PipelineConfig {
    FilterConfig filter;
    double grammaticality_threshold = 0.5;
    std::size_t max_candidates_per_sentence = 0;  // 0 = unlimited
    bool dedup = true;
    bool sentence_splitting = true;
    std::size_t jobs = 1;
};

struct DocReport {
    std::string doc_id;
    std::size_t sentences = 0;
    std::size_t candidates = 0;
    std::size_t extraction_discards = 0;
    std::size_t gateway_errors = 0;
    std::size_t grammar_discards = 0;
    std::vector<std::string> errors;
};

struct DocResult {
    std::vector<SyntheticQAPair> pairs;
    DocReport report;
};

// Sentence -> candidates -> extractive check -> prompt over the whole
// document -> question -> grammaticality gate. Per-candidate gateway failures
// are tallied and skipped. No deduplication here.
DocResult generate_pairs_for_doc(const Document& doc, const ModelGateway& gateway, const PipelineConfig& config);

struct PipelineReport {
    std::size_t docs_in = 0;
    std::size_t docs_kept = 0;
    std::map<std::string, std::size_t> filtered_by_rule;  // documents failing each rule/stage
    std::size_t filter_errors = 0;
    std::size_t sentences = 0;
    std::size_t candidates = 0;
    std::size_t extraction_discards = 0;
    std::size_t gateway_errors = 0;
    std::size_t grammar_discards = 0;
    std::size_t duplicate_discards = 0;
    std::size_t pairs_out = 0;
    std::vector<FilterReport> filter_reports;
    std::vector<DocReport> doc_reports;
};

struct PipelineResult {
    SquadDataset dataset;
    std::vector<SyntheticQAPair> pairs;
    PipelineReport report;
};

PipelineResult run_pipeline(const std::vector<Document>& corpus, const ModelGateway& gateway,
                            const PipelineConfig& config);

SquadDataset pairs_to_dataset(const std::vector<SyntheticQAPair>& pairs);

nlohmann::json to_json(const PipelineReport& r);

}  // namespace qaforge

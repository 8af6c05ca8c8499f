#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <regex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qaforge/document.hpp"
#include "qaforge/gateway.hpp"

namespace qaforge {

std::vector<std::string> tokenize_whitespace(std::string_view text);

// A blocklist expression with optional whitelist expressions. Construction
// compiles every pattern; an invalid pattern is a ConfigError.
class RegexRule {
public:
    RegexRule(std::string name, std::string pattern, std::vector<std::string> whitelist_patterns = {},
              std::string purpose = {});

    const std::string& name() const { return name_; }
    const std::string& pattern() const { return pattern_; }
    const std::vector<std::string>& whitelist_patterns() const { return whitelist_patterns_; }
    const std::string& purpose() const { return purpose_; }

    struct Outcome {
        bool failed = false;
        std::vector<std::string> saved;  // matched substrings rescued by a whitelist
        std::vector<std::string> unsaved;
    };
    // Every non-empty match of the pattern must fully match some whitelist
    // pattern, otherwise the rule fails. ^ and $ bind at line boundaries.
    Outcome evaluate(const std::string& text) const;

private:
    std::string name_;
    std::string pattern_;
    std::vector<std::string> whitelist_patterns_;
    std::string purpose_;
    std::regex compiled_;
    std::vector<std::regex> whitelist_compiled_;
};

struct FilterConfig {
    std::size_t min_tokens = 10;
    bool enable_length = true;
    bool enable_regex = true;
    bool enable_pos = true;
    bool enable_grammaticality = true;  // read by the generation pipeline
    std::vector<RegexRule> rules;
};

struct FilterReport {
    std::string doc_id;
    bool passed = true;
    std::vector<std::string> failed_rules;
    std::vector<std::pair<std::string, std::string>> failed_matches;   // (rule, offending substring)
    std::vector<std::pair<std::string, std::string>> whitelist_saves;  // (rule, matched substring)
    std::optional<std::string> error;
};

// Stage names that appear in FilterReport::failed_rules next to regex rule names.
inline constexpr std::string_view kLengthStage = "length";
inline constexpr std::string_view kPosStage = "pos";
inline constexpr std::string_view kPosErrorStage = "pos-error";

// Raised when the tagger fails on a document.
class PosFilterError : public std::runtime_error {
public:
    PosFilterError(std::string doc_id, const std::string& what)
        : std::runtime_error("pos tagging failed for document '" + doc_id + "': " + what),
          doc_id_(std::move(doc_id)) {}
    const std::string& doc_id() const { return doc_id_; }

private:
    std::string doc_id_;
};

bool apply_length_filter(const Document& doc, std::size_t min_tokens);
FilterReport apply_regex_filters(const Document& doc, const std::vector<RegexRule>& rules);
bool apply_pos_filter(const Document& doc, PosTagger& tagger);

struct FilterResult {
    std::vector<Document> kept;
    std::vector<FilterReport> reports;  // input order, one per document
};

// Stages run length -> regex -> POS. Length and regex failures are all recorded;
// the tagger is only consulted for documents that survived both.
FilterResult filter_corpus(const std::vector<Document>& docs, const FilterConfig& config,
                           PosTagger* tagger, std::size_t jobs = 1);

// Rule table files: [{"name","pattern","whitelist":[...],"purpose"}].
std::vector<RegexRule> parse_rules(const nlohmann::json& j);
std::vector<RegexRule> load_rules(const std::filesystem::path& path);
nlohmann::json rules_to_json(const std::vector<RegexRule>& rules);

// The seven document filters and two contract-like whitelists from the
// reference rule table. The "mostly-in-brackets" rule reads `{0,5}` where the
// source table printed `{0.5}`.
std::vector<RegexRule> default_rules();

nlohmann::json to_json(const FilterReport& report);

}  // namespace qaforge

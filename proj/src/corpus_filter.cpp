#include "qaforge/corpus_filter.hpp"

#include <algorithm>
#include <fstream>

#include "qaforge/errors.hpp"
#include "qaforge/parallel.hpp"

namespace qaforge {

namespace {

bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::regex compile(const std::string& rule, const std::string& pattern, std::regex::flag_type flags) {
    try {
        return std::regex(pattern, flags);
    } catch (const std::regex_error& e) {
        throw ConfigError("rule '" + rule + "': invalid pattern \"" + pattern + "\": " + e.what());
    }
}

}  // namespace

std::vector<std::string> tokenize_whitespace(std::string_view text) {
    std::vector<std::string> tokens;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && is_space(text[i])) ++i;
        const std::size_t start = i;
        while (i < text.size() && !is_space(text[i])) ++i;
        if (i > start) tokens.emplace_back(text.substr(start, i - start));
    }
    return tokens;
}

RegexRule::RegexRule(std::string name, std::string pattern, std::vector<std::string> whitelist_patterns,
                     std::string purpose)
    : name_(std::move(name)),
      pattern_(std::move(pattern)),
      whitelist_patterns_(std::move(whitelist_patterns)),
      purpose_(std::move(purpose)) {
    if (name_.empty()) throw ConfigError("regex rule without a name");
    compiled_ = compile(name_, pattern_, std::regex::ECMAScript | std::regex::multiline);
    whitelist_compiled_.reserve(whitelist_patterns_.size());
    for (const auto& w : whitelist_patterns_) {
        whitelist_compiled_.push_back(compile(name_, w, std::regex::ECMAScript));
    }
}

RegexRule::Outcome RegexRule::evaluate(const std::string& text) const {
    Outcome out;
    for (auto it = std::sregex_iterator(text.begin(), text.end(), compiled_); it != std::sregex_iterator(); ++it) {
        // An empty match (e.g. a blank line under ^.{0,15}$) carries no content.
        if (it->length(0) == 0) continue;
        std::string matched = it->str(0);
        const bool saved = std::any_of(whitelist_compiled_.begin(), whitelist_compiled_.end(),
                                       [&](const std::regex& w) { return std::regex_match(matched, w); });
        if (saved) {
            out.saved.push_back(std::move(matched));
        } else {
            out.failed = true;
            out.unsaved.push_back(std::move(matched));
        }
    }
    return out;
}

bool apply_length_filter(const Document& doc, std::size_t min_tokens) {
    if (min_tokens < 1) throw PreconditionError("min_tokens must be >= 1");
    return tokenize_whitespace(doc.text).size() >= min_tokens;
}

FilterReport apply_regex_filters(const Document& doc, const std::vector<RegexRule>& rules) {
    FilterReport report;
    report.doc_id = doc.id;
    for (const auto& rule : rules) {
        auto outcome = rule.evaluate(doc.text);
        for (auto& s : outcome.saved) report.whitelist_saves.emplace_back(rule.name(), std::move(s));
        if (outcome.failed) {
            report.failed_rules.push_back(rule.name());
            for (auto& s : outcome.unsaved) report.failed_matches.emplace_back(rule.name(), std::move(s));
        }
    }
    report.passed = report.failed_rules.empty();
    return report;
}

bool apply_pos_filter(const Document& doc, PosTagger& tagger) {
    std::vector<PosTag> tags;
    try {
        tags = tagger.tag(doc.text);
    } catch (const std::exception& e) {
        throw PosFilterError(doc.id, e.what());
    }
    bool verb = false;
    bool aux = false;
    bool propn = false;
    for (const auto& t : tags) {
        verb |= t.tag == UposTag::Verb;
        aux |= t.tag == UposTag::Aux;
        propn |= t.tag == UposTag::Propn;
    }
    return verb || (aux && propn);
}

FilterResult filter_corpus(const std::vector<Document>& docs, const FilterConfig& config, PosTagger* tagger,
                           std::size_t jobs) {
    if (config.enable_pos && tagger == nullptr) throw ConfigError("POS filter enabled without a tagger");
    std::vector<FilterReport> reports(docs.size());
    parallel_for(docs.size(), jobs, [&](std::size_t i) {
        const Document& doc = docs[i];
        FilterReport report;
        report.doc_id = doc.id;
        if (config.enable_length && !apply_length_filter(doc, config.min_tokens)) {
            report.failed_rules.emplace_back(kLengthStage);
        }
        if (config.enable_regex) {
            auto regex_report = apply_regex_filters(doc, config.rules);
            report.failed_rules.insert(report.failed_rules.end(), regex_report.failed_rules.begin(),
                                       regex_report.failed_rules.end());
            report.failed_matches = std::move(regex_report.failed_matches);
            report.whitelist_saves = std::move(regex_report.whitelist_saves);
        }
        if (report.failed_rules.empty() && config.enable_pos) {
            try {
                if (!apply_pos_filter(doc, *tagger)) report.failed_rules.emplace_back(kPosStage);
            } catch (const PosFilterError& e) {
                report.failed_rules.emplace_back(kPosErrorStage);
                report.error = e.what();
            }
        }
        report.passed = report.failed_rules.empty();
        reports[i] = std::move(report);
    });
    FilterResult result;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        if (reports[i].passed) result.kept.push_back(docs[i]);
    }
    result.reports = std::move(reports);
    return result;
}

std::vector<RegexRule> parse_rules(const nlohmann::json& j) {
    const nlohmann::json& arr = j.is_object() && j.contains("rules") ? j.at("rules") : j;
    if (!arr.is_array()) throw ConfigError("rule table must be a JSON array of rules");
    std::vector<RegexRule> rules;
    for (std::size_t i = 0; i < arr.size(); ++i) {
        const auto& r = arr[i];
        if (!r.is_object() || !r.contains("name") || !r.contains("pattern")) {
            throw ConfigError("rule " + std::to_string(i) + ": expected object with \"name\" and \"pattern\"");
        }
        std::vector<std::string> whitelist;
        if (r.contains("whitelist")) {
            for (const auto& w : r.at("whitelist")) {
                whitelist.push_back(w.is_object() ? w.at("pattern").get<std::string>() : w.get<std::string>());
            }
        }
        rules.emplace_back(r.at("name").get<std::string>(), r.at("pattern").get<std::string>(), std::move(whitelist),
                           r.value("purpose", std::string{}));
    }
    return rules;
}

std::vector<RegexRule> load_rules(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open rule table " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("rule table " + path.string() + ": " + e.what());
    }
    return parse_rules(j);
}

nlohmann::json rules_to_json(const std::vector<RegexRule>& rules) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : rules) {
        arr.push_back({{"name", r.name()},
                       {"pattern", r.pattern()},
                       {"whitelist", r.whitelist_patterns()},
                       {"purpose", r.purpose()}});
    }
    return arr;
}

std::vector<RegexRule> default_rules() {
    return {
        RegexRule("contract-like", R"( ?\([0-9A-Za-z]+\)(\([0-9A-Za-z]+\))*)",
                  {R"( ?\([A-Z]+s?\))", R"( ?\([A-Z]?[0-9a-z]{4,}\))"}, "Contract-like documents"),
        RegexRule("numeric-list", R"(^[0-9]+\.? ?.+)", {}, "Numeric List"),
        RegexRule("roman-numeric-list", R"(^[ivx]+\.? .+)", {}, "Roman-numeric List"),
        RegexRule("empty-square-brackets", R"(\[ ?\])", {}, "Empty square brackets"),
        RegexRule("regulations", R"(Regulation(s)? [0-9]+)", {}, "Regulations contract-like"),
        RegexRule("very-short", R"(^.{0,15}$)", {}, "Very short documents"),
        // printed as ^(.{0.5})?\(.+\).{0,5}$
        RegexRule("mostly-in-brackets", R"(^(.{0,5})?\(.+\).{0,5}$)", {}, "Mostly in brackets"),
    };
}

nlohmann::json to_json(const FilterReport& report) {
    nlohmann::json j{{"doc_id", report.doc_id}, {"passed", report.passed}, {"failed_rules", report.failed_rules}};
    nlohmann::json matches = nlohmann::json::array();
    for (const auto& [rule, text] : report.failed_matches) matches.push_back({{"rule", rule}, {"match", text}});
    j["failed_matches"] = std::move(matches);
    nlohmann::json saves = nlohmann::json::array();
    for (const auto& [rule, text] : report.whitelist_saves) saves.push_back({{"rule", rule}, {"match", text}});
    j["whitelist_saves"] = std::move(saves);
    if (report.error) j["error"] = *report.error;
    return j;
}

}  // namespace qaforge

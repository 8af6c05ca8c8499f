#include "qaforge/qg_pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <tuple>

#include "qaforge/errors.hpp"
#include "qaforge/parallel.hpp"

namespace qaforge {

namespace {

bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_terminal(char c) { return c == '.' || c == '?' || c == '!'; }
bool is_closer(char c) { return c == '"' || c == '\'' || c == ')' || c == ']'; }

const std::set<std::string, std::less<>>& abbreviations() {
    static const std::set<std::string, std::less<>> s{
        "e.g", "i.e", "etc", "vs", "mr", "mrs", "ms", "dr", "prof", "inc", "ltd", "co", "corp",
        "no", "st", "jr", "sr", "fig", "approx", "u.s", "u.k", "dept", "est", "plc", "jan", "feb",
        "mar", "apr", "jun", "jul", "aug", "sep", "sept", "oct", "nov", "dec"};
    return s;
}

// The word ending right before the terminal dot at `dot`.
bool ends_with_abbreviation(std::string_view text, std::size_t dot) {
    std::size_t b = dot;
    while (b > 0 && !is_space(text[b - 1]) && text[b - 1] != '(') --b;
    std::string word(text.substr(b, dot - b));
    for (auto& c : word) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return abbreviations().contains(word);
}

void push_trimmed(std::vector<Sentence>& out, std::string_view text, std::size_t b, std::size_t e) {
    while (b < e && is_space(text[b])) ++b;
    while (e > b && is_space(text[e - 1])) --e;
    if (e > b) out.push_back({std::string(text.substr(b, e - b)), b});
}

}  // namespace

std::vector<Sentence> split_sentences(std::string_view text) {
    std::vector<Sentence> out;
    std::size_t start = 0;
    std::size_t i = 0;
    while (i < text.size()) {
        const char c = text[i];
        if (c == '\n') {
            push_trimmed(out, text, start, i);
            start = ++i;
            continue;
        }
        if (!is_terminal(c)) {
            ++i;
            continue;
        }
        std::size_t end = i + 1;
        while (end < text.size() && (is_terminal(text[end]) || is_closer(text[end]))) ++end;
        std::size_t next = end;
        while (next < text.size() && (text[next] == ' ' || text[next] == '\t')) ++next;
        const bool spaced = next > end;
        const bool capital = next < text.size() && (std::isupper(static_cast<unsigned char>(text[next])) ||
                                                    std::isdigit(static_cast<unsigned char>(text[next])));
        if (spaced && capital && !(c == '.' && ends_with_abbreviation(text, i))) {
            push_trimmed(out, text, start, end);
            start = end;
        }
        i = end;
    }
    push_trimmed(out, text, start, text.size());
    return out;
}

std::optional<std::size_t> validate_extractive(std::string_view candidate, std::string_view context) {
    if (candidate.empty()) return std::nullopt;
    const std::size_t pos = context.find(candidate);
    if (pos == std::string_view::npos) return std::nullopt;
    return pos;
}

std::string build_highlight_prompt(std::string_view context, std::size_t answer_start, std::size_t answer_len) {
    if (answer_len == 0 || answer_start > context.size() || answer_len > context.size() - answer_start) {
        throw PreconditionError("highlight span [" + std::to_string(answer_start) + ", " +
                                std::to_string(answer_start + answer_len) + ") is not a non-empty span of the context");
    }
    if (context.find("<hl>") != std::string_view::npos) {
        throw PreconditionError("context already contains a <hl> marker");
    }
    std::string out = "generate question: ";
    out.reserve(out.size() + context.size() + 8);
    out.append(context.substr(0, answer_start));
    out.append("<hl>");
    out.append(context.substr(answer_start, answer_len));
    out.append("<hl>");
    out.append(context.substr(answer_start + answer_len));
    return out;
}

DocResult generate_pairs_for_doc(const Document& doc, const ModelGateway& gateway, const PipelineConfig& config) {
    if (!(config.grammaticality_threshold >= 0.0 && config.grammaticality_threshold <= 1.0)) {
        throw ConfigError("grammaticality threshold must lie in [0, 1]");
    }
    DocResult result;
    DocReport& report = result.report;
    report.doc_id = doc.id;
    const std::vector<Sentence> sentences =
        config.sentence_splitting ? split_sentences(doc.text) : std::vector<Sentence>{{doc.text, 0}};
    report.sentences = sentences.size();
    const bool gate = config.filter.enable_grammaticality;

    for (std::size_t si = 0; si < sentences.size(); ++si) {
        std::vector<AnswerSpan> candidates;
        try {
            candidates = gateway.select_answers(sentences[si].text, doc.text);
        } catch (const GatewayError& e) {
            ++report.gateway_errors;
            report.errors.push_back(e.what());
            continue;
        }
        if (config.max_candidates_per_sentence > 0 && candidates.size() > config.max_candidates_per_sentence) {
            candidates.resize(config.max_candidates_per_sentence);
        }
        for (std::size_t ci = 0; ci < candidates.size(); ++ci) {
            ++report.candidates;
            const std::string& answer = candidates[ci].text;
            const auto start = validate_extractive(answer, doc.text);
            if (!start) {
                ++report.extraction_discards;
                continue;
            }
            SyntheticQAPair pair;
            pair.pair_id = doc.id + ":s" + std::to_string(si) + ":c" + std::to_string(ci);
            pair.doc_id = doc.id;
            pair.context = doc.text;
            pair.answer_text = answer;
            pair.answer_start = *start;
            pair.sentence_index = si;
            pair.candidate_index = ci;
            try {
                pair.question = gateway.generate_question(build_highlight_prompt(doc.text, *start, answer.size()));
                if (gate) {
                    pair.question_grammatical_prob = gateway.classify_grammatical(pair.question).grammatical_probability();
                    pair.answer_grammatical_prob = gateway.classify_grammatical(pair.answer_text).grammatical_probability();
                }
            } catch (const GatewayError& e) {
                ++report.gateway_errors;
                report.errors.push_back(e.what());
                continue;
            } catch (const PreconditionError& e) {
                ++report.gateway_errors;
                report.errors.push_back(e.what());
                continue;
            }
            if (gate && (*pair.question_grammatical_prob < config.grammaticality_threshold ||
                         *pair.answer_grammatical_prob < config.grammaticality_threshold)) {
                ++report.grammar_discards;
                continue;
            }
            result.pairs.push_back(std::move(pair));
        }
    }
    return result;
}

SquadDataset pairs_to_dataset(const std::vector<SyntheticQAPair>& pairs) {
    SquadDataset d;
    for (const auto& p : pairs) {
        if (d.articles.empty() || d.articles.back().title != p.doc_id || d.articles.back().paragraphs.front().context != p.context) {
            Article a;
            a.title = p.doc_id;
            a.paragraphs.push_back(Paragraph{p.context, {}, nlohmann::json::object()});
            d.articles.push_back(std::move(a));
        }
        QaItem q;
        q.id = p.pair_id;
        q.question = p.question;
        q.is_impossible = false;
        q.answers.push_back(SquadAnswer{p.answer_text, p.answer_start, nlohmann::json::object()});
        d.articles.back().paragraphs.front().qas.push_back(std::move(q));
    }
    return d;
}

PipelineResult run_pipeline(const std::vector<Document>& corpus, const ModelGateway& gateway,
                            const PipelineConfig& config) {
    if (!(config.grammaticality_threshold >= 0.0 && config.grammaticality_threshold <= 1.0)) {
        throw ConfigError("grammaticality threshold must lie in [0, 1]");
    }
    PipelineResult result;
    PipelineReport& report = result.report;
    report.docs_in = corpus.size();

    FilterResult filtered = filter_corpus(corpus, config.filter, gateway.tagger(), config.jobs);
    report.docs_kept = filtered.kept.size();
    for (const auto& r : filtered.reports) {
        for (const auto& rule : r.failed_rules) ++report.filtered_by_rule[rule];
        if (r.error) ++report.filter_errors;
    }
    report.filter_reports = std::move(filtered.reports);

    std::vector<Document> docs = std::move(filtered.kept);
    std::stable_sort(docs.begin(), docs.end(), [](const Document& a, const Document& b) { return a.id < b.id; });

    std::vector<DocResult> per_doc(docs.size());
    parallel_for(docs.size(), config.jobs,
                 [&](std::size_t i) { per_doc[i] = generate_pairs_for_doc(docs[i], gateway, config); });

    std::set<std::tuple<std::string, std::string, std::string>> seen;
    for (auto& dr : per_doc) {
        report.sentences += dr.report.sentences;
        report.candidates += dr.report.candidates;
        report.extraction_discards += dr.report.extraction_discards;
        report.gateway_errors += dr.report.gateway_errors;
        report.grammar_discards += dr.report.grammar_discards;
        for (auto& p : dr.pairs) {
            if (config.dedup && !seen.emplace(p.question, p.answer_text, p.context).second) {
                ++report.duplicate_discards;
                continue;
            }
            result.pairs.push_back(std::move(p));
        }
        report.doc_reports.push_back(std::move(dr.report));
    }
    report.pairs_out = result.pairs.size();
    result.dataset = pairs_to_dataset(result.pairs);
    return result;
}

nlohmann::json to_json(const PipelineReport& r) {
    nlohmann::json filtered = nlohmann::json::object();
    for (const auto& [rule, n] : r.filtered_by_rule) filtered[rule] = n;
    nlohmann::json filter_reports = nlohmann::json::array();
    for (const auto& fr : r.filter_reports) filter_reports.push_back(to_json(fr));
    nlohmann::json docs = nlohmann::json::array();
    for (const auto& d : r.doc_reports) {
        docs.push_back({{"doc_id", d.doc_id},
                        {"sentences", d.sentences},
                        {"candidates", d.candidates},
                        {"extraction_discards", d.extraction_discards},
                        {"gateway_errors", d.gateway_errors},
                        {"grammar_discards", d.grammar_discards},
                        {"errors", d.errors}});
    }
    return {{"docs_in", r.docs_in},
            {"docs_kept", r.docs_kept},
            {"filtered_by_rule", filtered},
            {"filter_errors", r.filter_errors},
            {"sentences", r.sentences},
            {"candidates", r.candidates},
            {"extraction_discards", r.extraction_discards},
            {"gateway_errors", r.gateway_errors},
            {"grammar_discards", r.grammar_discards},
            {"duplicate_discards", r.duplicate_discards},
            {"pairs_out", r.pairs_out},
            {"filter_reports", filter_reports},
            {"documents", docs}};
}

}  // namespace qaforge

#include "qaforge/annotation.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <unordered_map>

#include "qaforge/document.hpp"
#include "qaforge/errors.hpp"
#include "qaforge/rng.hpp"
#include "qaforge/utf8.hpp"

namespace qaforge::annotation {

using nlohmann::json;

namespace {

bool blank(const std::optional<std::string>& s) { return !s || trim(*s).empty(); }

std::string_view reason_name(UnsuitableReason r) {
    return r == UnsuitableReason::NotAnswerable ? "NOT_ANSWERABLE" : "NOT_RELEVANT";
}

UnsuitableReason reason_from(const std::string& s) {
    if (s == "NOT_ANSWERABLE") return UnsuitableReason::NotAnswerable;
    if (s == "NOT_RELEVANT") return UnsuitableReason::NotRelevant;
    throw DataError("unknown unsuitable reason: " + s);
}

std::string_view quality_name(AnswerQuality q) {
    switch (q) {
        case AnswerQuality::PreciseCorrect: return "PRECISE_CORRECT";
        case AnswerQuality::Adequate: return "ADEQUATE";
        case AnswerQuality::Incorrect: return "INCORRECT";
    }
    return "?";
}

AnswerQuality quality_from(const std::string& s) {
    if (s == "PRECISE_CORRECT") return AnswerQuality::PreciseCorrect;
    if (s == "ADEQUATE") return AnswerQuality::Adequate;
    if (s == "INCORRECT") return AnswerQuality::Incorrect;
    throw DataError("unknown answer quality: " + s);
}

bool needs_correction(AnswerQuality q) { return q != AnswerQuality::PreciseCorrect; }

template <class T>
void put_optional(json& j, const char* key, const std::optional<T>& v) {
    j[key] = v ? json(*v) : json(nullptr);
}

template <class T>
std::optional<T> get_optional(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return it->get<T>();
}

// Strict majority over `votes`; nullopt on a tie or an empty electorate.
template <class T>
std::optional<T> strict_majority(const std::vector<T>& votes) {
    std::map<T, std::size_t> counts;
    for (const auto& v : votes) ++counts[v];
    for (const auto& [value, n] : counts) {
        if (2 * n > votes.size()) return value;
    }
    return std::nullopt;
}

}  // namespace

std::string_view to_string(ViolationCode c) {
    switch (c) {
        case ViolationCode::TaskMismatch: return "TASK_MISMATCH";
        case ViolationCode::ReasonRequired: return "REASON_REQUIRED";
        case ViolationCode::UnsuitableLabelledFurther: return "UNSUITABLE_LABELLED_FURTHER";
        case ViolationCode::ReasonWithoutUnsuitable: return "REASON_WITHOUT_UNSUITABLE";
        case ViolationCode::QuestionNaturalnessRequired: return "QUESTION_NATURALNESS_REQUIRED";
        case ViolationCode::QuestionRewriteRequired: return "QUESTION_REWRITE_REQUIRED";
        case ViolationCode::QuestionRewriteUnexpected: return "QUESTION_REWRITE_UNEXPECTED";
        case ViolationCode::AnswerJudgementRequired: return "ANSWER_JUDGEMENT_REQUIRED";
        case ViolationCode::AnswerRewriteRequired: return "ANSWER_REWRITE_REQUIRED";
        case ViolationCode::AnswerRewriteUnexpected: return "ANSWER_REWRITE_UNEXPECTED";
        case ViolationCode::CorrectionRequired: return "CORRECTION_REQUIRED";
        case ViolationCode::CorrectionUnexpected: return "CORRECTION_UNEXPECTED";
        case ViolationCode::AnswerNotInDocument: return "ANSWER_NOT_IN_DOCUMENT";
    }
    return "?";
}

std::vector<Violation> validate_submission(const AnnotationRecord& record, const AnnotationTask& task) {
    std::vector<Violation> v;
    auto add = [&](ViolationCode c, std::string field, std::string msg) {
        v.push_back({c, std::move(field), std::move(msg)});
    };
    if (record.task_id != task.pair_id) {
        add(ViolationCode::TaskMismatch, "task_id", "record targets " + record.task_id + ", not " + task.pair_id);
    }
    const QuestionJudgement& q = record.question;
    if (!q.suitable) {
        if (!q.unsuitable_reason) {
            add(ViolationCode::ReasonRequired, "question.unsuitable_reason", "unsuitable questions need a reason");
        }
        if (q.reads_naturally || q.rewritten_question || record.answer) {
            add(ViolationCode::UnsuitableLabelledFurther, "question",
                "unsuitable questions are not labelled further");
        }
        return v;
    }

    if (q.unsuitable_reason) {
        add(ViolationCode::ReasonWithoutUnsuitable, "question.unsuitable_reason",
            "a reason is only given for unsuitable questions");
    }
    if (!q.reads_naturally) {
        add(ViolationCode::QuestionNaturalnessRequired, "question.reads_naturally",
            "say whether the question reads naturally");
    } else if (!*q.reads_naturally && blank(q.rewritten_question)) {
        add(ViolationCode::QuestionRewriteRequired, "question.rewritten_question", "rewrite required");
    } else if (*q.reads_naturally && q.rewritten_question) {
        add(ViolationCode::QuestionRewriteUnexpected, "question.rewritten_question",
            "natural questions are not rewritten");
    }

    if (!record.answer) {
        add(ViolationCode::AnswerJudgementRequired, "answer", "suitable questions need an answer judgement");
        return v;
    }
    const AnswerJudgement& a = *record.answer;
    if (!a.reads_naturally && blank(a.rewritten_answer)) {
        add(ViolationCode::AnswerRewriteRequired, "answer.rewritten_answer", "answer rewrite required");
    } else if (a.reads_naturally && a.rewritten_answer) {
        add(ViolationCode::AnswerRewriteUnexpected, "answer.rewritten_answer", "natural answers are not rewritten");
    }
    if (needs_correction(a.quality) && blank(a.corrected_answer)) {
        add(ViolationCode::CorrectionRequired, "answer.corrected_answer",
            "a corrected answer is required for " + std::string(quality_name(a.quality)) + " answers");
    } else if (!needs_correction(a.quality) && a.corrected_answer) {
        add(ViolationCode::CorrectionUnexpected, "answer.corrected_answer",
            "precise and correct answers are not corrected");
    }
    for (const auto* text : {&a.rewritten_answer, &a.corrected_answer}) {
        if (!blank(*text) && task.context.find(**text) == std::string::npos) {
            add(ViolationCode::AnswerNotInDocument,
                text == &a.rewritten_answer ? "answer.rewritten_answer" : "answer.corrected_answer",
                "answer must appear within the document");
        }
    }
    return v;
}

// ---------------------------------------------------------------------------

std::optional<std::size_t> Assignment::group_of_annotator(std::string_view annotator) const {
    for (std::size_t g = 0; g < groups.size(); ++g) {
        if (std::find(groups[g].begin(), groups[g].end(), annotator) != groups[g].end()) return g;
    }
    return std::nullopt;
}

std::vector<std::size_t> Assignment::tasks_for_annotator(std::string_view annotator, std::size_t task_count) const {
    std::vector<std::size_t> out;
    const auto g = group_of_annotator(annotator);
    if (!g) return out;
    for (std::size_t s = 0; s < group_of_slice.size(); ++s) {
        if (group_of_slice[s] != *g) continue;
        const std::size_t end = std::min(task_count, (s + 1) * slice_size);
        for (std::size_t t = s * slice_size; t < end; ++t) out.push_back(t);
    }
    return out;
}

Assignment assign_groups(std::size_t task_count, const std::vector<std::string>& annotators, std::size_t group_size,
                         double slice_fraction, std::uint64_t seed) {
    if (group_size == 0) throw PreconditionError("group size must be positive");
    if (annotators.size() < group_size) {
        throw PreconditionError("need at least " + std::to_string(group_size) + " annotators, got " +
                                std::to_string(annotators.size()));
    }
    if (annotators.size() % group_size != 0) {
        throw PreconditionError(std::to_string(annotators.size()) + " annotators do not divide into groups of " +
                                std::to_string(group_size));
    }
    if (!(slice_fraction > 0.0 && slice_fraction <= 1.0)) throw PreconditionError("slice fraction must lie in (0, 1]");
    if (std::set<std::string>(annotators.begin(), annotators.end()).size() != annotators.size()) {
        throw PreconditionError("annotator ids must be distinct");
    }

    std::vector<std::string> shuffled = annotators;
    std::sort(shuffled.begin(), shuffled.end());
    PortableRng rng(seed);
    rng.shuffle(shuffled);

    Assignment a;
    for (std::size_t i = 0; i < shuffled.size(); i += group_size) {
        a.groups.emplace_back(shuffled.begin() + static_cast<std::ptrdiff_t>(i),
                              shuffled.begin() + static_cast<std::ptrdiff_t>(i + group_size));
    }
    a.slice_size = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(slice_fraction * task_count)));
    const std::size_t slices = (task_count + a.slice_size - 1) / a.slice_size;
    for (std::size_t s = 0; s < slices; ++s) a.group_of_slice.push_back(s % a.groups.size());
    return a;
}

// ---------------------------------------------------------------------------

GoldLabel majority_vote(const std::vector<AnnotationRecord>& input) {
    if (input.size() < 3) throw PreconditionError("a gold label needs at least 3 annotations");
    std::vector<AnnotationRecord> records = input;
    std::sort(records.begin(), records.end(),
              [](const AnnotationRecord& a, const AnnotationRecord& b) { return a.annotator_id < b.annotator_id; });
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (records[i].task_id != records[0].task_id) throw PreconditionError("records span several tasks");
        if (i > 0 && records[i].annotator_id == records[i - 1].annotator_id) {
            throw PreconditionError("duplicate annotator " + records[i].annotator_id);
        }
    }

    GoldLabel g;
    g.task_id = records[0].task_id;
    auto unresolved = [&] { g.resolution = Resolution::Unresolved; };

    std::vector<bool> suitability;
    for (const auto& r : records) {
        suitability.push_back(r.question.suitable);
        ++g.vote_counts[r.question.suitable ? "suitable" : "unsuitable"];
    }
    const auto suitable = strict_majority(suitability);
    if (!suitable) {
        unresolved();
        return g;
    }
    g.suitable = *suitable;

    if (!g.suitable) {
        std::vector<int> reasons;
        for (const auto& r : records) {
            if (r.question.suitable || !r.question.unsuitable_reason) continue;
            reasons.push_back(static_cast<int>(*r.question.unsuitable_reason));
            ++g.vote_counts["reason:" + std::string(reason_name(*r.question.unsuitable_reason))];
        }
        // A split on the reason leaves the gold unsuitable without a reason.
        if (const auto reason = strict_majority(reasons)) g.unsuitable_reason = static_cast<UnsuitableReason>(*reason);
        return g;
    }

    // Only annotators who found the question suitable judged anything further.
    std::vector<const AnnotationRecord*> electorate;
    for (const auto& r : records) {
        if (r.question.suitable && r.question.reads_naturally && r.answer) electorate.push_back(&r);
    }

    std::vector<bool> q_natural, a_natural;
    std::vector<int> quality;
    for (const auto* r : electorate) {
        q_natural.push_back(*r->question.reads_naturally);
        a_natural.push_back(r->answer->reads_naturally);
        quality.push_back(static_cast<int>(r->answer->quality));
        ++g.vote_counts[*r->question.reads_naturally ? "question_natural" : "question_unnatural"];
        ++g.vote_counts[r->answer->reads_naturally ? "answer_natural" : "answer_unnatural"];
        ++g.vote_counts["quality:" + std::string(quality_name(r->answer->quality))];
    }
    g.question_natural = strict_majority(q_natural);
    g.answer_natural = strict_majority(a_natural);
    if (const auto q = strict_majority(quality)) g.quality = static_cast<AnswerQuality>(*q);
    if (!g.question_natural || !g.answer_natural || !g.quality) unresolved();

    // Electorate is in ascending annotator order, so the first hit is the smallest id.
    for (const auto* r : electorate) {
        if (g.question_natural == false && !g.question_rewrite && !*r->question.reads_naturally) {
            g.question_rewrite = r->question.rewritten_question;
        }
        if (g.answer_natural == false && !g.answer_rewrite && !r->answer->reads_naturally) {
            g.answer_rewrite = r->answer->rewritten_answer;
        }
        if (g.quality && needs_correction(*g.quality) && !g.corrected_answer && r->answer->quality == *g.quality) {
            g.corrected_answer = r->answer->corrected_answer;
        }
    }
    return g;
}

// ---------------------------------------------------------------------------

namespace {

std::unordered_map<std::string, const AnnotationTask*> index_tasks(const std::vector<AnnotationTask>& tasks) {
    std::unordered_map<std::string, const AnnotationTask*> out;
    for (const auto& t : tasks) out.emplace(t.pair_id, &t);
    return out;
}

const AnnotationTask& task_for(const std::unordered_map<std::string, const AnnotationTask*>& index,
                               const std::string& id) {
    auto it = index.find(id);
    if (it == index.end()) throw DataError("gold label for unknown task " + id);
    return *it->second;
}

}  // namespace

std::string gold_answer_text(const GoldLabel& gold, const AnnotationTask& task) {
    if (gold.quality && needs_correction(*gold.quality) && gold.corrected_answer) return *gold.corrected_answer;
    if (gold.answer_natural == false && gold.answer_rewrite) return *gold.answer_rewrite;
    return task.answer_text;
}

std::string gold_question_text(const GoldLabel& gold, const AnnotationTask& task) {
    if (gold.suitable && gold.question_natural == false && gold.question_rewrite) return *gold.question_rewrite;
    return task.question;
}

std::vector<GrammaticalityRow> export_grammaticality_dataset(const std::vector<GoldLabel>& golds,
                                                             const std::vector<AnnotationTask>& tasks) {
    const auto index = index_tasks(tasks);
    std::vector<GrammaticalityRow> rows;
    for (const auto& g : golds) {
        if (g.resolution != Resolution::Majority || !g.suitable) continue;
        const AnnotationTask& t = task_for(index, g.task_id);
        rows.push_back({t.question, *g.question_natural});
        rows.push_back({t.answer_text, *g.answer_natural});
        if (!*g.question_natural && g.question_rewrite) rows.push_back({*g.question_rewrite, true});
        if (!*g.answer_natural && g.answer_rewrite) rows.push_back({*g.answer_rewrite, true});
    }
    return rows;
}

std::string grammaticality_tsv(const std::vector<GrammaticalityRow>& rows) {
    std::string out = "text\tlabel\n";
    for (const auto& r : rows) {
        std::string text = r.text;
        std::replace_if(text.begin(), text.end(), [](char c) { return c == '\t' || c == '\n' || c == '\r'; }, ' ');
        out += text;
        out += r.grammatical ? "\tgrammatical\n" : "\tungrammatical\n";
    }
    return out;
}

QaExport export_qa_dataset(const std::vector<GoldLabel>& golds, const std::vector<AnnotationTask>& tasks) {
    std::unordered_map<std::string, const GoldLabel*> by_task;
    for (const auto& g : golds) by_task.emplace(g.task_id, &g);
    const auto index = index_tasks(tasks);
    for (const auto& g : golds) task_for(index, g.task_id);

    QaExport out;
    for (const auto& t : tasks) {
        auto it = by_task.find(t.pair_id);
        if (it == by_task.end()) continue;
        const GoldLabel& g = *it->second;
        if (g.resolution != Resolution::Majority) {
            ++out.unresolved_excluded;
            continue;
        }
        QaItem q;
        q.id = t.pair_id;
        q.question = gold_question_text(g, t);
        q.is_impossible = !g.suitable;
        if (g.suitable) {
            const std::string answer = gold_answer_text(g, t);
            std::size_t start = t.answer_start;
            if (start > t.context.size() || t.context.compare(start, answer.size(), answer) != 0) {
                start = t.context.find(answer);
                if (answer.empty() || start == std::string::npos) {
                    throw DataError("gold answer for " + t.pair_id + " does not appear in its context");
                }
            }
            q.answers.push_back(SquadAnswer{answer, start, json::object()});
        }

        const std::string title = t.pair_id.substr(0, t.pair_id.find(':'));
        auto& articles = out.dataset.articles;
        if (articles.empty() || articles.back().title != title || articles.back().paragraphs.back().context != t.context) {
            Article a;
            a.title = title;
            a.paragraphs.push_back(Paragraph{t.context, {}, json::object()});
            articles.push_back(std::move(a));
        }
        articles.back().paragraphs.back().qas.push_back(std::move(q));
    }
    return out;
}

AnnotationStats annotation_stats(const std::vector<GoldLabel>& golds) {
    AnnotationStats s;
    std::size_t q_nat = 0, a_nat = 0, precise = 0, adequate = 0, incorrect = 0, edits = 0;
    for (const auto& g : golds) {
        if (g.resolution != Resolution::Majority) continue;
        ++s.n;
        if (!g.suitable) {
            ++edits;
            continue;
        }
        ++s.n_suitable;
        q_nat += *g.question_natural;
        a_nat += *g.answer_natural;
        precise += *g.quality == AnswerQuality::PreciseCorrect;
        adequate += *g.quality == AnswerQuality::Adequate;
        incorrect += *g.quality == AnswerQuality::Incorrect;
        edits += !*g.question_natural || !*g.answer_natural || *g.quality == AnswerQuality::Incorrect;
    }
    auto pct = [](std::size_t a, std::size_t b) { return b == 0 ? 0.0 : 100.0 * static_cast<double>(a) / static_cast<double>(b); };
    s.suitable_pct = pct(s.n_suitable, s.n);
    s.natural_question_pct = pct(q_nat, s.n_suitable);
    s.natural_answer_pct = pct(a_nat, s.n_suitable);
    s.precise_pct = pct(precise, s.n_suitable);
    s.adequate_pct = pct(adequate, s.n_suitable);
    s.incorrect_pct = pct(incorrect, s.n_suitable);
    s.suitable_and_correct_pct = pct(precise + adequate, s.n);
    s.needing_any_edit_pct = pct(edits, s.n);
    return s;
}

// ---------------------------------------------------------------------------

void to_json(json& j, const AnnotationTask& t) {
    j = json{{"pair_id", t.pair_id}, {"context", t.context},
             {"question", t.question}, {"answer_text", t.answer_text},
             {"answer_start", utf8::char_offset(t.context, t.answer_start)}};
}

void from_json(const json& j, AnnotationTask& t) {
    j.at("pair_id").get_to(t.pair_id);
    j.at("context").get_to(t.context);
    j.at("question").get_to(t.question);
    j.at("answer_text").get_to(t.answer_text);
    const auto chars = j.at("answer_start").get<std::size_t>();
    const auto bytes = utf8::byte_offset(t.context, chars);
    if (!bytes) throw DataError("task " + t.pair_id + ": answer_start " + std::to_string(chars) + " is past the context");
    t.answer_start = *bytes;
}

void to_json(json& j, const AnnotationRecord& r) {
    json q;
    q["suitable"] = r.question.suitable;
    q["unsuitable_reason"] = r.question.unsuitable_reason ? json(reason_name(*r.question.unsuitable_reason)) : json(nullptr);
    put_optional(q, "reads_naturally", r.question.reads_naturally);
    put_optional(q, "rewritten_question", r.question.rewritten_question);
    json a = nullptr;
    if (r.answer) {
        a = json::object();
        a["reads_naturally"] = r.answer->reads_naturally;
        put_optional(a, "rewritten_answer", r.answer->rewritten_answer);
        a["quality"] = quality_name(r.answer->quality);
        put_optional(a, "corrected_answer", r.answer->corrected_answer);
    }
    j = json{{"task_id", r.task_id}, {"annotator_id", r.annotator_id}, {"question", q}, {"answer", a},
             {"timestamp", r.timestamp}};
}

void from_json(const json& j, AnnotationRecord& r) {
    r = AnnotationRecord{};
    j.at("task_id").get_to(r.task_id);
    if (j.contains("annotator_id")) j.at("annotator_id").get_to(r.annotator_id);
    if (j.contains("timestamp") && !j.at("timestamp").is_null()) j.at("timestamp").get_to(r.timestamp);
    const json& q = j.at("question");
    q.at("suitable").get_to(r.question.suitable);
    if (auto reason = get_optional<std::string>(q, "unsuitable_reason")) r.question.unsuitable_reason = reason_from(*reason);
    r.question.reads_naturally = get_optional<bool>(q, "reads_naturally");
    r.question.rewritten_question = get_optional<std::string>(q, "rewritten_question");
    auto it = j.find("answer");
    if (it != j.end() && !it->is_null()) {
        AnswerJudgement a;
        it->at("reads_naturally").get_to(a.reads_naturally);
        a.rewritten_answer = get_optional<std::string>(*it, "rewritten_answer");
        a.quality = quality_from(it->at("quality").get<std::string>());
        a.corrected_answer = get_optional<std::string>(*it, "corrected_answer");
        r.answer = std::move(a);
    }
}

void to_json(json& j, const GoldLabel& g) {
    j = json::object();
    j["task_id"] = g.task_id;
    j["resolution"] = g.resolution == Resolution::Majority ? "MAJORITY" : "UNRESOLVED";
    j["suitable"] = g.suitable;
    j["unsuitable_reason"] = g.unsuitable_reason ? json(reason_name(*g.unsuitable_reason)) : json(nullptr);
    put_optional(j, "question_natural", g.question_natural);
    put_optional(j, "answer_natural", g.answer_natural);
    j["quality"] = g.quality ? json(quality_name(*g.quality)) : json(nullptr);
    put_optional(j, "question_rewrite", g.question_rewrite);
    put_optional(j, "answer_rewrite", g.answer_rewrite);
    put_optional(j, "corrected_answer", g.corrected_answer);
    j["vote_counts"] = g.vote_counts;
}

void from_json(const json& j, GoldLabel& g) {
    g = GoldLabel{};
    j.at("task_id").get_to(g.task_id);
    const auto res = j.at("resolution").get<std::string>();
    if (res != "MAJORITY" && res != "UNRESOLVED") throw DataError("unknown resolution: " + res);
    g.resolution = res == "MAJORITY" ? Resolution::Majority : Resolution::Unresolved;
    j.at("suitable").get_to(g.suitable);
    if (auto reason = get_optional<std::string>(j, "unsuitable_reason")) g.unsuitable_reason = reason_from(*reason);
    g.question_natural = get_optional<bool>(j, "question_natural");
    g.answer_natural = get_optional<bool>(j, "answer_natural");
    if (auto q = get_optional<std::string>(j, "quality")) g.quality = quality_from(*q);
    g.question_rewrite = get_optional<std::string>(j, "question_rewrite");
    g.answer_rewrite = get_optional<std::string>(j, "answer_rewrite");
    g.corrected_answer = get_optional<std::string>(j, "corrected_answer");
    if (j.contains("vote_counts")) j.at("vote_counts").get_to(g.vote_counts);
}

void to_json(json& j, const Violation& v) {
    j = json{{"code", to_string(v.code)}, {"field", v.field}, {"message", v.message}};
}

json to_json(const AnnotationStats& s) {
    return {{"n", s.n},
            {"n_suitable", s.n_suitable},
            {"suitable_pct", s.suitable_pct},
            {"natural_question_pct", s.natural_question_pct},
            {"natural_answer_pct", s.natural_answer_pct},
            {"precise_pct", s.precise_pct},
            {"adequate_pct", s.adequate_pct},
            {"incorrect_pct", s.incorrect_pct},
            {"suitable_and_correct_pct", s.suitable_and_correct_pct},
            {"needing_any_edit_pct", s.needing_any_edit_pct}};
}

std::vector<AnnotationTask> tasks_from_dataset(const SquadDataset& d) {
    std::vector<AnnotationTask> out;
    d.for_each_qa([&](const Paragraph& p, const QaItem& q) {
        if (q.is_impossible || q.answers.empty()) return;
        out.push_back({q.id, p.context, q.question, q.answers.front().text, q.answers.front().answer_start});
    });
    return out;
}

}  // namespace qaforge::annotation

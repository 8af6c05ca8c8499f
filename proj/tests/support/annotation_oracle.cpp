#include "annotation_oracle.hpp"

#include <algorithm>
#include <map>
#include <optional>

namespace oracle {

using namespace qaforge::annotation;

namespace {

bool has_text(const std::optional<std::string>& s) {
    return s && s->find_first_not_of(" \t\r\n\f\v") != std::string::npos;
}

const std::vector<std::optional<std::string>>& texts(const AnnotationTask& task) {
    static std::vector<std::optional<std::string>> v;
    v = {std::nullopt, std::string(""), std::string("  "), task.answer_text, std::string("pizza")};
    return v;
}

// Strict majority of `votes`, or nullopt.
template <typename T>
std::optional<T> winner(const std::vector<T>& votes) {
    std::map<T, std::size_t> n;
    for (const auto& v : votes) ++n[v];
    for (const auto& [value, count] : n) {
        if (2 * count > votes.size()) return value;
    }
    return std::nullopt;
}

}  // namespace

std::vector<AnnotationRecord> all_judgement_combinations(const AnnotationTask& task) {
    std::vector<AnnotationRecord> out;
    const auto ts = texts(task);
    for (const std::string& task_id : {task.pair_id, std::string("other-task")}) {
        for (bool suitable : {true, false}) {
            for (int reason = 0; reason < 3; ++reason) {
                for (int natural = 0; natural < 3; ++natural) {
                    for (const auto& qrw : ts) {
                        AnnotationRecord base;
                        base.task_id = task_id;
                        base.annotator_id = "ann";
                        base.question.suitable = suitable;
                        if (reason > 0) base.question.unsuitable_reason = static_cast<UnsuitableReason>(reason - 1);
                        if (natural > 0) base.question.reads_naturally = natural == 1;
                        base.question.rewritten_question = qrw;
                        out.push_back(base);
                        for (bool anat : {true, false}) {
                            for (const auto& arw : ts) {
                                for (auto quality :
                                     {AnswerQuality::PreciseCorrect, AnswerQuality::Adequate, AnswerQuality::Incorrect}) {
                                    for (const auto& corr : ts) {
                                        AnnotationRecord r = base;
                                        r.answer = AnswerJudgement{anat, arw, quality, corr};
                                        out.push_back(r);
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    return out;
}

std::vector<ViolationCode> expected_violations(const AnnotationRecord& r, const AnnotationTask& task) {
    std::vector<ViolationCode> v;
    const auto& q = r.question;
    if (r.task_id != task.pair_id) v.push_back(ViolationCode::TaskMismatch);

    if (!q.suitable) {
        // Short-circuit: a reason, and nothing else.
        if (!q.unsuitable_reason.has_value()) v.push_back(ViolationCode::ReasonRequired);
        const bool labelled_further = q.reads_naturally.has_value() || q.rewritten_question.has_value() || r.answer.has_value();
        if (labelled_further) v.push_back(ViolationCode::UnsuitableLabelledFurther);
    } else {
        if (q.unsuitable_reason.has_value()) v.push_back(ViolationCode::ReasonWithoutUnsuitable);
        if (!q.reads_naturally.has_value()) {
            v.push_back(ViolationCode::QuestionNaturalnessRequired);
        } else if (*q.reads_naturally) {
            if (q.rewritten_question.has_value()) v.push_back(ViolationCode::QuestionRewriteUnexpected);
        } else if (!has_text(q.rewritten_question)) {
            v.push_back(ViolationCode::QuestionRewriteRequired);
        }

        if (!r.answer.has_value()) {
            v.push_back(ViolationCode::AnswerJudgementRequired);
        } else {
            const auto& a = *r.answer;
            if (a.reads_naturally && a.rewritten_answer.has_value()) v.push_back(ViolationCode::AnswerRewriteUnexpected);
            if (!a.reads_naturally && !has_text(a.rewritten_answer)) v.push_back(ViolationCode::AnswerRewriteRequired);
            const bool precise = a.quality == AnswerQuality::PreciseCorrect;
            if (precise && a.corrected_answer.has_value()) v.push_back(ViolationCode::CorrectionUnexpected);
            if (!precise && !has_text(a.corrected_answer)) v.push_back(ViolationCode::CorrectionRequired);
            for (const auto& t : {a.rewritten_answer, a.corrected_answer}) {
                if (has_text(t) && task.context.find(*t) == std::string::npos) {
                    v.push_back(ViolationCode::AnswerNotInDocument);
                }
            }
        }
    }
    std::sort(v.begin(), v.end());
    return v;
}

std::vector<AnnotationRecord> vote_templates(const std::string& task_id, const std::string& annotator_id) {
    std::vector<AnnotationRecord> out;
    for (auto reason : {UnsuitableReason::NotAnswerable, UnsuitableReason::NotRelevant}) {
        AnnotationRecord r;
        r.task_id = task_id;
        r.annotator_id = annotator_id;
        r.question.suitable = false;
        r.question.unsuitable_reason = reason;
        out.push_back(r);
    }
    for (bool qnat : {true, false}) {
        for (bool anat : {true, false}) {
            for (auto quality : {AnswerQuality::PreciseCorrect, AnswerQuality::Adequate, AnswerQuality::Incorrect}) {
                AnnotationRecord r;
                r.task_id = task_id;
                r.annotator_id = annotator_id;
                r.question.suitable = true;
                r.question.reads_naturally = qnat;
                if (!qnat) r.question.rewritten_question = "question by " + annotator_id;
                AnswerJudgement a;
                a.reads_naturally = anat;
                if (!anat) a.rewritten_answer = "answer by " + annotator_id;
                a.quality = quality;
                if (quality != AnswerQuality::PreciseCorrect) a.corrected_answer = "correction by " + annotator_id;
                r.answer = a;
                out.push_back(r);
            }
        }
    }
    return out;
}

GoldLabel expected_gold(const std::vector<AnnotationRecord>& input) {
    auto records = input;
    std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) { return a.annotator_id < b.annotator_id; });
    GoldLabel g;
    g.task_id = records.front().task_id;

    std::vector<int> suitability;
    for (const auto& r : records) {
        suitability.push_back(r.question.suitable ? 1 : 0);
        g.vote_counts[r.question.suitable ? "suitable" : "unsuitable"] += 1;
    }
    const auto suitable = winner(suitability);
    if (!suitable) {
        g.resolution = Resolution::Unresolved;
        return g;
    }
    g.suitable = *suitable == 1;
    if (!g.suitable) {
        std::vector<std::string> reasons;
        for (const auto& r : records) {
            if (r.question.suitable || !r.question.unsuitable_reason) continue;
            const std::string name =
                *r.question.unsuitable_reason == UnsuitableReason::NotAnswerable ? "NOT_ANSWERABLE" : "NOT_RELEVANT";
            reasons.push_back(name);
            g.vote_counts["reason:" + name] += 1;
        }
        if (auto w = winner(reasons)) {
            g.unsuitable_reason = *w == "NOT_ANSWERABLE" ? UnsuitableReason::NotAnswerable : UnsuitableReason::NotRelevant;
        }
        return g;
    }

    std::vector<const AnnotationRecord*> voters;
    for (const auto& r : records)
        if (r.question.suitable) voters.push_back(&r);
    std::vector<int> qn, an, ql;
    static const char* quality_names[] = {"PRECISE_CORRECT", "ADEQUATE", "INCORRECT"};
    for (const auto* r : voters) {
        qn.push_back(*r->question.reads_naturally);
        an.push_back(r->answer->reads_naturally);
        ql.push_back(static_cast<int>(r->answer->quality));
        g.vote_counts[*r->question.reads_naturally ? "question_natural" : "question_unnatural"] += 1;
        g.vote_counts[r->answer->reads_naturally ? "answer_natural" : "answer_unnatural"] += 1;
        g.vote_counts[std::string("quality:") + quality_names[static_cast<int>(r->answer->quality)]] += 1;
    }
    if (auto w = winner(qn)) g.question_natural = *w == 1;
    if (auto w = winner(an)) g.answer_natural = *w == 1;
    if (auto w = winner(ql)) g.quality = static_cast<AnswerQuality>(*w);
    if (!g.question_natural || !g.answer_natural || !g.quality) g.resolution = Resolution::Unresolved;

    auto first = [&](auto pred) -> const AnnotationRecord* {
        for (const auto* r : voters)
            if (pred(*r)) return r;
        return nullptr;
    };
    if (g.question_natural == false) {
        g.question_rewrite = first([](const AnnotationRecord& r) { return !*r.question.reads_naturally; })
                                 ->question.rewritten_question;
    }
    if (g.answer_natural == false) {
        g.answer_rewrite = first([](const AnnotationRecord& r) { return !r.answer->reads_naturally; })->answer->rewritten_answer;
    }
    if (g.quality && *g.quality != AnswerQuality::PreciseCorrect) {
        const auto q = *g.quality;
        g.corrected_answer = first([&](const AnnotationRecord& r) { return r.answer->quality == q; })->answer->corrected_answer;
    }
    return g;
}

}  // namespace oracle

#include "qaforge/rng.hpp"

namespace oracle {

AnnotatedFixture annotated_fixture(std::size_t n, std::size_t unsuitable, std::size_t question_rewrites,
                                   std::uint64_t seed) {
    using qaforge::annotation::majority_vote;
    std::vector<std::size_t> kind(n, 0);
    for (std::size_t i = 0; i < n; ++i) kind[i] = i < unsuitable ? 1 : (i < unsuitable + question_rewrites ? 2 : 0);
    qaforge::PortableRng rng(seed);
    rng.shuffle(kind);

    AnnotatedFixture f;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t doc = i / 7;
        AnnotationTask t;
        t.pair_id = "doc" + std::to_string(doc) + ":s0:c" + std::to_string(i % 7);
        t.context = "Company " + std::to_string(doc) + " reported revenue of " + std::to_string(i) + " million.";
        t.question = "What revenue did company " + std::to_string(doc) + " report?";
        t.answer_text = std::to_string(i) + " million";
        t.answer_start = t.context.find(t.answer_text);
        std::vector<AnnotationRecord> rs;
        for (const std::string ann : {"ann-a", "ann-b", "ann-c"}) {
            AnnotationRecord r;
            r.task_id = t.pair_id;
            r.annotator_id = ann;
            const bool dissent = ann == "ann-c";
            if (kind[i] == 1 && !dissent) {
                r.question.suitable = false;
                r.question.unsuitable_reason = UnsuitableReason::NotRelevant;
            } else {
                r.question.suitable = true;
                r.question.reads_naturally = !(kind[i] == 2 && !dissent);
                if (!*r.question.reads_naturally) r.question.rewritten_question = "Rewritten by " + ann + "?";
                r.answer = AnswerJudgement{true, std::nullopt, AnswerQuality::PreciseCorrect, std::nullopt};
            }
            rs.push_back(r);
        }
        f.golds.push_back(majority_vote(rs));
        f.records.push_back(std::move(rs));
        f.tasks.push_back(std::move(t));
    }
    return f;
}

}  // namespace oracle

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "qaforge/squad.hpp"

namespace qaforge::annotation {

struct AnnotationTask {
    std::string pair_id;
    std::string context;
    std::string question;
    std::string answer_text;
    std::size_t answer_start = 0;  // byte offset; code points in JSON
    bool operator==(const AnnotationTask&) const = default;
};

enum class UnsuitableReason { NotAnswerable, NotRelevant };
enum class AnswerQuality { PreciseCorrect, Adequate, Incorrect };

struct QuestionJudgement {
    bool suitable = true;
    std::optional<UnsuitableReason> unsuitable_reason;
    std::optional<bool> reads_naturally;
    std::optional<std::string> rewritten_question;
    bool operator==(const QuestionJudgement&) const = default;
};

struct AnswerJudgement {
    bool reads_naturally = true;
    std::optional<std::string> rewritten_answer;
    AnswerQuality quality = AnswerQuality::PreciseCorrect;
    std::optional<std::string> corrected_answer;
    bool operator==(const AnswerJudgement&) const = default;
};

struct AnnotationRecord {
    std::string task_id;
    std::string annotator_id;
    QuestionJudgement question;
    std::optional<AnswerJudgement> answer;  // absent iff the question is unsuitable
    std::string timestamp;
    bool operator==(const AnnotationRecord&) const = default;
};

enum class ViolationCode {
    TaskMismatch,
    ReasonRequired,
    UnsuitableLabelledFurther,
    ReasonWithoutUnsuitable,
    QuestionNaturalnessRequired,
    QuestionRewriteRequired,
    QuestionRewriteUnexpected,
    AnswerJudgementRequired,
    AnswerRewriteRequired,
    AnswerRewriteUnexpected,
    CorrectionRequired,
    CorrectionUnexpected,
    AnswerNotInDocument,
};

struct Violation {
    ViolationCode code;
    std::string field;
    std::string message;
    bool operator==(const Violation&) const = default;
};

std::string_view to_string(ViolationCode c);

// Empty result means the record may be submitted.
std::vector<Violation> validate_submission(const AnnotationRecord& record, const AnnotationTask& task);

// ---------------------------------------------------------------------------

struct Assignment {
    std::vector<std::vector<std::string>> groups;  // annotator ids per group
    std::size_t slice_size = 0;
    std::vector<std::size_t> group_of_slice;

    bool operator==(const Assignment&) const = default;
    std::size_t slice_count() const { return group_of_slice.size(); }
    std::size_t group_of_task(std::size_t task_index) const { return group_of_slice[task_index / slice_size]; }
    const std::vector<std::string>& annotators_for_task(std::size_t task_index) const {
        return groups[group_of_task(task_index)];
    }
    std::optional<std::size_t> group_of_annotator(std::string_view annotator) const;
    // Ascending task indices.
    std::vector<std::size_t> tasks_for_annotator(std::string_view annotator, std::size_t task_count) const;
};

// Annotators are shuffled into groups of group_size; tasks are cut into
// contiguous slices of round(slice_fraction * N) and slices are dealt to
// groups round-robin.
Assignment assign_groups(std::size_t task_count, const std::vector<std::string>& annotators,
                         std::size_t group_size = 3, double slice_fraction = 0.02, std::uint64_t seed = 0);

// ---------------------------------------------------------------------------

enum class Resolution { Majority, Unresolved };

struct GoldLabel {
    std::string task_id;
    Resolution resolution = Resolution::Majority;
    bool suitable = true;
    std::optional<UnsuitableReason> unsuitable_reason;
    std::optional<bool> question_natural;
    std::optional<bool> answer_natural;
    std::optional<AnswerQuality> quality;
    std::optional<std::string> question_rewrite;
    std::optional<std::string> answer_rewrite;
    std::optional<std::string> corrected_answer;
    std::map<std::string, std::size_t> vote_counts;
    bool operator==(const GoldLabel&) const = default;
};

// Strict majority per field among the annotators who judged that field; any
// tie marks the gold UNRESOLVED. Rewrite texts come from the majority-side
// annotator with the smallest id.
GoldLabel majority_vote(const std::vector<AnnotationRecord>& records);

struct GrammaticalityRow {
    std::string text;
    bool grammatical = true;
    bool operator==(const GrammaticalityRow&) const = default;
};

// tasks are looked up by pair_id.
std::vector<GrammaticalityRow> export_grammaticality_dataset(const std::vector<GoldLabel>& golds,
                                                             const std::vector<AnnotationTask>& tasks);
std::string grammaticality_tsv(const std::vector<GrammaticalityRow>& rows);

struct QaExport {
    SquadDataset dataset;
    std::size_t unresolved_excluded = 0;
};
QaExport export_qa_dataset(const std::vector<GoldLabel>& golds, const std::vector<AnnotationTask>& tasks);

// The gold answer text: correction, else rewrite, else the original answer.
std::string gold_answer_text(const GoldLabel& gold, const AnnotationTask& task);
std::string gold_question_text(const GoldLabel& gold, const AnnotationTask& task);

struct AnnotationStats {
    std::size_t n = 0;
    std::size_t n_suitable = 0;
    double suitable_pct = 0.0;
    // The following are over suitable tasks only.
    double natural_question_pct = 0.0;
    double natural_answer_pct = 0.0;
    double precise_pct = 0.0;
    double adequate_pct = 0.0;
    double incorrect_pct = 0.0;
    // Over all tasks.
    double suitable_and_correct_pct = 0.0;  // suitable with a precise or adequate answer
    double needing_any_edit_pct = 0.0;      // unsuitable, a rewrite, or an incorrect answer
};
// Computed over MAJORITY golds.
AnnotationStats annotation_stats(const std::vector<GoldLabel>& golds);

// ---------------------------------------------------------------------------
// JSON forms (JSON-lines for records and golds).

void to_json(nlohmann::json& j, const AnnotationTask& t);
void from_json(const nlohmann::json& j, AnnotationTask& t);
void to_json(nlohmann::json& j, const AnnotationRecord& r);
void from_json(const nlohmann::json& j, AnnotationRecord& r);
void to_json(nlohmann::json& j, const GoldLabel& g);
void from_json(const nlohmann::json& j, GoldLabel& g);
void to_json(nlohmann::json& j, const Violation& v);
nlohmann::json to_json(const AnnotationStats& s);

// Answerable qas of a (synthetic) SQuAD dataset become tasks, in file order.
std::vector<AnnotationTask> tasks_from_dataset(const SquadDataset& d);

}  // namespace qaforge::annotation

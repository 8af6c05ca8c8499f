#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "qaforge/annotation.hpp"
#include "qaforge/metrics.hpp"
#include "qaforge/rng.hpp"
#include "qaforge/squad.hpp"

namespace testutil {

std::filesystem::path source_path(const std::string& relative);
std::string read_text(const std::filesystem::path& p);

class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

struct QaSpec {
    std::string id;
    std::string question;
    std::vector<std::string> answers;  // each must occur in the context; empty = unanswerable
};

struct ParagraphSpec {
    std::string context;
    std::vector<QaSpec> qas;
};

// One article per paragraph, titled "a<index>".
qaforge::SquadDataset make_dataset(const std::vector<ParagraphSpec>& paragraphs);

// `contexts` distinct contexts with 1..max_questions questions each; roughly
// one in five unanswerable.
qaforge::SquadDataset random_dataset(qaforge::PortableRng& rng, std::size_t contexts, std::size_t max_questions);

// Record builders for annotation tests.
qaforge::annotation::AnnotationRecord unsuitable_record(
    const std::string& task, const std::string& annotator,
    qaforge::annotation::UnsuitableReason reason = qaforge::annotation::UnsuitableReason::NotAnswerable);

qaforge::annotation::AnnotationRecord suitable_record(
    const std::string& task, const std::string& annotator, bool question_natural = true, bool answer_natural = true,
    qaforge::annotation::AnswerQuality quality = qaforge::annotation::AnswerQuality::PreciseCorrect,
    std::string question_rewrite = "", std::string answer_rewrite = "", std::string correction = "");

}  // namespace testutil

namespace testutil {

// Deterministic 1009-question dataset, 1..9 questions per document.
qaforge::SquadDataset split_fixture();

std::set<std::string> contexts_of(const qaforge::SquadDataset& d);

}  // namespace testutil

namespace testutil {

// Randomised evaluation fixture: golds and predictions drawn from a small
// vocabulary with articles, punctuation, case and spacing noise. Roughly a
// third of the items are unanswerable.
struct EvalFixture {
    qaforge::SquadDataset dataset;
    qaforge::PredictionMap predictions;
};
EvalFixture eval_fixture(qaforge::PortableRng& rng, std::size_t items);

}  // namespace testutil

namespace testutil {

// Best overall F1 (0-100) over thresholds on a 1e-4 grid covering [-1.1, 1.1],
// scored with the reference evaluator.
double grid_best_f1(const EvalFixture& f);

}  // namespace testutil

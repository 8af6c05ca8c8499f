#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "qaforge/errors.hpp"
#include "qaforge/gateway.hpp"
#include "qaforge/squad.hpp"

namespace qaforge {

// Lowercase, strip ASCII punctuation, drop the articles a/an/the, collapse
// whitespace. Same order as the official SQuAD evaluation script.
std::string normalize_answer(std::string_view text);
std::vector<std::string> normalized_tokens(std::string_view text);

// Golds whose normalisation is empty are ignored; no remaining gold means
// the question is unanswerable and only an empty prediction scores.
double exact_match(std::string_view prediction, std::span<const std::string> golds);
double token_f1(std::string_view prediction, std::span<const std::string> golds);

struct Prediction {
    std::string text;
    double null_score = 0.0;
};
using PredictionMap = std::map<std::string, Prediction, std::less<>>;

// File format: {"<qa id>": {"text": str, "null_score": float}}; a bare string
// value is accepted with null_score 0.
PredictionMap parse_predictions(const nlohmann::json& j);
PredictionMap read_predictions(const std::filesystem::path& path);

class MissingPredictionsError : public DataError {
public:
    explicit MissingPredictionsError(std::vector<std::string> ids);
    const std::vector<std::string>& ids() const { return ids_; }

private:
    std::vector<std::string> ids_;
};

struct QaScore {
    double em = 0.0;  // all scores on a 0-100 scale
    double f1 = 0.0;
    double answerable_em = 0.0;
    double answerable_f1 = 0.0;
    double unanswerable_em = 0.0;
    double unanswerable_f1 = 0.0;
    std::size_t n_total = 0;
    std::size_t n_answerable = 0;
    std::size_t n_unanswerable = 0;
};

struct ItemScore {
    std::string id;
    bool answerable = true;
    double em = 0.0;  // 0 or 1
    double f1 = 0.0;  // [0, 1]
};

// A prediction with null_score > threshold counts as an abstention: full marks
// on unanswerable items, zero on answerable ones.
std::vector<ItemScore> score_items(const SquadDataset& dataset, const PredictionMap& predictions,
                                   std::optional<double> null_threshold = std::nullopt);
QaScore aggregate(std::span<const ItemScore> items);
QaScore evaluate_qa(const SquadDataset& dataset, const PredictionMap& predictions,
                    std::optional<double> null_threshold = std::nullopt);

nlohmann::json to_json(const QaScore& s);

// Unweighted mean of the two per-class F1 scores, on a 0-100 scale. A class
// with no gold and no predicted members scores 0.
double macro_f1(std::span<const int> gold, std::span<const int> predicted);

template <typename T>
std::size_t edit_distance(std::span<const T> a, std::span<const T> b) {
    std::vector<std::size_t> row(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        std::size_t diag = row[0];
        row[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t up = row[j];
            const std::size_t sub = diag + (a[i - 1] == b[j - 1] ? 0 : 1);
            row[j] = std::min({row[j] + 1, row[j - 1] + 1, sub});
            diag = up;
        }
    }
    return row[b.size()];
}

// 1 - distance / max(|a|, |b|); two empty sequences are identical.
double levenshtein_similarity(std::span<const std::string> a, std::span<const std::string> b);

struct RoundtripScore {
    double exact_match_pct = 0.0;
    double similarity_pct = 0.0;
    std::size_t n = 0;          // pairs scored
    std::size_t n_errors = 0;   // pairs excluded after gateway errors
    bool error_warning = false; // n_errors / (n + n_errors) above the warning threshold
};

// Asks the QA model each answerable question against its own context and
// compares the model's answer with the generated one.
RoundtripScore roundtrip_evaluate(const SquadDataset& dataset, const ModelGateway& gateway, std::size_t jobs = 1,
                                  double error_warning_share = 0.05);

nlohmann::json to_json(const RoundtripScore& s);

// (question, context) -> first gold answer of every answerable item; feeds the
// oracle-family QA stubs.
std::shared_ptr<const stubs::GoldTable> gold_table_from_dataset(const SquadDataset& dataset);

}  // namespace qaforge

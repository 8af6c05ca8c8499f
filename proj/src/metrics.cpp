#include "qaforge/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <unordered_map>

#include "qaforge/parallel.hpp"

namespace qaforge {

namespace {

constexpr std::string_view kPunctuation = R"(!"#$%&'()*+,-./:;<=>?@[\]^_`{|}~)";

bool is_word_byte(char c) {
    const auto u = static_cast<unsigned char>(c);
    return u >= 0x80 || std::isalnum(u) != 0;
}

bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::vector<std::string> usable_golds(std::span<const std::string> golds) {
    std::vector<std::string> out;
    for (const auto& g : golds) {
        if (!normalize_answer(g).empty()) out.push_back(g);
    }
    if (out.empty()) out.emplace_back();
    return out;
}

double f1_single(const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
    if (pred.empty() || gold.empty()) return pred == gold ? 1.0 : 0.0;
    std::unordered_map<std::string_view, long> counts;
    for (const auto& t : gold) ++counts[t];
    long same = 0;
    for (const auto& t : pred) {
        auto it = counts.find(t);
        if (it != counts.end() && it->second > 0) {
            --it->second;
            ++same;
        }
    }
    if (same == 0) return 0.0;
    const double precision = static_cast<double>(same) / static_cast<double>(pred.size());
    const double recall = static_cast<double>(same) / static_cast<double>(gold.size());
    return 2.0 * precision * recall / (precision + recall);
}

double mean_pct(double sum, std::size_t n) { return n == 0 ? 0.0 : 100.0 * sum / static_cast<double>(n); }

}  // namespace

std::string normalize_answer(std::string_view text) {
    std::string s;
    s.reserve(text.size());
    for (char c : text) {
        if (kPunctuation.find(c) != std::string_view::npos) continue;
        s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    // Articles are whole word runs, as with \b(a|an|the)\b.
    std::string no_articles;
    no_articles.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        if (!is_word_byte(s[i])) {
            no_articles.push_back(s[i++]);
            continue;
        }
        std::size_t j = i;
        while (j < s.size() && is_word_byte(s[j])) ++j;
        const std::string_view word(s.data() + i, j - i);
        if (word == "a" || word == "an" || word == "the") {
            no_articles.push_back(' ');
        } else {
            no_articles.append(word);
        }
        i = j;
    }
    std::string out;
    for (std::size_t k = 0; k < no_articles.size();) {
        while (k < no_articles.size() && is_space(no_articles[k])) ++k;
        std::size_t e = k;
        while (e < no_articles.size() && !is_space(no_articles[e])) ++e;
        if (e > k) {
            if (!out.empty()) out.push_back(' ');
            out.append(no_articles, k, e - k);
        }
        k = e;
    }
    return out;
}

std::vector<std::string> normalized_tokens(std::string_view text) {
    std::vector<std::string> tokens;
    const std::string norm = normalize_answer(text);
    std::size_t i = 0;
    while (i < norm.size()) {
        const std::size_t e = std::min(norm.find(' ', i), norm.size());
        tokens.push_back(norm.substr(i, e - i));
        i = e + 1;
    }
    return tokens;
}

double exact_match(std::string_view prediction, std::span<const std::string> golds) {
    const std::string pred = normalize_answer(prediction);
    double best = 0.0;
    for (const auto& g : usable_golds(golds)) best = std::max(best, normalize_answer(g) == pred ? 1.0 : 0.0);
    return best;
}

double token_f1(std::string_view prediction, std::span<const std::string> golds) {
    const auto pred = normalized_tokens(prediction);
    double best = 0.0;
    for (const auto& g : usable_golds(golds)) best = std::max(best, f1_single(pred, normalized_tokens(g)));
    return best;
}

PredictionMap parse_predictions(const nlohmann::json& j) {
    if (!j.is_object()) throw DataError("predictions must be a JSON object keyed by qa id");
    PredictionMap out;
    for (const auto& [id, v] : j.items()) {
        Prediction p;
        if (v.is_string()) {
            p.text = v.get<std::string>();
        } else if (v.is_object() && v.contains("text") && v["text"].is_string()) {
            p.text = v["text"].get<std::string>();
            if (v.contains("null_score")) {
                if (!v["null_score"].is_number()) throw DataError("prediction '" + id + "': null_score must be a number");
                p.null_score = v["null_score"].get<double>();
            }
        } else {
            throw DataError("prediction '" + id + "': expected a string or {\"text\", \"null_score\"}");
        }
        out.emplace(id, std::move(p));
    }
    return out;
}

PredictionMap read_predictions(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    return parse_predictions(j);
}

MissingPredictionsError::MissingPredictionsError(std::vector<std::string> ids)
    : DataError([&] {
          std::string msg = "missing predictions for " + std::to_string(ids.size()) + " qa id(s):";
          for (const auto& id : ids) msg += " " + id;
          return msg;
      }()),
      ids_(std::move(ids)) {}

std::vector<ItemScore> score_items(const SquadDataset& dataset, const PredictionMap& predictions,
                                   std::optional<double> null_threshold) {
    std::vector<std::string> missing;
    dataset.for_each_qa([&](const Paragraph&, const QaItem& q) {
        if (!predictions.contains(q.id)) missing.push_back(q.id);
    });
    if (!missing.empty()) throw MissingPredictionsError(std::move(missing));

    std::vector<ItemScore> items;
    dataset.for_each_qa([&](const Paragraph&, const QaItem& q) {
        const Prediction& p = predictions.find(q.id)->second;
        std::vector<std::string> golds;
        if (!q.is_impossible) {
            for (const auto& a : q.answers) golds.push_back(a.text);
        }
        const bool answerable = !q.is_impossible && !q.answers.empty();
        if (null_threshold && p.null_score > *null_threshold) {
            // Abstaining is right exactly when the question is unanswerable.
            const double score = answerable ? 0.0 : 1.0;
            items.push_back({q.id, answerable, score, score});
            return;
        }
        items.push_back({q.id, answerable, exact_match(p.text, golds), token_f1(p.text, golds)});
    });
    return items;
}

QaScore aggregate(std::span<const ItemScore> items) {
    QaScore s;
    double em = 0, f1 = 0, a_em = 0, a_f1 = 0, u_em = 0, u_f1 = 0;
    for (const auto& it : items) {
        em += it.em;
        f1 += it.f1;
        if (it.answerable) {
            ++s.n_answerable;
            a_em += it.em;
            a_f1 += it.f1;
        } else {
            ++s.n_unanswerable;
            u_em += it.em;
            u_f1 += it.f1;
        }
    }
    s.n_total = items.size();
    s.em = mean_pct(em, s.n_total);
    s.f1 = mean_pct(f1, s.n_total);
    s.answerable_em = mean_pct(a_em, s.n_answerable);
    s.answerable_f1 = mean_pct(a_f1, s.n_answerable);
    s.unanswerable_em = mean_pct(u_em, s.n_unanswerable);
    s.unanswerable_f1 = mean_pct(u_f1, s.n_unanswerable);
    return s;
}

QaScore evaluate_qa(const SquadDataset& dataset, const PredictionMap& predictions,
                    std::optional<double> null_threshold) {
    const auto items = score_items(dataset, predictions, null_threshold);
    return aggregate(items);
}

nlohmann::json to_json(const QaScore& s) {
    return {{"em", s.em},
            {"f1", s.f1},
            {"answerable_em", s.answerable_em},
            {"answerable_f1", s.answerable_f1},
            {"unanswerable_em", s.unanswerable_em},
            {"unanswerable_f1", s.unanswerable_f1},
            {"n_total", s.n_total},
            {"n_answerable", s.n_answerable},
            {"n_unanswerable", s.n_unanswerable}};
}

double macro_f1(std::span<const int> gold, std::span<const int> predicted) {
    if (gold.size() != predicted.size()) {
        throw PreconditionError("macro_f1: gold and predicted lengths differ (" + std::to_string(gold.size()) +
                                " vs " + std::to_string(predicted.size()) + ")");
    }
    double total = 0.0;
    for (int cls : {0, 1}) {
        std::size_t tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < gold.size(); ++i) {
            if ((gold[i] != 0 && gold[i] != 1) || (predicted[i] != 0 && predicted[i] != 1)) {
                throw PreconditionError("macro_f1: labels must be 0 or 1");
            }
            const bool g = gold[i] == cls;
            const bool p = predicted[i] == cls;
            tp += g && p;
            fp += !g && p;
            fn += g && !p;
        }
        if (tp > 0) total += 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
    }
    return 100.0 * total / 2.0;
}

double levenshtein_similarity(std::span<const std::string> a, std::span<const std::string> b) {
    const std::size_t longest = std::max(a.size(), b.size());
    if (longest == 0) return 1.0;
    return 1.0 - static_cast<double>(edit_distance(a, b)) / static_cast<double>(longest);
}

RoundtripScore roundtrip_evaluate(const SquadDataset& dataset, const ModelGateway& gateway, std::size_t jobs,
                                  double error_warning_share) {
    struct Pair {
        const std::string* question;
        const std::string* context;
        const std::string* answer;
    };
    std::vector<Pair> pairs;
    dataset.for_each_qa([&](const Paragraph& p, const QaItem& q) {
        if (!q.is_impossible && !q.answers.empty()) pairs.push_back({&q.question, &p.context, &q.answers.front().text});
    });

    struct Outcome {
        bool ok = false;
        double em = 0.0;
        double sim = 0.0;
    };
    std::vector<Outcome> outcomes(pairs.size());
    parallel_for(pairs.size(), jobs, [&](std::size_t i) {
        QaPrediction model;
        try {
            model = gateway.answer_question(*pairs[i].question, *pairs[i].context);
        } catch (const GatewayError&) {
            return;
        }
        const std::string gold[] = {*pairs[i].answer};
        const auto model_tokens = normalized_tokens(model.answer_text);
        const auto gold_tokens = normalized_tokens(*pairs[i].answer);
        outcomes[i] = {true, exact_match(model.answer_text, gold), levenshtein_similarity(model_tokens, gold_tokens)};
    });

    RoundtripScore s;
    double em = 0.0, sim = 0.0;
    for (const auto& o : outcomes) {
        if (!o.ok) {
            ++s.n_errors;
            continue;
        }
        ++s.n;
        em += o.em;
        sim += o.sim;
    }
    s.exact_match_pct = mean_pct(em, s.n);
    s.similarity_pct = mean_pct(sim, s.n);
    const std::size_t attempted = s.n + s.n_errors;
    s.error_warning = attempted > 0 &&
                      static_cast<double>(s.n_errors) / static_cast<double>(attempted) > error_warning_share;
    return s;
}

nlohmann::json to_json(const RoundtripScore& s) {
    return {{"exact_match_pct", s.exact_match_pct},
            {"similarity_pct", s.similarity_pct},
            {"n", s.n},
            {"n_errors", s.n_errors},
            {"error_warning", s.error_warning}};
}

std::shared_ptr<const stubs::GoldTable> gold_table_from_dataset(const SquadDataset& dataset) {
    auto table = std::make_shared<stubs::GoldTable>();
    dataset.for_each_qa([&](const Paragraph& p, const QaItem& q) {
        if (q.is_impossible || q.answers.empty()) return;
        table->add(q.question, p.context, q.answers.front().text, q.answers.front().answer_start);
    });
    return table;
}

}  // namespace qaforge

#include "test_util.hpp"

#include "squad_reference.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace testutil {

namespace fs = std::filesystem;
using namespace qaforge;

fs::path source_path(const std::string& relative) { return fs::path(QAFORGE_SOURCE_DIR) / relative; }

std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

TempDir::TempDir() {
    std::string tmpl = (fs::temp_directory_path() / "qaforge-test-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

SquadDataset make_dataset(const std::vector<ParagraphSpec>& paragraphs) {
    SquadDataset d;
    for (std::size_t i = 0; i < paragraphs.size(); ++i) {
        Article a;
        a.title = "a" + std::to_string(i);
        Paragraph p;
        p.context = paragraphs[i].context;
        for (const auto& spec : paragraphs[i].qas) {
            QaItem q;
            q.id = spec.id;
            q.question = spec.question;
            q.is_impossible = spec.answers.empty();
            for (const auto& ans : spec.answers) {
                const auto pos = p.context.find(ans);
                if (pos == std::string::npos) throw std::logic_error("answer not in context: " + ans);
                q.answers.push_back({ans, pos});
            }
            p.qas.push_back(std::move(q));
        }
        a.paragraphs.push_back(std::move(p));
        d.articles.push_back(std::move(a));
    }
    return d;
}

SquadDataset random_dataset(PortableRng& rng, std::size_t contexts, std::size_t max_questions) {
    static const char* words[] = {"alpha", "beta", "gamma", "delta", "epsilon", "zeta", "eta", "theta"};
    std::vector<ParagraphSpec> specs;
    for (std::size_t c = 0; c < contexts; ++c) {
        ParagraphSpec p;
        p.context = "Context " + std::to_string(c) + " mentions";
        for (int w = 0; w < 6; ++w) p.context += std::string(" ") + words[rng.below(8)];
        p.context += ".";
        const std::size_t n = 1 + rng.below(max_questions);
        for (std::size_t q = 0; q < n; ++q) {
            QaSpec s{"c" + std::to_string(c) + "q" + std::to_string(q), "Question " + std::to_string(q) + "?", {}};
            if (rng.below(5) != 0) s.answers.push_back("Context " + std::to_string(c));
            p.qas.push_back(std::move(s));
        }
        specs.push_back(std::move(p));
    }
    return make_dataset(specs);
}

annotation::AnnotationRecord unsuitable_record(const std::string& task, const std::string& annotator,
                                               annotation::UnsuitableReason reason) {
    annotation::AnnotationRecord r;
    r.task_id = task;
    r.annotator_id = annotator;
    r.question.suitable = false;
    r.question.unsuitable_reason = reason;
    return r;
}

annotation::AnnotationRecord suitable_record(const std::string& task, const std::string& annotator,
                                             bool question_natural, bool answer_natural,
                                             annotation::AnswerQuality quality, std::string question_rewrite,
                                             std::string answer_rewrite, std::string correction) {
    annotation::AnnotationRecord r;
    r.task_id = task;
    r.annotator_id = annotator;
    r.question.suitable = true;
    r.question.reads_naturally = question_natural;
    if (!question_rewrite.empty()) r.question.rewritten_question = question_rewrite;
    annotation::AnswerJudgement a;
    a.reads_naturally = answer_natural;
    if (!answer_rewrite.empty()) a.rewritten_answer = answer_rewrite;
    a.quality = quality;
    if (!correction.empty()) a.corrected_answer = correction;
    r.answer = a;
    return r;
}

}  // namespace testutil

namespace testutil {

SquadDataset split_fixture() {
    PortableRng rng(1009);
    std::vector<ParagraphSpec> specs;
    std::size_t total = 0;
    for (std::size_t c = 0; total < 1009; ++c) {
        ParagraphSpec p;
        p.context = "Document " + std::to_string(c) + " reports figures.";
        const std::size_t n = std::min<std::size_t>(1 + rng.below(9), 1009 - total);
        for (std::size_t q = 0; q < n; ++q) {
            QaSpec s{"d" + std::to_string(c) + "q" + std::to_string(q), "What does document " + std::to_string(c) + " do?",
                     {}};
            if (rng.below(3) != 0) s.answers.push_back("reports figures");
            p.qas.push_back(std::move(s));
        }
        total += n;
        specs.push_back(std::move(p));
    }
    return make_dataset(specs);
}

std::set<std::string> contexts_of(const SquadDataset& d) {
    std::set<std::string> out;
    d.for_each_qa([&](const Paragraph& p, const QaItem&) { out.insert(p.context); });
    return out;
}

}  // namespace testutil

namespace testutil {

namespace {

std::string noisy_phrase(PortableRng& rng, std::size_t max_words) {
    static const char* words[] = {"the", "a", "an", "Paris", "bank", "river", "1999", "Euro", "bank's", "co-op",
                                  "THE", "An", "profit", "year", "x", "Acme", "inc", "them", "another", "theory"};
    static const char* punct[] = {"", "", "", ",", ".", "!", "?", "\"", "'", "(", ")", "-", ":"};
    static const char* spaces[] = {" ", " ", " ", "  ", "\t", " \n "};
    std::string out;
    const std::size_t n = 1 + rng.below(max_words);
    for (std::size_t i = 0; i < n; ++i) {
        if (i > 0) out += spaces[rng.below(6)];
        out += punct[rng.below(13)];
        out += words[rng.below(20)];
        out += punct[rng.below(13)];
    }
    return out;
}

}  // namespace

EvalFixture eval_fixture(PortableRng& rng, std::size_t items) {
    EvalFixture f;
    f.dataset.articles.push_back({"eval", {}, nlohmann::json::object()});
    for (std::size_t i = 0; i < items; ++i) {
        Paragraph p;
        QaItem q;
        q.id = "e" + std::to_string(i);
        q.question = "Question " + std::to_string(i) + "?";
        q.is_impossible = rng.below(3) == 0;
        std::vector<std::string> golds;
        if (!q.is_impossible) {
            const std::size_t n = 1 + rng.below(3);
            for (std::size_t g = 0; g < n; ++g) golds.push_back(noisy_phrase(rng, 5));
        }
        for (const auto& g : golds) {
            q.answers.push_back({g, p.context.size() + 1, nlohmann::json::object()});
            p.context += " " + g;
        }
        p.context += " Filler " + std::to_string(i) + ".";
        Prediction pred;
        switch (rng.below(4)) {
            case 0: pred.text = ""; break;
            case 1: pred.text = golds.empty() ? noisy_phrase(rng, 4) : golds[rng.below(golds.size())]; break;
            default: pred.text = noisy_phrase(rng, 6); break;
        }
        // Null scores on a 0.001 grid so thresholds can be compared exactly.
        pred.null_score = static_cast<double>(rng.below(2001)) / 1000.0 - 1.0;
        f.predictions.emplace(q.id, pred);
        p.qas.push_back(std::move(q));
        f.dataset.articles.front().paragraphs.push_back(std::move(p));
    }
    return f;
}

}  // namespace testutil

namespace testutil {

double grid_best_f1(const EvalFixture& f) {
    struct Item {
        bool answerable;
        double f1;
        double null_score;
    };
    std::vector<Item> items;
    f.dataset.for_each_qa([&](const Paragraph&, const QaItem& q) {
        squad_reference::Question rq{q.id, {}};
        if (!q.is_impossible)
            for (const auto& a : q.answers) rq.answers.push_back(a.text);
        const auto& p = f.predictions.at(q.id);
        auto e = squad_reference::evaluate({rq}, {{q.id, p.text}}, {}, 1.0);
        items.push_back({!rq.answers.empty(), e.f1_scores.at(q.id), p.null_score});
    });
    double best = -1.0;
    for (long t = -11000; t <= 11000; ++t) {
        // Offset by half a step so no grid point lands on a 1e-3 score exactly.
        const double threshold = static_cast<double>(t) / 10000.0 - 0.00005;
        double sum = 0.0;
        for (const auto& it : items) sum += it.null_score > threshold ? (it.answerable ? 0.0 : 1.0) : it.f1;
        best = std::max(best, items.empty() ? 0.0 : 100.0 * sum / static_cast<double>(items.size()));
    }
    return best;
}

}  // namespace testutil

#include <doctest.h>

#include <cmath>
#include <limits>

#include "qaforge/metrics.hpp"
#include "squad_reference.hpp"
#include "test_util.hpp"

using namespace qaforge;
using nlohmann::json;

namespace {

struct ReferenceInput {
    std::vector<squad_reference::Question> questions;
    std::map<std::string, std::string> preds;
    std::map<std::string, double> na_probs;
};

ReferenceInput reference_input(const testutil::EvalFixture& f) {
    ReferenceInput r;
    f.dataset.for_each_qa([&](const Paragraph&, const QaItem& q) {
        squad_reference::Question rq{q.id, {}};
        if (!q.is_impossible)
            for (const auto& a : q.answers) rq.answers.push_back(a.text);
        r.questions.push_back(rq);
        const auto& p = f.predictions.at(q.id);
        r.preds[q.id] = p.text;
        r.na_probs[q.id] = p.null_score;
    });
    return r;
}

void check_parity(const QaScore& s, const squad_reference::Eval& e) {
    constexpr double tol = 1e-9;
    CHECK(std::abs(s.em - e.exact) < tol);
    CHECK(std::abs(s.f1 - e.f1) < tol);
    CHECK(std::abs(s.answerable_em - e.has_ans_exact) < tol);
    CHECK(std::abs(s.answerable_f1 - e.has_ans_f1) < tol);
    CHECK(std::abs(s.unanswerable_em - e.no_ans_exact) < tol);
    CHECK(std::abs(s.unanswerable_f1 - e.no_ans_f1) < tol);
    CHECK(s.n_total == static_cast<std::size_t>(e.total));
    CHECK(s.n_answerable == static_cast<std::size_t>(e.has_ans_total));
}

SquadDataset four_token_dataset(std::size_t n) {
    std::vector<testutil::ParagraphSpec> specs;
    for (std::size_t i = 0; i < n; ++i) {
        const std::string answer = "more than " + std::to_string(i + 2) + " billion";
        specs.push_back({"Revenue grew to " + answer + " dollars in year " + std::to_string(i) + ".",
                         {{"r" + std::to_string(i), "How much revenue in year " + std::to_string(i) + "?", {answer}}}});
    }
    return testutil::make_dataset(specs);
}

}  // namespace

TEST_CASE("normalization follows the official order of operations") {
    CHECK(normalize_answer("The  Cat's  hat!") == "cats hat");
    CHECK(normalize_answer("an apple, a pear and THE plum") == "apple pear and plum");
    CHECK(normalize_answer("theory another") == "theory another");
    CHECK(normalize_answer("a-b") == "ab");
    CHECK(normalize_answer("the.") == "");
    CHECK(normalize_answer("  \t\n") == "");
    CHECK(normalized_tokens("") == std::vector<std::string>{});
    CHECK(normalized_tokens("The Euro, the bank") == std::vector<std::string>{"euro", "bank"});
}

TEST_CASE("normalization agrees with the reference on tricky strings") {
    for (const std::string s : {"A", "a.b", "the-the", "_the_", "(an)", "Théâtre the", "x  the\ty", "An an AN"}) {
        if (s.find("é") != std::string::npos) continue;  // reference is ASCII only
        CHECK(normalize_answer(s) == squad_reference::normalize_answer(s));
    }
}

TEST_CASE("exact match and F1 against several golds") {
    const std::vector<std::string> golds{"Denver Broncos", "the Broncos"};
    CHECK(exact_match("broncos", golds) == 1.0);
    CHECK(exact_match("Denver", golds) == 0.0);
    CHECK(token_f1("Denver", golds) == doctest::Approx(2.0 / 3.0));
    CHECK(token_f1("Broncos Broncos", golds) == doctest::Approx(2.0 / 3.0));
    const std::vector<std::string> none;
    CHECK(exact_match("", none) == 1.0);
    CHECK(token_f1("", none) == 1.0);
    CHECK(exact_match("something", none) == 0.0);
    CHECK(token_f1("something", none) == 0.0);
    // A gold that normalises to nothing is ignored when another gold remains.
    const std::vector<std::string> mixed{"the", "Acme"};
    CHECK(exact_match("", mixed) == 0.0);
    CHECK(exact_match("acme", mixed) == 1.0);
}

TEST_CASE("dataset scores agree with the reference evaluator") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        PortableRng rng(seed);
        auto f = testutil::eval_fixture(rng, 50);
        auto r = reference_input(f);
        check_parity(evaluate_qa(f.dataset, f.predictions),
                     squad_reference::evaluate(r.questions, r.preds, r.na_probs,
                                               std::numeric_limits<double>::infinity()));
        const double threshold = static_cast<double>(rng.below(2001)) / 1000.0 - 1.0;
        check_parity(evaluate_qa(f.dataset, f.predictions, threshold),
                     squad_reference::evaluate(r.questions, r.preds, r.na_probs, threshold));

        const auto items = score_items(f.dataset, f.predictions);
        auto ref = squad_reference::evaluate(r.questions, r.preds, r.na_probs, std::numeric_limits<double>::infinity());
        for (const auto& it : items) {
            CHECK(std::abs(it.em - ref.exact_scores.at(it.id)) < 1e-12);
            CHECK(std::abs(it.f1 - ref.f1_scores.at(it.id)) < 1e-12);
            if (!it.answerable) CHECK(it.em == it.f1);
        }
    }
}

TEST_CASE("null threshold is strict") {
    auto d = testutil::make_dataset({{"Acme sells.", {{"a", "q", {"Acme"}}, {"u", "q", {}}}}});
    PredictionMap preds{{"a", {"Acme", 0.5}}, {"u", {"Acme", 0.5}}};
    auto at = evaluate_qa(d, preds, 0.5);
    CHECK(at.answerable_em == 100.0);
    CHECK(at.unanswerable_em == 0.0);
    auto below = evaluate_qa(d, preds, 0.4999);
    CHECK(below.answerable_em == 0.0);
    CHECK(below.unanswerable_em == 100.0);
}

TEST_CASE("missing predictions are listed") {
    auto d = testutil::make_dataset({{"Acme sells.", {{"a", "q", {"Acme"}}, {"b", "q", {}}, {"c", "q", {}}}}});
    PredictionMap preds{{"b", {"", 0.0}}};
    try {
        evaluate_qa(d, preds);
        FAIL("expected MissingPredictionsError");
    } catch (const MissingPredictionsError& e) {
        CHECK(e.ids() == std::vector<std::string>{"a", "c"});
        CHECK(std::string(e.what()).find("a c") != std::string::npos);
    }
}

TEST_CASE("prediction file formats") {
    auto p = parse_predictions(json::parse(R"({"a": "text", "b": {"text": "x", "null_score": 1.5}, "c": {"text": ""}})"));
    CHECK(p.at("a").text == "text");
    CHECK(p.at("a").null_score == 0.0);
    CHECK(p.at("b").null_score == 1.5);
    CHECK(p.at("c").text.empty());
    CHECK_THROWS_AS(parse_predictions(json::array()), DataError);
    CHECK_THROWS_AS(parse_predictions(json::parse(R"({"a": 3})")), DataError);
    CHECK_THROWS_AS(parse_predictions(json::parse(R"({"a": {"text": "x", "null_score": "hi"}})")), DataError);
}

TEST_CASE("macro F1 over two classes") {
    const std::vector<int> gold{1, 1, 0, 0};
    const std::vector<int> perfect{1, 1, 0, 0};
    const std::vector<int> all_one{1, 1, 1, 1};
    CHECK(macro_f1(gold, perfect) == 100.0);
    // class 1: tp 2, fp 2 -> 2/3; class 0: 0.
    CHECK(macro_f1(gold, all_one) == doctest::Approx(100.0 / 3.0));
    const std::vector<int> shorter{1};
    CHECK_THROWS_AS(macro_f1(gold, shorter), PreconditionError);
    const std::vector<int> bad{2, 1, 0, 0};
    CHECK_THROWS_AS(macro_f1(gold, bad), PreconditionError);
}

TEST_CASE("token Levenshtein similarity") {
    using V = std::vector<std::string>;
    CHECK(levenshtein_similarity(V{}, V{}) == 1.0);
    CHECK(levenshtein_similarity(V{"a", "b", "c", "d"}, V{"a", "b", "c"}) == 0.75);
    CHECK(levenshtein_similarity(V{"x"}, V{"y"}) == 0.0);
    CHECK(levenshtein_similarity(V{"a", "b"}, V{"b", "a"}) == 0.0);
    const std::string a = "kitten", b = "sitting";
    CHECK(edit_distance(std::span<const char>(a), std::span<const char>(b)) == 3);
}

TEST_CASE("round trip with the oracle and corrupting answerers") {
    const auto d = four_token_dataset(20);
    auto gold = gold_table_from_dataset(d);
    CHECK(gold->size() == 20);

    auto oracle = make_stub_gateway(gold);
    auto s = roundtrip_evaluate(d, oracle, 4);
    CHECK(s.exact_match_pct == 100.0);
    CHECK(s.similarity_pct == 100.0);
    CHECK(s.n == 20);

    std::vector<double> ems, sims;
    for (std::size_t drop = 0; drop <= 4; ++drop) {
        auto gw = make_stub_gateway(gold);
        gw.set_qa(std::make_shared<stubs::OracleQa>(gold, drop));
        auto r = roundtrip_evaluate(d, gw);
        ems.push_back(r.exact_match_pct);
        sims.push_back(r.similarity_pct);
    }
    CHECK(ems[1] == 0.0);
    CHECK(sims[1] == 75.0);
    CHECK(sims[2] == 50.0);
    CHECK(sims[4] == 0.0);
    for (std::size_t i = 1; i < ems.size(); ++i) {
        CHECK(ems[i] <= ems[i - 1]);
        CHECK(sims[i] <= sims[i - 1]);
    }
}

TEST_CASE("round trip skips unanswerable items and counts gateway errors") {
    struct Flaky : QuestionAnswerer {
        QaPrediction answer(std::string_view question, std::string_view) override {
            if (question.find("year 0") != std::string_view::npos) {
                throw GatewayError(Capability::Qa, "test", "down");
            }
            return {};
        }
    };
    auto d = four_token_dataset(5);
    d.articles[0].paragraphs[0].qas.push_back({"u", "Unanswerable?", true, {}, std::nullopt, json::object()});
    auto gw = make_stub_gateway();
    gw.set_qa(std::make_shared<Flaky>());
    auto s = roundtrip_evaluate(d, gw, 2, 0.1);
    CHECK(s.n == 4);
    CHECK(s.n_errors == 1);
    CHECK(s.error_warning);
    CHECK(s.exact_match_pct == 0.0);
    CHECK(!roundtrip_evaluate(d, gw, 1, 0.5).error_warning);
}

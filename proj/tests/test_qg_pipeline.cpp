#include <doctest.h>

#include <algorithm>

#include "qaforge/errors.hpp"
#include "qaforge/qg_pipeline.hpp"
#include "test_util.hpp"

using namespace qaforge;

namespace {

const std::string kAshurst =
    "International law firm Ashurst announces the appointment of Matthias Weissinger as partner in Munich.";
const std::string kBel =
    "As a major food sector player, Bel fully assumes its duty to do everything possible to ensure the continuity "
    "of its operations.";

std::vector<std::string> texts(const std::vector<Sentence>& s) {
    std::vector<std::string> out;
    for (const auto& x : s) out.push_back(x.text);
    return out;
}

PipelineConfig no_filters() {
    PipelineConfig c;
    c.filter.enable_length = c.filter.enable_regex = c.filter.enable_pos = false;
    c.filter.enable_grammaticality = false;
    return c;
}

std::vector<Document> toy_corpus() { return read_corpus_jsonl(testutil::source_path("data/toy_corpus.jsonl")); }

PipelineConfig toy_config() {
    PipelineConfig c;
    c.filter.rules = default_rules();
    return c;
}

class ListSelector : public AnswerSelector {
public:
    explicit ListSelector(std::vector<AnswerSpan> spans) : spans_(std::move(spans)) {}
    std::vector<AnswerSpan> select(std::string_view, std::string_view) override { return spans_; }

private:
    std::vector<AnswerSpan> spans_;
};

class RecordingGenerator : public QuestionGenerator {
public:
    std::string generate(std::string_view prompt) override {
        std::lock_guard lock(mutex_);
        prompts.emplace_back(prompt);
        return "Q?";
    }
    std::vector<std::string> prompts;

private:
    std::mutex mutex_;
};

}  // namespace

TEST_CASE("sentence splitting") {
    CHECK(texts(split_sentences("  One sentence only  ")) == std::vector<std::string>{"One sentence only"});
    CHECK(texts(split_sentences("A. B? C!")) == std::vector<std::string>{"A.", "B?", "C!"});
    CHECK(texts(split_sentences("Regulation 17(1)(a). Next.")) ==
          std::vector<std::string>{"Regulation 17(1)(a).", "Next."});
    CHECK(texts(split_sentences("Use e.g. Apples here. Then stop.")) ==
          std::vector<std::string>{"Use e.g. Apples here.", "Then stop."});
    CHECK(texts(split_sentences("He said \"Go.\" Then left.")) ==
          std::vector<std::string>{"He said \"Go.\"", "Then left."});
    CHECK(texts(split_sentences("Value 3.5 rose. it stayed")) == std::vector<std::string>{"Value 3.5 rose. it stayed"});
    CHECK(texts(split_sentences("Line one\nLine two")) == std::vector<std::string>{"Line one", "Line two"});
    CHECK(split_sentences("").empty());
    CHECK(split_sentences(" \n ").empty());
}

TEST_CASE("sentence offsets index into the text and cover its content") {
    const std::string text = "First part. Second, with e.g. stuff! Third?\n  Fourth line";
    const auto sentences = split_sentences(text);
    std::string covered;
    std::size_t last = 0;
    for (const auto& s : sentences) {
        CHECK(text.substr(s.offset, s.text.size()) == s.text);
        CHECK(s.offset >= last);
        last = s.offset + s.text.size();
        covered += s.text;
    }
    std::string content;
    for (char c : text)
        if (!std::isspace(static_cast<unsigned char>(c))) content += c;
    covered.erase(std::remove_if(covered.begin(), covered.end(), [](unsigned char c) { return std::isspace(c); }),
                  covered.end());
    CHECK(covered == content);
}

TEST_CASE("extractive validation is exact and case-sensitive") {
    CHECK(validate_extractive("food", kBel) == kBel.find("food"));
    CHECK(!validate_extractive("pizza", kBel));
    CHECK(!validate_extractive("Food", kBel));
    CHECK(!validate_extractive("", kBel));
}

TEST_CASE("highlight prompts") {
    CHECK(build_highlight_prompt("The dog is red", 4, 3) == "generate question: The <hl>dog<hl> is red");
    CHECK(build_highlight_prompt("dog", 0, 3) == "generate question: <hl>dog<hl>");
    CHECK(build_highlight_prompt("The dog", 0, 3) == "generate question: <hl>The<hl> dog");
    CHECK_THROWS_AS(build_highlight_prompt("dog", 1, 3), PreconditionError);
    CHECK_THROWS_AS(build_highlight_prompt("dog", 0, 0), PreconditionError);
    CHECK_THROWS_AS(build_highlight_prompt("a <hl> b", 0, 1), PreconditionError);
}

TEST_CASE("scripted generator reproduces the law-firm example") {
    auto gw = make_stub_gateway();
    gw.set_generator(std::make_shared<stubs::ScriptedQuestionGenerator>(
        std::map<std::string, std::string>{{"Matthias Weissinger", "Who is the new partner of Ashurst in Munich?"}}));
    Document doc{"ashurst", kAshurst, "test", {}};
    auto r = generate_pairs_for_doc(doc, gw, toy_config());
    auto it = std::find_if(r.pairs.begin(), r.pairs.end(),
                           [](const SyntheticQAPair& p) { return p.answer_text == "Matthias Weissinger"; });
    REQUIRE(it != r.pairs.end());
    CHECK(it->question == "Who is the new partner of Ashurst in Munich?");
    CHECK(it->context == kAshurst);
    CHECK(kAshurst.substr(it->answer_start, it->answer_text.size()) == it->answer_text);
    CHECK(it->pair_id == "ashurst:s0:c" + std::to_string(it->candidate_index));
}

TEST_CASE("prompts condition on the whole document") {
    const std::string text = "Alpha rose today. Beta fell later.";
    auto gen = std::make_shared<RecordingGenerator>();
    auto gw = make_stub_gateway();
    gw.set_generator(gen);
    auto r = generate_pairs_for_doc({"d", text, "t", {}}, gw, no_filters());
    CHECK(r.pairs.size() == 2);
    REQUIRE(gen->prompts.size() == 2);
    CHECK(gen->prompts[1] == "generate question: Alpha rose today. <hl>Beta<hl> fell later.");
    CHECK(r.report.sentences == 2);
}

TEST_CASE("candidates absent from the document are discarded") {
    auto gw = make_stub_gateway();
    gw.set_selector(std::make_shared<ListSelector>(std::vector<AnswerSpan>{}));
    auto r = generate_pairs_for_doc({"d", kBel, "t", {}}, gw, no_filters());
    CHECK(r.pairs.empty());

    // The gateway rejects spans that do not index the document, so an
    // unusable candidate surfaces as a per-candidate error.
    gw.set_selector(std::make_shared<ListSelector>(std::vector<AnswerSpan>{{"pizza", 0}}));
    r = generate_pairs_for_doc({"d", kBel, "t", {}}, gw, no_filters());
    CHECK(r.pairs.empty());
    CHECK(r.report.gateway_errors == 1);
    CHECK(r.report.errors.size() == 1);
}

TEST_CASE("candidate cap and first-occurrence offsets") {
    const std::string text = "Bel and Bel again.";
    auto gw = make_stub_gateway();
    gw.set_selector(std::make_shared<ListSelector>(std::vector<AnswerSpan>{{"Bel", 8}, {"again", 12}}));
    auto cfg = no_filters();
    auto r = generate_pairs_for_doc({"d", text, "t", {}}, gw, cfg);
    REQUIRE(r.pairs.size() == 2);
    CHECK(r.pairs[0].answer_start == 0);
    cfg.max_candidates_per_sentence = 1;
    CHECK(generate_pairs_for_doc({"d", text, "t", {}}, gw, cfg).pairs.size() == 1);
}

TEST_CASE("grammaticality gate") {
    auto gw = make_stub_gateway();
    auto cfg = no_filters();
    cfg.filter.enable_grammaticality = true;
    gw.set_grammaticality(make_grammaticality({Capability::Grammaticality, "stub:always-ungrammatical"}));
    auto r = generate_pairs_for_doc({"d", kAshurst, "t", {}}, gw, cfg);
    CHECK(r.pairs.empty());
    CHECK(r.report.grammar_discards == r.report.candidates);

    // Short answers score 1 - 0.9 under the length heuristic.
    gw.set_grammaticality(std::make_shared<stubs::LengthHeuristicGrammaticality>());
    cfg.grammaticality_threshold = 0.05;
    const auto below = generate_pairs_for_doc({"d", kAshurst, "t", {}}, gw, cfg).pairs.size();
    cfg.grammaticality_threshold = 0.11;
    const auto above = generate_pairs_for_doc({"d", kAshurst, "t", {}}, gw, cfg).pairs.size();
    CHECK(below == 4);
    CHECK(above == 0);

    cfg.grammaticality_threshold = 1.5;
    CHECK_THROWS_AS(generate_pairs_for_doc({"d", kAshurst, "t", {}}, gw, cfg), ConfigError);
}

TEST_CASE("empty corpus gives an empty dataset") {
    auto r = run_pipeline({}, make_stub_gateway(), toy_config());
    CHECK(r.dataset.articles.empty());
    CHECK(r.report.docs_in == 0);
    CHECK(r.report.pairs_out == 0);
}

TEST_CASE("deduplication on question, answer and context") {
    std::vector<Document> docs{{"a", kAshurst, "t", {}}, {"b", kAshurst, "t", {}}};
    auto cfg = no_filters();
    auto with = run_pipeline(docs, make_stub_gateway(), cfg);
    cfg.dedup = false;
    auto without = run_pipeline(docs, make_stub_gateway(), cfg);
    CHECK(without.report.pairs_out == 2 * with.report.pairs_out);
    CHECK(with.report.duplicate_discards == with.report.pairs_out);
}

TEST_CASE("toy corpus matches the committed fixture") {
    const auto expected = testutil::read_text(testutil::source_path("tests/fixtures/toy_expected_squad.json"));
    for (std::size_t jobs : {1u, 4u}) {
        auto cfg = toy_config();
        cfg.jobs = jobs;
        auto r = run_pipeline(toy_corpus(), make_stub_gateway(), cfg);
        CHECK(canonical_squad(r.dataset) == expected);
        CHECK(r.report.docs_in == 3);
        CHECK(r.report.pairs_out == 5);
    }
}

TEST_CASE("report counts are consistent") {
    auto cfg = toy_config();
    cfg.filter.enable_grammaticality = true;
    auto gw = make_stub_gateway();
    gw.set_grammaticality(std::make_shared<stubs::LengthHeuristicGrammaticality>());
    auto r = run_pipeline(toy_corpus(), gw, cfg);
    const auto& rep = r.report;
    CHECK(rep.candidates ==
          rep.extraction_discards + rep.gateway_errors + rep.grammar_discards + rep.duplicate_discards + rep.pairs_out);
    CHECK(rep.filter_reports.size() == 3);
    CHECK(rep.doc_reports.size() == rep.docs_kept);
    const auto j = to_json(rep);
    CHECK(j["pairs_out"] == rep.pairs_out);
    CHECK(j["documents"].size() == rep.docs_kept);

    cfg.filter.enable_grammaticality = false;
    CHECK(run_pipeline(toy_corpus(), gw, cfg).report.pairs_out >= rep.pairs_out);
}

TEST_CASE("pairs become one article per document") {
    std::vector<SyntheticQAPair> pairs{{"x:s0:c0", "x", "Ctx X.", "Q1?", "Ctx", 0, 0, 0, {}, {}},
                                       {"x:s0:c1", "x", "Ctx X.", "Q2?", "X", 4, 0, 1, {}, {}},
                                       {"y:s0:c0", "y", "Ctx Y.", "Q3?", "Y", 4, 0, 0, {}, {}}};
    auto d = pairs_to_dataset(pairs);
    REQUIRE(d.articles.size() == 2);
    CHECK(d.articles[0].title == "x");
    CHECK(d.articles[0].paragraphs[0].qas.size() == 2);
    CHECK(parse_squad(squad_to_json(d)) == d);
}

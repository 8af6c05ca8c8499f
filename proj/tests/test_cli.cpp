#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "qaforge/cli.hpp"
#include "qaforge/document.hpp"
#include "qaforge/squad.hpp"
#include "test_util.hpp"

using namespace qaforge;
using nlohmann::json;
using testutil::TempDir;

namespace {

struct Run {
    int code = -1;
    std::string out, err;
};

Run cli(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    Run r;
    r.code = run_cli(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

void write(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

const std::string kToy = testutil::source_path("data/toy_corpus.jsonl").string();

}  // namespace

TEST_CASE("usage errors exit 2") {
    CHECK(cli({}).code == kExitConfig);
    CHECK(cli({"no-such-command"}).code == kExitConfig);
    CHECK(cli({"stats"}).code == kExitConfig);
    CHECK(cli({"--version"}).code == kExitOk);
}

TEST_CASE("filter with everything disabled is the identity") {
    TempDir dir;
    const auto out = dir / "kept.jsonl";
    const auto r = cli({"filter", kToy, "--disable", "all", "-o", out.string()});
    REQUIRE(r.code == kExitOk);
    CHECK(read_corpus_jsonl(out) == read_corpus_jsonl(kToy));
    CHECK(std::filesystem::exists(out.string() + ".manifest.json"));
    CHECK(cli({"filter", kToy, "--disable", "bogus", "--manifest", (dir / "m.json").string()}).code == kExitConfig);
}

TEST_CASE("filter report counts rejections by rule") {
    TempDir dir;
    const auto corpus = dir / "bad.jsonl";
    write(corpus,
          R"({"id":"short","text":"Too short to keep."})"
          "\n"
          R"({"id":"cookie","text":"We use cookies to improve your experience on our website, please accept them all now."})"
          "\n");
    const auto report = dir / "report.json";
    const auto r = cli({"filter", corpus.string(), "-o", (dir / "kept.jsonl").string(), "--report", report.string()});
    REQUIRE(r.code == kExitOk);
    const json rep = json::parse(testutil::read_text(report));
    CHECK(rep.at("documents") == 2);
    CHECK(rep.at("rejected_by").contains("length"));
    CHECK(rep.at("reports").size() == 2);
}

TEST_CASE("generate on the toy corpus matches the committed fixture") {
    TempDir dir;
    const auto expected = testutil::read_text(testutil::source_path("tests/fixtures/toy_expected_squad.json"));
    for (const char* jobs : {"1", "3"}) {
        const auto out = dir / (std::string("toy-") + jobs + ".json");
        const auto r = cli({"generate", kToy, "--stubs", "--jobs", jobs, "-o", out.string()});
        REQUIRE(r.code == kExitOk);
        CHECK(testutil::read_text(out) == expected);
        const json m = json::parse(testutil::read_text(out.string() + ".manifest.json"));
        CHECK(m.at("command") == "generate");
        CHECK(m.at("counts").at("pairs_out") == parse_squad(json::parse(expected)).question_count());
        CHECK(m.at("config").at("backends") == "stubs");
    }
}

TEST_CASE("generate needs exactly one backend and valid endpoints") {
    TempDir dir;
    const auto m = (dir / "m.json").string();
    CHECK(cli({"generate", kToy, "--manifest", m}).code == kExitConfig);
    const auto endpoints = dir / "endpoints.json";
    write(endpoints, R"({"endpoints":[
        {"capability":"select-answers","base_url":"stub:proper-noun"},
        {"capability":"generate-question","base_url":"ftp://example.invalid"},
        {"capability":"grammaticality","base_url":"stub:always-grammatical"},
        {"capability":"pos-tags","base_url":"stub:lexicon"}]})");
    const auto r = cli({"generate", kToy, "--endpoints", endpoints.string(), "--manifest", m});
    CHECK(r.code == kExitConfig);
    CHECK(r.err.find("ftp://example.invalid") != std::string::npos);
    // The same file with the stub generator works.
    auto text = testutil::read_text(endpoints);
    text.replace(text.find("ftp://example.invalid"), 21, "stub:template");
    write(endpoints, text);
    CHECK(cli({"generate", kToy, "--endpoints", endpoints.string(), "--manifest", m}).code == kExitOk);
    CHECK(cli({"generate", kToy, "--stubs", "--endpoints", endpoints.string(), "--manifest", m}).code == kExitConfig);
    CHECK(cli({"generate", (dir / "missing.jsonl").string(), "--stubs", "--manifest", m}).code == kExitData);
}

TEST_CASE("generate on an empty corpus gives an empty dataset") {
    TempDir dir;
    write(dir / "empty.jsonl", "");
    const auto r = cli({"generate", (dir / "empty.jsonl").string(), "--stubs", "--manifest", (dir / "m.json").string()});
    REQUIRE(r.code == kExitOk);
    CHECK(parse_squad(json::parse(r.out)).question_count() == 0);
}

TEST_CASE("roundtrip with stub QA models") {
    TempDir dir;
    const auto data = testutil::source_path("tests/fixtures/toy_expected_squad.json").string();
    const auto m = (dir / "m.json").string();
    auto r = cli({"roundtrip", data, "--stub", "oracle", "--manifest", m});
    REQUIRE(r.code == kExitOk);
    json s = json::parse(r.out);
    CHECK(s.at("exact_match_pct") == 100.0);
    CHECK(s.at("similarity_pct") == 100.0);

    r = cli({"roundtrip", data, "--stub", "refuser", "--manifest", m});
    REQUIRE(r.code == kExitOk);
    s = json::parse(r.out);
    CHECK(s.at("exact_match_pct") == 0.0);
    CHECK(s.at("similarity_pct") == 0.0);

    CHECK(cli({"roundtrip", data, "--manifest", m}).code == kExitConfig);
    CHECK(cli({"roundtrip", data, "--qa-endpoint", "not a url", "--manifest", m}).code == kExitConfig);
}

TEST_CASE("evaluate and tune-threshold") {
    TempDir dir;
    const auto data = dir / "d.json";
    const auto d = testutil::make_dataset({{"Paris is in France.", {{"q1", "Where is Paris?", {"France"}},
                                                                    {"q2", "Who is the king?", {}}}}});
    write(data, canonical_squad(d));
    const auto preds = dir / "p.json";
    write(preds, R"({"q1":{"text":"France","null_score":-1.0},"q2":{"text":"Paris","null_score":0.5}})");
    const auto m = (dir / "m.json").string();

    auto r = cli({"evaluate", data.string(), preds.string(), "--manifest", m});
    REQUIRE(r.code == kExitOk);
    CHECK(json::parse(r.out).at("f1") == 50.0);
    r = cli({"evaluate", data.string(), preds.string(), "--null-threshold", "0", "--manifest", m});
    CHECK(json::parse(r.out).at("f1") == 100.0);

    r = cli({"tune-threshold", data.string(), preds.string(), "--sweep-csv", (dir / "sweep.csv").string(),
             "--manifest", m});
    REQUIRE(r.code == kExitOk);
    const json t = json::parse(r.out);
    CHECK(t.at("best_overall_f1") == 100.0);
    CHECK(t.at("best_threshold").get<double>() == -1.0);
    CHECK(std::filesystem::exists(dir / "sweep.csv"));

    write(preds, R"({"q1":"France"})");
    r = cli({"evaluate", data.string(), preds.string(), "--manifest", m});
    CHECK(r.code == kExitData);
    CHECK(r.err.find("q2") != std::string::npos);
}

TEST_CASE("merge, split and stats") {
    TempDir dir;
    const auto a = dir / "a.json";
    const auto b = dir / "b.json";
    write(a, canonical_squad(testutil::make_dataset({{"One two.", {{"x", "Q?", {"One"}}}}})));
    write(b, canonical_squad(testutil::make_dataset({{"Three four.", {{"x", "R?", {}}, {"y", "S?", {"four"}}}}})));
    const auto merged = dir / "merged.json";
    REQUIRE(cli({"merge", a.string(), b.string(), "--source-markers", "-o", merged.string()}).code == kExitOk);
    const auto d = read_squad(merged);
    REQUIRE(d.question_count() == 3);
    std::vector<std::string> ids, questions;
    d.for_each_qa([&](const Paragraph&, const QaItem& q) {
        ids.push_back(q.id);
        questions.push_back(q.question);
    });
    CHECK(ids == std::vector<std::string>{"x", "x-2", "y"});
    CHECK(questions[0].ends_with("[SQuAD]"));
    CHECK(questions[2].ends_with("[SYFTER]"));

    auto r = cli({"stats", merged.string(), "--manifest", (dir / "m.json").string()});
    REQUIRE(r.code == kExitOk);
    const json s = json::parse(r.out);
    CHECK(s.at("answerable") == 2);
    CHECK(s.at("unanswerable") == 1);

    const auto big = dir / "big.json";
    write(big, canonical_squad(testutil::split_fixture()));
    const auto train = dir / "train.json";
    const auto test = dir / "test.json";
    r = cli({"split", big.string(), "--fraction", "0.116", "--seed", "0", "--train-out", train.string(), "--test-out",
             test.string(), "--manifest", (dir / "split.json").string()});
    REQUIRE(r.code == kExitOk);
    const auto tr = read_squad(train);
    const auto te = read_squad(test);
    CHECK(tr.question_count() + te.question_count() == 1009);
    CHECK(te.question_count() >= 108);
    CHECK(te.question_count() <= 126);
    const json m = json::parse(testutil::read_text(dir / "split.json"));
    CHECK(m.at("seed") == 0);
    CHECK(m.at("counts").at("test_questions") == te.question_count());

    write(dir / "bad.json", "{\"data\": 3}");
    CHECK(cli({"stats", (dir / "bad.json").string(), "--manifest", (dir / "m.json").string()}).code == kExitData);
}

TEST_CASE("smote balances the classes") {
    TempDir dir;
    const auto in = dir / "v.json";
    write(in, R"({"minority":[[0,0],[1,0],[0,1],[1,1]],"majority_count":10})");
    const auto r = cli({"smote", in.string(), "--k", "2", "--seed", "3", "--manifest", (dir / "m.json").string()});
    REQUIRE(r.code == kExitOk);
    CHECK(json::parse(r.out).at("synthetic").size() == 6);
    CHECK(cli({"smote", in.string(), "--k", "2", "--seed", "3", "--manifest", (dir / "m.json").string()}).out == r.out);
    write(in, R"({"minority":[[0,0]],"majority_count":3})");
    CHECK(cli({"smote", in.string(), "--manifest", (dir / "m.json").string()}).code == kExitConfig);
}

TEST_CASE("the installed binary reports exit codes") {
    TempDir dir;
    auto status = [](const std::string& cmd) {
        const int s = std::system(cmd.c_str());
        return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
    };
    const std::string bin = QAFORGE_CLI_PATH;
    const std::string quiet = " >/dev/null 2>&1";
    CHECK(status(bin + " --help" + quiet) == 0);
    CHECK(status(bin + " generate " + kToy + " --stubs -o " + (dir / "o.json").string() + quiet) == 0);
    CHECK(testutil::read_text(dir / "o.json") ==
          testutil::read_text(testutil::source_path("tests/fixtures/toy_expected_squad.json")));
    CHECK(status(bin + " stats " + (dir / "none.json").string() + " --manifest " + (dir / "m.json").string() + quiet) ==
          3);
    CHECK(status("QAFORGE_PORT=notaport " + bin + " serve" + quiet) == 2);
}

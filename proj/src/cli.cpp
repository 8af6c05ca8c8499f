#include "qaforge/cli.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "qaforge/corpus_filter.hpp"
#include "qaforge/document.hpp"
#include "qaforge/errors.hpp"
#include "qaforge/gateway.hpp"
#include "qaforge/metrics.hpp"
#include "qaforge/parallel.hpp"
#include "qaforge/qg_pipeline.hpp"
#include "qaforge/service.hpp"
#include "qaforge/squad.hpp"
#include "qaforge/train_math.hpp"

namespace qaforge {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "0.1.0";

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

json read_config_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

std::string pretty(const json& j) { return j.dump(2) + "\n"; }

// Options shared by every subcommand; filled by CLI11 before the handler runs.
struct Common {
    std::size_t jobs = default_jobs();
    std::string manifest;
};

// Collected by each handler and written once the command succeeds.
struct Manifest {
    std::string command;
    std::vector<std::string> args;
    json config = json::object();
    json inputs = json::object();
    json outputs = json::object();
    json counts = json::object();
    std::optional<std::uint64_t> seed;
};

void emit(const std::string& output, const std::string& contents, std::ostream& out, Manifest& m, const char* role) {
    if (output.empty() || output == "-") {
        out << contents;
        return;
    }
    write_file_atomic(output, contents);
    m.outputs[role] = output;
}

fs::path manifest_path(const Common& c, const Manifest& m, const std::string& primary_output) {
    if (!c.manifest.empty()) return c.manifest;
    if (!primary_output.empty() && primary_output != "-") return primary_output + ".manifest.json";
    return "qaforge-" + m.command + ".manifest.json";
}

void write_manifest(const fs::path& path, const Manifest& m, double seconds) {
    json j{{"tool", "qaforge"},
           {"version", kVersion},
           {"command", m.command},
           {"args", m.args},
           {"config", m.config},
           {"inputs", m.inputs},
           {"outputs", m.outputs},
           {"counts", m.counts},
           {"seed", m.seed ? json(*m.seed) : json(nullptr)},
           {"wall_clock_seconds", seconds}};
    write_file_atomic(path, pretty(j));
}

// --disable values -> FilterConfig switches.
void apply_disables(FilterConfig& cfg, const std::vector<std::string>& disabled) {
    for (const auto& d : disabled) {
        if (d == "length") {
            cfg.enable_length = false;
        } else if (d == "regex") {
            cfg.enable_regex = false;
        } else if (d == "pos") {
            cfg.enable_pos = false;
        } else if (d == "grammar" || d == "grammaticality") {
            cfg.enable_grammaticality = false;
        } else if (d == "all") {
            cfg.enable_length = cfg.enable_regex = cfg.enable_pos = cfg.enable_grammaticality = false;
        } else {
            throw ConfigError("unknown filter '" + d + "' (expected length, regex, pos, grammar or all)");
        }
    }
}

json filter_config_json(const FilterConfig& cfg, const std::string& rules_file) {
    return {{"min_tokens", cfg.min_tokens},
            {"length", cfg.enable_length},
            {"regex", cfg.enable_regex},
            {"pos", cfg.enable_pos},
            {"grammaticality", cfg.enable_grammaticality},
            {"rules_file", rules_file.empty() ? json(nullptr) : json(rules_file)},
            {"rules", rules_to_json(cfg.rules)}};
}

std::vector<EndpointConfig> load_endpoints(const std::string& path) {
    return parse_endpoint_configs(read_config_file(path));
}

void print_counts(std::ostream& err, const std::string& title, const std::map<std::string, std::size_t>& rows) {
    err << title << "\n";
    std::size_t width = 4;
    for (const auto& [k, v] : rows) width = std::max(width, k.size());
    for (const auto& [k, v] : rows) err << "  " << std::left << std::setw(static_cast<int>(width)) << k << "  " << v << "\n";
}

json filter_summary(const FilterResult& r) {
    std::map<std::string, std::size_t> by_rule, only_rule;
    std::size_t errors = 0;
    for (const auto& rep : r.reports) {
        for (const auto& rule : rep.failed_rules) ++by_rule[rule];
        if (rep.failed_rules.size() == 1) ++only_rule[rep.failed_rules.front()];
        errors += rep.error.has_value();
    }
    return {{"documents", r.reports.size()},
            {"kept", r.kept.size()},
            {"rejected", r.reports.size() - r.kept.size()},
            {"rejected_by", by_rule},
            {"only_rejected_by", only_rule},
            {"tagger_errors", errors}};
}

// ---------------------------------------------------------------------------

struct FilterArgs {
    std::string corpus, output, report, rules;
    std::vector<std::string> disable;
    std::size_t min_tokens = 10;
    std::string pos_backend = "stub:lexicon";
};

void cmd_filter(const FilterArgs& a, const Common& c, Manifest& m, std::ostream& out, std::ostream& err) {
    FilterConfig cfg;
    cfg.min_tokens = a.min_tokens;
    cfg.rules = a.rules.empty() ? default_rules() : load_rules(a.rules);
    apply_disables(cfg, a.disable);
    std::shared_ptr<PosTagger> tagger;
    if (cfg.enable_pos) tagger = make_tagger(EndpointConfig{Capability::PosTag, a.pos_backend});

    const auto docs = read_corpus_jsonl(fs::path(a.corpus));
    const FilterResult r = filter_corpus(docs, cfg, tagger.get(), c.jobs);

    std::ostringstream kept;
    write_corpus_jsonl(kept, r.kept);
    emit(a.output, kept.str(), out, m, "corpus");

    json report = filter_summary(r);
    json per_doc = json::array();
    for (const auto& rep : r.reports) per_doc.push_back(to_json(rep));
    report["reports"] = per_doc;
    if (!a.report.empty()) {
        write_file_atomic(a.report, pretty(report));
        m.outputs["report"] = a.report;
    }
    m.inputs["corpus"] = a.corpus;
    m.config = filter_config_json(cfg, a.rules);
    m.config["pos_backend"] = a.pos_backend;
    m.counts = filter_summary(r);

    err << "filter: kept " << r.kept.size() << " of " << docs.size() << " documents\n";
    print_counts(err, "rejections by rule:", report["rejected_by"].get<std::map<std::string, std::size_t>>());
}

struct GenerateArgs {
    std::string corpus, output, report, rules, endpoints;
    bool stubs = false;
    std::vector<std::string> disable;
    std::size_t min_tokens = 10;
    double threshold = 0.5;
    std::size_t max_candidates = 0;
    bool no_dedup = false;
};

void cmd_generate(const GenerateArgs& a, const Common& c, Manifest& m, std::ostream& out, std::ostream& err) {
    if (a.stubs == !a.endpoints.empty()) throw ConfigError("pass exactly one of --stubs or --endpoints");
    PipelineConfig cfg;
    cfg.filter.min_tokens = a.min_tokens;
    cfg.filter.rules = a.rules.empty() ? default_rules() : load_rules(a.rules);
    apply_disables(cfg.filter, a.disable);
    cfg.grammaticality_threshold = a.threshold;
    cfg.max_candidates_per_sentence = a.max_candidates;
    cfg.dedup = !a.no_dedup;
    cfg.jobs = c.jobs;

    const ModelGateway gateway = a.stubs ? make_stub_gateway() : make_gateway(load_endpoints(a.endpoints));
    const auto docs = read_corpus_jsonl(fs::path(a.corpus));
    const PipelineResult r = run_pipeline(docs, gateway, cfg);

    emit(a.output, canonical_squad(r.dataset), out, m, "dataset");
    json report = to_json(r.report);
    if (!a.report.empty()) {
        write_file_atomic(a.report, pretty(report));
        m.outputs["report"] = a.report;
    }
    m.inputs["corpus"] = a.corpus;
    m.config = {{"filter", filter_config_json(cfg.filter, a.rules)},
                {"grammaticality_threshold", cfg.grammaticality_threshold},
                {"max_candidates_per_sentence", cfg.max_candidates_per_sentence},
                {"dedup", cfg.dedup},
                {"backends", a.stubs ? json("stubs") : json(a.endpoints)}};
    report.erase("filter_reports");
    report.erase("documents");
    m.counts = report;

    err << "generate: " << r.report.docs_kept << " of " << r.report.docs_in << " documents kept, "
        << r.report.pairs_out << " QA pairs\n";
    print_counts(err, "pipeline:", {{"sentences", r.report.sentences},
                                    {"candidates", r.report.candidates},
                                    {"extraction_discards", r.report.extraction_discards},
                                    {"gateway_errors", r.report.gateway_errors},
                                    {"grammar_discards", r.report.grammar_discards},
                                    {"duplicate_discards", r.report.duplicate_discards}});
}

struct RoundtripArgs {
    std::string dataset, output, qa_endpoint, stub;
    double warn_share = 0.05;
};

void cmd_roundtrip(const RoundtripArgs& a, const Common& c, Manifest& m, std::ostream& out, std::ostream& err) {
    if (a.qa_endpoint.empty() == a.stub.empty()) throw ConfigError("pass exactly one of --qa-endpoint or --stub");
    const SquadDataset d = read_squad(a.dataset);
    EndpointConfig cfg{Capability::Qa, a.stub.empty() ? a.qa_endpoint : "stub:" + a.stub};
    ModelGateway gateway;
    gateway.set_qa(make_qa(cfg, cfg.is_stub() ? gold_table_from_dataset(d) : nullptr));
    const RoundtripScore s = roundtrip_evaluate(d, gateway, c.jobs, a.warn_share);
    emit(a.output, pretty(to_json(s)), out, m, "score");
    m.inputs["dataset"] = a.dataset;
    m.config = {{"qa_backend", cfg.base_url}, {"error_warning_share", a.warn_share}};
    m.counts = to_json(s);
    err << std::fixed << std::setprecision(2) << "roundtrip: EM " << s.exact_match_pct << "%, similarity "
        << s.similarity_pct << "% over " << s.n << " pairs";
    if (s.n_errors > 0) err << " (" << s.n_errors << " gateway errors excluded)";
    err << "\n";
    if (s.error_warning) err << "warning: gateway error share above " << a.warn_share * 100 << "%\n";
}

struct EvaluateArgs {
    std::string dataset, predictions, output, sweep_csv;
    std::optional<double> threshold;
};

void print_score(std::ostream& err, const QaScore& s) {
    err << std::fixed << std::setprecision(2) << "            EM      F1      n\n"
        << "overall     " << std::setw(6) << s.em << "  " << std::setw(6) << s.f1 << "  " << s.n_total << "\n"
        << "answerable  " << std::setw(6) << s.answerable_em << "  " << std::setw(6) << s.answerable_f1 << "  "
        << s.n_answerable << "\n"
        << "unanswer.   " << std::setw(6) << s.unanswerable_em << "  " << std::setw(6) << s.unanswerable_f1 << "  "
        << s.n_unanswerable << "\n";
}

void cmd_evaluate(const EvaluateArgs& a, const Common& c, Manifest& m, std::ostream& out, std::ostream& err) {
    const SquadDataset d = read_squad(a.dataset);
    const PredictionMap preds = read_predictions(a.predictions);
    const QaScore s = evaluate_qa(d, preds, a.threshold);
    emit(a.output, pretty(to_json(s)), out, m, "score");
    if (!a.sweep_csv.empty()) {
        write_file_atomic(a.sweep_csv, sweep_to_csv(tune_null_threshold(d, preds, c.jobs)));
        m.outputs["sweep_csv"] = a.sweep_csv;
    }
    m.inputs = {{"dataset", a.dataset}, {"predictions", a.predictions}};
    m.config = {{"null_threshold", a.threshold ? json(*a.threshold) : json(nullptr)}};
    m.counts = to_json(s);
    print_score(err, s);
}

struct TuneArgs {
    std::string dataset, predictions, output, sweep_csv;
};

void cmd_tune(const TuneArgs& a, const Common& c, Manifest& m, std::ostream& out, std::ostream& err) {
    const SquadDataset d = read_squad(a.dataset);
    const PredictionMap preds = read_predictions(a.predictions);
    const ThresholdTuneResult r = tune_null_threshold(d, preds, c.jobs);
    emit(a.output, pretty(to_json(r)), out, m, "result");
    if (!a.sweep_csv.empty()) {
        write_file_atomic(a.sweep_csv, sweep_to_csv(r));
        m.outputs["sweep_csv"] = a.sweep_csv;
    }
    m.inputs = {{"dataset", a.dataset}, {"predictions", a.predictions}};
    m.counts = {{"candidates", r.sweep.size()}, {"best_threshold", r.best_threshold}, {"best_overall_f1", r.best_overall_f1}};
    err << std::setprecision(17) << "tune-threshold: best threshold " << r.best_threshold << " (overall F1 "
        << std::setprecision(4) << r.best_overall_f1 << ") over " << r.sweep.size() << " candidates\n";
}

struct MergeArgs {
    std::string squad, syfter, output;
    bool markers = false;
};

void cmd_merge(const MergeArgs& a, const Common&, Manifest& m, std::ostream& out, std::ostream& err) {
    SquadDataset first = read_squad(a.squad);
    SquadDataset second = read_squad(a.syfter);
    if (a.markers) {
        first = mark_dataset(std::move(first), DatasetSource::Squad);
        second = mark_dataset(std::move(second), DatasetSource::Syfter);
    }
    const MergeResult r = merge_datasets(first, second);
    emit(a.output, canonical_squad(r.dataset), out, m, "dataset");
    m.inputs = {{"squad", a.squad}, {"syfter", a.syfter}};
    m.config = {{"source_markers", a.markers}};
    m.counts = {{"questions", r.dataset.question_count()}, {"id_collisions", r.id_collisions}};
    err << "merge: " << r.dataset.question_count() << " questions, " << r.id_collisions << " id collisions renamed\n";
}

struct SplitArgs {
    std::string dataset, train_out, test_out;
    double fraction = 0.116;
    std::uint64_t seed = 0;
};

void cmd_split(const SplitArgs& a, const Common&, Manifest& m, std::ostream&, std::ostream& err) {
    const SplitResult r = split_by_document(read_squad(a.dataset), a.fraction, a.seed);
    write_file_atomic(a.train_out, canonical_squad(r.train));
    write_file_atomic(a.test_out, canonical_squad(r.test));
    m.inputs["dataset"] = a.dataset;
    m.outputs = {{"train", a.train_out}, {"test", a.test_out}};
    m.config = {{"fraction", a.fraction}};
    m.seed = a.seed;
    m.counts = {{"train_questions", r.train.question_count()}, {"test_questions", r.test.question_count()}};
    err << "split: " << r.train.question_count() << " train / " << r.test.question_count() << " test questions\n";
}

struct StatsArgs {
    std::string dataset, output;
};

void cmd_stats(const StatsArgs& a, const Common&, Manifest& m, std::ostream& out, std::ostream& err) {
    const SquadDataset d = read_squad(a.dataset);
    const ClassStats s = class_stats(d);
    std::size_t contexts = 0;
    for (const auto& art : d.articles) contexts += art.paragraphs.size();
    const json j{{"questions", d.question_count()},
                 {"articles", d.articles.size()},
                 {"contexts", contexts},
                 {"answerable", s.answerable},
                 {"unanswerable", s.unanswerable},
                 {"unanswerable_share", s.unanswerable_share}};
    emit(a.output, pretty(j), out, m, "stats");
    m.inputs["dataset"] = a.dataset;
    m.counts = j;
    err << "stats: " << s.answerable << " answerable, " << s.unanswerable << " unanswerable ("
        << std::fixed << std::setprecision(1) << s.unanswerable_share * 100 << "%)\n";
}

struct SmoteArgs {
    std::string vectors, output;
    std::size_t k = 5;
    std::uint64_t seed = 0;
};

// Input: {"minority": [[...], ...], "majority_count": N} or {"minority": ..., "majority": [[...], ...]}.
void cmd_smote(const SmoteArgs& a, const Common&, Manifest& m, std::ostream& out, std::ostream& err) {
    const json in = read_json_file(a.vectors);
    std::vector<std::vector<double>> minority;
    std::size_t majority_count = 0;
    try {
        in.at("minority").get_to(minority);
        if (in.contains("majority_count")) {
            in.at("majority_count").get_to(majority_count);
        } else {
            majority_count = in.at("majority").size();
        }
    } catch (const json::exception& e) {
        throw DataError(a.vectors + ": " + e.what());
    }
    const auto samples = smote_oversample(minority, majority_count, SmoteParams{a.k, a.seed, std::nullopt});
    json arr = json::array();
    for (const auto& s : samples) {
        arr.push_back({{"point", s.point}, {"base", s.base}, {"neighbor", s.neighbor}, {"lambda", s.lambda}});
    }
    emit(a.output, pretty({{"synthetic", arr}}), out, m, "synthetic");
    m.inputs["vectors"] = a.vectors;
    m.config = {{"k", a.k}};
    m.seed = a.seed;
    m.counts = {{"minority", minority.size()}, {"majority", majority_count}, {"synthetic", samples.size()}};
    err << "smote: " << samples.size() << " synthetic points for " << minority.size() << " minority / "
        << majority_count << " majority\n";
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"qaforge: synthetic extractive-QA data pipeline and annotation service", "qaforge"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    Common common;
    Manifest manifest;
    manifest.args = args;
    std::string primary_output;
    std::function<void()> action;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--jobs,-j", common.jobs, "Worker threads")->envname("QAFORGE_JOBS")->check(CLI::PositiveNumber);
        sub->add_option("--manifest", common.manifest, "Run manifest path");
    };

    FilterArgs fa;
    auto* filter = app.add_subcommand("filter", "Apply the length, regex and POS document filters");
    filter->add_option("corpus", fa.corpus, "Corpus JSON-lines")->required();
    filter->add_option("-o,--output", fa.output, "Filtered corpus (default stdout)");
    filter->add_option("--report", fa.report, "Per-document filter report (JSON)");
    filter->add_option("--rules", fa.rules, "Regex rule table (JSON)")->envname("QAFORGE_RULES");
    filter->add_option("--disable", fa.disable, "length|regex|pos|grammar|all (repeatable)");
    filter->add_option("--min-tokens", fa.min_tokens, "Minimum whitespace tokens");
    filter->add_option("--pos-backend", fa.pos_backend, "POS tagger: stub:lexicon or URL")->envname("QAFORGE_POS_BACKEND");
    add_common(filter);
    filter->callback([&] {
        primary_output = fa.output;
        action = [&] { cmd_filter(fa, common, manifest, out, err); };
    });

    GenerateArgs ga;
    auto* generate = app.add_subcommand("generate", "Generate a synthetic SQuAD 2.0 dataset from a corpus");
    generate->add_option("corpus", ga.corpus, "Corpus JSON-lines")->required();
    generate->add_option("-o,--output", ga.output, "SQuAD output (default stdout)");
    generate->add_option("--report", ga.report, "Pipeline report (JSON)");
    generate->add_option("--endpoints", ga.endpoints, "Endpoint config (JSON)")->envname("QAFORGE_ENDPOINTS");
    generate->add_flag("--stubs", ga.stubs, "Use the deterministic stub backends");
    generate->add_option("--rules", ga.rules, "Regex rule table (JSON)")->envname("QAFORGE_RULES");
    generate->add_option("--disable", ga.disable, "length|regex|pos|grammar|all (repeatable)");
    generate->add_option("--min-tokens", ga.min_tokens, "Minimum whitespace tokens");
    generate->add_option("--grammaticality-threshold", ga.threshold, "Minimum P(grammatical)")->check(CLI::Range(0.0, 1.0));
    generate->add_option("--max-candidates", ga.max_candidates, "Answer candidates per sentence (0 = all)");
    generate->add_flag("--no-dedup", ga.no_dedup, "Keep duplicate (question, answer, context) triples");
    add_common(generate);
    generate->callback([&] {
        primary_output = ga.output;
        action = [&] { cmd_generate(ga, common, manifest, out, err); };
    });

    RoundtripArgs ra;
    auto* roundtrip = app.add_subcommand("roundtrip", "Score generated pairs by asking a QA model");
    roundtrip->add_option("dataset", ra.dataset, "SQuAD dataset")->required();
    roundtrip->add_option("-o,--output", ra.output, "Score JSON (default stdout)");
    roundtrip->add_option("--qa-endpoint", ra.qa_endpoint, "QA model URL")->envname("QAFORGE_QA_ENDPOINT");
    roundtrip->add_option("--stub", ra.stub, "oracle | refuser | corrupting | corrupting-N");
    roundtrip->add_option("--warn-share", ra.warn_share, "Warn when gateway errors exceed this share")
        ->check(CLI::Range(0.0, 1.0));
    add_common(roundtrip);
    roundtrip->callback([&] {
        primary_output = ra.output;
        action = [&] { cmd_roundtrip(ra, common, manifest, out, err); };
    });

    EvaluateArgs ea;
    double threshold = 0.0;
    auto* evaluate = app.add_subcommand("evaluate", "SQuAD 2.0 EM/F1 of predictions against a dataset");
    evaluate->add_option("dataset", ea.dataset, "SQuAD dataset")->required();
    evaluate->add_option("predictions", ea.predictions, "Predictions JSON")->required();
    evaluate->add_option("-o,--output", ea.output, "Score JSON (default stdout)");
    auto* threshold_opt = evaluate->add_option("--null-threshold", threshold, "Predict no-answer when null_score > t");
    evaluate->add_option("--sweep-csv", ea.sweep_csv, "Write the threshold sweep as CSV");
    add_common(evaluate);
    evaluate->callback([&] {
        if (threshold_opt->count() > 0) ea.threshold = threshold;
        primary_output = ea.output;
        action = [&] { cmd_evaluate(ea, common, manifest, out, err); };
    });

    TuneArgs ta;
    auto* tune = app.add_subcommand("tune-threshold", "Pick the null-answer threshold maximising overall F1");
    tune->add_option("dataset", ta.dataset, "SQuAD dataset")->required();
    tune->add_option("predictions", ta.predictions, "Predictions JSON with null scores")->required();
    tune->add_option("-o,--output", ta.output, "Result JSON (default stdout)");
    tune->add_option("--sweep-csv", ta.sweep_csv, "Write the sweep as CSV");
    add_common(tune);
    tune->callback([&] {
        primary_output = ta.output;
        action = [&] { cmd_tune(ta, common, manifest, out, err); };
    });

    MergeArgs ma;
    auto* merge = app.add_subcommand("merge", "Concatenate a general-domain and a target-domain dataset");
    merge->add_option("squad", ma.squad, "General-domain SQuAD dataset")->required();
    merge->add_option("syfter", ma.syfter, "Target-domain dataset")->required();
    merge->add_option("-o,--output", ma.output, "Merged dataset (default stdout)");
    merge->add_flag("--source-markers", ma.markers, "Append [SQuAD] / [SYFTER] to every question");
    add_common(merge);
    merge->callback([&] {
        primary_output = ma.output;
        action = [&] { cmd_merge(ma, common, manifest, out, err); };
    });

    SplitArgs sa;
    auto* split = app.add_subcommand("split", "Split a dataset into train/test by whole contexts");
    split->add_option("dataset", sa.dataset, "SQuAD dataset")->required();
    split->add_option("--fraction", sa.fraction, "Target test share of questions")->check(CLI::Range(0.0, 1.0));
    split->add_option("--seed", sa.seed, "Shuffle seed")->envname("QAFORGE_SEED");
    split->add_option("--train-out", sa.train_out, "Train split path")->required();
    split->add_option("--test-out", sa.test_out, "Test split path")->required();
    add_common(split);
    split->callback([&] {
        primary_output = sa.test_out;
        action = [&] { cmd_split(sa, common, manifest, out, err); };
    });

    StatsArgs sta;
    auto* stats = app.add_subcommand("stats", "Answerable / unanswerable counts of a dataset");
    stats->add_option("dataset", sta.dataset, "SQuAD dataset")->required();
    stats->add_option("-o,--output", sta.output, "Stats JSON (default stdout)");
    add_common(stats);
    stats->callback([&] {
        primary_output = sta.output;
        action = [&] { cmd_stats(sta, common, manifest, out, err); };
    });

    SmoteArgs sma;
    auto* smote = app.add_subcommand("smote", "Oversample a minority class with SMOTE");
    smote->add_option("vectors", sma.vectors, "JSON with minority vectors and the majority count")->required();
    smote->add_option("--k", sma.k, "Nearest neighbours")->check(CLI::PositiveNumber);
    smote->add_option("--seed", sma.seed, "Sampling seed")->envname("QAFORGE_SEED");
    smote->add_option("-o,--output", sma.output, "Synthetic points JSON (default stdout)");
    add_common(smote);
    smote->callback([&] {
        primary_output = sma.output;
        action = [&] { cmd_smote(sma, common, manifest, out, err); };
    });

    std::string service_config;
    auto* serve = app.add_subcommand("serve", "Run the annotation service");
    serve->add_option("--config", service_config, "Service config (JSON)")->envname("QAFORGE_CONFIG");
    serve->callback([&] {
        action = [&] {
            service::serve(service::load_service_config(
                service_config.empty() ? std::nullopt : std::optional<fs::path>(service_config)));
        };
    });

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitConfig;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    manifest.command = command;
    const auto started = std::chrono::steady_clock::now();
    try {
        action();
        if (command != "serve") {
            const double seconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
            manifest.config["jobs"] = common.jobs;
            write_manifest(manifest_path(common, manifest, primary_output), manifest, seconds);
        }
    } catch (const ConfigError& e) {
        err << "qaforge " << command << ": configuration error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const PreconditionError& e) {
        err << "qaforge " << command << ": invalid arguments: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DataError& e) {
        err << "qaforge " << command << ": data error: " << e.what() << "\n";
        return kExitData;
    } catch (const fs::filesystem_error& e) {
        err << "qaforge " << command << ": " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        err << "qaforge " << command << ": " << e.what() << "\n";
        return 1;
    }
    return kExitOk;
}

}  // namespace qaforge

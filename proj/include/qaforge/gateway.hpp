#pragma once

#include <chrono>
#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

namespace qaforge {

enum class Capability { AnswerSelect, QuestionGen, Grammaticality, Qa, PosTag };

std::string_view to_string(Capability c);
Capability capability_from_string(std::string_view name);
// URL path segment under /v1/ for a capability.
std::string_view endpoint_path(Capability c);

struct EndpointConfig {
    Capability capability = Capability::Qa;
    std::string base_url;  // http://host:port or "stub:<name>"
    std::chrono::milliseconds timeout{10'000};
    int max_retries = 2;
    std::size_t max_in_flight = 8;

    bool is_stub() const { return base_url.rfind("stub:", 0) == 0; }
    std::string stub_name() const { return is_stub() ? base_url.substr(5) : std::string{}; }
};

// Transport, timeout or protocol failure talking to a model endpoint.
class GatewayError : public std::runtime_error {
public:
    GatewayError(Capability capability, std::string endpoint, const std::string& what);

    Capability capability() const { return capability_; }
    const std::string& endpoint() const { return endpoint_; }

private:
    Capability capability_;
    std::string endpoint_;
};

enum class UposTag { Verb, Aux, Propn, Noun, Det, Adj, Adv, Pron, Adp, Cconj, Num, Punct, Other };

std::string_view to_string(UposTag t);
UposTag upos_from_string(std::string_view s);

struct PosTag {
    std::string token;
    UposTag tag = UposTag::Other;
    bool operator==(const PosTag&) const = default;
};

// An answer candidate with its character offset into the full document.
struct AnswerSpan {
    std::string text;
    std::size_t start = 0;
    bool operator==(const AnswerSpan&) const = default;
};

enum class GrammaticalityLabel { Grammatical, Ungrammatical };

struct GrammaticalityResult {
    GrammaticalityLabel label = GrammaticalityLabel::Grammatical;
    double probability = 1.0;  // confidence of `label`

    double grammatical_probability() const {
        return label == GrammaticalityLabel::Grammatical ? probability : 1.0 - probability;
    }
    bool operator==(const GrammaticalityResult&) const = default;
};

// Character offsets; answer_text empty means the null answer.
struct QaPrediction {
    std::string answer_text;
    std::size_t start = 0;
    std::size_t end = 0;
    double score = 0.0;
    double null_score = 0.0;
    bool operator==(const QaPrediction&) const = default;
};

// ---------------------------------------------------------------------------
// Capability interfaces. Implementations must be safe for concurrent calls.

class AnswerSelector {
public:
    virtual ~AnswerSelector() = default;
    virtual std::vector<AnswerSpan> select(std::string_view sentence, std::string_view document) = 0;
};

class QuestionGenerator {
public:
    virtual ~QuestionGenerator() = default;
    virtual std::string generate(std::string_view prompt) = 0;
};

class GrammaticalityClassifier {
public:
    virtual ~GrammaticalityClassifier() = default;
    virtual GrammaticalityResult classify(std::string_view text) = 0;
};

class QuestionAnswerer {
public:
    virtual ~QuestionAnswerer() = default;
    virtual QaPrediction answer(std::string_view question, std::string_view context) = 0;
};

class PosTagger {
public:
    virtual ~PosTagger() = default;
    virtual std::vector<PosTag> tag(std::string_view text) = 0;
};

// ---------------------------------------------------------------------------
// Wire protocol (JSON bodies for POST /v1/<capability>).

namespace wire {

struct SelectAnswersRequest {
    std::string sentence;
    std::string document;
    bool operator==(const SelectAnswersRequest&) const = default;
};
struct SelectAnswersResponse {
    std::vector<AnswerSpan> candidates;
    bool operator==(const SelectAnswersResponse&) const = default;
};
struct GenerateQuestionRequest {
    std::string prompt;
    bool operator==(const GenerateQuestionRequest&) const = default;
};
struct GenerateQuestionResponse {
    std::string question;
    bool operator==(const GenerateQuestionResponse&) const = default;
};
struct GrammaticalityRequest {
    std::string text;
    bool operator==(const GrammaticalityRequest&) const = default;
};
using GrammaticalityResponse = GrammaticalityResult;
struct AnswerRequest {
    std::string question;
    std::string context;
    bool operator==(const AnswerRequest&) const = default;
};
using AnswerResponse = QaPrediction;
struct PosTagsRequest {
    std::string text;
    bool operator==(const PosTagsRequest&) const = default;
};
struct PosTagsResponse {
    std::vector<PosTag> tags;
    bool operator==(const PosTagsResponse&) const = default;
};

void to_json(nlohmann::json& j, const SelectAnswersRequest& m);
void from_json(const nlohmann::json& j, SelectAnswersRequest& m);
void to_json(nlohmann::json& j, const SelectAnswersResponse& m);
void from_json(const nlohmann::json& j, SelectAnswersResponse& m);
void to_json(nlohmann::json& j, const GenerateQuestionRequest& m);
void from_json(const nlohmann::json& j, GenerateQuestionRequest& m);
void to_json(nlohmann::json& j, const GenerateQuestionResponse& m);
void from_json(const nlohmann::json& j, GenerateQuestionResponse& m);
void to_json(nlohmann::json& j, const GrammaticalityRequest& m);
void from_json(const nlohmann::json& j, GrammaticalityRequest& m);
void to_json(nlohmann::json& j, const AnswerRequest& m);
void from_json(const nlohmann::json& j, AnswerRequest& m);
void to_json(nlohmann::json& j, const PosTagsRequest& m);
void from_json(const nlohmann::json& j, PosTagsRequest& m);
void to_json(nlohmann::json& j, const PosTagsResponse& m);
void from_json(const nlohmann::json& j, PosTagsResponse& m);

}  // namespace wire

void to_json(nlohmann::json& j, const AnswerSpan& m);
void from_json(const nlohmann::json& j, AnswerSpan& m);
void to_json(nlohmann::json& j, const GrammaticalityResult& m);
void from_json(const nlohmann::json& j, GrammaticalityResult& m);
void to_json(nlohmann::json& j, const QaPrediction& m);
void from_json(const nlohmann::json& j, QaPrediction& m);
void to_json(nlohmann::json& j, const PosTag& m);
void from_json(const nlohmann::json& j, PosTag& m);

// ---------------------------------------------------------------------------
// Deterministic in-process stubs.

namespace stubs {

// Closed-class lexicon plus capitalisation and suffix heuristics. Leading and
// trailing punctuation is split off each whitespace token.
class LexiconTagger final : public PosTagger {
public:
    struct Token {
        std::string text;
        std::size_t offset;
        UposTag tag;
    };
    std::vector<PosTag> tag(std::string_view text) override;
    std::vector<Token> tag_with_offsets(std::string_view text) const;
};

// Maximal PROPN runs from the lexicon tagger.
class ProperNounSelector final : public AnswerSelector {
public:
    std::vector<AnswerSpan> select(std::string_view sentence, std::string_view document) override;

private:
    LexiconTagger tagger_;
};

// "What is the <lowercased highlight>?"
class TemplateQuestionGenerator final : public QuestionGenerator {
public:
    std::string generate(std::string_view prompt) override;
};

// Looks the highlighted span up in a fixed table; falls back to the template.
class ScriptedQuestionGenerator final : public QuestionGenerator {
public:
    explicit ScriptedQuestionGenerator(std::map<std::string, std::string> by_highlight)
        : by_highlight_(std::move(by_highlight)) {}
    std::string generate(std::string_view prompt) override;

private:
    std::map<std::string, std::string> by_highlight_;
    TemplateQuestionGenerator fallback_;
};

class ConstantGrammaticality final : public GrammaticalityClassifier {
public:
    explicit ConstantGrammaticality(GrammaticalityResult result) : result_(result) {}
    GrammaticalityResult classify(std::string_view text) override;

private:
    GrammaticalityResult result_;
};

// Fewer than three whitespace tokens -> (ungrammatical, 0.9); otherwise (grammatical, 0.9).
class LengthHeuristicGrammaticality final : public GrammaticalityClassifier {
public:
    GrammaticalityResult classify(std::string_view text) override;
};

// (question, context) -> gold answer span, used by the oracle-family QA stubs.
class GoldTable {
public:
    void add(std::string question, std::string context, std::string answer, std::size_t start);
    const AnswerSpan* find(std::string_view question, std::string_view context) const;
    std::size_t size() const { return table_.size(); }

private:
    std::map<std::pair<std::string, std::string>, AnswerSpan, std::less<>> table_;
};

// Returns the gold span minus its last `drop_tokens` whitespace tokens.
// drop_tokens == 0 is the oracle. Unknown pairs get the null answer.
class OracleQa final : public QuestionAnswerer {
public:
    explicit OracleQa(std::shared_ptr<const GoldTable> gold, std::size_t drop_tokens = 0)
        : gold_(std::move(gold)), drop_tokens_(drop_tokens) {}
    QaPrediction answer(std::string_view question, std::string_view context) override;

private:
    std::shared_ptr<const GoldTable> gold_;
    std::size_t drop_tokens_;
};

class RefuserQa final : public QuestionAnswerer {
public:
    QaPrediction answer(std::string_view question, std::string_view context) override;
};

}  // namespace stubs

// Extracts the highlighted text from "generate question: ...<hl>X<hl>...".
// Throws PreconditionError unless the prompt has the prefix and exactly two markers.
std::string extract_highlight(std::string_view prompt);

// ---------------------------------------------------------------------------
// Uniform client. Every backend response is checked for offset validity
// before it is returned.

class ModelGateway {
public:
    ModelGateway() = default;
    ModelGateway(std::shared_ptr<AnswerSelector> selector, std::shared_ptr<QuestionGenerator> generator,
                 std::shared_ptr<GrammaticalityClassifier> grammaticality,
                 std::shared_ptr<QuestionAnswerer> qa, std::shared_ptr<PosTagger> tagger);

    std::vector<AnswerSpan> select_answers(std::string_view sentence, std::string_view document) const;
    std::string generate_question(std::string_view prompt) const;
    GrammaticalityResult classify_grammatical(std::string_view text) const;
    QaPrediction answer_question(std::string_view question, std::string_view context) const;
    std::vector<PosTag> tag_pos(std::string_view text) const;

    PosTagger* tagger() const { return tagger_.get(); }
    void set_selector(std::shared_ptr<AnswerSelector> s) { selector_ = std::move(s); }
    void set_generator(std::shared_ptr<QuestionGenerator> g) { generator_ = std::move(g); }
    void set_grammaticality(std::shared_ptr<GrammaticalityClassifier> g) { grammaticality_ = std::move(g); }
    void set_qa(std::shared_ptr<QuestionAnswerer> q) { qa_ = std::move(q); }
    void set_tagger(std::shared_ptr<PosTagger> t) { tagger_ = std::move(t); }

private:
    std::shared_ptr<AnswerSelector> selector_;
    std::shared_ptr<QuestionGenerator> generator_;
    std::shared_ptr<GrammaticalityClassifier> grammaticality_;
    std::shared_ptr<QuestionAnswerer> qa_;
    std::shared_ptr<PosTagger> tagger_;
};

// Stub names per capability:
//   select-answers     stub:proper-noun
//   generate-question  stub:template
//   grammaticality     stub:always-grammatical | stub:always-ungrammatical | stub:length-heuristic
//   answer             stub:oracle | stub:refuser | stub:corrupting[-N]   (oracle family needs `gold`)
//   pos-tags           stub:lexicon
// Anything not starting with "stub:" must be an http:// URL.
std::shared_ptr<AnswerSelector> make_selector(const EndpointConfig& cfg);
std::shared_ptr<QuestionGenerator> make_generator(const EndpointConfig& cfg);
std::shared_ptr<GrammaticalityClassifier> make_grammaticality(const EndpointConfig& cfg);
std::shared_ptr<QuestionAnswerer> make_qa(const EndpointConfig& cfg, std::shared_ptr<const stubs::GoldTable> gold = {});
std::shared_ptr<PosTagger> make_tagger(const EndpointConfig& cfg);

// Default stub wiring used by tests and `--stubs`.
ModelGateway make_stub_gateway(std::shared_ptr<const stubs::GoldTable> gold = {});

// Endpoint config file: {"endpoints": [{"capability": "...", "base_url": "...", "timeout_ms": N, "max_retries": N}]}
std::vector<EndpointConfig> parse_endpoint_configs(const nlohmann::json& j);
ModelGateway make_gateway(const std::vector<EndpointConfig>& configs,
                          std::shared_ptr<const stubs::GoldTable> gold = {});

}  // namespace qaforge

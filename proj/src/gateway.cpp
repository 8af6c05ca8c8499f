#include "qaforge/gateway.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <semaphore>
#include <set>
#include <thread>

#include <httplib.h>

#include "qaforge/corpus_filter.hpp"
#include "qaforge/errors.hpp"
#include "qaforge/utf8.hpp"

namespace qaforge {

namespace {

constexpr std::array<std::pair<Capability, std::string_view>, 5> kCapabilityNames{{
    {Capability::AnswerSelect, "select-answers"},
    {Capability::QuestionGen, "generate-question"},
    {Capability::Grammaticality, "grammaticality"},
    {Capability::Qa, "answer"},
    {Capability::PosTag, "pos-tags"},
}};

constexpr std::array<std::pair<UposTag, std::string_view>, 13> kUposNames{{
    {UposTag::Verb, "VERB"},
    {UposTag::Aux, "AUX"},
    {UposTag::Propn, "PROPN"},
    {UposTag::Noun, "NOUN"},
    {UposTag::Det, "DET"},
    {UposTag::Adj, "ADJ"},
    {UposTag::Adv, "ADV"},
    {UposTag::Pron, "PRON"},
    {UposTag::Adp, "ADP"},
    {UposTag::Cconj, "CCONJ"},
    {UposTag::Num, "NUM"},
    {UposTag::Punct, "PUNCT"},
    {UposTag::Other, "X"},
}};

constexpr std::string_view kPromptPrefix = "generate question: ";
constexpr std::string_view kHighlight = "<hl>";

std::string lowercase(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

bool ends_with(std::string_view s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

bool is_ascii_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }

const std::set<std::string, std::less<>>& determiners() {
    static const std::set<std::string, std::less<>> s{"the", "a", "an", "this", "that", "these", "those", "each",
                                                      "every", "some", "any", "no", "all", "both", "another"};
    return s;
}
const std::set<std::string, std::less<>>& auxiliaries() {
    static const std::set<std::string, std::less<>> s{"is",   "are",   "was",   "were",  "be",     "been",
                                                      "being", "am",   "has",   "have",  "had",    "do",
                                                      "does", "did",   "will",  "would", "shall",  "should",
                                                      "can",  "could", "may",   "might", "must"};
    return s;
}
const std::set<std::string, std::less<>>& pronouns() {
    static const std::set<std::string, std::less<>> s{"i",   "you",  "he",    "she", "it",    "we",   "they",
                                                      "me",  "him",  "her",   "us",  "them",  "its",  "their",
                                                      "our", "his",  "my",    "your", "who",  "what", "which",
                                                      "we've", "we're", "it's"};
    return s;
}
const std::set<std::string, std::less<>>& adpositions() {
    static const std::set<std::string, std::less<>> s{"of",     "in",      "on",     "at",    "to",      "for",
                                                      "with",   "by",      "from",   "about", "as",      "into",
                                                      "over",   "under",   "after",  "before", "between", "through",
                                                      "during", "without", "within", "according"};
    return s;
}
const std::set<std::string, std::less<>>& conjunctions() {
    static const std::set<std::string, std::less<>> s{"and", "or", "but", "nor"};
    return s;
}
const std::set<std::string, std::less<>>& adverbs() {
    static const std::set<std::string, std::less<>> s{"not", "very", "also", "too",  "just", "only", "still",
                                                      "already", "fully", "now", "then", "here", "there", "so"};
    return s;
}
const std::set<std::string, std::less<>>& adjectives() {
    static const std::set<std::string, std::less<>> s{"quarterly", "monthly", "yearly", "weekly", "daily",
                                                      "early",     "new",     "strong", "major",  "first",
                                                      "latest",    "global",  "good",   "large",  "small"};
    return s;
}
const std::set<std::string, std::less<>>& verbs() {
    static const std::set<std::string, std::less<>> s{"announce", "announces", "acquire", "acquires", "say",
                                                      "says",     "said",      "reports",  "launch",
                                                      "launches", "assumes",   "assume",  "ensure",   "ensures",
                                                      "make",     "makes",     "made",    "tick",     "sold",
                                                      "grew",     "rose",      "fell",    "won",      "took"};
    return s;
}

UposTag tag_word(std::string_view word) {
    const std::string lower = lowercase(word);
    if (determiners().contains(lower)) return UposTag::Det;
    if (auxiliaries().contains(lower)) return UposTag::Aux;
    if (pronouns().contains(lower)) return UposTag::Pron;
    if (adpositions().contains(lower)) return UposTag::Adp;
    if (conjunctions().contains(lower)) return UposTag::Cconj;
    if (adverbs().contains(lower)) return UposTag::Adv;
    if (std::all_of(word.begin(), word.end(),
                    [](char c) { return std::isdigit(static_cast<unsigned char>(c)) || c == ',' || c == '.'; })) {
        return UposTag::Num;
    }
    if (std::isupper(static_cast<unsigned char>(word.front()))) return UposTag::Propn;
    if (verbs().contains(lower)) return UposTag::Verb;
    if (lower.size() > 4 && (ends_with(lower, "ed") || ends_with(lower, "ing"))) return UposTag::Verb;
    if (ends_with(lower, "ize") || ends_with(lower, "ise") || ends_with(lower, "izes") || ends_with(lower, "ises")) {
        return UposTag::Verb;
    }
    if (adjectives().contains(lower)) return UposTag::Adj;
    for (std::string_view suffix : {"ous", "ive", "ful", "able", "ible", "less", "ical"}) {
        if (lower.size() > suffix.size() + 2 && ends_with(lower, suffix)) return UposTag::Adj;
    }
    return UposTag::Noun;
}

std::string endpoint_label(const EndpointConfig& cfg) {
    return cfg.base_url + "/v1/" + std::string(endpoint_path(cfg.capability));
}

bool finite_probability(double p) { return std::isfinite(p) && p >= 0.0 && p <= 1.0; }

// JSON POST with bounded concurrency, timeouts and exponential backoff.
class HttpTransport {
public:
    explicit HttpTransport(EndpointConfig cfg)
        : cfg_(std::move(cfg)),
          slots_(static_cast<std::ptrdiff_t>(std::clamp<std::size_t>(cfg_.max_in_flight, 1, 1024))) {
        if (cfg_.timeout.count() <= 0) throw ConfigError("endpoint timeout must be positive");
        if (cfg_.max_retries < 0) throw ConfigError("endpoint max_retries must be >= 0");
        if (cfg_.base_url.rfind("http://", 0) != 0) {
            throw ConfigError("unsupported endpoint URL '" + cfg_.base_url + "' (expected http://host:port or stub:<name>)");
        }
        const std::string rest = cfg_.base_url.substr(7);
        if (rest.empty() || rest.front() == ':' || rest.front() == '/') {
            throw ConfigError("endpoint URL '" + cfg_.base_url + "' has no host");
        }
    }

    nlohmann::json post(const nlohmann::json& body) {
        const std::string path = "/v1/" + std::string(endpoint_path(cfg_.capability));
        const std::string payload = body.dump();
        std::string last_error;
        slots_.acquire();
        struct Release {
            std::counting_semaphore<1024>& s;
            ~Release() { s.release(); }
        } release{slots_};
        for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
            if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(50) * (1 << (attempt - 1)));
            httplib::Client client(cfg_.base_url);
            const auto seconds = std::chrono::duration_cast<std::chrono::microseconds>(cfg_.timeout);
            client.set_connection_timeout(0, seconds.count());
            client.set_read_timeout(0, seconds.count());
            client.set_write_timeout(0, seconds.count());
            auto res = client.Post(path, payload, "application/json");
            if (!res) {
                last_error = "transport error: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status >= 200 && res->status < 300) {
                try {
                    return nlohmann::json::parse(res->body);
                } catch (const nlohmann::json::parse_error& e) {
                    throw GatewayError(cfg_.capability, endpoint_label(cfg_), std::string("malformed response: ") + e.what());
                }
            }
            last_error = "HTTP " + std::to_string(res->status);
            if (res->status < 500) break;  // client errors are not retried
        }
        throw GatewayError(cfg_.capability, endpoint_label(cfg_), last_error);
    }

    template <typename T>
    T call(const nlohmann::json& body) {
        nlohmann::json j = post(body);
        try {
            return j.get<T>();
        } catch (const nlohmann::json::exception& e) {
            throw GatewayError(cfg_.capability, endpoint_label(cfg_), std::string("response schema: ") + e.what());
        }
    }

    Capability capability() const { return cfg_.capability; }
    std::string label() const { return endpoint_label(cfg_); }

private:
    EndpointConfig cfg_;
    std::counting_semaphore<1024> slots_;
};

class RemoteSelector final : public AnswerSelector {
public:
    explicit RemoteSelector(EndpointConfig cfg) : http_(std::move(cfg)) {}
    std::vector<AnswerSpan> select(std::string_view sentence, std::string_view document) override {
        wire::SelectAnswersRequest req{std::string(sentence), std::string(document)};
        auto spans = http_.call<wire::SelectAnswersResponse>(req).candidates;
        for (auto& s : spans) s.start = to_byte_offset(document, s.start);
        return spans;
    }

private:
    std::size_t to_byte_offset(std::string_view text, std::size_t chars) const {
        auto b = utf8::byte_offset(text, chars);
        if (!b) throw GatewayError(http_.capability(), http_.label(), "offset beyond end of text");
        return *b;
    }
    HttpTransport http_;
};

class RemoteGenerator final : public QuestionGenerator {
public:
    explicit RemoteGenerator(EndpointConfig cfg) : http_(std::move(cfg)) {}
    std::string generate(std::string_view prompt) override {
        wire::GenerateQuestionRequest req{std::string(prompt)};
        return http_.call<wire::GenerateQuestionResponse>(req).question;
    }

private:
    HttpTransport http_;
};

class RemoteGrammaticality final : public GrammaticalityClassifier {
public:
    explicit RemoteGrammaticality(EndpointConfig cfg) : http_(std::move(cfg)) {}
    GrammaticalityResult classify(std::string_view text) override {
        wire::GrammaticalityRequest req{std::string(text)};
        return http_.call<wire::GrammaticalityResponse>(req);
    }

private:
    HttpTransport http_;
};

class RemoteQa final : public QuestionAnswerer {
public:
    explicit RemoteQa(EndpointConfig cfg) : http_(std::move(cfg)) {}
    QaPrediction answer(std::string_view question, std::string_view context) override {
        wire::AnswerRequest req{std::string(question), std::string(context)};
        auto p = http_.call<wire::AnswerResponse>(req);
        const auto start = utf8::byte_offset(context, p.start);
        const auto end = utf8::byte_offset(context, p.end);
        if (!start || !end) throw GatewayError(http_.capability(), http_.label(), "offset beyond end of context");
        p.start = *start;
        p.end = *end;
        return p;
    }

private:
    HttpTransport http_;
};

class RemoteTagger final : public PosTagger {
public:
    explicit RemoteTagger(EndpointConfig cfg) : http_(std::move(cfg)) {}
    std::vector<PosTag> tag(std::string_view text) override {
        wire::PosTagsRequest req{std::string(text)};
        return http_.call<wire::PosTagsResponse>(req).tags;
    }

private:
    HttpTransport http_;
};

[[noreturn]] void unknown_stub(const EndpointConfig& cfg) {
    throw ConfigError("unknown stub '" + cfg.base_url + "' for capability " + std::string(to_string(cfg.capability)));
}

}  // namespace

// ---------------------------------------------------------------------------

std::string_view to_string(Capability c) {
    for (const auto& [cap, name] : kCapabilityNames) {
        if (cap == c) return name;
    }
    return "unknown";
}

Capability capability_from_string(std::string_view name) {
    for (const auto& [cap, n] : kCapabilityNames) {
        if (n == name) return cap;
    }
    if (name == "ANSWER_SELECT") return Capability::AnswerSelect;
    if (name == "QUESTION_GEN") return Capability::QuestionGen;
    if (name == "GRAMMATICALITY") return Capability::Grammaticality;
    if (name == "QA") return Capability::Qa;
    if (name == "POS_TAG") return Capability::PosTag;
    throw ConfigError("unknown capability '" + std::string(name) + "'");
}

std::string_view endpoint_path(Capability c) { return to_string(c); }

GatewayError::GatewayError(Capability capability, std::string endpoint, const std::string& what)
    : std::runtime_error(std::string(to_string(capability)) + " @ " + endpoint + ": " + what),
      capability_(capability),
      endpoint_(std::move(endpoint)) {}

std::string_view to_string(UposTag t) {
    for (const auto& [tag, name] : kUposNames) {
        if (tag == t) return name;
    }
    return "X";
}

UposTag upos_from_string(std::string_view s) {
    for (const auto& [tag, name] : kUposNames) {
        if (name == s) return tag;
    }
    return UposTag::Other;
}

// ---------------------------------------------------------------------------
// JSON codecs

void to_json(nlohmann::json& j, const AnswerSpan& m) { j = {{"text", m.text}, {"start", m.start}}; }
void from_json(const nlohmann::json& j, AnswerSpan& m) {
    j.at("text").get_to(m.text);
    j.at("start").get_to(m.start);
}

void to_json(nlohmann::json& j, const GrammaticalityResult& m) {
    j = {{"label", m.label == GrammaticalityLabel::Grammatical ? "grammatical" : "ungrammatical"},
         {"prob", m.probability}};
}
void from_json(const nlohmann::json& j, GrammaticalityResult& m) {
    const auto label = j.at("label").get<std::string>();
    if (label == "grammatical") {
        m.label = GrammaticalityLabel::Grammatical;
    } else if (label == "ungrammatical") {
        m.label = GrammaticalityLabel::Ungrammatical;
    } else {
        throw nlohmann::json::other_error::create(501, "unknown grammaticality label '" + label + "'", &j);
    }
    j.at("prob").get_to(m.probability);
}

void to_json(nlohmann::json& j, const QaPrediction& m) {
    j = {{"text", m.answer_text}, {"start", m.start}, {"end", m.end}, {"score", m.score}, {"null_score", m.null_score}};
}
void from_json(const nlohmann::json& j, QaPrediction& m) {
    j.at("text").get_to(m.answer_text);
    j.at("start").get_to(m.start);
    j.at("end").get_to(m.end);
    j.at("score").get_to(m.score);
    j.at("null_score").get_to(m.null_score);
}

void to_json(nlohmann::json& j, const PosTag& m) { j = {{"token", m.token}, {"tag", to_string(m.tag)}}; }
void from_json(const nlohmann::json& j, PosTag& m) {
    j.at("token").get_to(m.token);
    m.tag = upos_from_string(j.at("tag").get<std::string>());
}

namespace wire {

void to_json(nlohmann::json& j, const SelectAnswersRequest& m) { j = {{"sentence", m.sentence}, {"document", m.document}}; }
void from_json(const nlohmann::json& j, SelectAnswersRequest& m) {
    j.at("sentence").get_to(m.sentence);
    j.at("document").get_to(m.document);
}
void to_json(nlohmann::json& j, const SelectAnswersResponse& m) { j = {{"candidates", m.candidates}}; }
void from_json(const nlohmann::json& j, SelectAnswersResponse& m) { j.at("candidates").get_to(m.candidates); }
void to_json(nlohmann::json& j, const GenerateQuestionRequest& m) { j = {{"prompt", m.prompt}}; }
void from_json(const nlohmann::json& j, GenerateQuestionRequest& m) { j.at("prompt").get_to(m.prompt); }
void to_json(nlohmann::json& j, const GenerateQuestionResponse& m) { j = {{"question", m.question}}; }
void from_json(const nlohmann::json& j, GenerateQuestionResponse& m) { j.at("question").get_to(m.question); }
void to_json(nlohmann::json& j, const GrammaticalityRequest& m) { j = {{"text", m.text}}; }
void from_json(const nlohmann::json& j, GrammaticalityRequest& m) { j.at("text").get_to(m.text); }
void to_json(nlohmann::json& j, const AnswerRequest& m) { j = {{"question", m.question}, {"context", m.context}}; }
void from_json(const nlohmann::json& j, AnswerRequest& m) {
    j.at("question").get_to(m.question);
    j.at("context").get_to(m.context);
}
void to_json(nlohmann::json& j, const PosTagsRequest& m) { j = {{"text", m.text}}; }
void from_json(const nlohmann::json& j, PosTagsRequest& m) { j.at("text").get_to(m.text); }
void to_json(nlohmann::json& j, const PosTagsResponse& m) { j = {{"tags", m.tags}}; }
void from_json(const nlohmann::json& j, PosTagsResponse& m) { j.at("tags").get_to(m.tags); }

}  // namespace wire

// ---------------------------------------------------------------------------
// Stubs

std::string extract_highlight(std::string_view prompt) {
    if (prompt.substr(0, kPromptPrefix.size()) != kPromptPrefix) {
        throw PreconditionError("question-generation prompt must start with \"generate question: \"");
    }
    std::vector<std::size_t> marks;
    for (std::size_t pos = prompt.find(kHighlight); pos != std::string_view::npos;
         pos = prompt.find(kHighlight, pos + kHighlight.size())) {
        marks.push_back(pos);
    }
    if (marks.size() != 2) {
        throw PreconditionError("question-generation prompt must contain exactly two <hl> markers, found " +
                                std::to_string(marks.size()));
    }
    const std::size_t begin = marks[0] + kHighlight.size();
    if (marks[1] == begin) throw PreconditionError("question-generation prompt highlights an empty span");
    return std::string(prompt.substr(begin, marks[1] - begin));
}

namespace stubs {

std::vector<LexiconTagger::Token> LexiconTagger::tag_with_offsets(std::string_view text) const {
    std::vector<Token> out;
    std::size_t i = 0;
    const auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
    while (i < text.size()) {
        while (i < text.size() && is_space(text[i])) ++i;
        std::size_t b = i;
        while (i < text.size() && !is_space(text[i])) ++i;
        std::size_t e = i;
        if (e == b) continue;
        std::vector<Token> trailing;
        while (b < e && is_ascii_punct(text[b])) {
            out.push_back({std::string(1, text[b]), b, UposTag::Punct});
            ++b;
        }
        while (e > b && is_ascii_punct(text[e - 1])) {
            trailing.push_back({std::string(1, text[e - 1]), e - 1, UposTag::Punct});
            --e;
        }
        if (e > b) {
            const std::string_view word = text.substr(b, e - b);
            out.push_back({std::string(word), b, tag_word(word)});
        }
        out.insert(out.end(), trailing.rbegin(), trailing.rend());
    }
    return out;
}

std::vector<PosTag> LexiconTagger::tag(std::string_view text) {
    std::vector<PosTag> tags;
    for (auto& t : tag_with_offsets(text)) tags.push_back({std::move(t.text), t.tag});
    return tags;
}

std::vector<AnswerSpan> ProperNounSelector::select(std::string_view sentence, std::string_view document) {
    std::vector<AnswerSpan> spans;
    const std::size_t base = document.find(sentence);
    if (sentence.empty() || base == std::string_view::npos) return spans;
    const auto tokens = tagger_.tag_with_offsets(sentence);
    std::size_t i = 0;
    while (i < tokens.size()) {
        if (tokens[i].tag != UposTag::Propn) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j + 1 < tokens.size() && tokens[j + 1].tag == UposTag::Propn) ++j;
        const std::size_t begin = tokens[i].offset;
        const std::size_t end = tokens[j].offset + tokens[j].text.size();
        spans.push_back({std::string(sentence.substr(begin, end - begin)), base + begin});
        i = j + 1;
    }
    return spans;
}

std::string TemplateQuestionGenerator::generate(std::string_view prompt) {
    return "What is the " + lowercase(extract_highlight(prompt)) + "?";
}

std::string ScriptedQuestionGenerator::generate(std::string_view prompt) {
    const std::string highlight = extract_highlight(prompt);
    if (auto it = by_highlight_.find(highlight); it != by_highlight_.end()) return it->second;
    return fallback_.generate(prompt);
}

GrammaticalityResult ConstantGrammaticality::classify(std::string_view) { return result_; }

GrammaticalityResult LengthHeuristicGrammaticality::classify(std::string_view text) {
    if (tokenize_whitespace(text).size() < 3) return {GrammaticalityLabel::Ungrammatical, 0.9};
    return {GrammaticalityLabel::Grammatical, 0.9};
}

void GoldTable::add(std::string question, std::string context, std::string answer, std::size_t start) {
    table_[{std::move(question), std::move(context)}] = AnswerSpan{std::move(answer), start};
}

const AnswerSpan* GoldTable::find(std::string_view question, std::string_view context) const {
    auto it = table_.find(std::pair<std::string, std::string>(question, context));
    return it == table_.end() ? nullptr : &it->second;
}

QaPrediction OracleQa::answer(std::string_view question, std::string_view context) {
    const AnswerSpan* gold = gold_ ? gold_->find(question, context) : nullptr;
    if (gold == nullptr || gold->text.empty()) return {"", 0, 0, 0.0, 1.0};
    // Keep the prefix of the gold span covering all but its last drop_tokens tokens.
    std::vector<std::size_t> token_ends;
    const std::string& text = gold->text;
    for (std::size_t i = 0; i < text.size();) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t j = i;
        while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
        if (j > i) token_ends.push_back(j);
        i = j;
    }
    if (drop_tokens_ >= token_ends.size()) return {"", 0, 0, 0.0, 1.0};
    const std::size_t len = drop_tokens_ == 0 ? text.size() : token_ends[token_ends.size() - 1 - drop_tokens_];
    return {text.substr(0, len), gold->start, gold->start + len, 1.0, 0.0};
}

QaPrediction RefuserQa::answer(std::string_view, std::string_view) { return {"", 0, 0, 0.0, 1.0}; }

}  // namespace stubs

// ---------------------------------------------------------------------------
// Gateway

ModelGateway::ModelGateway(std::shared_ptr<AnswerSelector> selector, std::shared_ptr<QuestionGenerator> generator,
                           std::shared_ptr<GrammaticalityClassifier> grammaticality,
                           std::shared_ptr<QuestionAnswerer> qa, std::shared_ptr<PosTagger> tagger)
    : selector_(std::move(selector)),
      generator_(std::move(generator)),
      grammaticality_(std::move(grammaticality)),
      qa_(std::move(qa)),
      tagger_(std::move(tagger)) {}

std::vector<AnswerSpan> ModelGateway::select_answers(std::string_view sentence, std::string_view document) const {
    if (!selector_) throw ConfigError("no backend configured for capability select-answers");
    if (document.find(sentence) == std::string_view::npos) {
        throw PreconditionError("sentence is not a substring of the document");
    }
    if (sentence.empty()) return {};
    auto spans = selector_->select(sentence, document);
    for (const auto& s : spans) {
        if (s.text.empty() || s.start > document.size() || document.substr(s.start, s.text.size()) != s.text) {
            throw GatewayError(Capability::AnswerSelect, "select-answers",
                               "candidate \"" + s.text + "\" does not match the document at offset " +
                                   std::to_string(s.start));
        }
    }
    return spans;
}

std::string ModelGateway::generate_question(std::string_view prompt) const {
    if (!generator_) throw ConfigError("no backend configured for capability generate-question");
    extract_highlight(prompt);
    std::string q = generator_->generate(prompt);
    if (trim(q).empty()) throw GatewayError(Capability::QuestionGen, "generate-question", "empty question");
    return q;
}

GrammaticalityResult ModelGateway::classify_grammatical(std::string_view text) const {
    if (!grammaticality_) throw ConfigError("no backend configured for capability grammaticality");
    if (text.empty()) throw PreconditionError("grammaticality input must be non-empty");
    const auto r = grammaticality_->classify(text);
    if (!finite_probability(r.probability)) {
        throw GatewayError(Capability::Grammaticality, "grammaticality", "probability outside [0,1]");
    }
    return r;
}

QaPrediction ModelGateway::answer_question(std::string_view question, std::string_view context) const {
    if (!qa_) throw ConfigError("no backend configured for capability answer");
    if (question.empty() || context.empty()) throw PreconditionError("question and context must be non-empty");
    auto p = qa_->answer(question, context);
    if (!std::isfinite(p.score) || !std::isfinite(p.null_score)) {
        throw GatewayError(Capability::Qa, "answer", "non-finite score");
    }
    if (!p.answer_text.empty()) {
        if (p.end != p.start + p.answer_text.size() || p.end > context.size() ||
            context.substr(p.start, p.end - p.start) != p.answer_text) {
            throw GatewayError(Capability::Qa, "answer",
                               "span [" + std::to_string(p.start) + "," + std::to_string(p.end) +
                                   ") does not index answer \"" + p.answer_text + "\"");
        }
    }
    return p;
}

std::vector<PosTag> ModelGateway::tag_pos(std::string_view text) const {
    if (!tagger_) throw ConfigError("no backend configured for capability pos-tags");
    return tagger_->tag(text);
}

std::shared_ptr<AnswerSelector> make_selector(const EndpointConfig& cfg) {
    if (!cfg.is_stub()) return std::make_shared<RemoteSelector>(cfg);
    if (cfg.stub_name() == "proper-noun") return std::make_shared<stubs::ProperNounSelector>();
    unknown_stub(cfg);
}

std::shared_ptr<QuestionGenerator> make_generator(const EndpointConfig& cfg) {
    if (!cfg.is_stub()) return std::make_shared<RemoteGenerator>(cfg);
    if (cfg.stub_name() == "template") return std::make_shared<stubs::TemplateQuestionGenerator>();
    unknown_stub(cfg);
}

std::shared_ptr<GrammaticalityClassifier> make_grammaticality(const EndpointConfig& cfg) {
    if (!cfg.is_stub()) return std::make_shared<RemoteGrammaticality>(cfg);
    const std::string name = cfg.stub_name();
    if (name == "always-grammatical") {
        return std::make_shared<stubs::ConstantGrammaticality>(
            GrammaticalityResult{GrammaticalityLabel::Grammatical, 1.0});
    }
    if (name == "always-ungrammatical") {
        return std::make_shared<stubs::ConstantGrammaticality>(
            GrammaticalityResult{GrammaticalityLabel::Ungrammatical, 1.0});
    }
    if (name == "length-heuristic") return std::make_shared<stubs::LengthHeuristicGrammaticality>();
    unknown_stub(cfg);
}

std::shared_ptr<QuestionAnswerer> make_qa(const EndpointConfig& cfg, std::shared_ptr<const stubs::GoldTable> gold) {
    if (!cfg.is_stub()) return std::make_shared<RemoteQa>(cfg);
    const std::string name = cfg.stub_name();
    if (name == "refuser") return std::make_shared<stubs::RefuserQa>();
    std::size_t drop = 0;
    if (name == "oracle") {
        drop = 0;
    } else if (name == "corrupting") {
        drop = 1;
    } else if (name.rfind("corrupting-", 0) == 0) {
        try {
            drop = std::stoul(name.substr(11));
        } catch (const std::exception&) {
            unknown_stub(cfg);
        }
    } else {
        unknown_stub(cfg);
    }
    if (!gold) throw ConfigError("stub '" + cfg.base_url + "' needs a gold table");
    return std::make_shared<stubs::OracleQa>(std::move(gold), drop);
}

std::shared_ptr<PosTagger> make_tagger(const EndpointConfig& cfg) {
    if (!cfg.is_stub()) return std::make_shared<RemoteTagger>(cfg);
    if (cfg.stub_name() == "lexicon") return std::make_shared<stubs::LexiconTagger>();
    unknown_stub(cfg);
}

ModelGateway make_stub_gateway(std::shared_ptr<const stubs::GoldTable> gold) {
    ModelGateway g(std::make_shared<stubs::ProperNounSelector>(), std::make_shared<stubs::TemplateQuestionGenerator>(),
                   std::make_shared<stubs::ConstantGrammaticality>(
                       GrammaticalityResult{GrammaticalityLabel::Grammatical, 1.0}),
                   nullptr, std::make_shared<stubs::LexiconTagger>());
    if (gold) {
        g.set_qa(std::make_shared<stubs::OracleQa>(std::move(gold), 0));
    } else {
        g.set_qa(std::make_shared<stubs::RefuserQa>());
    }
    return g;
}

std::vector<EndpointConfig> parse_endpoint_configs(const nlohmann::json& j) {
    std::vector<EndpointConfig> out;
    try {
        const auto& arr = j.at("endpoints");
        if (!arr.is_array()) throw ConfigError("\"endpoints\" must be an array");
        for (const auto& e : arr) {
            EndpointConfig cfg;
            cfg.capability = capability_from_string(e.at("capability").get<std::string>());
            cfg.base_url = e.at("base_url").get<std::string>();
            cfg.timeout = std::chrono::milliseconds(e.value("timeout_ms", 10'000));
            cfg.max_retries = e.value("max_retries", 2);
            cfg.max_in_flight = e.value("max_in_flight", std::size_t{8});
            if (cfg.timeout.count() <= 0) throw ConfigError("timeout_ms must be positive");
            if (cfg.max_retries < 0) throw ConfigError("max_retries must be >= 0");
            out.push_back(std::move(cfg));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("endpoint config: ") + e.what());
    }
    return out;
}

ModelGateway make_gateway(const std::vector<EndpointConfig>& configs, std::shared_ptr<const stubs::GoldTable> gold) {
    ModelGateway g;
    for (const auto& cfg : configs) {
        switch (cfg.capability) {
            case Capability::AnswerSelect: g.set_selector(make_selector(cfg)); break;
            case Capability::QuestionGen: g.set_generator(make_generator(cfg)); break;
            case Capability::Grammaticality: g.set_grammaticality(make_grammaticality(cfg)); break;
            case Capability::Qa: g.set_qa(make_qa(cfg, gold)); break;
            case Capability::PosTag: g.set_tagger(make_tagger(cfg)); break;
        }
    }
    return g;
}

}  // namespace qaforge

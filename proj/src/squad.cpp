#include "qaforge/squad.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "qaforge/errors.hpp"
#include "qaforge/rng.hpp"
#include "qaforge/utf8.hpp"

namespace qaforge {

namespace {

[[noreturn]] void schema_error(const std::string& path, const std::string& what) {
    throw DataError("SQuAD schema violation at " + (path.empty() ? std::string("/") : path) + ": " + what);
}

const nlohmann::json& field(const nlohmann::json& obj, const std::string& path, const char* key) {
    if (!obj.is_object()) schema_error(path, "expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) schema_error(path, std::string("missing required key \"") + key + "\"");
    return *it;
}

std::string string_field(const nlohmann::json& obj, const std::string& path, const char* key) {
    const auto& v = field(obj, path, key);
    if (!v.is_string()) schema_error(path + "/" + key, "expected a string");
    return v.get<std::string>();
}

const nlohmann::json& array_field(const nlohmann::json& obj, const std::string& path, const char* key) {
    const auto& v = field(obj, path, key);
    if (!v.is_array()) schema_error(path + "/" + key, "expected an array");
    return v;
}

nlohmann::json extras(const nlohmann::json& obj, std::initializer_list<const char*> known) {
    nlohmann::json out = nlohmann::json::object();
    for (const auto& [k, v] : obj.items()) {
        if (std::none_of(known.begin(), known.end(), [&](const char* name) { return k == name; })) out[k] = v;
    }
    return out;
}

std::vector<SquadAnswer> parse_answers(const nlohmann::json& arr, const std::string& path, const std::string& context,
                                       bool check_span) {
    std::vector<SquadAnswer> answers;
    for (std::size_t i = 0; i < arr.size(); ++i) {
        const std::string p = path + "/" + std::to_string(i);
        SquadAnswer a;
        a.text = string_field(arr[i], p, "text");
        const auto& start = field(arr[i], p, "answer_start");
        if (!start.is_number_integer() || start.get<long long>() < 0) {
            schema_error(p + "/answer_start", "expected a non-negative integer");
        }
        const auto byte = utf8::byte_offset(context, start.get<std::size_t>());
        if (!byte) schema_error(p + "/answer_start", "offset beyond the end of the context");
        if (check_span && context.compare(*byte, a.text.size(), a.text) != 0) {
            schema_error(p, "answer text \"" + a.text + "\" does not occur at answer_start");
        }
        a.answer_start = *byte;
        a.extra = extras(arr[i], {"text", "answer_start"});
        answers.push_back(std::move(a));
    }
    return answers;
}

nlohmann::json answers_to_json(const std::vector<SquadAnswer>& answers, const std::string& context) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& a : answers) {
        nlohmann::json j = a.extra;
        j["text"] = a.text;
        j["answer_start"] = utf8::char_offset(context, a.answer_start);
        arr.push_back(std::move(j));
    }
    return arr;
}

}  // namespace

std::size_t SquadDataset::question_count() const {
    std::size_t n = 0;
    for (const auto& a : articles)
        for (const auto& p : a.paragraphs) n += p.qas.size();
    return n;
}

SquadDataset parse_squad(const nlohmann::json& j) {
    SquadDataset d;
    if (!j.is_object()) schema_error("", "expected an object");
    if (j.contains("version")) {
        if (!j["version"].is_string()) schema_error("/version", "expected a string");
        d.version = j["version"].get<std::string>();
    }
    d.extra = extras(j, {"version", "data"});
    const auto& data = array_field(j, "", "data");
    std::set<std::string> ids;
    for (std::size_t ai = 0; ai < data.size(); ++ai) {
        const std::string apath = "/data/" + std::to_string(ai);
        const auto& aj = data[ai];
        Article article;
        article.title = aj.is_object() && aj.contains("title") && aj["title"].is_string() ? aj["title"].get<std::string>()
                                                                                         : std::string{};
        const auto& paragraphs = array_field(aj, apath, "paragraphs");
        article.extra = extras(aj, {"title", "paragraphs"});
        for (std::size_t pi = 0; pi < paragraphs.size(); ++pi) {
            const std::string ppath = apath + "/paragraphs/" + std::to_string(pi);
            const auto& pj = paragraphs[pi];
            Paragraph para;
            para.context = string_field(pj, ppath, "context");
            para.extra = extras(pj, {"context", "qas"});
            const auto& qas = array_field(pj, ppath, "qas");
            for (std::size_t qi = 0; qi < qas.size(); ++qi) {
                const std::string qpath = ppath + "/qas/" + std::to_string(qi);
                const auto& qj = qas[qi];
                QaItem qa;
                qa.id = string_field(qj, qpath, "id");
                qa.question = string_field(qj, qpath, "question");
                if (qj.contains("is_impossible")) {
                    if (!qj["is_impossible"].is_boolean()) schema_error(qpath + "/is_impossible", "expected a boolean");
                    qa.is_impossible = qj["is_impossible"].get<bool>();
                }
                qa.answers = parse_answers(array_field(qj, qpath, "answers"), qpath + "/answers", para.context, true);
                if (qa.is_impossible && !qa.answers.empty()) {
                    schema_error(qpath + "/answers", "is_impossible is true but answers is non-empty");
                }
                if (!qa.is_impossible && qa.answers.empty()) {
                    schema_error(qpath + "/answers", "answerable question without answers");
                }
                if (qj.contains("plausible_answers")) {
                    // Plausible answers are not always verbatim upstream.
                    qa.plausible_answers = parse_answers(array_field(qj, qpath, "plausible_answers"),
                                                         qpath + "/plausible_answers", para.context, false);
                }
                if (!ids.insert(qa.id).second) schema_error(qpath + "/id", "duplicate qa id \"" + qa.id + "\"");
                qa.extra = extras(qj, {"id", "question", "is_impossible", "answers", "plausible_answers"});
                para.qas.push_back(std::move(qa));
            }
            article.paragraphs.push_back(std::move(para));
        }
        d.articles.push_back(std::move(article));
    }
    return d;
}

nlohmann::json squad_to_json(const SquadDataset& d) {
    nlohmann::json root = d.extra;
    root["version"] = d.version;
    nlohmann::json data = nlohmann::json::array();
    for (const auto& a : d.articles) {
        nlohmann::json aj = a.extra;
        aj["title"] = a.title;
        nlohmann::json paragraphs = nlohmann::json::array();
        for (const auto& p : a.paragraphs) {
            nlohmann::json pj = p.extra;
            pj["context"] = p.context;
            nlohmann::json qas = nlohmann::json::array();
            for (const auto& q : p.qas) {
                nlohmann::json qj = q.extra;
                qj["id"] = q.id;
                qj["question"] = q.question;
                qj["is_impossible"] = q.is_impossible;
                qj["answers"] = answers_to_json(q.answers, p.context);
                if (q.plausible_answers) qj["plausible_answers"] = answers_to_json(*q.plausible_answers, p.context);
                qas.push_back(std::move(qj));
            }
            pj["qas"] = std::move(qas);
            paragraphs.push_back(std::move(pj));
        }
        aj["paragraphs"] = std::move(paragraphs);
        data.push_back(std::move(aj));
    }
    root["data"] = std::move(data);
    return root;
}

SquadDataset read_squad(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    return parse_squad(j);
}

std::string canonical_squad(const SquadDataset& d) { return squad_to_json(d).dump(2) + "\n"; }

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write " + tmp);
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        out.flush();
        if (!out) throw DataError("write failed for " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw DataError("cannot rename " + tmp + " to " + path.string() + ": " + ec.message());
}

void write_squad(const SquadDataset& d, const std::filesystem::path& path) {
    write_file_atomic(path, canonical_squad(d));
}

std::string_view source_marker(DatasetSource s) { return s == DatasetSource::Squad ? "[SQuAD]" : "[SYFTER]"; }

std::string append_source_marker(std::string_view question, DatasetSource source) {
    if (question.empty()) throw PreconditionError("cannot mark an empty question");
    std::string out(question);
    out += ' ';
    out += source_marker(source);
    return out;
}

SquadDataset mark_dataset(SquadDataset d, DatasetSource source) {
    for (auto& a : d.articles)
        for (auto& p : a.paragraphs)
            for (auto& q : p.qas) q.question = append_source_marker(q.question, source);
    return d;
}

MergeResult merge_datasets(const SquadDataset& a, const SquadDataset& b) {
    MergeResult out;
    out.dataset = a;
    std::set<std::string> taken;
    a.for_each_qa([&](const Paragraph&, const QaItem& q) { taken.insert(q.id); });
    // Reserve b's own ids first so a re-suffixed id never shadows a later b id.
    std::set<std::string> b_ids;
    b.for_each_qa([&](const Paragraph&, const QaItem& q) { b_ids.insert(q.id); });
    for (auto article : b.articles) {
        for (auto& p : article.paragraphs) {
            for (auto& q : p.qas) {
                if (taken.contains(q.id)) {
                    ++out.id_collisions;
                    for (int k = 2;; ++k) {
                        std::string candidate = q.id + "-" + std::to_string(k);
                        if (!taken.contains(candidate) && !b_ids.contains(candidate)) {
                            q.id = std::move(candidate);
                            break;
                        }
                    }
                }
                taken.insert(q.id);
            }
        }
        out.dataset.articles.push_back(std::move(article));
    }
    return out;
}

SplitResult split_by_document(const SquadDataset& d, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw PreconditionError("test_fraction must be in (0, 1)");
    // Documents are distinct context strings; first-appearance order before shuffling.
    std::map<std::string, std::size_t> count_by_context;
    std::vector<std::string> contexts;
    d.for_each_qa([&](const Paragraph& p, const QaItem&) {
        auto [it, inserted] = count_by_context.emplace(p.context, 0);
        if (inserted) contexts.push_back(p.context);
        ++it->second;
    });
    if (contexts.size() < 2) throw DataError("cannot split a dataset with fewer than two documents");

    PortableRng rng(seed);
    rng.shuffle(contexts);
    const double target = test_fraction * static_cast<double>(d.question_count());
    std::set<std::string> test_contexts;
    std::size_t test_count = 0;
    std::vector<std::string> added;
    for (const auto& c : contexts) {
        const std::size_t n = count_by_context[c];
        const double before = std::abs(static_cast<double>(test_count) - target);
        const double after = std::abs(static_cast<double>(test_count + n) - target);
        if (after < before) {
            test_contexts.insert(c);
            test_count += n;
            added.push_back(c);
        }
    }
    if (test_contexts.empty()) test_contexts.insert(contexts.front());
    if (test_contexts.size() == contexts.size()) test_contexts.erase(added.back());

    SplitResult out;
    out.train.version = out.test.version = d.version;
    out.train.extra = out.test.extra = d.extra;
    for (const auto& a : d.articles) {
        Article train_article = a;
        Article test_article = a;
        train_article.paragraphs.clear();
        test_article.paragraphs.clear();
        for (const auto& p : a.paragraphs) {
            (test_contexts.contains(p.context) ? test_article : train_article).paragraphs.push_back(p);
        }
        if (!train_article.paragraphs.empty()) out.train.articles.push_back(std::move(train_article));
        if (!test_article.paragraphs.empty()) out.test.articles.push_back(std::move(test_article));
    }
    return out;
}

ClassStats class_stats(const SquadDataset& d) {
    ClassStats s;
    d.for_each_qa([&](const Paragraph&, const QaItem& q) { (q.is_impossible ? s.unanswerable : s.answerable)++; });
    const std::size_t total = s.answerable + s.unanswerable;
    s.unanswerable_share = total == 0 ? 0.0 : static_cast<double>(s.unanswerable) / static_cast<double>(total);
    return s;
}

}  // namespace qaforge

#include "qaforge/document.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

#include "qaforge/errors.hpp"

namespace qaforge {

std::string trim(std::string_view text) {
    const auto is_space = [](char c) {
        return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
    };
    std::size_t b = 0;
    std::size_t e = text.size();
    while (b < e && is_space(text[b])) ++b;
    while (e > b && is_space(text[e - 1])) --e;
    return std::string(text.substr(b, e - b));
}

std::vector<Document> read_corpus_jsonl(std::istream& in) {
    std::vector<Document> docs;
    std::set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw DataError("corpus line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!j.is_object() || !j.contains("id") || !j.contains("text") || !j["id"].is_string() ||
            !j["text"].is_string()) {
            throw DataError("corpus line " + std::to_string(line_no) + ": expected string fields \"id\" and \"text\"");
        }
        Document doc;
        doc.id = j["id"].get<std::string>();
        doc.text = trim(j["text"].get<std::string>());
        if (j.contains("source") && j["source"].is_string()) doc.source = j["source"].get<std::string>();
        if (j.contains("metadata") && j["metadata"].is_object()) {
            for (const auto& [k, v] : j["metadata"].items()) {
                doc.metadata[k] = v.is_string() ? v.get<std::string>() : v.dump();
            }
        }
        if (doc.text.empty()) {
            throw DataError("corpus line " + std::to_string(line_no) + ": document '" + doc.id + "' has empty text");
        }
        if (!seen.insert(doc.id).second) {
            throw DataError("corpus line " + std::to_string(line_no) + ": duplicate document id '" + doc.id + "'");
        }
        docs.push_back(std::move(doc));
    }
    return docs;
}

std::vector<Document> read_corpus_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open corpus " + path.string());
    return read_corpus_jsonl(in);
}

void write_corpus_jsonl(std::ostream& out, const std::vector<Document>& docs) {
    for (const auto& d : docs) {
        nlohmann::json j{{"id", d.id}, {"text", d.text}, {"source", d.source}};
        if (!d.metadata.empty()) j["metadata"] = d.metadata;
        out << j.dump() << '\n';
    }
}

}  // namespace qaforge

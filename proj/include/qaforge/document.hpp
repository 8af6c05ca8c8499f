#pragma once

#include <filesystem>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

namespace qaforge {

struct Document {
    std::string id;
    std::string text;
    std::string source;
    std::map<std::string, std::string> metadata;

    bool operator==(const Document&) const = default;
};

// JSON-lines corpus: one {"id","text","source"[,"metadata"]} object per line.
// Text is trimmed on ingestion; empty texts and duplicate ids are DataErrors.
std::vector<Document> read_corpus_jsonl(std::istream& in);
std::vector<Document> read_corpus_jsonl(const std::filesystem::path& path);
void write_corpus_jsonl(std::ostream& out, const std::vector<Document>& docs);

std::string trim(std::string_view text);

}  // namespace qaforge

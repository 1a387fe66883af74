#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "phishsim/document.hpp"
#include "phishsim/sanitizer.hpp"

namespace phishsim {

/// One line of a JSONL corpus manifest.
struct ManifestRecord {
    std::string id;
    std::string path;  // relative to the manifest file
    Label label = Label::Unknown;
    Date timestamp{};
    std::string brand;  // optional
};

/// Labeled, timestamped listing of documents for training/evaluation.
struct CorpusManifest {
    std::filesystem::path path;
    std::vector<ManifestRecord> records;
};

struct IngestStats {
    std::size_t listed = 0;
    std::size_t ingested = 0;
    std::size_t dropped_empty = 0;        // empty files and empty skeletons
    std::size_t dropped_missing = 0;      // listed files that do not exist
    std::size_t dropped_unparseable = 0;  // sanitizer produced no elements
    std::vector<std::string> warnings;
};

struct IngestResult {
    CorpusManifest manifest;
    std::vector<SanitizedDocument> documents;
    IngestStats stats;
};

/// Parses a JSONL manifest. Each line needs `id`, `path`, `label`
/// ("phishing" | "legitimate"), `timestamp` (ISO-8601 date) and may carry
/// `brand`. Throws CorpusError on malformed lines or duplicate ids.
CorpusManifest load_manifest(const std::filesystem::path& manifest_path);

/// Reads, sanitizes and labels every listed file. Missing files produce a
/// per-record warning, empty and unparseable pages are dropped with
/// counts. Throws CorpusError when no documents survive.
IngestResult ingest_corpus(const std::filesystem::path& manifest_path,
                           const SanitizeOptions& opts = {},
                           int parallelism = 1);

/// Convenience view: moves the sanitized payloads out as plain documents.
std::vector<ByteDocument> take_documents(IngestResult&& result);

}  // namespace phishsim

#include "phishsim/corpus.hpp"

#include <fstream>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "phishsim/errors.hpp"
#include "phishsim/parallel.hpp"

namespace phishsim {

using json = nlohmann::json;

CorpusManifest load_manifest(const std::filesystem::path& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw CorpusError("cannot open manifest: " + manifest_path.string());

    CorpusManifest manifest;
    manifest.path = manifest_path;
    std::unordered_set<std::string> ids;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json record;
        try {
            record = json::parse(line);
        } catch (const json::exception& e) {
            throw CorpusError("manifest line " + std::to_string(lineno) + ": " + e.what());
        }
        try {
            ManifestRecord rec;
            rec.id = record.at("id").get<std::string>();
            rec.path = record.at("path").get<std::string>();
            rec.label = parse_label(record.at("label").get<std::string>());
            rec.timestamp = parse_date(record.at("timestamp").get<std::string>());
            if (record.contains("brand")) rec.brand = record["brand"].get<std::string>();
            if (rec.id.empty())
                throw CorpusError("empty id");
            if (!ids.insert(rec.id).second)
                throw CorpusError("duplicate id '" + rec.id + "'");
            manifest.records.push_back(std::move(rec));
        } catch (const json::exception& e) {
            throw CorpusError("manifest line " + std::to_string(lineno) + ": " + e.what());
        } catch (const CorpusError& e) {
            throw CorpusError("manifest line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return manifest;
}

namespace {

std::string read_file(const std::filesystem::path& path, bool& missing) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        missing = true;
        return {};
    }
    missing = false;
    std::ostringstream buf;
    buf << in.rdbuf();
    return std::move(buf).str();
}

}  // namespace

IngestResult ingest_corpus(const std::filesystem::path& manifest_path,
                           const SanitizeOptions& opts, int parallelism) {
    IngestResult result;
    result.manifest = load_manifest(manifest_path);
    const auto& records = result.manifest.records;
    result.stats.listed = records.size();

    std::filesystem::path base = manifest_path.parent_path();

    enum class Outcome { Ok, Missing, Empty, Unparseable };
    std::vector<Outcome> outcomes(records.size(), Outcome::Ok);
    std::vector<SanitizedDocument> slots(records.size());

    parallel_for(records.size(), parallelism, [&](std::size_t i) {
        const ManifestRecord& rec = records[i];
        std::filesystem::path file = base / rec.path;
        bool missing = false;
        std::string bytes = read_file(file, missing);
        if (missing) {
            outcomes[i] = Outcome::Missing;
            return;
        }
        if (bytes.empty()) {
            outcomes[i] = Outcome::Empty;
            return;
        }
        ByteDocument raw{rec.id, std::move(bytes), file.string(), rec.label, rec.timestamp};
        try {
            slots[i] = sanitize_html(raw, opts);
        } catch (const SanitizeError&) {
            outcomes[i] = Outcome::Unparseable;
        }
    });

    for (std::size_t i = 0; i < records.size(); ++i) {
        switch (outcomes[i]) {
            case Outcome::Ok:
                result.documents.push_back(std::move(slots[i]));
                ++result.stats.ingested;
                break;
            case Outcome::Missing:
                ++result.stats.dropped_missing;
                result.stats.warnings.push_back("missing file for '" + records[i].id + "': " +
                                                records[i].path);
                break;
            case Outcome::Empty:
                ++result.stats.dropped_empty;
                result.stats.warnings.push_back("empty page dropped: '" + records[i].id + "'");
                break;
            case Outcome::Unparseable:
                ++result.stats.dropped_unparseable;
                result.stats.warnings.push_back("unparseable page dropped: '" + records[i].id +
                                                "'");
                break;
        }
    }

    if (result.documents.empty())
        throw CorpusError("no documents survived ingestion from " + manifest_path.string());
    return result;
}

std::vector<ByteDocument> take_documents(IngestResult&& result) {
    std::vector<ByteDocument> docs;
    docs.reserve(result.documents.size());
    for (auto& s : result.documents) docs.push_back(std::move(s.doc));
    return docs;
}

}  // namespace phishsim

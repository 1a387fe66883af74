#include "phishsim/store.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <chrono>
#include <cstdint>
#include <ctime>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "phishsim/errors.hpp"
#include "phishsim/hash.hpp"

namespace phishsim {

using json = nlohmann::ordered_json;

namespace {

bool safe_name_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
           c == '.' || c == '_' || c == '-';
}

/// Percent-encodes ids into filesystem-safe blob names.
std::string blob_name(std::string_view id) {
    std::string out;
    for (char c : id) {
        if (safe_name_char(c)) {
            out += c;
        } else {
            static const char hex[] = "0123456789ABCDEF";
            out += '%';
            out += hex[(unsigned char)c >> 4];
            out += hex[(unsigned char)c & 0xF];
        }
    }
    if (out.empty() || out == "." || out == "..") out = "%" + out;
    return out;
}

std::string read_file_if_exists(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return {};
    std::ostringstream buf;
    buf << in.rdbuf();
    return std::move(buf).str();
}

class WriteLock {
public:
    explicit WriteLock(const std::filesystem::path& dir) {
        fd_ = ::open((dir / "LOCK").c_str(), O_CREAT | O_RDWR, 0644);
        if (fd_ < 0) throw Error("cannot open lock file in " + dir.string());
        if (::flock(fd_, LOCK_EX) != 0) {
            ::close(fd_);
            throw Error("cannot lock " + dir.string());
        }
    }
    ~WriteLock() {
        if (fd_ >= 0) {
            ::flock(fd_, LOCK_UN);
            ::close(fd_);
        }
    }
    WriteLock(const WriteLock&) = delete;
    WriteLock& operator=(const WriteLock&) = delete;

private:
    int fd_ = -1;
};

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw Error("short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

/// Blobs are immutable once written: a name is only reused when the content
/// is identical, otherwise a versioned suffix is chosen. A manifest that was
/// published earlier therefore stays loadable even if a later save or append
/// crashes between blob writes and its own manifest swap.
std::string place_blob(const std::filesystem::path& dir, std::string_view id,
                       const std::string& bytes) {
    std::string base = blob_name(id);
    std::string candidate = base;
    for (int version = 1;; ++version) {
        std::filesystem::path path = dir / "blobs" / candidate;
        if (!std::filesystem::exists(path)) {
            write_file_atomic(path, bytes);
            return candidate;
        }
        if (read_file_if_exists(path) == bytes) return candidate;  // identical content
        candidate = base + "." + std::to_string(version);
    }
}

std::string read_file_or_throw(const std::filesystem::path& path, const std::string& what) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CorruptDbError(what + ": missing " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return std::move(buf).str();
}

std::filesystem::path sidecar_path(const std::filesystem::path& dir, const CompressorKind& kind) {
    return dir / ("lengths." + kind.name() + ".json");
}

std::string iso_timestamp(std::chrono::system_clock::time_point tp) {
    std::time_t t = std::chrono::system_clock::to_time_t(tp);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

struct ManifestData {
    int schema_version = 1;
    CompressorKind compressor;
    double threshold = 0.0;
    std::string created_at;
    std::int64_t created_at_epoch = 0;
    struct Entry {
        std::string id;
        std::string blob;
        std::string sha256;
        std::size_t size = 0;
        std::string timestamp;
        std::string source_path;
    };
    std::vector<Entry> entries;
};

json manifest_to_json(const ManifestData& m) {
    json j;
    j["schema_version"] = m.schema_version;
    j["compressor"] = {{"family", m.compressor.name()}, {"level", m.compressor.level}};
    j["threshold"] = m.threshold;
    j["created_at"] = m.created_at;
    j["created_at_epoch"] = m.created_at_epoch;
    json protos = json::array();
    for (const auto& e : m.entries) {
        protos.push_back({{"id", e.id},
                          {"blob", e.blob},
                          {"sha256", e.sha256},
                          {"size", e.size},
                          {"timestamp", e.timestamp},
                          {"source_path", e.source_path}});
    }
    j["prototypes"] = std::move(protos);
    return j;
}

ManifestData manifest_from_json(const json& j, const std::filesystem::path& dir) {
    try {
        ManifestData m;
        m.schema_version = j.at("schema_version").get<int>();
        if (m.schema_version != 1)
            throw CorruptDbError("unsupported schema_version in " + dir.string());
        m.compressor = CompressorKind::parse(j.at("compressor").at("family").get<std::string>() +
                                             "-" +
                                             std::to_string(j.at("compressor").at("level").get<int>()));
        m.threshold = j.at("threshold").get<double>();
        m.created_at = j.at("created_at").get<std::string>();
        m.created_at_epoch = j.at("created_at_epoch").get<std::int64_t>();
        for (const auto& p : j.at("prototypes")) {
            ManifestData::Entry e;
            e.id = p.at("id").get<std::string>();
            e.blob = p.at("blob").get<std::string>();
            e.sha256 = p.at("sha256").get<std::string>();
            e.size = p.at("size").get<std::size_t>();
            e.timestamp = p.at("timestamp").get<std::string>();
            e.source_path = p.value("source_path", "");
            m.entries.push_back(std::move(e));
        }
        return m;
    } catch (const json::exception& e) {
        throw CorruptDbError("malformed manifest in " + dir.string() + ": " + e.what());
    }
}

ManifestData read_manifest(const std::filesystem::path& dir) {
    std::filesystem::path manifest_path = dir / "manifest.json";
    std::string raw = read_file_or_throw(manifest_path, "prototype db");
    json parsed;
    try {
        parsed = json::parse(raw);
    } catch (const json::exception& e) {
        throw CorruptDbError("malformed manifest in " + dir.string() + ": " + e.what());
    }
    return manifest_from_json(parsed, dir);
}

struct SidecarEntry {
    std::string sha256;  // content hash the length belongs to
    std::size_t len = 0;
};

/// Each length is bound to the blob content it was computed for; a reader
/// only trusts entries whose hash matches its manifest, so a sidecar left
/// behind by an interrupted write can never poison distances.
void write_sidecar(const std::filesystem::path& dir, const CompressorKind& kind,
                   const std::map<std::string, SidecarEntry>& lens) {
    json j;
    j["compressor"] = kind.key();
    json entries = json::object();
    for (const auto& [id, entry] : lens)
        entries[id] = {{"len", entry.len}, {"sha256", entry.sha256}};
    j["lengths"] = std::move(entries);
    write_file_atomic(sidecar_path(dir, kind), j.dump(2) + "\n");
}

/// Returns the sidecar entries when present and keyed to `kind`, else empty.
std::map<std::string, SidecarEntry> read_sidecar(const std::filesystem::path& dir,
                                                 const CompressorKind& kind) {
    std::filesystem::path path = sidecar_path(dir, kind);
    std::ifstream in(path, std::ios::binary);
    if (!in) return {};
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        json j = json::parse(buf.str());
        if (j.at("compressor").get<std::string>() != kind.key()) return {};
        std::map<std::string, SidecarEntry> lens;
        for (const auto& [id, entry] : j.at("lengths").items())
            lens[id] = SidecarEntry{entry.at("sha256").get<std::string>(),
                                    entry.at("len").get<std::size_t>()};
        return lens;
    } catch (const json::exception&) {
        return {};
    }
}

}  // namespace

PrototypeDb save(const PrototypeSet& set, const std::filesystem::path& dir,
                 const StoreHooks& hooks) {
    std::error_code ec;
    std::filesystem::create_directories(dir / "blobs", ec);
    if (ec) throw Error("cannot create " + (dir / "blobs").string() + ": " + ec.message());
    WriteLock lock(dir);

    ManifestData manifest;
    manifest.compressor = set.compressor();
    manifest.threshold = set.threshold().d;
    manifest.created_at = iso_timestamp(set.created_at());
    manifest.created_at_epoch =
        std::chrono::duration_cast<std::chrono::seconds>(set.created_at().time_since_epoch())
            .count();

    std::map<std::string, SidecarEntry> lens;
    for (const auto& proto : set.prototypes()) {
        ManifestData::Entry entry;
        entry.id = proto.id;
        entry.blob = place_blob(dir, proto.id, proto.bytes);
        entry.sha256 = sha256_hex(proto.bytes);
        entry.size = proto.bytes.size();
        entry.timestamp = format_date(proto.timestamp);
        entry.source_path = proto.source_path;
        lens[proto.id] = SidecarEntry{entry.sha256, set.cached_lens().at(proto.id)};
        manifest.entries.push_back(std::move(entry));
    }
    write_sidecar(dir, set.compressor(), lens);

    if (hooks.before_manifest_swap) hooks.before_manifest_swap();
    write_file_atomic(dir / "manifest.json", manifest_to_json(manifest).dump(2) + "\n");
    return PrototypeDb(dir);
}

PrototypeSet load(const std::filesystem::path& dir, std::optional<CompressorKind> compressor) {
    ManifestData manifest = read_manifest(dir);
    CompressorKind kind = compressor.value_or(manifest.compressor);

    std::map<std::string, SidecarEntry> sidecar = read_sidecar(dir, kind);

    std::vector<ByteDocument> protos;
    std::unordered_map<std::string, std::size_t> lens;
    protos.reserve(manifest.entries.size());
    for (const auto& entry : manifest.entries) {
        std::string bytes = read_file_or_throw(dir / "blobs" / entry.blob,
                                               "blob '" + entry.id + "'");
        std::string digest = sha256_hex(bytes);
        if (digest != entry.sha256)
            throw CorruptDbError("blob '" + entry.id + "' hash mismatch: manifest " +
                                 entry.sha256 + ", actual " + digest);
        auto it = sidecar.find(entry.id);
        bool trusted = it != sidecar.end() && it->second.sha256 == entry.sha256;
        std::size_t len = trusted ? it->second.len : compressed_size(kind, bytes);
        lens.emplace(entry.id, len);
        protos.push_back(ByteDocument{entry.id, std::move(bytes), entry.source_path,
                                      Label::Phishing, parse_date(entry.timestamp)});
    }
    return PrototypeSet(std::move(protos), kind, Threshold::checked(manifest.threshold),
                        std::move(lens),
                        std::chrono::system_clock::time_point(
                            std::chrono::seconds(manifest.created_at_epoch)));
}

PrototypeDb append(const std::filesystem::path& dir,
                   std::span<const ByteDocument> new_prototypes, const StoreHooks& hooks) {
    WriteLock lock(dir);
    ManifestData manifest = read_manifest(dir);

    for (const auto& doc : new_prototypes) {
        for (const auto& entry : manifest.entries)
            if (entry.id == doc.id)
                throw std::invalid_argument("prototype id already stored: '" + doc.id + "'");
        if (doc.bytes.empty())
            throw std::invalid_argument("empty prototype: '" + doc.id + "'");
    }

    std::map<std::string, SidecarEntry> lens = read_sidecar(dir, manifest.compressor);
    for (const auto& doc : new_prototypes) {
        ManifestData::Entry entry;
        entry.id = doc.id;
        entry.blob = place_blob(dir, doc.id, doc.bytes);
        entry.sha256 = sha256_hex(doc.bytes);
        entry.size = doc.bytes.size();
        entry.timestamp = format_date(doc.timestamp);
        entry.source_path = doc.source_path;
        lens[doc.id] =
            SidecarEntry{entry.sha256, compressed_size(manifest.compressor, doc.bytes)};
        manifest.entries.push_back(std::move(entry));
    }
    write_sidecar(dir, manifest.compressor, lens);

    if (hooks.before_manifest_swap) hooks.before_manifest_swap();
    write_file_atomic(dir / "manifest.json", manifest_to_json(manifest).dump(2) + "\n");
    return PrototypeDb(dir);
}

DbStats db_stats(const std::filesystem::path& dir) {
    ManifestData manifest = read_manifest(dir);
    DbStats stats;
    stats.prototypes = manifest.entries.size();
    stats.compressor = manifest.compressor;
    stats.threshold = manifest.threshold;
    stats.created_at = manifest.created_at;
    for (const auto& entry : manifest.entries) {
        stats.manifest_blob_bytes += entry.size;
        std::error_code ec;
        auto size = std::filesystem::file_size(dir / "blobs" / entry.blob, ec);
        if (ec) throw CorruptDbError("blob '" + entry.id + "': missing on disk");
        stats.disk_blob_bytes += size;
    }
    return stats;
}

void verify_db(const std::filesystem::path& dir) {
    ManifestData manifest = read_manifest(dir);
    PrototypeSet set = load(dir);
    // Sidecar lengths a loader would trust must equal freshly recomputed
    // compressed lengths.
    std::map<std::string, SidecarEntry> sidecar = read_sidecar(dir, manifest.compressor);
    std::map<std::string, std::string> hashes;
    for (const auto& entry : manifest.entries) hashes[entry.id] = entry.sha256;
    for (const auto& proto : set.prototypes()) {
        auto it = sidecar.find(proto.id);
        if (it == sidecar.end() || it->second.sha256 != hashes[proto.id]) continue;
        std::size_t fresh = compressed_size(manifest.compressor, proto.bytes);
        if (it->second.len != fresh)
            throw CorruptDbError("sidecar length for '" + proto.id + "' is stale: recorded " +
                                 std::to_string(it->second.len) + ", recomputed " +
                                 std::to_string(fresh));
    }
}

}  // namespace phishsim

#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "phishsim/compressor.hpp"
#include "phishsim/prototypes.hpp"

namespace phishsim {

/// Test seams for crash simulation. `before_manifest_swap` runs after all
/// blobs and sidecars are on disk but before the manifest rename that
/// publishes them; throwing from it models a crash mid-write.
struct StoreHooks {
    std::function<void()> before_manifest_swap;
};

/// Durable prototype database.
///
/// Layout under the root directory:
///   manifest.json              id, content hash, metadata per prototype
///   blobs/<id>                 sanitized prototype bytes
///   lengths.<compressor>.json  compressed-length sidecar
///   LOCK                       advisory write lock
///
/// Readers always see a consistent snapshot: blobs are written before the
/// manifest, and the manifest is replaced atomically (temp file + rename),
/// so a concurrent reader observes either the old or the new manifest,
/// never a torn state. Writers serialize on the LOCK file.
class PrototypeDb {
public:
    explicit PrototypeDb(std::filesystem::path root) : root_(std::move(root)) {}
    const std::filesystem::path& root() const { return root_; }

private:
    std::filesystem::path root_;
};

/// Writes a fresh database (or replaces the published state of an
/// existing one). IO failures surface with path context.
PrototypeDb save(const PrototypeSet& set, const std::filesystem::path& dir,
                 const StoreHooks& hooks = {});

/// Verified load: every blob is re-hashed against the manifest. Cached
/// lengths are trusted only when the sidecar's compressor matches the
/// requested one (default: the manifest's); otherwise they are recomputed.
/// Throws CorruptDbError naming the offending blob on hash mismatch or
/// missing pieces.
PrototypeSet load(const std::filesystem::path& dir,
                  std::optional<CompressorKind> compressor = {});

/// Appends new prototypes: existing blobs untouched, manifest rewritten
/// atomically. Throws std::invalid_argument on a duplicate id before
/// anything is written.
PrototypeDb append(const std::filesystem::path& dir,
                   std::span<const ByteDocument> new_prototypes,
                   const StoreHooks& hooks = {});

struct DbStats {
    std::size_t prototypes = 0;
    std::size_t manifest_blob_bytes = 0;  // sum of sizes recorded in the manifest
    std::size_t disk_blob_bytes = 0;      // sum of on-disk blob sizes
    CompressorKind compressor;
    double threshold = 0.0;
    std::string created_at;
};

DbStats db_stats(const std::filesystem::path& dir);

/// Full verification pass (load + sidecar consistency). Throws
/// CorruptDbError on any defect.
void verify_db(const std::filesystem::path& dir);

}  // namespace phishsim

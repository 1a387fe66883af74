#pragma once

#include <atomic>
#include <cstdint>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "phishsim/compressor.hpp"
#include "phishsim/document.hpp"

namespace phishsim {

/// Admissible upper bound for NCD values: 1 + eps with eps = 0.1.
inline constexpr double kNcdUpperBound = 1.1;

/// A real-valued distance in [0, 1.1] produced by a named compressor.
struct NcdValue {
    double value = 0.0;
    CompressorKind compressor;
};

struct EngineStats {
    std::uint64_t compressions = 0;      // actual backend invocations
    std::uint64_t length_cache_hits = 0; // single-document lengths served from cache
    std::uint64_t ncd_evaluations = 0;   // ncd() calls
};

/// Symmetric pairwise distance matrix with the document ids it was built
/// from. Stored row-major, n*n.
struct NcdMatrix {
    std::vector<std::string> ids;
    std::vector<double> values;

    std::size_t size() const { return ids.size(); }
    double at(std::size_t i, std::size_t j) const { return values[i * ids.size() + j]; }
    double& at(std::size_t i, std::size_t j) { return values[i * ids.size() + j]; }
};

/// Computes Normalized Compression Distances under one fixed compressor,
/// caching single-document compressed lengths by document id.
///
/// ncd() and compressed_len() are pure given the cache; the cache accepts
/// concurrent readers and inserts atomically, so one engine may be shared
/// across threads. Pair concatenations are never cached.
class NcdEngine {
public:
    explicit NcdEngine(CompressorKind kind);

    const CompressorKind& kind() const { return kind_; }

    /// Compressed length of doc.bytes, cached by doc.id.
    std::size_t compressed_len(const ByteDocument& doc) const;

    /// NCD(x, y) = (C(x.y) - min(C(x), C(y))) / max(C(x), C(y)), with the
    /// concatenation operands in canonical order (length ascending, then
    /// lexicographic), which makes the result exactly symmetric.
    /// Values below zero clamp to zero; values above 1.1 throw NcdRangeError.
    NcdValue ncd(const ByteDocument& x, const ByteDocument& y) const;

    /// Full pairwise matrix including the diagonal (computed, not assumed
    /// zero). Requires >= 2 documents with unique ids. Performs exactly
    /// n self-evaluations plus n(n-1)/2 off-diagonal evaluations; cells may
    /// be evaluated in parallel.
    NcdMatrix matrix(std::span<const ByteDocument> docs, int parallelism = 1) const;

    /// Seeds the length cache with a precomputed value (e.g. from a
    /// prototype store sidecar).
    void prime(const std::string& id, std::size_t compressed_len) const;

    /// Bulk prime under a single lock.
    void prime_all(const std::unordered_map<std::string, std::size_t>& lens) const;

    EngineStats stats() const;

private:
    CompressorKind kind_;
    mutable std::shared_mutex mu_;
    mutable std::unordered_map<std::string, std::size_t> len_cache_;
    mutable std::atomic<std::uint64_t> compressions_{0};
    mutable std::atomic<std::uint64_t> cache_hits_{0};
    mutable std::atomic<std::uint64_t> ncd_evaluations_{0};
};

}  // namespace phishsim

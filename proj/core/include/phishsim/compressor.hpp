#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace phishsim {

/// The four compressor families used for NCD. Each is deterministic:
/// identical bytes and identical (family, level) always give the same
/// compressed length.
enum class CompressorFamily { Lzma, Zlib, Gzip, Bzip2 };

struct CompressorKind {
    CompressorFamily family = CompressorFamily::Lzma;
    int level = 6;

    bool operator==(const CompressorKind&) const = default;

    /// "lzma", "zlib", "gzip", "bzip2"
    std::string name() const;
    /// "lzma-6" etc., stable key for sidecar files and caches.
    std::string key() const;

    static CompressorKind lzma() { return {CompressorFamily::Lzma, 6}; }
    static CompressorKind zlib() { return {CompressorFamily::Zlib, 6}; }
    static CompressorKind gzip() { return {CompressorFamily::Gzip, 6}; }
    static CompressorKind bzip2() { return {CompressorFamily::Bzip2, 9}; }

    /// Accepts a family name ("lzma") or a key ("lzma-6").
    /// Throws std::invalid_argument on unknown names or bad levels.
    static CompressorKind parse(std::string_view text);
};

/// All four kinds at their default levels, in bench order.
std::vector<CompressorKind> all_compressor_kinds();

/// Length in bytes of `kind`'s output on `bytes`.
/// Throws CompressionError if the backend fails, std::invalid_argument on
/// empty input.
std::size_t compressed_size(CompressorKind kind, std::string_view bytes);

}  // namespace phishsim

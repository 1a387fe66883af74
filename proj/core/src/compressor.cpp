#include "phishsim/compressor.hpp"

#include <lzma.h>
#include <zlib.h>

#include <boost/iostreams/device/back_inserter.hpp>
#include <boost/iostreams/filter/bzip2.hpp>
#include <boost/iostreams/filtering_stream.hpp>
#include <charconv>
#include <stdexcept>

#include "phishsim/errors.hpp"

namespace phishsim {

namespace {

std::size_t lzma_size(std::string_view bytes, int preset) {
    std::size_t bound = lzma_stream_buffer_bound(bytes.size());
    std::vector<std::uint8_t> out(bound);
    std::size_t out_pos = 0;
    lzma_ret rc = lzma_easy_buffer_encode(
        static_cast<std::uint32_t>(preset), LZMA_CHECK_CRC64, nullptr,
        reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size(), out.data(), &out_pos,
        out.size());
    if (rc != LZMA_OK) throw CompressionError("lzma encoder failed, rc=" + std::to_string(rc));
    return out_pos;
}

std::size_t zlib_size(std::string_view bytes, int level) {
    uLongf dest_len = compressBound(static_cast<uLong>(bytes.size()));
    std::vector<Bytef> out(dest_len);
    int rc = compress2(out.data(), &dest_len, reinterpret_cast<const Bytef*>(bytes.data()),
                       static_cast<uLong>(bytes.size()), level);
    if (rc != Z_OK) throw CompressionError("zlib compress2 failed, rc=" + std::to_string(rc));
    return dest_len;
}

std::size_t gzip_size(std::string_view bytes, int level) {
    z_stream strm{};
    // windowBits 15 + 16 selects the gzip wrapper.
    int rc = deflateInit2(&strm, level, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY);
    if (rc != Z_OK) throw CompressionError("gzip deflateInit2 failed, rc=" + std::to_string(rc));
    std::vector<Bytef> out(deflateBound(&strm, static_cast<uLong>(bytes.size())) + 32);
    strm.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(bytes.data()));
    strm.avail_in = static_cast<uInt>(bytes.size());
    strm.next_out = out.data();
    strm.avail_out = static_cast<uInt>(out.size());
    rc = deflate(&strm, Z_FINISH);
    std::size_t produced = strm.total_out;
    deflateEnd(&strm);
    if (rc != Z_STREAM_END) throw CompressionError("gzip deflate failed, rc=" + std::to_string(rc));
    return produced;
}

std::size_t bzip2_size(std::string_view bytes, int block_size) {
    namespace io = boost::iostreams;
    std::vector<char> out;
    {
        io::filtering_ostream os;
        os.push(io::bzip2_compressor(io::bzip2_params(block_size)));
        os.push(io::back_inserter(out));
        os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    return out.size();
}

const char* family_name(CompressorFamily family) {
    switch (family) {
        case CompressorFamily::Lzma: return "lzma";
        case CompressorFamily::Zlib: return "zlib";
        case CompressorFamily::Gzip: return "gzip";
        case CompressorFamily::Bzip2: return "bzip2";
    }
    return "?";
}

void check_level(CompressorFamily family, int level) {
    int lo = family == CompressorFamily::Bzip2 ? 1 : 0;
    if (level < lo || level > 9)
        throw std::invalid_argument(std::string(family_name(family)) + " level out of range: " +
                                    std::to_string(level));
}

}  // namespace

std::string CompressorKind::name() const { return family_name(family); }

std::string CompressorKind::key() const {
    return std::string(family_name(family)) + "-" + std::to_string(level);
}

CompressorKind CompressorKind::parse(std::string_view text) {
    std::string_view name = text;
    int level = -1;
    if (auto dash = text.rfind('-'); dash != std::string_view::npos) {
        std::string_view tail = text.substr(dash + 1);
        int parsed = 0;
        auto [ptr, ec] = std::from_chars(tail.data(), tail.data() + tail.size(), parsed);
        if (ec == std::errc{} && ptr == tail.data() + tail.size()) {
            name = text.substr(0, dash);
            level = parsed;
        }
    }
    CompressorKind kind;
    if (name == "lzma" || name == "xz") kind = lzma();
    else if (name == "zlib" || name == "deflate") kind = zlib();
    else if (name == "gzip") kind = gzip();
    else if (name == "bzip2" || name == "bz2") kind = bzip2();
    else throw std::invalid_argument("unknown compressor: '" + std::string(text) + "'");
    if (level >= 0) {
        check_level(kind.family, level);
        kind.level = level;
    }
    return kind;
}

std::vector<CompressorKind> all_compressor_kinds() {
    return {CompressorKind::lzma(), CompressorKind::zlib(), CompressorKind::gzip(),
            CompressorKind::bzip2()};
}

std::size_t compressed_size(CompressorKind kind, std::string_view bytes) {
    if (bytes.empty()) throw std::invalid_argument("refusing to compress an empty document");
    check_level(kind.family, kind.level);
    switch (kind.family) {
        case CompressorFamily::Lzma: return lzma_size(bytes, kind.level);
        case CompressorFamily::Zlib: return zlib_size(bytes, kind.level);
        case CompressorFamily::Gzip: return gzip_size(bytes, kind.level);
        case CompressorFamily::Bzip2: return bzip2_size(bytes, kind.level);
    }
    throw CompressionError("unreachable compressor family");
}

}  // namespace phishsim

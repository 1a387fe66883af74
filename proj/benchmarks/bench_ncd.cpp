#include <benchmark/benchmark.h>

#include <random>

#include "phishsim/ncd.hpp"

using namespace phishsim;

namespace {

std::string skeleton_bytes(std::size_t approx, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::string html = "<html><body>";
    while (html.size() + 14 < approx)
        html += "<div class=\"c" + std::to_string(rng() % 64) + "\"><span></span></div>";
    html += "</body></html>";
    return html;
}

CompressorKind kind_of(int index) {
    switch (index) {
        case 0: return CompressorKind::lzma();
        case 1: return CompressorKind::zlib();
        case 2: return CompressorKind::gzip();
        default: return CompressorKind::bzip2();
    }
}

void BM_CompressedSize(benchmark::State& state) {
    CompressorKind kind = kind_of(int(state.range(0)));
    std::string bytes = skeleton_bytes(std::size_t(state.range(1)), 1);
    for (auto _ : state) benchmark::DoNotOptimize(compressed_size(kind, bytes));
    state.SetBytesProcessed(int64_t(state.iterations()) * int64_t(bytes.size()));
    state.SetLabel(kind.key());
}
BENCHMARK(BM_CompressedSize)
    ->ArgsProduct({{0, 1, 2, 3}, {727, 4096, 32768}});

void BM_NcdPair(benchmark::State& state) {
    CompressorKind kind = kind_of(int(state.range(0)));
    NcdEngine engine(kind);
    ByteDocument a{"a", skeleton_bytes(std::size_t(state.range(1)), 2), "", Label::Unknown, {}};
    ByteDocument b{"b", skeleton_bytes(std::size_t(state.range(1)), 3), "", Label::Unknown, {}};
    engine.compressed_len(a);
    engine.compressed_len(b);
    for (auto _ : state) benchmark::DoNotOptimize(engine.ncd(a, b).value);
    state.SetLabel(kind.key());
}
BENCHMARK(BM_NcdPair)->ArgsProduct({{0, 1, 2, 3}, {727, 4096}});

}  // namespace

#include <benchmark/benchmark.h>

#include <random>

#include "phishsim/prototypes.hpp"

using namespace phishsim;

namespace {

ByteDocument skeleton_doc(const std::string& id, std::size_t approx, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::string html = "<html><body>";
    while (html.size() + 14 < approx)
        html += "<div class=\"c" + std::to_string(rng() % 64) + "\"><span></span></div>";
    html += "</body></html>";
    return ByteDocument{id, std::move(html), "", Label::Phishing, {}};
}

// Per-page classification cost against prototype sets of increasing size:
// the k concatenation compressions dominate, so time should scale linearly.
void BM_Classify(benchmark::State& state) {
    std::size_t k = std::size_t(state.range(0));
    NcdEngine engine(CompressorKind::lzma());
    std::vector<ByteDocument> protos;
    std::unordered_map<std::string, std::size_t> lens;
    for (std::size_t i = 0; i < k; ++i) {
        ByteDocument p = skeleton_doc("p" + std::to_string(i), 727, i + 1);
        lens[p.id] = engine.compressed_len(p);
        protos.push_back(std::move(p));
    }
    PrototypeSet set(std::move(protos), engine.kind(), Threshold{0.251}, std::move(lens),
                     std::chrono::system_clock::now());
    ByteDocument probe = skeleton_doc("probe", 900, 99991);
    engine.compressed_len(probe);
    for (auto _ : state) benchmark::DoNotOptimize(classify(engine, probe, set, 1));
    state.SetItemsProcessed(int64_t(state.iterations()) * int64_t(k));
}
BENCHMARK(BM_Classify)->Arg(16)->Arg(100)->Arg(700)->Arg(1366)->Unit(benchmark::kMillisecond);

}  // namespace

#include "phishsim/ncd.hpp"

#include <algorithm>
#include <unordered_set>

#include "phishsim/errors.hpp"
#include "phishsim/parallel.hpp"

namespace phishsim {

NcdEngine::NcdEngine(CompressorKind kind) : kind_(kind) {}

std::size_t NcdEngine::compressed_len(const ByteDocument& doc) const {
    if (doc.bytes.empty())
        throw std::invalid_argument("empty document: '" + doc.id + "'");
    {
        std::shared_lock lock(mu_);
        auto it = len_cache_.find(doc.id);
        if (it != len_cache_.end()) {
            cache_hits_.fetch_add(1, std::memory_order_relaxed);
            return it->second;
        }
    }
    std::size_t len;
    try {
        len = compressed_size(kind_, doc.bytes);
    } catch (const CompressionError& e) {
        throw CompressionError(std::string(e.what()) + " (doc '" + doc.id + "')");
    }
    compressions_.fetch_add(1, std::memory_order_relaxed);
    {
        std::unique_lock lock(mu_);
        len_cache_.emplace(doc.id, len);  // racing insert keeps the first, equal value
    }
    return len;
}

NcdValue NcdEngine::ncd(const ByteDocument& x, const ByteDocument& y) const {
    if (x.bytes.empty() || y.bytes.empty())
        throw std::invalid_argument("ncd over empty document");
    ncd_evaluations_.fetch_add(1, std::memory_order_relaxed);

    std::size_t cx = compressed_len(x);
    std::size_t cy = compressed_len(y);

    // Canonical concatenation order (length ascending, then lexicographic
    // bytes) makes the result exactly symmetric.
    const ByteDocument* a = &x;
    const ByteDocument* b = &y;
    if (b->bytes.size() < a->bytes.size() ||
        (b->bytes.size() == a->bytes.size() && b->bytes < a->bytes)) {
        std::swap(a, b);
    }
    std::string joined;
    joined.reserve(a->bytes.size() + b->bytes.size());
    joined.append(a->bytes);
    joined.append(b->bytes);
    std::size_t cxy;
    try {
        cxy = compressed_size(kind_, joined);
    } catch (const CompressionError& e) {
        throw CompressionError(std::string(e.what()) + " (pair '" + x.id + "', '" + y.id + "')");
    }
    compressions_.fetch_add(1, std::memory_order_relaxed);

    double lo = static_cast<double>(std::min(cx, cy));
    double hi = static_cast<double>(std::max(cx, cy));
    double value = (static_cast<double>(cxy) - lo) / hi;
    if (value < 0.0) value = 0.0;
    if (value > kNcdUpperBound)
        throw NcdRangeError("NCD(" + x.id + ", " + y.id + ") = " + std::to_string(value) +
                            " exceeds " + std::to_string(kNcdUpperBound));
    return NcdValue{value, kind_};
}

NcdMatrix NcdEngine::matrix(std::span<const ByteDocument> docs, int parallelism) const {
    if (docs.size() < 2) throw std::invalid_argument("ncd matrix needs at least 2 documents");
    {
        std::unordered_set<std::string_view> seen;
        for (const auto& d : docs)
            if (!seen.insert(d.id).second)
                throw std::invalid_argument("duplicate document id: '" + d.id + "'");
    }
    std::size_t n = docs.size();
    NcdMatrix m;
    m.ids.reserve(n);
    for (const auto& d : docs) m.ids.push_back(d.id);
    m.values.assign(n * n, 0.0);

    // Upper triangle including the diagonal: n self-evaluations plus
    // n(n-1)/2 pair evaluations, order-independent.
    std::vector<std::pair<std::size_t, std::size_t>> cells;
    cells.reserve(n * (n + 1) / 2);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) cells.emplace_back(i, j);

    parallel_for(cells.size(), parallelism, [&](std::size_t c) {
        auto [i, j] = cells[c];
        double v = ncd(docs[i], docs[j]).value;
        m.at(i, j) = v;
        m.at(j, i) = v;
    });
    return m;
}

void NcdEngine::prime(const std::string& id, std::size_t compressed_len) const {
    std::unique_lock lock(mu_);
    len_cache_.emplace(id, compressed_len);
}

void NcdEngine::prime_all(const std::unordered_map<std::string, std::size_t>& lens) const {
    std::unique_lock lock(mu_);
    for (const auto& [id, len] : lens) len_cache_.emplace(id, len);
}

EngineStats NcdEngine::stats() const {
    return EngineStats{
        compressions_.load(std::memory_order_relaxed),
        cache_hits_.load(std::memory_order_relaxed),
        ncd_evaluations_.load(std::memory_order_relaxed),
    };
}

}  // namespace phishsim

#include "phishsim/prototypes.hpp"

#include <algorithm>
#include <limits>
#include <unordered_set>

#include "phishsim/errors.hpp"
#include "phishsim/parallel.hpp"

namespace phishsim {

Threshold Threshold::checked(double d) {
    if (!(d > 0.0 && d < 1.0))
        throw std::invalid_argument("threshold must lie in (0, 1), got " + std::to_string(d));
    return Threshold{d};
}

std::string to_string(Decision d) {
    return d == Decision::Phishing ? "phishing" : "non-phishing";
}

PrototypeSet::PrototypeSet(std::vector<ByteDocument> prototypes, CompressorKind compressor,
                           Threshold threshold,
                           std::unordered_map<std::string, std::size_t> cached_lens,
                           std::chrono::system_clock::time_point created_at)
    : prototypes_(std::move(prototypes)),
      compressor_(compressor),
      threshold_(Threshold::checked(threshold.d)),
      cached_lens_(std::move(cached_lens)),
      created_at_(created_at) {
    for (const auto& p : prototypes_) {
        if (p.bytes.empty())
            throw std::invalid_argument("prototype '" + p.id + "' has empty bytes");
        if (!cached_lens_.count(p.id))
            throw std::invalid_argument("missing cached length for prototype '" + p.id + "'");
    }
}

PrototypeSet PrototypeSet::empty(CompressorKind compressor, Threshold threshold) {
    return PrototypeSet({}, compressor, threshold, {}, std::chrono::system_clock::now());
}

bool PrototypeSet::contains(const std::string& id) const {
    return cached_lens_.count(id) != 0 &&
           std::any_of(prototypes_.begin(), prototypes_.end(),
                       [&](const ByteDocument& p) { return p.id == id; });
}

PrototypeSet PrototypeSet::appended(
    const std::vector<ByteDocument>& extra,
    const std::unordered_map<std::string, std::size_t>& extra_lens) const {
    std::vector<ByteDocument> merged = prototypes_;
    std::unordered_map<std::string, std::size_t> lens = cached_lens_;
    for (const auto& doc : extra) {
        if (lens.count(doc.id))
            throw std::invalid_argument("duplicate prototype id: '" + doc.id + "'");
        auto it = extra_lens.find(doc.id);
        if (it == extra_lens.end())
            throw std::invalid_argument("missing cached length for prototype '" + doc.id + "'");
        lens.emplace(doc.id, it->second);
        merged.push_back(doc);
    }
    return PrototypeSet(std::move(merged), compressor_, threshold_, std::move(lens),
                        std::chrono::system_clock::now());
}

void PrototypeSet::prime_engine(const NcdEngine& engine) const {
    engine.prime_all(cached_lens_);
}

ExtractionResult extract_prototypes(const NcdEngine& engine, std::vector<ByteDocument> data,
                                    Threshold threshold, int parallelism) {
    threshold = Threshold::checked(threshold.d);
    if (data.empty()) throw std::invalid_argument("cannot extract prototypes from empty data");
    {
        std::unordered_set<std::string_view> ids;
        for (const auto& d : data) {
            if (d.bytes.empty())
                throw std::invalid_argument("empty document: '" + d.id + "'");
            if (!ids.insert(d.id).second)
                throw std::invalid_argument("duplicate document id: '" + d.id + "'");
        }
    }

    const std::size_t n = data.size();
    constexpr double kInf = std::numeric_limits<double>::infinity();
    std::vector<double> distance(n, kInf);
    std::vector<std::size_t> cluster(n, n);  // n = unassigned
    std::vector<char> alive(n, 1);
    std::vector<std::size_t> selection;

    std::uint64_t evals_before = engine.stats().ncd_evaluations;

    while (true) {
        // argmax over the remaining documents; ties (and the all-infinite
        // first round) go to the smallest id.
        std::size_t z = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (!alive[i]) continue;
            if (z == n || distance[i] > distance[z] ||
                (distance[i] == distance[z] && data[i].id < data[z].id))
                z = i;
        }
        if (z == n) break;  // no documents remain

        alive[z] = 0;
        selection.push_back(z);

        std::vector<std::size_t> remaining;
        remaining.reserve(n);
        for (std::size_t i = 0; i < n; ++i)
            if (alive[i]) remaining.push_back(i);

        parallel_for(remaining.size(), parallelism, [&](std::size_t r) {
            std::size_t x = remaining[r];
            double d = engine.ncd(data[x], data[z]).value;
            if (d < distance[x] ||
                (d == distance[x] && cluster[x] < n && data[z].id < data[cluster[x]].id)) {
                distance[x] = d;
                cluster[x] = z;
            }
        });

        if (remaining.empty()) break;
        double max_remaining = 0.0;
        for (std::size_t x : remaining) max_remaining = std::max(max_remaining, distance[x]);
        if (max_remaining <= threshold.d) break;
    }

    std::uint64_t evals = engine.stats().ncd_evaluations - evals_before;

    std::vector<ByteDocument> prototypes;
    prototypes.reserve(selection.size());
    std::unordered_map<std::string, std::size_t> lens;
    for (std::size_t z : selection) {
        lens.emplace(data[z].id, engine.compressed_len(data[z]));
        prototypes.push_back(data[z]);
    }

    Assignment assignment;
    for (std::size_t i = 0; i < n; ++i)
        if (alive[i]) assignment.emplace(data[i].id,
                                         AssignmentEntry{data[cluster[i]].id, distance[i]});

    PrototypeSet set(std::move(prototypes), engine.kind(), threshold, std::move(lens),
                     std::chrono::system_clock::now());
    return ExtractionResult{std::move(set), std::move(assignment), evals};
}

Verdict classify(const NcdEngine& engine, const ByteDocument& doc, const PrototypeSet& set,
                 int parallelism) {
    if (set.is_empty()) throw std::invalid_argument("cannot classify against an empty prototype set");
    if (doc.bytes.empty()) throw std::invalid_argument("empty document: '" + doc.id + "'");
    set.prime_engine(engine);

    const auto& protos = set.prototypes();
    std::vector<double> dist(protos.size());
    parallel_for(protos.size(), parallelism,
                 [&](std::size_t i) { dist[i] = engine.ncd(doc, protos[i]).value; });

    std::size_t best = 0;
    for (std::size_t i = 1; i < protos.size(); ++i) {
        if (dist[i] < dist[best] || (dist[i] == dist[best] && protos[i].id < protos[best].id))
            best = i;
    }
    Verdict v;
    v.doc_id = doc.id;
    v.min_distance = dist[best];
    v.nearest_prototype = protos[best].id;
    v.decision = dist[best] < set.threshold().d ? Decision::Phishing : Decision::NonPhishing;
    return v;
}

IncrementalResult incremental_update(const NcdEngine& engine,
                                     const std::vector<ByteDocument>& batch,
                                     const PrototypeSet& set, int parallelism) {
    std::vector<Verdict> verdicts(batch.size());
    if (set.is_empty()) {
        for (std::size_t i = 0; i < batch.size(); ++i) {
            verdicts[i] = Verdict{batch[i].id, Decision::NonPhishing, std::nullopt,
                                  std::numeric_limits<double>::infinity()};
        }
    } else {
        parallel_for(batch.size(), parallelism,
                     [&](std::size_t i) { verdicts[i] = classify(engine, batch[i], set, 1); });
    }

    std::vector<ByteDocument> rejected;
    for (std::size_t i = 0; i < batch.size(); ++i)
        if (batch[i].label == Label::Phishing && verdicts[i].decision == Decision::NonPhishing)
            rejected.push_back(batch[i]);

    if (rejected.empty())
        return IncrementalResult{set, std::move(verdicts), 0, 0};

    ExtractionResult extraction =
        extract_prototypes(engine, rejected, set.threshold(), parallelism);
    PrototypeSet grown =
        set.appended(extraction.set.prototypes(), extraction.set.cached_lens());
    return IncrementalResult{std::move(grown), std::move(verdicts), rejected.size(),
                             extraction.set.size()};
}

}  // namespace phishsim

#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "phishsim/document.hpp"
#include "phishsim/ncd.hpp"

namespace phishsim {

/// Maximum NCD for a page to be assigned to a prototype / classified
/// phishing. The shipped default of 0.251 comes from quality-of-clustering
/// tuning; see tuning.hpp to re-derive one for a new corpus.
struct Threshold {
    double d = 0.251;

    /// Throws std::invalid_argument unless 0 < d < 1.
    static Threshold checked(double d);
};

/// Ordered collection of prototype documents plus cached compressed
/// lengths and the threshold they were extracted under. Immutable:
/// updates return new sets, so classification can proceed concurrently
/// with a database update.
class PrototypeSet {
public:
    PrototypeSet(std::vector<ByteDocument> prototypes,
                 CompressorKind compressor,
                 Threshold threshold,
                 std::unordered_map<std::string, std::size_t> cached_lens,
                 std::chrono::system_clock::time_point created_at);

    /// An empty set under the given parameters (starting point for
    /// incremental learning).
    static PrototypeSet empty(CompressorKind compressor, Threshold threshold);

    const std::vector<ByteDocument>& prototypes() const { return prototypes_; }
    std::size_t size() const { return prototypes_.size(); }
    bool is_empty() const { return prototypes_.empty(); }
    const CompressorKind& compressor() const { return compressor_; }
    Threshold threshold() const { return threshold_; }
    const std::unordered_map<std::string, std::size_t>& cached_lens() const { return cached_lens_; }
    std::chrono::system_clock::time_point created_at() const { return created_at_; }

    bool contains(const std::string& id) const;

    /// New set with `extra` appended in order; lengths merged. Throws
    /// std::invalid_argument on duplicate ids.
    PrototypeSet appended(const std::vector<ByteDocument>& extra,
                          const std::unordered_map<std::string, std::size_t>& extra_lens) const;

    /// Seeds the engine's length cache with every cached prototype length.
    void prime_engine(const NcdEngine& engine) const;

private:
    std::vector<ByteDocument> prototypes_;
    CompressorKind compressor_;
    Threshold threshold_;
    std::unordered_map<std::string, std::size_t> cached_lens_;
    std::chrono::system_clock::time_point created_at_;
};

struct AssignmentEntry {
    std::string prototype_id;
    double distance = 0.0;

    bool operator==(const AssignmentEntry&) const = default;
};

/// member document id -> (assigned prototype, NCD to it). Ordered map for
/// deterministic iteration.
using Assignment = std::map<std::string, AssignmentEntry>;

enum class Decision { Phishing, NonPhishing };

std::string to_string(Decision d);

struct Verdict {
    std::string doc_id;
    Decision decision = Decision::NonPhishing;
    std::optional<std::string> nearest_prototype;
    double min_distance = 0.0;
};

struct ExtractionResult {
    PrototypeSet set;
    Assignment assignment;
    std::uint64_t ncd_evaluations = 0;  // at most n * k
};

/// Furthest-point-first prototype extraction. Starting with all distances
/// at infinity, repeatedly selects the furthest remaining document as the
/// next prototype and relaxes the others against it, until every remaining
/// document lies within the threshold (or no documents remain). Ties in
/// the argmax and the first seed resolve to the smallest id, which makes
/// the selection sequence deterministic.
ExtractionResult extract_prototypes(const NcdEngine& engine,
                                    std::vector<ByteDocument> data,
                                    Threshold threshold,
                                    int parallelism = 1);

/// Nearest-prototype classification: phishing iff the smallest NCD to any
/// prototype is strictly below the set's threshold. Performs exactly one
/// concatenation compression per prototype, reusing cached prototype
/// lengths. Ties in the argmin resolve to the smallest prototype id.
/// Throws std::invalid_argument on an empty set.
Verdict classify(const NcdEngine& engine,
                 const ByteDocument& doc,
                 const PrototypeSet& set,
                 int parallelism = 1);

struct IncrementalResult {
    PrototypeSet set;               // input set plus prototypes from rejected samples
    std::vector<Verdict> verdicts;  // pre-update verdicts, batch order
    std::size_t rejected = 0;       // labeled phishing but classified non-phishing
    std::size_t new_prototypes = 0;
};

/// One incremental-learning round: classify the batch against `set`,
/// extract prototypes from the rejected samples (labeled phishing,
/// classified non-phishing) at the same threshold, and return the grown
/// set. The input set is never mutated. An empty input set classifies
/// everything as non-phishing, so the whole labeled-phishing batch is
/// rejected and seeds the set.
IncrementalResult incremental_update(const NcdEngine& engine,
                                     const std::vector<ByteDocument>& batch,
                                     const PrototypeSet& set,
                                     int parallelism = 1);

}  // namespace phishsim

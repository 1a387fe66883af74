#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "phishsim/document.hpp"
#include "phishsim/ncd.hpp"
#include "phishsim/prototypes.hpp"

namespace phishsim {

struct ConfusionMetrics {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    double tpr = 0.0, fpr = 0.0, tnr = 0.0, accuracy = 0.0, gmean = 0.0;
};

/// Standard confusion metrics over (verdict, true label) pairs; gmean is
/// sqrt(tpr * tnr). Throws std::invalid_argument when a class is missing,
/// naming it.
ConfusionMetrics confusion_metrics(std::span<const Verdict> verdicts,
                                   std::span<const Label> truth);

/// One scored test instance. Score is the negated minimum distance to the
/// nearest prototype, so larger means more phishing-like.
struct ScoredInstance {
    std::string doc_id;
    Label true_label = Label::Unknown;
    double score = 0.0;
};

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
    double threshold = 0.0;  // score cut: positive iff score >= threshold
};

struct EerPoint {
    double threshold = 0.0;
    double fpr = 0.0;
};

struct RocResult {
    std::vector<RocPoint> points;  // one per unique score, ascending fpr
    double auc = 0.0;              // trapezoid rule
    double max_fpr = 0.0;
    double partial_auc = 0.0;             // integrated over fpr in [0, max_fpr], raw
    double partial_auc_normalized = 0.0;  // raw / max_fpr
    EerPoint eer;                         // |fnr - fpr| minimized on the step curve
};

/// Threshold sweep over the unique scores. Requires both classes present.
RocResult roc(std::span<const ScoredInstance> instances, double max_fpr = 0.05);

struct TemporalSplit {
    std::vector<ByteDocument> train;  // phishing strictly before the cutoff
    std::vector<ByteDocument> test;   // remaining phishing plus every legitimate document
};

/// Splits phishing documents at the cutoff date (train: timestamp <
/// cutoff) and routes the entire legitimate pool to test. Throws
/// std::invalid_argument when either side has no phishing documents.
TemporalSplit temporal_split(std::span<const ByteDocument> docs, Date cutoff);

struct IterationMetrics {
    IsoWeek week;
    std::size_t phishing_in_week = 0;
    std::size_t legitimate_pool = 0;
    double tpr = 0.0;
    double fpr = 0.0;
    std::size_t new_prototypes = 0;
    std::size_t prototypes_total = 0;
    std::size_t phishing_seen = 0;
    double compression_ratio = 0.0;  // prototypes_total / phishing_seen
    std::vector<Verdict> phishing_verdicts;   // the week's phishing docs
    std::vector<Verdict> legitimate_verdicts; // full legitimate pool
};

struct EvaluationReport {
    std::string compressor;
    double threshold = 0.0;
    ConfusionMetrics confusion;
    std::optional<RocResult> roc;
    std::vector<IterationMetrics> per_iteration;            // incremental runs only
    double compression_ratio = 0.0;                          // prototypes / phishing represented
    std::size_t prototypes = 0;
    std::size_t train_phishing = 0;
    std::size_t test_phishing = 0;
    std::size_t test_legitimate = 0;
    std::vector<ScoredInstance> scores;                      // instances behind `roc`
};

/// Extract prototypes from `train`, classify and score every test
/// document, and report confusion at the set's threshold plus the full
/// ROC analysis. compression_ratio is prototypes / |train|.
EvaluationReport evaluate_split(const NcdEngine& engine,
                                const std::vector<ByteDocument>& train,
                                const std::vector<ByteDocument>& test,
                                Threshold threshold,
                                int parallelism = 1,
                                double max_fpr = 0.05);

/// Weekly incremental-learning experiment: bucket phishing documents by
/// ISO week, then per week classify the bucket and the full legitimate
/// pool against the current prototypes (per-iteration tpr/fpr) and grow
/// the set from the rejected samples. Starts from an empty prototype set.
/// Confusion and ROC in the report come from the final iteration; the
/// final compression ratio is prototypes / total phishing. Requires >= 2
/// weekly buckets.
EvaluationReport run_incremental(const NcdEngine& engine,
                                 const std::vector<ByteDocument>& docs,
                                 Threshold threshold,
                                 int parallelism = 1,
                                 double max_fpr = 0.05);

struct CompressorBenchRow {
    CompressorKind kind;
    EvaluationReport split_report;
    std::vector<std::size_t> per_iteration_prototypes;  // from the incremental run
};

/// Runs the full split + incremental pipeline once per compressor kind.
std::vector<CompressorBenchRow> bench_compressors(const std::vector<ByteDocument>& docs,
                                                  Date cutoff,
                                                  Threshold threshold,
                                                  int parallelism = 1);

struct LatencyStats {
    double mean_s = 0.0;
    double median_s = 0.0;
    double p95_s = 0.0;
    std::vector<double> samples_s;  // per-document wall clock
};

/// Wall-clock per-document classification timings against a warmed
/// prototype-length cache.
LatencyStats measure_latency(const NcdEngine& engine,
                             const PrototypeSet& set,
                             std::span<const ByteDocument> docs);

/// Stable payload; the timestamp lives only in the metadata field.
std::string report_to_json(const EvaluationReport& report, std::string_view generated_at = "");
std::string roc_to_csv(const RocResult& roc);
std::string iterations_to_csv(const EvaluationReport& report);
std::string bench_to_csv(std::span<const CompressorBenchRow> rows);

}  // namespace phishsim

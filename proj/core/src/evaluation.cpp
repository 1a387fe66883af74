#include "phishsim/evaluation.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "phishsim/errors.hpp"
#include "phishsim/parallel.hpp"

namespace phishsim {

ConfusionMetrics confusion_metrics(std::span<const Verdict> verdicts,
                                   std::span<const Label> truth) {
    if (verdicts.size() != truth.size())
        throw std::invalid_argument("confusion_metrics: verdict/label size mismatch");
    ConfusionMetrics m;
    for (std::size_t i = 0; i < verdicts.size(); ++i) {
        bool predicted_phish = verdicts[i].decision == Decision::Phishing;
        switch (truth[i]) {
            case Label::Phishing:
                predicted_phish ? ++m.tp : ++m.fn;
                break;
            case Label::Legitimate:
                predicted_phish ? ++m.fp : ++m.tn;
                break;
            case Label::Unknown:
                throw std::invalid_argument("confusion_metrics: unlabeled instance '" +
                                            verdicts[i].doc_id + "'");
        }
    }
    std::size_t positives = m.tp + m.fn;
    std::size_t negatives = m.fp + m.tn;
    if (positives == 0)
        throw std::invalid_argument("confusion_metrics: no positive (phishing) instances");
    if (negatives == 0)
        throw std::invalid_argument("confusion_metrics: no negative (legitimate) instances");
    m.tpr = double(m.tp) / double(positives);
    m.fpr = double(m.fp) / double(negatives);
    m.tnr = 1.0 - m.fpr;
    m.accuracy = double(m.tp + m.tn) / double(positives + negatives);
    m.gmean = std::sqrt(m.tpr * m.tnr);
    return m;
}

RocResult roc(std::span<const ScoredInstance> instances, double max_fpr) {
    std::size_t positives = 0, negatives = 0;
    for (const auto& inst : instances) {
        if (!std::isfinite(inst.score))
            throw std::invalid_argument("roc: non-finite score for '" + inst.doc_id + "'");
        if (inst.true_label == Label::Phishing) ++positives;
        else if (inst.true_label == Label::Legitimate) ++negatives;
        else throw std::invalid_argument("roc: unlabeled instance '" + inst.doc_id + "'");
    }
    if (positives == 0) throw std::invalid_argument("roc: no positive (phishing) instances");
    if (negatives == 0) throw std::invalid_argument("roc: no negative (legitimate) instances");

    // Per unique score (descending): counts of each class at that score.
    std::map<double, std::pair<std::size_t, std::size_t>, std::greater<>> groups;
    for (const auto& inst : instances) {
        auto& g = groups[inst.score];
        if (inst.true_label == Label::Phishing) ++g.first;
        else ++g.second;
    }

    RocResult result;
    result.max_fpr = max_fpr;
    result.points.reserve(groups.size());
    double prev_fpr = 0.0, prev_tpr = 0.0;
    std::size_t cum_tp = 0, cum_fp = 0;
    double auc = 0.0, pauc = 0.0;
    bool have_eer = false;
    double best_gap = 0.0;
    for (const auto& [score, counts] : groups) {
        cum_tp += counts.first;
        cum_fp += counts.second;
        double tpr = double(cum_tp) / double(positives);
        double fpr = double(cum_fp) / double(negatives);
        result.points.push_back(RocPoint{fpr, tpr, score});

        auc += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
        if (fpr <= max_fpr) {
            pauc += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
        } else if (prev_fpr < max_fpr) {
            // Clip the crossing segment at max_fpr.
            double frac = (max_fpr - prev_fpr) / (fpr - prev_fpr);
            double tpr_at = prev_tpr + frac * (tpr - prev_tpr);
            pauc += (max_fpr - prev_fpr) * (tpr_at + prev_tpr) / 2.0;
        }

        // EER on the empirical step curve, no interpolation.
        double gap = std::abs((1.0 - tpr) - fpr);
        if (!have_eer || gap < best_gap ||
            (gap == best_gap && fpr < result.eer.fpr)) {
            have_eer = true;
            best_gap = gap;
            result.eer = EerPoint{score, fpr};
        }
        prev_fpr = fpr;
        prev_tpr = tpr;
    }
    result.auc = auc;
    result.partial_auc = pauc;
    result.partial_auc_normalized = max_fpr > 0 ? pauc / max_fpr : 0.0;
    return result;
}

TemporalSplit temporal_split(std::span<const ByteDocument> docs, Date cutoff) {
    TemporalSplit split;
    std::size_t test_phish = 0;
    for (const auto& doc : docs) {
        switch (doc.label) {
            case Label::Phishing:
                if (doc.timestamp < cutoff) {
                    split.train.push_back(doc);
                } else {
                    split.test.push_back(doc);
                    ++test_phish;
                }
                break;
            case Label::Legitimate:
                split.test.push_back(doc);
                break;
            case Label::Unknown:
                throw std::invalid_argument("temporal_split: unlabeled document '" + doc.id + "'");
        }
    }
    if (split.train.empty())
        throw std::invalid_argument("temporal_split: no phishing documents before the cutoff");
    if (test_phish == 0)
        throw std::invalid_argument(
            "temporal_split: no phishing documents at or after the cutoff (empty test positives)");
    return split;
}

namespace {

std::vector<Verdict> classify_batch(const NcdEngine& engine,
                                    std::span<const ByteDocument> docs,
                                    const PrototypeSet& set, int parallelism) {
    std::vector<Verdict> verdicts(docs.size());
    set.prime_engine(engine);
    parallel_for(docs.size(), parallelism,
                 [&](std::size_t i) { verdicts[i] = classify(engine, docs[i], set, 1); });
    return verdicts;
}

double rate(std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : double(num) / double(den);
}

}  // namespace

EvaluationReport evaluate_split(const NcdEngine& engine, const std::vector<ByteDocument>& train,
                                const std::vector<ByteDocument>& test, Threshold threshold,
                                int parallelism, double max_fpr) {
    ExtractionResult extraction = extract_prototypes(engine, train, threshold, parallelism);
    const PrototypeSet& set = extraction.set;

    std::vector<Verdict> verdicts = classify_batch(engine, test, set, parallelism);

    EvaluationReport report;
    report.compressor = engine.kind().key();
    report.threshold = threshold.d;
    report.prototypes = set.size();
    report.train_phishing = train.size();
    report.compression_ratio = rate(set.size(), train.size());

    std::vector<Label> truth;
    truth.reserve(test.size());
    for (const auto& doc : test) {
        truth.push_back(doc.label);
        if (doc.label == Label::Phishing) ++report.test_phishing;
        else if (doc.label == Label::Legitimate) ++report.test_legitimate;
    }
    report.confusion = confusion_metrics(verdicts, truth);

    report.scores.reserve(test.size());
    for (std::size_t i = 0; i < test.size(); ++i)
        report.scores.push_back(
            ScoredInstance{test[i].id, test[i].label, -verdicts[i].min_distance});
    report.roc = roc(report.scores, max_fpr);
    return report;
}

EvaluationReport run_incremental(const NcdEngine& engine, const std::vector<ByteDocument>& docs,
                                 Threshold threshold, int parallelism, double max_fpr) {
    std::vector<ByteDocument> phishing;
    std::vector<ByteDocument> legit;
    for (const auto& doc : docs) {
        if (doc.label == Label::Phishing) phishing.push_back(doc);
        else if (doc.label == Label::Legitimate) legit.push_back(doc);
        else throw std::invalid_argument("run_incremental: unlabeled document '" + doc.id + "'");
    }
    if (legit.empty())
        throw std::invalid_argument("run_incremental: no legitimate documents for the test pool");
    std::sort(phishing.begin(), phishing.end(), [](const ByteDocument& a, const ByteDocument& b) {
        return a.timestamp != b.timestamp ? a.timestamp < b.timestamp : a.id < b.id;
    });

    std::map<IsoWeek, std::vector<ByteDocument>> buckets;
    for (auto& doc : phishing) buckets[iso_week_of(doc.timestamp)].push_back(std::move(doc));
    if (buckets.size() < 2)
        throw std::invalid_argument("run_incremental: need at least 2 weekly buckets, got " +
                                    std::to_string(buckets.size()));

    EvaluationReport report;
    report.compressor = engine.kind().key();
    report.threshold = threshold.d;

    PrototypeSet set = PrototypeSet::empty(engine.kind(), threshold);
    std::size_t phishing_seen = 0;

    for (const auto& [week, batch] : buckets) {
        IterationMetrics iter;
        iter.week = week;
        iter.phishing_in_week = batch.size();
        iter.legitimate_pool = legit.size();

        IncrementalResult update = incremental_update(engine, batch, set, parallelism);
        iter.phishing_verdicts = update.verdicts;

        if (set.is_empty()) {
            iter.legitimate_verdicts.reserve(legit.size());
            for (const auto& doc : legit)
                iter.legitimate_verdicts.push_back(Verdict{
                    doc.id, Decision::NonPhishing, std::nullopt,
                    std::numeric_limits<double>::infinity()});
        } else {
            iter.legitimate_verdicts = classify_batch(engine, legit, set, parallelism);
        }

        std::size_t tp = 0;
        for (const auto& v : iter.phishing_verdicts)
            if (v.decision == Decision::Phishing) ++tp;
        std::size_t fp = 0;
        for (const auto& v : iter.legitimate_verdicts)
            if (v.decision == Decision::Phishing) ++fp;
        iter.tpr = rate(tp, batch.size());
        iter.fpr = rate(fp, legit.size());

        phishing_seen += batch.size();
        set = std::move(update.set);
        iter.new_prototypes = update.new_prototypes;
        iter.prototypes_total = set.size();
        iter.phishing_seen = phishing_seen;
        iter.compression_ratio = rate(set.size(), phishing_seen);
        report.per_iteration.push_back(std::move(iter));
    }

    report.prototypes = set.size();
    report.compression_ratio = rate(set.size(), phishing_seen);
    report.test_legitimate = legit.size();

    // Final-iteration confusion and ROC: the last week's phishing verdicts
    // plus the full legitimate pool, scored against the pre-update set.
    const IterationMetrics& last = report.per_iteration.back();
    report.test_phishing = last.phishing_in_week;
    std::vector<Verdict> final_verdicts = last.phishing_verdicts;
    final_verdicts.insert(final_verdicts.end(), last.legitimate_verdicts.begin(),
                          last.legitimate_verdicts.end());
    std::vector<Label> truth(last.phishing_verdicts.size(), Label::Phishing);
    truth.insert(truth.end(), last.legitimate_verdicts.size(), Label::Legitimate);
    report.confusion = confusion_metrics(final_verdicts, truth);

    report.scores.reserve(final_verdicts.size());
    bool scores_finite = true;
    for (std::size_t i = 0; i < final_verdicts.size(); ++i) {
        if (!std::isfinite(final_verdicts[i].min_distance)) scores_finite = false;
        report.scores.push_back(ScoredInstance{final_verdicts[i].doc_id, truth[i],
                                               -final_verdicts[i].min_distance});
    }
    if (scores_finite) report.roc = roc(report.scores, max_fpr);
    return report;
}

std::vector<CompressorBenchRow> bench_compressors(const std::vector<ByteDocument>& docs,
                                                  Date cutoff, Threshold threshold,
                                                  int parallelism) {
    std::vector<CompressorBenchRow> rows;
    for (CompressorKind kind : all_compressor_kinds()) {
        NcdEngine engine(kind);
        TemporalSplit split = temporal_split(docs, cutoff);
        CompressorBenchRow row;
        row.kind = kind;
        row.split_report =
            evaluate_split(engine, split.train, split.test, threshold, parallelism);
        EvaluationReport inc = run_incremental(engine, docs, threshold, parallelism);
        row.per_iteration_prototypes.reserve(inc.per_iteration.size());
        for (const auto& iter : inc.per_iteration)
            row.per_iteration_prototypes.push_back(iter.prototypes_total);
        rows.push_back(std::move(row));
    }
    return rows;
}

LatencyStats measure_latency(const NcdEngine& engine, const PrototypeSet& set,
                             std::span<const ByteDocument> docs) {
    set.prime_engine(engine);
    LatencyStats stats;
    stats.samples_s.reserve(docs.size());
    for (const auto& doc : docs) {
        auto t0 = std::chrono::steady_clock::now();
        (void)classify(engine, doc, set, 1);
        auto t1 = std::chrono::steady_clock::now();
        stats.samples_s.push_back(std::chrono::duration<double>(t1 - t0).count());
    }
    if (stats.samples_s.empty()) return stats;
    std::vector<double> sorted = stats.samples_s;
    std::sort(sorted.begin(), sorted.end());
    double sum = 0.0;
    for (double s : sorted) sum += s;
    stats.mean_s = sum / double(sorted.size());
    stats.median_s = sorted[(sorted.size() - 1) / 2];
    stats.p95_s = sorted[std::min(sorted.size() - 1,
                                  std::size_t(std::ceil(0.95 * double(sorted.size())) - 1))];
    return stats;
}

namespace {

std::string fmt_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

nlohmann::ordered_json confusion_json(const ConfusionMetrics& m) {
    return {
        {"tp", m.tp},       {"fp", m.fp},     {"tn", m.tn},           {"fn", m.fn},
        {"tpr", m.tpr},     {"fpr", m.fpr},   {"tnr", m.tnr},         {"accuracy", m.accuracy},
        {"gmean", m.gmean},
    };
}

}  // namespace

std::string report_to_json(const EvaluationReport& report, std::string_view generated_at) {
    nlohmann::ordered_json j;
    j["compressor"] = report.compressor;
    j["threshold"] = report.threshold;
    j["prototypes"] = report.prototypes;
    j["compression_ratio"] = report.compression_ratio;
    j["train_phishing"] = report.train_phishing;
    j["test_phishing"] = report.test_phishing;
    j["test_legitimate"] = report.test_legitimate;
    j["confusion"] = confusion_json(report.confusion);
    if (report.roc) {
        j["roc"] = {
            {"auc", report.roc->auc},
            {"max_fpr", report.roc->max_fpr},
            {"partial_auc", report.roc->partial_auc},
            {"partial_auc_normalized", report.roc->partial_auc_normalized},
            {"eer", {{"threshold", report.roc->eer.threshold}, {"fpr", report.roc->eer.fpr}}},
            {"points", report.roc->points.size()},
        };
    }
    if (!report.per_iteration.empty()) {
        nlohmann::ordered_json iters = nlohmann::ordered_json::array();
        for (const auto& it : report.per_iteration) {
            iters.push_back({
                {"week", to_string(it.week)},
                {"phishing_in_week", it.phishing_in_week},
                {"tpr", it.tpr},
                {"fpr", it.fpr},
                {"new_prototypes", it.new_prototypes},
                {"prototypes_total", it.prototypes_total},
                {"phishing_seen", it.phishing_seen},
                {"compression_ratio", it.compression_ratio},
            });
        }
        j["per_iteration"] = std::move(iters);
    }
    j["metadata"] = {{"generated_at", generated_at}};
    return j.dump(2) + "\n";
}

std::string roc_to_csv(const RocResult& roc) {
    std::ostringstream out;
    out << "fpr,tpr,threshold\n";
    for (const auto& p : roc.points)
        out << fmt_double(p.fpr) << ',' << fmt_double(p.tpr) << ',' << fmt_double(p.threshold)
            << '\n';
    return out.str();
}

std::string iterations_to_csv(const EvaluationReport& report) {
    std::ostringstream out;
    out << "week,tpr,fpr,prototypes,ratio\n";
    for (const auto& it : report.per_iteration)
        out << to_string(it.week) << ',' << fmt_double(it.tpr) << ',' << fmt_double(it.fpr) << ','
            << it.prototypes_total << ',' << fmt_double(it.compression_ratio) << '\n';
    return out.str();
}

std::string bench_to_csv(std::span<const CompressorBenchRow> rows) {
    std::ostringstream out;
    out << "compressor,tpr,tnr,fpr,accuracy,gmean,auc,partial_auc,prototypes,final_iteration_prototypes\n";
    for (const auto& row : rows) {
        const auto& m = row.split_report.confusion;
        const auto& r = row.split_report.roc;
        out << row.kind.key() << ',' << fmt_double(m.tpr) << ',' << fmt_double(m.tnr) << ','
            << fmt_double(m.fpr) << ',' << fmt_double(m.accuracy) << ',' << fmt_double(m.gmean)
            << ',' << fmt_double(r ? r->auc : 0.0) << ',' << fmt_double(r ? r->partial_auc : 0.0)
            << ',' << row.split_report.prototypes << ','
            << (row.per_iteration_prototypes.empty() ? 0 : row.per_iteration_prototypes.back())
            << '\n';
    }
    return out.str();
}

}  // namespace phishsim

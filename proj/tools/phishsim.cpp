// phishsim: batch entry points for the NCD phishing-similarity pipeline.
//
//   sanitize     reduce pages to tag skeletons
//   extract      build a prototype database from a corpus manifest
//   classify     score one page against a prototype database
//   tune         quality-of-clustering threshold sweep
//   eval         temporal-split evaluation
//   incremental  weekly incremental-learning experiment
//   analyze      pairwise NCD matrix + dendrogram export
//   bench        compare the four compressor backends
//   serve        HTTP classification gateway
//   db           prototype database stats / verification

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <csignal>
#include <ctime>
#include <fstream>
#include <iostream>
#include <thread>

#include "phishsim/analysis.hpp"
#include "phishsim/corpus.hpp"
#include "phishsim/errors.hpp"
#include "phishsim/evaluation.hpp"
#include "phishsim/gateway.hpp"
#include "phishsim/ncd.hpp"
#include "phishsim/parallel.hpp"
#include "phishsim/prototypes.hpp"
#include "phishsim/store.hpp"
#include "phishsim/tuning.hpp"

using namespace phishsim;
using json = nlohmann::ordered_json;

namespace {

struct GlobalOpts {
    std::string compressor = "lzma";
    double threshold = 0.251;
    int parallel = default_parallelism();
    bool strip_attributes = false;

    CompressorKind kind() const { return CompressorKind::parse(compressor); }
    Threshold thresh() const { return Threshold::checked(threshold); }
    SanitizeOptions sanitize_opts() const { return SanitizeOptions{!strip_attributes}; }
};

std::string now_iso() {
    std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_file(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out.write(content.data(), std::streamsize(content.size()));
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return std::move(buf).str();
}

std::vector<ByteDocument> ingest(const std::filesystem::path& manifest, const GlobalOpts& g,
                                 IngestStats* stats_out = nullptr) {
    IngestResult result = ingest_corpus(manifest, g.sanitize_opts(), g.parallel);
    for (const auto& warning : result.stats.warnings)
        std::cerr << "warning: " << warning << "\n";
    if (stats_out) *stats_out = result.stats;
    return take_documents(std::move(result));
}

std::vector<ByteDocument> phishing_only(std::vector<ByteDocument> docs) {
    std::erase_if(docs, [](const ByteDocument& d) { return d.label != Label::Phishing; });
    return docs;
}

json ingest_stats_json(const IngestStats& stats) {
    return json{{"listed", stats.listed},
                {"ingested", stats.ingested},
                {"dropped_empty", stats.dropped_empty},
                {"dropped_missing", stats.dropped_missing},
                {"dropped_unparseable", stats.dropped_unparseable}};
}

// --- subcommand bodies -----------------------------------------------------

int cmd_sanitize(const GlobalOpts& g, const std::string& in, const std::string& out,
                 const std::string& manifest, const std::string& out_dir) {
    if (!manifest.empty()) {
        IngestStats stats;
        std::vector<ByteDocument> docs = ingest(manifest, g, &stats);
        if (!out_dir.empty()) {
            std::filesystem::create_directories(out_dir);
            for (const auto& doc : docs)
                write_file(std::filesystem::path(out_dir) / (doc.id + ".html"), doc.bytes);
        }
        json summary = ingest_stats_json(stats);
        summary["out_dir"] = out_dir;
        std::cout << summary.dump() << "\n";
        return 0;
    }
    std::string raw = read_file(in);
    std::string skeleton = sanitize_html_bytes(raw, g.sanitize_opts());
    if (out.empty()) {
        std::cout << skeleton << "\n";
    } else {
        write_file(out, skeleton);
        json summary{{"in", in}, {"out", out}, {"original_len", raw.size()},
                     {"sanitized_len", skeleton.size()}};
        std::cout << summary.dump() << "\n";
    }
    return 0;
}

int cmd_extract(const GlobalOpts& g, const std::string& manifest, const std::string& out) {
    std::vector<ByteDocument> data = phishing_only(ingest(manifest, g));
    if (data.empty()) throw Error("manifest has no phishing documents to extract from");
    NcdEngine engine(g.kind());
    ExtractionResult r = extract_prototypes(engine, data, g.thresh(), g.parallel);
    save(r.set, out);

    double max_dist = 0.0, sum = 0.0;
    for (const auto& [id, entry] : r.assignment) {
        max_dist = std::max(max_dist, entry.distance);
        sum += entry.distance;
    }
    json summary{
        {"prototypes", r.set.size()},
        {"documents", data.size()},
        {"compression_ratio", double(r.set.size()) / double(data.size())},
        {"threshold", g.thresh().d},
        {"compressor", g.kind().key()},
        {"ncd_evaluations", r.ncd_evaluations},
        {"coverage",
         {{"members", r.assignment.size()},
          {"max_distance", max_dist},
          {"mean_distance", r.assignment.empty() ? 0.0 : sum / double(r.assignment.size())}}},
        {"db", out},
    };
    std::cout << summary.dump() << "\n";
    return 0;
}

int cmd_classify(const GlobalOpts& g, const std::string& db, const std::string& in,
                 const std::string& out) {
    PrototypeSet set = load(db);
    NcdEngine engine(set.compressor());
    std::string raw = read_file(in);
    ByteDocument doc =
        sanitize_html(ByteDocument{in, raw, in, Label::Unknown, {}}, g.sanitize_opts()).doc;
    Verdict v = classify(engine, doc, set, g.parallel);
    json line{{"doc", in},
              {"decision", to_string(v.decision)},
              {"min_distance", v.min_distance},
              {"nearest_prototype", v.nearest_prototype ? json(*v.nearest_prototype) : json()},
              {"threshold", set.threshold().d},
              {"compressor", set.compressor().key()}};
    std::string text = line.dump() + "\n";
    if (!out.empty()) write_file(out, text);
    std::cout << text;
    return 0;
}

int cmd_tune(const GlobalOpts& g, const std::string& manifest, double grid_start,
             double grid_stop, double grid_step, const std::string& out,
             const std::string& json_out) {
    std::vector<ByteDocument> data = phishing_only(ingest(manifest, g));
    if (data.empty()) throw Error("manifest has no phishing documents to tune on");
    std::vector<Threshold> grid;
    for (double t = grid_start; t <= grid_stop + grid_step / 2; t += grid_step)
        grid.push_back(Threshold::checked(t));
    NcdEngine engine(g.kind());
    ThresholdSweep sweep = select_threshold(engine, data, grid, g.parallel);
    for (const auto& warning : sweep.warnings) std::cerr << "warning: " << warning << "\n";
    if (!out.empty()) write_file(out, sweep_to_csv(sweep));
    if (!json_out.empty()) write_file(json_out, sweep_to_json(sweep));
    json summary{{"selected_threshold", sweep.selected.d},
                 {"grid_points", sweep.grid.size()},
                 {"csv", out},
                 {"json", json_out}};
    std::cout << summary.dump() << "\n";
    return 0;
}

int cmd_eval(const GlobalOpts& g, const std::string& manifest, const std::string& cutoff,
             const std::string& db, const std::string& out, const std::string& roc_csv) {
    std::vector<ByteDocument> docs = ingest(manifest, g);
    TemporalSplit split = temporal_split(docs, parse_date(cutoff));
    NcdEngine engine(g.kind());
    EvaluationReport report =
        evaluate_split(engine, split.train, split.test, g.thresh(), g.parallel);
    if (!db.empty()) {
        ExtractionResult r = extract_prototypes(engine, split.train, g.thresh(), g.parallel);
        save(r.set, db);
    }
    std::string payload = report_to_json(report, now_iso());
    if (!out.empty()) write_file(out, payload);
    if (!roc_csv.empty() && report.roc) write_file(roc_csv, roc_to_csv(*report.roc));
    std::cout << payload;
    return 0;
}

int cmd_incremental(const GlobalOpts& g, const std::string& manifest, const std::string& out,
                    const std::string& csv) {
    std::vector<ByteDocument> docs = ingest(manifest, g);
    NcdEngine engine(g.kind());
    EvaluationReport report = run_incremental(engine, docs, g.thresh(), g.parallel);
    std::string payload = report_to_json(report, now_iso());
    if (!out.empty()) write_file(out, payload);
    if (!csv.empty()) write_file(csv, iterations_to_csv(report));
    std::cout << payload;
    return 0;
}

int cmd_analyze(const GlobalOpts& g, const std::string& manifest, const std::string& linkage,
                const std::string& out_dir) {
    std::vector<ByteDocument> docs = ingest(manifest, g);
    if (docs.size() < 2) throw Error("analysis needs at least 2 documents");
    NcdEngine engine(g.kind());
    NcdMatrix matrix = engine.matrix(docs, g.parallel);
    DendrogramNode tree = agglomerate(matrix, parse_linkage(linkage));

    std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);
    write_file(dir / "matrix.csv", matrix_to_csv(matrix));
    write_file(dir / "tree.newick", to_newick(tree) + "\n");
    write_file(dir / "linkage.csv", to_linkage_csv(tree));
    json summary{{"documents", docs.size()},
                 {"linkage", linkage},
                 {"out_dir", out_dir},
                 {"files", {"matrix.csv", "tree.newick", "linkage.csv"}}};
    std::cout << summary.dump() << "\n";
    return 0;
}

int cmd_bench(const GlobalOpts& g, const std::string& manifest, const std::string& cutoff,
              const std::string& out) {
    std::vector<ByteDocument> docs = ingest(manifest, g);
    std::vector<CompressorBenchRow> rows =
        bench_compressors(docs, parse_date(cutoff), g.thresh(), g.parallel);
    std::string csv = bench_to_csv(rows);
    if (!out.empty()) write_file(out, csv);
    std::cout << csv;
    return 0;
}

std::atomic<bool> g_stop{false};

int cmd_serve(const GlobalOpts& g, const std::string& config_path, const std::string& host,
              int port, const std::string& db, const std::string& spool,
              std::size_t max_body_bytes) {
    GatewayConfig config;
    if (!config_path.empty()) config = load_gateway_config(config_path);
    if (!host.empty()) config.host = host;
    if (port >= 0) config.port = port;
    if (!db.empty()) config.db_path = db;
    if (!spool.empty()) config.spool_dir = spool;
    if (max_body_bytes > 0) config.max_body_bytes = max_body_bytes;
    if (!config.compressor) config.compressor = g.kind();
    if (!config.threshold) config.threshold = g.thresh().d;
    config.sanitize = g.sanitize_opts();
    config.parallelism = g.parallel;

    Gateway gateway(config);
    if (!gateway.start()) throw Error("cannot bind " + config.host + ":" +
                                      std::to_string(config.port));
    std::signal(SIGINT, [](int) { g_stop.store(true); });
    std::signal(SIGTERM, [](int) { g_stop.store(true); });
    std::cerr << "serving on " << config.host << ":" << gateway.port() << "\n";
    while (!g_stop.load()) std::this_thread::sleep_for(std::chrono::milliseconds(200));
    gateway.stop();
    return 0;
}

int cmd_db_stats(const std::string& db) {
    DbStats stats = db_stats(db);
    json summary{{"prototypes", stats.prototypes},
                 {"manifest_blob_bytes", stats.manifest_blob_bytes},
                 {"disk_blob_bytes", stats.disk_blob_bytes},
                 {"compressor", stats.compressor.key()},
                 {"threshold", stats.threshold},
                 {"created_at", stats.created_at}};
    std::cout << summary.dump() << "\n";
    return 0;
}

int cmd_db_verify(const std::string& db) {
    verify_db(db);
    std::cout << json{{"db", db}, {"status", "ok"}}.dump() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Feature-free phishing-page similarity pipeline"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Key=value config file; command-line flags win");

    GlobalOpts g;
    app.add_option("--compressor", g.compressor,
                   "Compressor backend: lzma, zlib, gzip, bzip2 (optionally -level)")
        ->capture_default_str();
    app.add_option("--threshold", g.threshold, "NCD distance threshold in (0,1)")
        ->capture_default_str();
    app.add_option("--parallel", g.parallel, "Worker threads")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app.add_flag("--strip-attributes", g.strip_attributes,
                 "Drop element attributes during sanitization");

    int rc = 0;
    std::function<int()> action;

    // sanitize
    auto* c_san = app.add_subcommand("sanitize", "Reduce HTML to its tag skeleton");
    static std::string san_in, san_out, san_manifest, san_out_dir;
    c_san->add_option("--in", san_in, "Input HTML file");
    c_san->add_option("--out", san_out, "Output file (default: stdout)");
    c_san->add_option("--manifest", san_manifest, "Corpus manifest (JSONL)");
    c_san->add_option("--out-dir", san_out_dir, "Directory for sanitized pages");
    c_san->callback([&] {
        if (san_in.empty() && san_manifest.empty())
            throw CLI::ValidationError("sanitize", "need --in or --manifest");
        action = [&] { return cmd_sanitize(g, san_in, san_out, san_manifest, san_out_dir); };
    });

    // extract
    auto* c_ext = app.add_subcommand("extract", "Extract prototypes into a database");
    static std::string ext_manifest, ext_out;
    c_ext->add_option("--manifest", ext_manifest, "Corpus manifest (JSONL)")->required();
    c_ext->add_option("--out", ext_out, "Prototype database directory")->required();
    c_ext->callback([&] { action = [&] { return cmd_extract(g, ext_manifest, ext_out); }; });

    // classify
    auto* c_cls = app.add_subcommand("classify", "Classify one page against a database");
    static std::string cls_db, cls_in, cls_out;
    c_cls->add_option("--db", cls_db, "Prototype database directory")->required();
    c_cls->add_option("--in", cls_in, "Page to classify")->required();
    c_cls->add_option("--out", cls_out, "Verdict output file");
    c_cls->callback([&] { action = [&] { return cmd_classify(g, cls_db, cls_in, cls_out); }; });

    // tune
    auto* c_tune = app.add_subcommand("tune", "Quality-of-clustering threshold sweep");
    static std::string tune_manifest, tune_out, tune_json;
    static double tune_start = 0.05, tune_stop = 0.60, tune_step = 0.01;
    c_tune->add_option("--manifest", tune_manifest, "Corpus manifest (JSONL)")->required();
    c_tune->add_option("--grid-start", tune_start, "")->capture_default_str();
    c_tune->add_option("--grid-stop", tune_stop, "")->capture_default_str();
    c_tune->add_option("--grid-step", tune_step, "")->capture_default_str();
    c_tune->add_option("--out", tune_out, "Sweep CSV path");
    c_tune->add_option("--json", tune_json, "Fit + selection JSON sidecar");
    c_tune->callback([&] {
        action = [&] {
            return cmd_tune(g, tune_manifest, tune_start, tune_stop, tune_step, tune_out,
                            tune_json);
        };
    });

    // eval
    auto* c_eval = app.add_subcommand("eval", "Temporal-split evaluation");
    static std::string eval_manifest, eval_cutoff, eval_db, eval_out, eval_roc;
    c_eval->add_option("--manifest", eval_manifest, "Corpus manifest (JSONL)")->required();
    c_eval->add_option("--cutoff", eval_cutoff, "Split date (YYYY-MM-DD)")->required();
    c_eval->add_option("--db", eval_db, "Also save the train-split prototypes here");
    c_eval->add_option("--out", eval_out, "Report JSON path");
    c_eval->add_option("--roc-csv", eval_roc, "ROC curve CSV path");
    c_eval->callback([&] {
        action = [&] { return cmd_eval(g, eval_manifest, eval_cutoff, eval_db, eval_out, eval_roc); };
    });

    // incremental
    auto* c_inc = app.add_subcommand("incremental", "Weekly incremental-learning run");
    static std::string inc_manifest, inc_out, inc_csv;
    c_inc->add_option("--manifest", inc_manifest, "Corpus manifest (JSONL)")->required();
    c_inc->add_option("--out", inc_out, "Report JSON path");
    c_inc->add_option("--csv", inc_csv, "Per-iteration CSV path");
    c_inc->callback([&] {
        action = [&] { return cmd_incremental(g, inc_manifest, inc_out, inc_csv); };
    });

    // analyze
    auto* c_ana = app.add_subcommand("analyze", "Pairwise NCD matrix and dendrogram export");
    static std::string ana_manifest, ana_linkage = "average", ana_out = "analysis";
    c_ana->add_option("--manifest", ana_manifest, "Corpus manifest (JSONL)")->required();
    c_ana->add_option("--linkage", ana_linkage, "single | average | complete")
        ->capture_default_str();
    c_ana->add_option("--out-dir", ana_out, "Output directory")->capture_default_str();
    c_ana->callback([&] { action = [&] { return cmd_analyze(g, ana_manifest, ana_linkage, ana_out); }; });

    // bench
    auto* c_bench = app.add_subcommand("bench", "Per-compressor pipeline comparison");
    static std::string bench_manifest, bench_cutoff, bench_out;
    c_bench->add_option("--manifest", bench_manifest, "Corpus manifest (JSONL)")->required();
    c_bench->add_option("--cutoff", bench_cutoff, "Split date (YYYY-MM-DD)")->required();
    c_bench->add_option("--out", bench_out, "Metrics CSV path");
    c_bench->callback([&] {
        action = [&] { return cmd_bench(g, bench_manifest, bench_cutoff, bench_out); };
    });

    // serve
    auto* c_srv = app.add_subcommand("serve", "HTTP classification gateway");
    static std::string srv_config, srv_host, srv_db, srv_spool;
    static int srv_port = -1;
    static std::size_t srv_cap = 0;
    c_srv->add_option("--gateway-config", srv_config, "Gateway key=value config file");
    c_srv->add_option("--host", srv_host, "Bind host");
    c_srv->add_option("--port", srv_port, "Bind port (0 = ephemeral)");
    c_srv->add_option("--db", srv_db, "Prototype database directory");
    c_srv->add_option("--spool", srv_spool, "Report spool directory");
    c_srv->add_option("--max-body-bytes", srv_cap, "Request body cap");
    c_srv->callback([&] {
        action = [&] {
            return cmd_serve(g, srv_config, srv_host, srv_port, srv_db, srv_spool, srv_cap);
        };
    });

    // db stats/verify
    auto* c_db = app.add_subcommand("db", "Prototype database utilities");
    c_db->require_subcommand(1);
    static std::string db_dir;
    auto* c_db_stats = c_db->add_subcommand("stats", "Size and metadata summary");
    c_db_stats->add_option("--db", db_dir, "Prototype database directory")->required();
    c_db_stats->callback([&] { action = [&] { return cmd_db_stats(db_dir); }; });
    auto* c_db_verify = c_db->add_subcommand("verify", "Hash and sidecar verification");
    c_db_verify->add_option("--db", db_dir, "Prototype database directory")->required();
    c_db_verify->callback([&] { action = [&] { return cmd_db_verify(db_dir); }; });

    // Global options are accepted after the subcommand name as well.
    std::function<void(CLI::App*)> enable_fallthrough = [&](CLI::App* node) {
        for (CLI::App* sub : node->get_subcommands([](CLI::App*) { return true; })) {
            sub->fallthrough();
            enable_fallthrough(sub);
        }
    };
    enable_fallthrough(&app);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;  // usage errors
    }

    try {
        rc = action ? action() : 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;  // domain errors
    }
    return rc;
}

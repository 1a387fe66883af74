#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "phishsim/document.hpp"
#include "synthetic.hpp"
#include "tempdir.hpp"

using namespace phishsim;
using namespace phishsim::testsupport;
using json = nlohmann::json;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string out;
};

RunResult run_cli(const std::string& args, const std::filesystem::path& capture_dir) {
    static int counter = 0;
    std::filesystem::path out_file =
        capture_dir / ("cli-out-" + std::to_string(counter++) + ".txt");
    std::string cmd = std::string(PHISHSIM_CLI_PATH) + " " + args + " >" + out_file.string() +
                      " 2>" + out_file.string() + ".err";
    int raw = std::system(cmd.c_str());
    RunResult result;
    result.exit_code = WEXITSTATUS(raw);
    std::ifstream in(out_file);
    std::ostringstream buf;
    buf << in.rdbuf();
    result.out = buf.str();
    return result;
}

std::string first_line(const std::string& text) {
    auto pos = text.find('\n');
    return pos == std::string::npos ? text : text.substr(0, pos);
}

/// Deterministic payload comparison: everything except the timestamp that
/// lives in the metadata block.
std::string strip_metadata(std::string text) {
    auto pos = text.find("\"generated_at\"");
    if (pos != std::string::npos) {
        auto end = text.find('\n', pos);
        text.erase(pos, end == std::string::npos ? std::string::npos : end - pos);
    }
    return text;
}

struct CorpusOnDisk {
    TempDir dir{"cli"};
    std::filesystem::path manifest;

    explicit CorpusOnDisk(int templates = 4, int variants = 8, int legit = 24, int weeks = 4,
                          std::uint64_t seed = 12121) {
        KitCorpusSpec spec;
        spec.templates = templates;
        spec.variants_per_template = variants;
        spec.legitimate = legit;
        spec.weeks = weeks;
        spec.seed = seed;
        manifest = write_corpus(dir.path(), make_kit_corpus(spec));
    }
};

}  // namespace

TEST_CASE("usage errors exit with code 2") {
    TempDir dir("cli-usage");
    CHECK(run_cli("", dir.path()).exit_code == 2);                      // missing subcommand
    CHECK(run_cli("frobnicate", dir.path()).exit_code == 2);            // unknown subcommand
    CHECK(run_cli("classify --db x", dir.path()).exit_code == 2);       // missing required --in
    CHECK(run_cli("extract --manifest m --out d --bogus-flag", dir.path()).exit_code == 2);
    CHECK(run_cli("--help", dir.path()).exit_code == 0);
    CHECK(run_cli("extract --help", dir.path()).exit_code == 0);
}

TEST_CASE("domain errors exit with code 1") {
    TempDir dir("cli-domain");
    CHECK(run_cli("db stats --db " + (dir / "nope").string(), dir.path()).exit_code == 1);
    CHECK(run_cli("classify --db " + (dir / "nope").string() + " --in " +
                      (dir / "nope.html").string(),
                  dir.path())
              .exit_code == 1);
    CHECK(run_cli("eval --manifest " + (dir / "absent.jsonl").string() +
                      " --cutoff 2020-07-01",
                  dir.path())
              .exit_code == 1);
}

TEST_CASE("sanitize single file to stdout") {
    TempDir dir("cli-sanitize");
    std::ofstream page(dir / "page.html");
    page << "<!-- c --><div class=\"a\">text<span>x</span></div>";
    page.close();
    RunResult r = run_cli("sanitize --in " + (dir / "page.html").string(), dir.path());
    CHECK(r.exit_code == 0);
    CHECK(first_line(r.out) == "<div class=\"a\"><span></span></div>");

    RunResult stripped = run_cli(
        "--strip-attributes sanitize --in " + (dir / "page.html").string(), dir.path());
    CHECK(first_line(stripped.out) == "<div><span></span></div>");
}

TEST_CASE("full pipeline: extract, stats, classify, eval, incremental, analyze") {
    CorpusOnDisk corpus;
    const std::string m = corpus.manifest.string();
    std::filesystem::path db = corpus.dir / "db";

    // extract (global flags are valid after the subcommand too)
    RunResult ext = run_cli("extract --manifest " + m + " --threshold 0.251 --out " + db.string(),
                            corpus.dir.path());
    REQUIRE(ext.exit_code == 0);
    json ext_summary = json::parse(first_line(ext.out));
    CHECK(ext_summary["prototypes"].get<int>() >= 4);
    CHECK(ext_summary["documents"].get<int>() == 32);
    CHECK(ext_summary["coverage"]["max_distance"].get<double>() <= 0.251);

    // db stats / verify
    RunResult stats = run_cli("db stats --db " + db.string(), corpus.dir.path());
    REQUIRE(stats.exit_code == 0);
    json stats_json = json::parse(first_line(stats.out));
    CHECK(stats_json["prototypes"] == ext_summary["prototypes"]);
    CHECK(stats_json["manifest_blob_bytes"] == stats_json["disk_blob_bytes"]);
    CHECK(run_cli("db verify --db " + db.string(), corpus.dir.path()).exit_code == 0);

    // classify a known phishing page: verdict JSON on one line
    std::filesystem::path page = corpus.dir / "pages" / "P_000_000.html";
    RunResult cls = run_cli("classify --db " + db.string() + " --in " + page.string(),
                            corpus.dir.path());
    REQUIRE(cls.exit_code == 0);
    json verdict = json::parse(first_line(cls.out));
    CHECK(verdict["decision"] == "phishing");
    CHECK(verdict["min_distance"].get<double>() < 0.251);

    // eval with report + ROC csv
    std::filesystem::path report = corpus.dir / "report.json";
    std::filesystem::path roc = corpus.dir / "roc.csv";
    RunResult ev = run_cli("eval --manifest " + m + " --cutoff 2020-06-15 --out " +
                               report.string() + " --roc-csv " + roc.string(),
                           corpus.dir.path());
    REQUIRE(ev.exit_code == 0);
    std::ifstream rep(report);
    json report_json = json::parse(rep);
    CHECK(report_json["confusion"]["tpr"].get<double>() >= 0.8);
    CHECK(report_json["roc"]["auc"].get<double>() >= 0.9);
    std::ifstream roc_in(roc);
    std::string roc_header;
    std::getline(roc_in, roc_header);
    CHECK(roc_header == "fpr,tpr,threshold");

    // incremental
    std::filesystem::path inc_report = corpus.dir / "inc.json";
    std::filesystem::path inc_csv = corpus.dir / "inc.csv";
    RunResult inc = run_cli("incremental --manifest " + m + " --out " + inc_report.string() +
                                " --csv " + inc_csv.string(),
                            corpus.dir.path());
    REQUIRE(inc.exit_code == 0);
    std::ifstream inc_in(inc_report);
    json inc_json = json::parse(inc_in);
    CHECK(inc_json["per_iteration"].size() >= 2);
    std::ifstream csv_in(inc_csv);
    std::string csv_header;
    std::getline(csv_in, csv_header);
    CHECK(csv_header == "week,tpr,fpr,prototypes,ratio");

    // analyze (small slice: reuse the manifest)
    RunResult ana = run_cli("analyze --manifest " + m + " --out-dir " +
                                (corpus.dir / "analysis").string(),
                            corpus.dir.path());
    REQUIRE(ana.exit_code == 0);
    CHECK(std::filesystem::exists(corpus.dir / "analysis" / "matrix.csv"));
    CHECK(std::filesystem::exists(corpus.dir / "analysis" / "tree.newick"));
    CHECK(std::filesystem::exists(corpus.dir / "analysis" / "linkage.csv"));
}

TEST_CASE("eval runs are byte-identical modulo the metadata stamp") {
    CorpusOnDisk corpus(3, 6, 12, 3, 777);
    const std::string m = corpus.manifest.string();
    std::filesystem::path r1 = corpus.dir / "r1.json";
    std::filesystem::path r2 = corpus.dir / "r2.json";
    REQUIRE(run_cli("eval --manifest " + m + " --cutoff 2020-06-15 --out " + r1.string(),
                    corpus.dir.path())
                .exit_code == 0);
    REQUIRE(run_cli("eval --manifest " + m + " --cutoff 2020-06-15 --out " + r2.string(),
                    corpus.dir.path())
                .exit_code == 0);
    std::ifstream f1(r1), f2(r2);
    std::stringstream s1, s2;
    s1 << f1.rdbuf();
    s2 << f2.rdbuf();
    CHECK(strip_metadata(s1.str()) == strip_metadata(s2.str()));
}

TEST_CASE("tune sweeps and writes csv plus json sidecar") {
    CorpusOnDisk corpus(4, 6, 0, 1, 4567);
    const std::string m = corpus.manifest.string();
    std::filesystem::path csv = corpus.dir / "sweep.csv";
    std::filesystem::path sidecar = corpus.dir / "sweep.json";
    RunResult r = run_cli("tune --manifest " + m +
                              " --grid-start 0.14 --grid-stop 0.40 --grid-step 0.02 --out " +
                              csv.string() + " --json " + sidecar.string(),
                          corpus.dir.path());
    REQUIRE(r.exit_code == 0);
    json summary = json::parse(first_line(r.out));
    double selected = summary["selected_threshold"].get<double>();
    CHECK(selected >= 0.14);
    CHECK(selected <= 0.40);
    std::ifstream csv_in(csv);
    std::string header;
    std::getline(csv_in, header);
    CHECK(header == "threshold,qc,k");
    std::ifstream sidecar_in(sidecar);
    json sidecar_json = json::parse(sidecar_in);
    CHECK(sidecar_json["fit"]["degree"] == 8);
    CHECK(sidecar_json["fit"]["coefficients"].size() == 9);
}

TEST_CASE("bench emits the four-compressor table") {
    CorpusOnDisk corpus(2, 6, 10, 3, 999);
    RunResult r = run_cli("bench --manifest " + corpus.manifest.string() +
                              " --cutoff 2020-06-15 --out " + (corpus.dir / "bench.csv").string(),
                          corpus.dir.path());
    REQUIRE(r.exit_code == 0);
    std::ifstream in(corpus.dir / "bench.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header ==
          "compressor,tpr,tnr,fpr,accuracy,gmean,auc,partial_auc,prototypes,final_iteration_prototypes");
    std::size_t rows = 0;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 4);
}

TEST_CASE("config file supplies defaults, flags win") {
    CorpusOnDisk corpus(2, 4, 0, 1, 31415);
    std::filesystem::path cfg = corpus.dir / "phishsim.conf";
    {
        std::ofstream out(cfg);
        out << "compressor=zlib\n";
        out << "threshold=0.30\n";
    }
    std::filesystem::path db = corpus.dir / "db-cfg";
    RunResult r = run_cli("--config " + cfg.string() + " extract --manifest " +
                              corpus.manifest.string() + " --out " + db.string(),
                          corpus.dir.path());
    REQUIRE(r.exit_code == 0);
    json summary = json::parse(first_line(r.out));
    CHECK(summary["compressor"] == "zlib-6");
    CHECK(summary["threshold"].get<double>() == 0.30);

    std::filesystem::path db2 = corpus.dir / "db-flag";
    RunResult r2 = run_cli("--config " + cfg.string() + " --compressor gzip extract --manifest " +
                               corpus.manifest.string() + " --out " + db2.string(),
                           corpus.dir.path());
    REQUIRE(r2.exit_code == 0);
    json summary2 = json::parse(first_line(r2.out));
    CHECK(summary2["compressor"] == "gzip-6");  // flag beats config
    CHECK(summary2["threshold"].get<double>() == 0.30);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "phishsim/errors.hpp"
#include "phishsim/gateway.hpp"
#include "phishsim/ncd.hpp"
#include "phishsim/prototypes.hpp"
#include "phishsim/store.hpp"
#include "synthetic.hpp"
#include "tempdir.hpp"

using namespace phishsim;
using namespace phishsim::testsupport;
using json = nlohmann::json;

namespace {

struct Fixture {
    TempDir dir{"gateway"};
    std::vector<ByteDocument> raw_pages;  // raw HTML, phishing-labeled
    GatewayConfig config;

    Fixture() {
        KitCorpusSpec spec;
        spec.templates = 2;
        spec.variants_per_template = 4;
        spec.legitimate = 0;
        spec.weeks = 1;
        spec.seed = 20202;
        raw_pages = make_kit_corpus(spec).raw;

        NcdEngine engine(CompressorKind::lzma());
        std::vector<ByteDocument> sanitized;
        for (const auto& r : raw_pages) sanitized.push_back(sanitize_html(r).doc);
        ExtractionResult extraction =
            extract_prototypes(engine, sanitized, Threshold{0.251});
        save(extraction.set, dir / "db");

        config.port = 0;
        config.db_path = dir / "db";
        config.spool_dir = dir / "spool";
        config.parallelism = 2;
    }
};

json post(int port, const std::string& path, const std::string& body,
          const httplib::Headers& headers, int& status) {
    httplib::Client client("127.0.0.1", port);
    client.set_read_timeout(60, 0);
    auto res = client.Post(path, headers, body, "text/html");
    REQUIRE(res);
    status = res->status;
    return res->body.empty() ? json{} : json::parse(res->body);
}

}  // namespace

TEST_CASE("classify returns a verdict for a stored prototype body") {
    Fixture fx;
    Gateway gw(fx.config);
    REQUIRE(gw.start());

    int status = 0;
    json body = post(gw.port(), "/classify", fx.raw_pages[0].bytes, {}, status);
    CHECK(status == 200);
    CHECK(body["decision"] == "phishing");
    CHECK(body["min_distance"].get<double>() <= 0.1);
    CHECK(body["threshold"].get<double>() == 0.251);
    CHECK(body["prototypes"].get<int>() >= 2);
    CHECK(body["elapsed_ms"].get<double>() >= 0.0);
    gw.stop();
}

TEST_CASE("classify rejects empty and oversized bodies") {
    Fixture fx;
    fx.config.max_body_bytes = 512;
    Gateway gw(fx.config);
    REQUIRE(gw.start());

    int status = 0;
    post(gw.port(), "/classify", "", {}, status);
    CHECK(status == 400);
    post(gw.port(), "/classify", std::string(600, 'x'), {}, status);
    CHECK(status == 400);
    gw.stop();
}

TEST_CASE("classify without a database answers 503") {
    TempDir dir("gateway-empty");
    GatewayConfig config;
    config.port = 0;
    config.spool_dir = dir / "spool";
    Gateway gw(config);
    REQUIRE(gw.start());
    int status = 0;
    post(gw.port(), "/classify", "<p>x</p>", {}, status);
    CHECK(status == 503);
    gw.stop();
}

TEST_CASE("report queues with a label and rejects without") {
    Fixture fx;
    Gateway gw(fx.config);
    REQUIRE(gw.start());

    int status = 0;
    json ok = post(gw.port(), "/report", fx.raw_pages[1].bytes,
                   {{"X-Confirmed-Label", "phishing"}}, status);
    CHECK(status == 202);
    CHECK(ok.contains("queued"));

    post(gw.port(), "/report", fx.raw_pages[1].bytes, {}, status);
    CHECK(status == 400);
    post(gw.port(), "/report", fx.raw_pages[1].bytes, {{"X-Confirmed-Label", "weird"}}, status);
    CHECK(status == 400);

    // Two identical reports make two queue entries.
    post(gw.port(), "/report", fx.raw_pages[1].bytes, {{"X-Confirmed-Label", "phishing"}},
         status);
    CHECK(status == 202);
    std::size_t spooled = 0;
    for (auto& e : std::filesystem::directory_iterator(fx.dir / "spool"))
        if (e.path().extension() == ".json") ++spooled;
    CHECK(spooled == 2);
    gw.stop();
}

TEST_CASE("update with an empty queue reports zeros") {
    Fixture fx;
    Gateway gw(fx.config);
    REQUIRE(gw.start());
    int status = 0;
    json summary = post(gw.port(), "/admin/update", "", {}, status);
    CHECK(status == 200);
    CHECK(summary["processed"] == 0);
    CHECK(summary["rejected"] == 0);
    CHECK(summary["new_prototypes"] == 0);
    gw.stop();
}

TEST_CASE("five replica reports collapse to one new prototype") {
    Fixture fx;
    Gateway gw(fx.config);
    REQUIRE(gw.start());

    // A novel page far from the stored kits.
    Rng rng(777);
    std::string novel = "<html><body>";
    for (int i = 0; i < 40; ++i)
        novel += "<article data-k=\"" + std::to_string(rng() % 1000) + "\"><em></em></article>";
    novel += "</body></html>";

    int status = 0;
    for (int i = 0; i < 5; ++i) {
        post(gw.port(), "/report", novel, {{"X-Confirmed-Label", "phishing"}}, status);
        CHECK(status == 202);
    }
    std::uint64_t before = gw.snapshot_version();
    json summary = post(gw.port(), "/admin/update", "", {}, status);
    CHECK(status == 200);
    CHECK(summary["classified"] == 5);
    CHECK(summary["rejected"] == 5);
    CHECK(summary["new_prototypes"] == 1);
    CHECK(gw.snapshot_version() == before + 1);

    // The new prototype is persisted; a replica now classifies phishing.
    json verdict = post(gw.port(), "/classify", novel, {}, status);
    CHECK(status == 200);
    CHECK(verdict["decision"] == "phishing");

    // And the queue is drained.
    json empty = post(gw.port(), "/admin/update", "", {}, status);
    CHECK(empty["processed"] == 0);
    gw.stop();
}

TEST_CASE("classification decisions match an offline re-run") {
    Fixture fx;
    Gateway gw(fx.config);
    REQUIRE(gw.start());

    NcdEngine engine(CompressorKind::lzma());
    PrototypeSet offline = load(fx.dir / "db");

    int status = 0;
    for (int i = 0; i < 4; ++i) {
        const std::string& page = fx.raw_pages[std::size_t(i)].bytes;
        json body = post(gw.port(), "/classify", page, {}, status);
        REQUIRE(status == 200);
        ByteDocument doc = sanitize_html(
                               ByteDocument{"probe" + std::to_string(i), page, "", Label::Unknown, {}})
                               .doc;
        Verdict expected = classify(engine, doc, offline);
        CHECK(body["decision"].get<std::string>() == to_string(expected.decision));
        CHECK(body["min_distance"].get<double>() == expected.min_distance);
        CHECK(body["nearest_prototype"].get<std::string>() == *expected.nearest_prototype);
    }
    gw.stop();
}

TEST_CASE("config file parsing with env override") {
    TempDir dir("gwconfig");
    std::ofstream out(dir / "gw.conf");
    out << "# gateway settings\n"
        << "port = 9099\n"
        << "db = /some/db\n"
        << "spool = /some/spool\n"
        << "compressor = zlib-9\n"
        << "threshold = 0.3\n"
        << "max_body_bytes = 1024\n"
        << "strip_attributes = true\n"
        << "parallelism = 3\n";
    out.close();

    GatewayConfig cfg = load_gateway_config(dir / "gw.conf");
    CHECK(cfg.port == 9099);
    CHECK(cfg.db_path == "/some/db");
    CHECK(cfg.spool_dir == "/some/spool");
    CHECK(cfg.compressor == CompressorKind{CompressorFamily::Zlib, 9});
    CHECK(cfg.threshold == 0.3);
    CHECK(cfg.max_body_bytes == 1024);
    CHECK_FALSE(cfg.sanitize.keep_attributes);
    CHECK(cfg.parallelism == 3);

    std::ofstream bad(dir / "bad.conf");
    bad << "port 9099\n";
    bad.close();
    CHECK_THROWS_AS(load_gateway_config(dir / "bad.conf"), Error);
}

TEST_CASE("PHISHSIM_DB environment override loads the database") {
    Fixture fx;
    GatewayConfig cfg;  // no db_path configured
    cfg.port = 0;
    cfg.spool_dir = fx.dir / "spool";
    setenv("PHISHSIM_DB", (fx.dir / "db").c_str(), 1);
    Gateway gw(cfg);
    unsetenv("PHISHSIM_DB");
    REQUIRE(gw.start());
    int status = 0;
    json body = post(gw.port(), "/classify", fx.raw_pages[0].bytes, {}, status);
    CHECK(status == 200);
    CHECK(body["decision"] == "phishing");
    gw.stop();
}

TEST_CASE("concurrent update answers 409") {
    Fixture fx;
    Gateway gw(fx.config);
    REQUIRE(gw.start());

    // Enough distinct novel reports that the update takes a while.
    Rng rng(888);
    int status = 0;
    for (int i = 0; i < 24; ++i) {
        std::string novel = "<html><body>";
        for (int j = 0; j < 50; ++j)
            novel += "<p data-i=\"" + std::to_string(rng() % 100000) + "\"></p>";
        novel += "</body></html>";
        post(gw.port(), "/report", novel, {{"X-Confirmed-Label", "phishing"}}, status);
        REQUIRE(status == 202);
    }

    // One slow update in the background; a prober hammers /admin/update and
    // must see 409 while it runs (or, at worst, observe the queue already
    // drained by the first update).
    std::atomic<int> conflicts{0};
    std::atomic<int> prober_processed{-1};
    std::thread main_update([&] {
        httplib::Client client("127.0.0.1", gw.port());
        client.set_read_timeout(120, 0);
        auto res = client.Post("/admin/update", "", "text/plain");
        REQUIRE(res);
    });
    {
        httplib::Client client("127.0.0.1", gw.port());
        client.set_read_timeout(120, 0);
        for (int i = 0; i < 2000; ++i) {
            auto res = client.Post("/admin/update", "", "text/plain");
            if (res && res->status == 409) {
                conflicts.fetch_add(1);
                break;
            }
            if (res && res->status == 200)
                prober_processed.store(json::parse(res->body)["processed"].get<int>());
            std::this_thread::sleep_for(std::chrono::microseconds(500));
        }
    }
    main_update.join();
    // The exclusive-update contract: a concurrent request is refused while
    // one is running. If the prober never overlapped, it must have found the
    // queue already drained by the first update.
    CHECK((conflicts.load() > 0 || prober_processed.load() == 0));
    gw.stop();
}

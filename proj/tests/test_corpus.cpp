#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <set>

#include "phishsim/corpus.hpp"
#include "phishsim/errors.hpp"
#include "synthetic.hpp"
#include "tempdir.hpp"

using namespace phishsim;
using namespace phishsim::testsupport;

namespace {

void write(const std::filesystem::path& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary);
    out.write(content.data(), std::streamsize(content.size()));
}

}  // namespace

TEST_CASE("manifest of three valid pages ingests cleanly") {
    TempDir dir("corpus");
    write(dir / "a.html", "<html><body><p>a</p></body></html>");
    write(dir / "b.html", "<div class=\"x\">b</div>");
    write(dir / "c.html", "<span>c</span>");
    write(dir / "m.jsonl",
          R"({"id":"a","path":"a.html","label":"phishing","timestamp":"2020-05-01"})" "\n"
          R"({"id":"b","path":"b.html","label":"phishing","timestamp":"2020-05-02","brand":"acme"})" "\n"
          R"({"id":"c","path":"c.html","label":"legitimate","timestamp":"2020-05-03"})" "\n");

    IngestResult result = ingest_corpus(dir / "m.jsonl");
    CHECK(result.stats.listed == 3);
    CHECK(result.stats.ingested == 3);
    CHECK(result.stats.dropped_empty == 0);
    CHECK(result.documents.size() == 3);
    CHECK(result.documents[0].doc.bytes == "<html><body><p></p></body></html>");
    CHECK(result.documents[2].doc.label == Label::Legitimate);
    CHECK(result.manifest.records[1].brand == "acme");
}

TEST_CASE("empty file among three is dropped and counted") {
    TempDir dir("corpus");
    write(dir / "a.html", "<p>a</p>");
    write(dir / "b.html", "");
    write(dir / "c.html", "<p>c</p>");
    write(dir / "m.jsonl",
          R"({"id":"a","path":"a.html","label":"phishing","timestamp":"2020-05-01"})" "\n"
          R"({"id":"b","path":"b.html","label":"phishing","timestamp":"2020-05-02"})" "\n"
          R"({"id":"c","path":"c.html","label":"phishing","timestamp":"2020-05-03"})" "\n");

    IngestResult result = ingest_corpus(dir / "m.jsonl");
    CHECK(result.documents.size() == 2);
    CHECK(result.stats.dropped_empty == 1);
}

TEST_CASE("missing file warns per record without failing") {
    TempDir dir("corpus");
    write(dir / "a.html", "<p>a</p>");
    write(dir / "m.jsonl",
          R"({"id":"a","path":"a.html","label":"phishing","timestamp":"2020-05-01"})" "\n"
          R"({"id":"gone","path":"missing.html","label":"phishing","timestamp":"2020-05-02"})" "\n");

    IngestResult result = ingest_corpus(dir / "m.jsonl");
    CHECK(result.documents.size() == 1);
    CHECK(result.stats.dropped_missing == 1);
    REQUIRE(result.stats.warnings.size() == 1);
    CHECK(result.stats.warnings[0].find("gone") != std::string::npos);
}

TEST_CASE("zero survivors is an error") {
    TempDir dir("corpus");
    write(dir / "m.jsonl",
          R"({"id":"gone","path":"missing.html","label":"phishing","timestamp":"2020-05-02"})" "\n");
    CHECK_THROWS_AS(ingest_corpus(dir / "m.jsonl"), CorpusError);
}

TEST_CASE("unparseable pages are dropped with a count") {
    TempDir dir("corpus");
    write(dir / "a.html", "no tags at all");
    write(dir / "b.html", "<p>fine</p>");
    write(dir / "m.jsonl",
          R"({"id":"a","path":"a.html","label":"phishing","timestamp":"2020-05-01"})" "\n"
          R"({"id":"b","path":"b.html","label":"phishing","timestamp":"2020-05-02"})" "\n");
    IngestResult result = ingest_corpus(dir / "m.jsonl");
    CHECK(result.documents.size() == 1);
    CHECK(result.stats.dropped_unparseable == 1);
}

TEST_CASE("manifest rejects duplicates and malformed rows") {
    TempDir dir("corpus");
    write(dir / "dup.jsonl",
          R"({"id":"a","path":"a.html","label":"phishing","timestamp":"2020-05-01"})" "\n"
          R"({"id":"a","path":"b.html","label":"phishing","timestamp":"2020-05-02"})" "\n");
    CHECK_THROWS_AS(load_manifest(dir / "dup.jsonl"), CorpusError);

    write(dir / "badlabel.jsonl",
          R"({"id":"a","path":"a.html","label":"spam","timestamp":"2020-05-01"})" "\n");
    CHECK_THROWS_AS(load_manifest(dir / "badlabel.jsonl"), CorpusError);

    write(dir / "baddate.jsonl",
          R"({"id":"a","path":"a.html","label":"phishing","timestamp":"2020-13-40"})" "\n");
    CHECK_THROWS_AS(load_manifest(dir / "baddate.jsonl"), CorpusError);

    write(dir / "notjson.jsonl", "{{{{\n");
    CHECK_THROWS_AS(load_manifest(dir / "notjson.jsonl"), CorpusError);

    CHECK_THROWS_AS(load_manifest(dir / "absent.jsonl"), CorpusError);
}

TEST_CASE("generated corpus round-trips through disk") {
    TempDir dir("corpus");
    KitCorpusSpec spec;
    spec.templates = 5;
    spec.variants_per_template = 10;
    spec.legitimate = 50;
    spec.weeks = 4;
    spec.seed = 77;
    GeneratedCorpus corpus = make_kit_corpus(spec);
    std::filesystem::path manifest = write_corpus(dir.path(), corpus);

    IngestResult result = ingest_corpus(manifest, {}, 4);
    CHECK(result.documents.size() == corpus.raw.size());

    std::set<std::string> ids;
    for (const auto& s : result.documents) {
        CHECK(ids.insert(s.doc.id).second);  // unique ids
        CHECK(s.doc.timestamp != Date{});
    }
    // Parsed timestamps match the generator's bookkeeping.
    for (std::size_t i = 0; i < corpus.raw.size(); ++i)
        CHECK(result.documents[i].doc.timestamp == corpus.raw[i].timestamp);
}

TEST_CASE("date parsing accepts ISO datetime prefixes") {
    CHECK(parse_date("2021-02-18") == parse_date("2021-02-18T09:30:00Z"));
    CHECK(format_date(parse_date("2021-02-18")) == "2021-02-18");
    CHECK_THROWS_AS(parse_date("18/02/2021"), CorpusError);
}

TEST_CASE("iso week bucketing") {
    // 2020-06-01 is a Monday in ISO week 23.
    CHECK(iso_week_of(parse_date("2020-06-01")) == IsoWeek{2020, 23});
    CHECK(iso_week_of(parse_date("2020-06-07")) == IsoWeek{2020, 23});
    CHECK(iso_week_of(parse_date("2020-06-08")) == IsoWeek{2020, 24});
    // Year boundary: 2021-01-01 falls in ISO week 53 of 2020.
    CHECK(iso_week_of(parse_date("2021-01-01")) == IsoWeek{2020, 53});
    CHECK(to_string(IsoWeek{2020, 5}) == "2020-W05");
}

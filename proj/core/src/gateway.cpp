#include "phishsim/gateway.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "phishsim/errors.hpp"
#include "phishsim/hash.hpp"
#include "phishsim/ncd.hpp"
#include "phishsim/prototypes.hpp"
#include "phishsim/store.hpp"

namespace phishsim {

using json = nlohmann::ordered_json;

namespace {

std::string trim(std::string_view s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::string strip_quotes(std::string v) {
    if (v.size() >= 2 && ((v.front() == '"' && v.back() == '"') ||
                          (v.front() == '\'' && v.back() == '\'')))
        return v.substr(1, v.size() - 2);
    return v;
}

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump() + "\n", "application/json");
}

}  // namespace

GatewayConfig load_gateway_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config: " + path.string());
    GatewayConfig cfg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string text = trim(line);
        if (text.empty() || text[0] == '#' || text[0] == ';') continue;
        auto eq = text.find('=');
        if (eq == std::string::npos)
            throw Error(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(text.substr(0, eq));
        std::string value = strip_quotes(trim(text.substr(eq + 1)));
        try {
            if (key == "host") cfg.host = value;
            else if (key == "port") cfg.port = std::stoi(value);
            else if (key == "db") cfg.db_path = value;
            else if (key == "spool") cfg.spool_dir = value;
            else if (key == "compressor") cfg.compressor = CompressorKind::parse(value);
            else if (key == "threshold") cfg.threshold = std::stod(value);
            else if (key == "max_body_bytes") cfg.max_body_bytes = std::stoull(value);
            else if (key == "strip_attributes")
                cfg.sanitize.keep_attributes = !(value == "true" || value == "1" || value == "yes");
            else if (key == "parallelism") cfg.parallelism = std::stoi(value);
            else throw Error("unknown key '" + key + "'");
        } catch (const std::exception& e) {
            throw Error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return cfg;
}

struct Gateway::Impl {
    GatewayConfig config;

    std::unique_ptr<NcdEngine> engine;
    httplib::Server server;
    std::thread listener;
    int bound_port = 0;

    // Immutable snapshot shared by classify handlers; /admin/update swaps
    // it under the mutex, so a handler sees one coherent (set, version)
    // pair and never a mixed state.
    struct Snapshot {
        std::shared_ptr<const PrototypeSet> set;
        std::uint64_t version = 0;
    };
    mutable std::mutex snap_mu;
    Snapshot snapshot;

    std::atomic<bool> updating{false};
    std::atomic<std::uint64_t> report_seq{0};

    Snapshot current() const {
        std::lock_guard lock(snap_mu);
        return snapshot;
    }

    std::uint64_t publish(std::shared_ptr<const PrototypeSet> next) {
        std::lock_guard lock(snap_mu);
        snapshot.set = std::move(next);
        return ++snapshot.version;
    }
};

Gateway::Gateway(GatewayConfig config) : impl_(std::make_unique<Impl>()) {
    if (const char* env_db = std::getenv("PHISHSIM_DB"); env_db && *env_db)
        config.db_path = env_db;
    impl_->config = config;

    CompressorKind kind = config.compressor.value_or(CompressorKind::lzma());
    Threshold threshold = Threshold::checked(config.threshold.value_or(0.251));

    if (!config.db_path.empty() &&
        std::filesystem::exists(config.db_path / "manifest.json")) {
        PrototypeSet loaded = load(config.db_path, config.compressor);
        kind = loaded.compressor();
        if (!config.threshold) threshold = loaded.threshold();
        if (config.threshold && *config.threshold != loaded.threshold().d) {
            loaded = PrototypeSet(loaded.prototypes(), loaded.compressor(), threshold,
                                  loaded.cached_lens(), loaded.created_at());
        }
        impl_->snapshot.set = std::make_shared<const PrototypeSet>(std::move(loaded));
    } else {
        impl_->snapshot.set =
            std::make_shared<const PrototypeSet>(PrototypeSet::empty(kind, threshold));
    }
    impl_->engine = std::make_unique<NcdEngine>(kind);

    auto& impl = *impl_;
    // Transport cap sits well above the configured body cap so oversized
    // requests reach the handler and get the documented 400.
    impl.server.set_payload_max_length(impl.config.max_body_bytes + (1 << 20));

    impl.server.Post("/classify", [&impl](const httplib::Request& req, httplib::Response& res) {
        auto t0 = std::chrono::steady_clock::now();
        if (req.body.empty()) {
            send_json(res, 400, {{"error", "empty body"}});
            return;
        }
        if (req.body.size() > impl.config.max_body_bytes) {
            send_json(res, 400, {{"error", "body exceeds configured cap"}});
            return;
        }
        auto snap = impl.current();
        if (!snap.set || snap.set->is_empty()) {
            send_json(res, 503, {{"error", "no prototype database loaded"}});
            return;
        }
        std::string skeleton;
        try {
            skeleton = sanitize_html_bytes(req.body, impl.config.sanitize);
        } catch (const SanitizeError& e) {
            send_json(res, 400, {{"error", e.what()}});
            return;
        }
        ByteDocument doc{"req:" + sha256_hex(skeleton), std::move(skeleton), "", Label::Unknown,
                         Date{}};
        Verdict verdict = classify(*impl.engine, doc, *snap.set, impl.config.parallelism);
        double elapsed_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                .count();
        json body{
            {"decision", to_string(verdict.decision)},
            {"min_distance", verdict.min_distance},
            {"nearest_prototype",
             verdict.nearest_prototype ? json(*verdict.nearest_prototype) : json(nullptr)},
            {"threshold", snap.set->threshold().d},
            {"compressor", snap.set->compressor().key()},
            {"elapsed_ms", elapsed_ms},
            {"snapshot", snap.version},
            {"prototypes", snap.set->size()},
        };
        send_json(res, 200, body);
    });

    impl.server.Post("/report", [&impl](const httplib::Request& req, httplib::Response& res) {
        std::string label = req.get_header_value("X-Confirmed-Label");
        if (label.empty()) {
            send_json(res, 400, {{"error", "missing X-Confirmed-Label header"}});
            return;
        }
        if (label != "phishing" && label != "legitimate") {
            send_json(res, 400, {{"error", "label must be phishing or legitimate"}});
            return;
        }
        if (req.body.empty() || req.body.size() > impl.config.max_body_bytes) {
            send_json(res, 400, {{"error", "empty or oversized body"}});
            return;
        }
        if (impl.config.spool_dir.empty()) {
            send_json(res, 503, {{"error", "no spool directory configured"}});
            return;
        }
        std::error_code ec;
        std::filesystem::create_directories(impl.config.spool_dir, ec);
        if (ec) {
            send_json(res, 500, {{"error", "cannot create spool directory"}});
            return;
        }
        std::uint64_t seq = impl.report_seq.fetch_add(1);
        auto now_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                          std::chrono::system_clock::now().time_since_epoch())
                          .count();
        char name[64];
        std::snprintf(name, sizeof name, "%013lld-%06llu", (long long)now_ms,
                      (unsigned long long)seq);
        std::filesystem::path html = impl.config.spool_dir / (std::string(name) + ".html");
        std::filesystem::path meta = impl.config.spool_dir / (std::string(name) + ".json");
        {
            std::ofstream out(html, std::ios::binary);
            out.write(req.body.data(), (std::streamsize)req.body.size());
        }
        {
            json m{{"label", label}, {"received_ms", now_ms}};
            std::ofstream out(meta, std::ios::binary);
            out << m.dump() << "\n";
        }
        send_json(res, 202, {{"queued", name}});
    });

    impl.server.Post("/admin/update", [&impl](const httplib::Request&, httplib::Response& res) {
        bool expected = false;
        if (!impl.updating.compare_exchange_strong(expected, true)) {
            send_json(res, 409, {{"error", "update already running"}});
            return;
        }
        struct Clear {
            std::atomic<bool>& flag;
            ~Clear() { flag.store(false); }
        } clear{impl.updating};

        std::vector<std::filesystem::path> metas;
        if (!impl.config.spool_dir.empty() && std::filesystem::exists(impl.config.spool_dir)) {
            for (const auto& entry : std::filesystem::directory_iterator(impl.config.spool_dir))
                if (entry.path().extension() == ".json") metas.push_back(entry.path());
        }
        std::sort(metas.begin(), metas.end());

        std::vector<ByteDocument> batch;
        std::vector<std::filesystem::path> processed_files;
        std::size_t unparseable = 0;
        for (const auto& meta : metas) {
            std::filesystem::path html = meta;
            html.replace_extension(".html");
            std::ifstream meta_in(meta), html_in(html, std::ios::binary);
            processed_files.push_back(meta);
            processed_files.push_back(html);
            if (!meta_in || !html_in) continue;
            std::string label_str;
            try {
                json m = json::parse(meta_in);
                label_str = m.at("label").get<std::string>();
            } catch (const json::exception&) {
                continue;
            }
            std::ostringstream buf;
            buf << html_in.rdbuf();
            std::string raw = std::move(buf).str();
            if (raw.empty()) continue;
            try {
                std::string skeleton = sanitize_html_bytes(raw, impl.config.sanitize);
                std::string id = "report:" + meta.stem().string();
                batch.push_back(ByteDocument{id, std::move(skeleton), html.string(),
                                             parse_label(label_str),
                                             std::chrono::floor<std::chrono::days>(
                                                 std::chrono::system_clock::now())});
            } catch (const SanitizeError&) {
                ++unparseable;
            }
        }

        auto snap = impl.current();
        IncrementalResult result =
            incremental_update(*impl.engine, batch, *snap.set, impl.config.parallelism);

        if (result.new_prototypes > 0 && !impl.config.db_path.empty()) {
            const auto& protos = result.set.prototypes();
            std::vector<ByteDocument> fresh(protos.end() - result.new_prototypes, protos.end());
            if (std::filesystem::exists(impl.config.db_path / "manifest.json"))
                append(impl.config.db_path, fresh);
            else
                save(result.set, impl.config.db_path);
        }
        std::uint64_t version =
            impl.publish(std::make_shared<const PrototypeSet>(std::move(result.set)));

        for (const auto& path : processed_files) {
            std::error_code ec;
            std::filesystem::remove(path, ec);
        }

        json body{
            {"processed", metas.size()},
            {"classified", batch.size()},
            {"unparseable", unparseable},
            {"rejected", result.rejected},
            {"new_prototypes", result.new_prototypes},
            {"snapshot", version},
        };
        send_json(res, 200, body);
    });

    impl.server.Get("/healthz", [&impl](const httplib::Request&, httplib::Response& res) {
        auto snap = impl.current();
        json body{
            {"status", "ok"},
            {"prototypes", snap.set ? snap.set->size() : 0},
            {"snapshot", snap.version},
            {"compressor", impl.engine->kind().key()},
        };
        send_json(res, 200, body);
    });
}

Gateway::~Gateway() { stop(); }

bool Gateway::start() {
    auto& impl = *impl_;
    if (impl.config.port == 0) {
        impl.bound_port = impl.server.bind_to_any_port(impl.config.host);
        if (impl.bound_port <= 0) return false;
    } else {
        if (!impl.server.bind_to_port(impl.config.host, impl.config.port)) return false;
        impl.bound_port = impl.config.port;
    }
    impl.listener = std::thread([&impl] { impl.server.listen_after_bind(); });
    impl.server.wait_until_ready();
    return true;
}

void Gateway::stop() {
    auto& impl = *impl_;
    if (impl.listener.joinable()) {
        impl.server.stop();
        impl.listener.join();
    }
}

int Gateway::port() const { return impl_->bound_port; }

std::uint64_t Gateway::snapshot_version() const { return impl_->current().version; }

}  // namespace phishsim

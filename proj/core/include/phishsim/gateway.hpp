#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "phishsim/compressor.hpp"
#include "phishsim/sanitizer.hpp"

namespace phishsim {

struct GatewayConfig {
    std::string host = "127.0.0.1";
    int port = 8080;  // 0 binds an ephemeral port
    std::filesystem::path db_path;
    std::filesystem::path spool_dir;  // queued /report submissions
    std::optional<CompressorKind> compressor;  // default: the DB manifest's
    std::optional<double> threshold;           // default: the DB manifest's
    std::size_t max_body_bytes = 2 * 1024 * 1024;
    SanitizeOptions sanitize;
    int parallelism = 1;
};

/// Parses a key = value config file (port, db, spool, compressor,
/// threshold, max_body_bytes, strip_attributes, host, parallelism).
/// The PHISHSIM_DB environment variable overrides `db`.
GatewayConfig load_gateway_config(const std::filesystem::path& path);

/// HTTP classification service.
///
///   POST /classify       body: HTML bytes -> verdict JSON
///   POST /report         body: HTML bytes, X-Confirmed-Label header -> 202 + queue id
///   POST /admin/update   drains the report queue through one incremental
///                        round, persists new prototypes, swaps the
///                        in-memory snapshot atomically; 409 while another
///                        update is running
///   GET  /healthz        liveness + snapshot info
///
/// Classification handlers share an immutable prototype-set snapshot;
/// /admin/update publishes a new snapshot in one pointer swap, so
/// /classify never blocks on an update and never observes a mixed state.
class Gateway {
public:
    explicit Gateway(GatewayConfig config);
    ~Gateway();

    Gateway(const Gateway&) = delete;
    Gateway& operator=(const Gateway&) = delete;

    /// Binds and serves on a background thread. Returns false if the port
    /// cannot be bound.
    bool start();
    void stop();

    /// Actual bound port (after start()).
    int port() const;

    /// Monotonic snapshot version; bumps on every /admin/update swap.
    std::uint64_t snapshot_version() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace phishsim

#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "rootoram/storage.hpp"
#include "rootoram/wire.hpp"

namespace rootoram {

struct ThrottleConfig {
  std::uint64_t rate_bps = 0;   // bits per second
  std::size_t burst_bytes = 0;  // at least one frame header
};

// Classic token bucket. acquire() blocks until the requested bytes fit;
// requests larger than the burst are drained in burst-sized chunks, so over
// any window of w seconds at most rate*w/8 + burst bytes pass.
class TokenBucket {
 public:
  using Clock = std::function<double()>;          // seconds, monotonic
  using Sleeper = std::function<void(double)>;    // sleep for seconds

  TokenBucket(std::uint64_t rate_bps, std::size_t burst_bytes,
              Clock clock = {}, Sleeper sleeper = {});

  void acquire(std::size_t bytes);

 private:
  double rate_bytes_per_sec_;
  double burst_;
  double tokens_;
  double last_;
  Clock clock_;
  Sleeper sleeper_;
};

// Serves one client session at a time over TCP: READ_PATH is answered with
// PATH_DATA, WRITE_PATH with ACK, anything malformed with ERROR followed by
// session close. Runs on its own thread until stop().
class NetServer {
 public:
  NetServer(StorageBackend& backend, const TreeShape& shape, unsigned Z,
            std::size_t envelope_size,
            std::optional<ThrottleConfig> throttle = std::nullopt);
  ~NetServer();

  NetServer(const NetServer&) = delete;
  NetServer& operator=(const NetServer&) = delete;

  // Binds and starts serving; port 0 picks an ephemeral port. Returns the
  // bound port.
  std::uint16_t start(const std::string& host, std::uint16_t port);

  void stop();

 private:
  void accept_loop();
  void serve_session(int fd);

  StorageBackend& backend_;
  TreeShape shape_;
  unsigned Z_;
  std::size_t bucket_size_;
  std::optional<ThrottleConfig> throttle_;
  int listen_fd_ = -1;
  std::atomic<int> session_fd_{-1};
  std::atomic<bool> stopping_{false};
  std::thread thread_;
};

// Storage backend over the wire protocol. Each path read or write is one
// request/response round trip. The optional throttle paces this side's
// socket reads and writes, emulating a bandwidth-constrained client link.
class RemoteBackend final : public StorageBackend {
 public:
  struct Counters {
    std::uint64_t payload_bytes_sent = 0;
    std::uint64_t payload_bytes_received = 0;
    std::uint64_t header_bytes_sent = 0;
    std::uint64_t header_bytes_received = 0;
    std::uint64_t round_trips = 0;
  };

  RemoteBackend(const std::string& host, std::uint16_t port,
                const TreeShape& shape, unsigned Z, std::size_t envelope_size,
                std::optional<ThrottleConfig> throttle = std::nullopt);
  ~RemoteBackend() override;

  RemoteBackend(const RemoteBackend&) = delete;
  RemoteBackend& operator=(const RemoteBackend&) = delete;

  PathData read_path(std::uint32_t leaf) override;
  void write_path(std::uint32_t leaf, const PathData& buckets) override;

  const Counters& counters() const { return counters_; }

 private:
  void send_throttled(std::span<const std::uint8_t> bytes);
  void recv_throttled(std::span<std::uint8_t> bytes);
  [[noreturn]] void raise_error_frame(const FrameHeader& header);

  TreeShape shape_;
  unsigned Z_;
  std::size_t bucket_size_;
  int fd_ = -1;
  std::unique_ptr<TokenBucket> bucket_;
  std::size_t chunk_;
  Counters counters_;
};

// One latency measurement cell and its aggregated result.
struct BenchCell {
  unsigned k = 1;
  unsigned Z = 2;
  unsigned B = 1024;
  std::uint64_t rate_bps = 0;  // 0 = unthrottled
};

struct BenchRow {
  BenchCell cell;
  double mean_ms = 0.0;
  double p50_ms = 0.0;
  double p95_ms = 0.0;
  double blocks_per_access = 0.0;
};

// For each cell: builds and warms a store locally, serves it on loopback,
// then measures `accesses` random accesses through a RemoteBackend with the
// cell's throttle. Cells run serially to avoid cross-cell interference.
std::vector<BenchRow> bench_latency(unsigned L, std::span<const BenchCell> cells,
                                    std::uint32_t accesses, std::uint64_t seed,
                                    std::size_t burst_bytes = 8192);

}  // namespace rootoram

#include "rootoram/netserve.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstring>
#include <numeric>

#include "rootoram/protocol.hpp"

namespace rootoram {

namespace {

double steady_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

void sleep_seconds(double s) {
  std::this_thread::sleep_for(std::chrono::duration<double>(s));
}

// Blocking send/recv over the whole span; recv returns false on clean EOF
// at offset zero.
void send_all(int fd, std::span<const std::uint8_t> bytes) {
  std::size_t off = 0;
  while (off < bytes.size()) {
    const ssize_t n = ::send(fd, bytes.data() + off, bytes.size() - off,
                             MSG_NOSIGNAL);
    if (n <= 0) throw IoError("send failed");
    off += static_cast<std::size_t>(n);
  }
}

enum class RecvResult { ok, eof, truncated };

RecvResult recv_exact(int fd, std::span<std::uint8_t> bytes) {
  std::size_t off = 0;
  while (off < bytes.size()) {
    const ssize_t n = ::recv(fd, bytes.data() + off, bytes.size() - off, 0);
    if (n == 0) return off == 0 ? RecvResult::eof : RecvResult::truncated;
    if (n < 0) throw IoError("recv failed");
    off += static_cast<std::size_t>(n);
  }
  return RecvResult::ok;
}

sockaddr_in make_addr(const std::string& host, std::uint16_t port) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1)
    throw IoError("bad address: " + host);
  return addr;
}

}  // namespace

TokenBucket::TokenBucket(std::uint64_t rate_bps, std::size_t burst_bytes,
                         Clock clock, Sleeper sleeper)
    : rate_bytes_per_sec_(static_cast<double>(rate_bps) / 8.0),
      burst_(static_cast<double>(burst_bytes)),
      tokens_(static_cast<double>(burst_bytes)),
      clock_(clock ? std::move(clock) : Clock(steady_seconds)),
      sleeper_(sleeper ? std::move(sleeper) : Sleeper(sleep_seconds)) {
  if (rate_bps == 0) throw DomainError("throttle rate must be positive");
  if (burst_bytes < kFrameHeaderSize)
    throw DomainError("burst must hold at least a frame header");
  last_ = clock_();
}

void TokenBucket::acquire(std::size_t bytes) {
  double remaining = static_cast<double>(bytes);
  while (remaining > 0.0) {
    const double want = std::min(remaining, burst_);
    for (;;) {
      const double now = clock_();
      tokens_ = std::min(burst_, tokens_ + (now - last_) * rate_bytes_per_sec_);
      last_ = now;
      if (tokens_ >= want) break;
      // the microsecond floor keeps a sub-ulp deficit from sleeping for a
      // span the clock cannot resolve
      sleeper_(std::max((want - tokens_) / rate_bytes_per_sec_, 1e-6));
    }
    tokens_ -= want;
    remaining -= want;
  }
}

NetServer::NetServer(StorageBackend& backend, const TreeShape& shape,
                     unsigned Z, std::size_t envelope_size,
                     std::optional<ThrottleConfig> throttle)
    : backend_(backend),
      shape_(shape),
      Z_(Z),
      bucket_size_(std::size_t{Z} * envelope_size),
      throttle_(throttle) {}

NetServer::~NetServer() { stop(); }

std::uint16_t NetServer::start(const std::string& host, std::uint16_t port) {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw IoError("socket failed");
  const int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr = make_addr(host, port);
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw IoError("bind failed on " + host + ":" + std::to_string(port));
  }
  if (::listen(listen_fd_, 1) < 0) {
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw IoError("listen failed");
  }
  socklen_t len = sizeof(addr);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  thread_ = std::thread([this] { accept_loop(); });
  return ntohs(addr.sin_port);
}

void NetServer::stop() {
  if (listen_fd_ < 0) return;
  stopping_.store(true);
  // a session blocked in recv only wakes once its socket is shut down
  const int session = session_fd_.load();
  if (session >= 0) ::shutdown(session, SHUT_RDWR);
  if (thread_.joinable()) thread_.join();
  ::close(listen_fd_);
  listen_fd_ = -1;
}

void NetServer::accept_loop() {
  while (!stopping_.load()) {
    pollfd pfd{listen_fd_, POLLIN, 0};
    const int r = ::poll(&pfd, 1, 50);
    if (r <= 0) continue;
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    const int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    session_fd_.store(fd);
    try {
      serve_session(fd);
    } catch (const std::exception&) {
      // session ends; keep accepting
    }
    session_fd_.store(-1);
    ::close(fd);
  }
}

void NetServer::serve_session(int fd) {
  const std::size_t path_bytes = std::size_t{shape_.path_len} * bucket_size_;

  const auto send_frame = [&](MsgType type, std::uint64_t leaf,
                              std::span<const std::uint8_t> body) {
    std::array<std::uint8_t, kFrameHeaderSize> header;
    encode_frame_header(header,
                        FrameHeader{type, leaf,
                                    static_cast<std::uint32_t>(body.size())});
    send_all(fd, header);
    if (!body.empty()) send_all(fd, body);
  };
  const auto send_error = [&](WireErrorCode code) {
    const std::uint8_t body[1] = {static_cast<std::uint8_t>(code)};
    send_frame(MsgType::error, 0, body);
  };

  for (;;) {
    std::array<std::uint8_t, kFrameHeaderSize> raw;
    const RecvResult r = recv_exact(fd, raw);
    if (r == RecvResult::eof) return;  // client done
    if (r == RecvResult::truncated) {
      send_error(WireErrorCode::frame);
      return;
    }
    const auto header = decode_frame_header(raw);
    if (!header) {
      send_error(WireErrorCode::frame);
      return;
    }
    switch (header->type) {
      case MsgType::read_path: {
        if (header->body_len != 0) {
          send_error(WireErrorCode::frame);
          return;
        }
        if (header->leaf >= shape_.leaf_buckets) {
          send_error(WireErrorCode::range);
          return;
        }
        PathData path;
        try {
          path = backend_.read_path(static_cast<std::uint32_t>(header->leaf));
        } catch (const std::exception&) {
          send_error(WireErrorCode::store);
          return;
        }
        send_frame(MsgType::path_data, header->leaf, serialize_path(path));
        break;
      }
      case MsgType::write_path: {
        if (header->body_len != path_bytes) {
          send_error(WireErrorCode::shape);
          return;
        }
        if (header->leaf >= shape_.leaf_buckets) {
          send_error(WireErrorCode::range);
          return;
        }
        std::vector<std::uint8_t> body(header->body_len);
        if (recv_exact(fd, body) != RecvResult::ok) {
          send_error(WireErrorCode::frame);
          return;
        }
        try {
          backend_.write_path(static_cast<std::uint32_t>(header->leaf),
                              parse_path(body, shape_.path_len, bucket_size_));
        } catch (const std::exception&) {
          send_error(WireErrorCode::store);
          return;
        }
        send_frame(MsgType::ack, header->leaf, {});
        break;
      }
      default:
        send_error(WireErrorCode::frame);
        return;
    }
  }
}

RemoteBackend::RemoteBackend(const std::string& host, std::uint16_t port,
                             const TreeShape& shape, unsigned Z,
                             std::size_t envelope_size,
                             std::optional<ThrottleConfig> throttle)
    : shape_(shape),
      Z_(Z),
      bucket_size_(std::size_t{Z} * envelope_size),
      chunk_(64 * 1024) {
  if (throttle) {
    bucket_ = std::make_unique<TokenBucket>(throttle->rate_bps,
                                            throttle->burst_bytes);
    chunk_ = std::min(chunk_, throttle->burst_bytes);
  }
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw IoError("socket failed");
  sockaddr_in addr = make_addr(host, port);
  if (::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
    ::close(fd_);
    fd_ = -1;
    throw IoError("connect failed to " + host + ":" + std::to_string(port));
  }
  const int one = 1;
  ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

RemoteBackend::~RemoteBackend() {
  if (fd_ >= 0) ::close(fd_);
}

void RemoteBackend::send_throttled(std::span<const std::uint8_t> bytes) {
  std::size_t off = 0;
  while (off < bytes.size()) {
    const std::size_t n = std::min(chunk_, bytes.size() - off);
    if (bucket_) bucket_->acquire(n);
    send_all(fd_, bytes.subspan(off, n));
    off += n;
  }
}

void RemoteBackend::recv_throttled(std::span<std::uint8_t> bytes) {
  std::size_t off = 0;
  while (off < bytes.size()) {
    const std::size_t n = std::min(chunk_, bytes.size() - off);
    if (bucket_) bucket_->acquire(n);
    if (recv_exact(fd_, bytes.subspan(off, n)) != RecvResult::ok)
      throw IoError("connection closed mid-frame");
    off += n;
  }
}

void RemoteBackend::raise_error_frame(const FrameHeader& header) {
  std::string detail = "server error";
  if (header.body_len >= 1) {
    std::vector<std::uint8_t> body(header.body_len);
    recv_throttled(body);
    switch (static_cast<WireErrorCode>(body[0])) {
      case WireErrorCode::frame: detail = "server error: FRAME"; break;
      case WireErrorCode::shape: detail = "server error: SHAPE"; break;
      case WireErrorCode::range: detail = "server error: RANGE"; break;
      case WireErrorCode::store: detail = "server error: STORE"; break;
    }
  }
  throw IoError(detail);
}

PathData RemoteBackend::read_path(std::uint32_t leaf) {
  std::array<std::uint8_t, kFrameHeaderSize> header;
  encode_frame_header(header, FrameHeader{MsgType::read_path, leaf, 0});
  send_throttled(header);
  counters_.header_bytes_sent += header.size();

  std::array<std::uint8_t, kFrameHeaderSize> reply_raw;
  recv_throttled(reply_raw);
  counters_.header_bytes_received += reply_raw.size();
  const auto reply = decode_frame_header(reply_raw);
  if (!reply) throw ProtocolError("bad frame from server");
  if (reply->type == MsgType::error) raise_error_frame(*reply);
  if (reply->type != MsgType::path_data)
    throw ProtocolError("expected PATH_DATA");
  std::vector<std::uint8_t> body(reply->body_len);
  recv_throttled(body);
  counters_.payload_bytes_received += body.size();
  ++counters_.round_trips;
  return parse_path(body, shape_.path_len, bucket_size_);
}

void RemoteBackend::write_path(std::uint32_t leaf, const PathData& buckets) {
  const std::vector<std::uint8_t> body = serialize_path(buckets);
  std::array<std::uint8_t, kFrameHeaderSize> header;
  encode_frame_header(
      header, FrameHeader{MsgType::write_path, leaf,
                          static_cast<std::uint32_t>(body.size())});
  send_throttled(header);
  send_throttled(body);
  counters_.header_bytes_sent += header.size();
  counters_.payload_bytes_sent += body.size();

  std::array<std::uint8_t, kFrameHeaderSize> reply_raw;
  recv_throttled(reply_raw);
  counters_.header_bytes_received += reply_raw.size();
  const auto reply = decode_frame_header(reply_raw);
  if (!reply) throw ProtocolError("bad frame from server");
  if (reply->type == MsgType::error) raise_error_frame(*reply);
  if (reply->type != MsgType::ack) throw ProtocolError("expected ACK");
  ++counters_.round_trips;
}

std::vector<BenchRow> bench_latency(unsigned L, std::span<const BenchCell> cells,
                                    std::uint32_t accesses, std::uint64_t seed,
                                    std::size_t burst_bytes) {
  std::vector<BenchRow> rows;
  rows.reserve(cells.size());
  for (const BenchCell& cell : cells) {
    const Params params =
        Params::create(L, cell.k, Params::uniform_p(std::uint32_t{1} << L),
                       cell.Z, cell.B, Lambda::infinite());
    const TreeShape shape = derive_tree_shape(params);
    auto cipher = make_null_cipher();
    const std::size_t env_size = cipher->envelope_size(params.B);

    MemoryBackend store(shape, params.Z, env_size);
    Client client(params, std::move(cipher), seed);
    client.initialize(store);  // warm locally; setup is not measured

    NetServer server(store, shape, params.Z, env_size);
    const std::uint16_t port = server.start("127.0.0.1", 0);
    std::optional<ThrottleConfig> throttle;
    if (cell.rate_bps > 0)
      throttle = ThrottleConfig{cell.rate_bps, burst_bytes};
    RemoteBackend remote("127.0.0.1", port, shape, params.Z, env_size,
                         throttle);

    Prng addr_rng(seed ^ 0x9e3779b97f4a7c15ULL);
    // two untimed accesses settle the connection and drain the initial burst
    for (int i = 0; i < 2; ++i)
      client.normal_access(
          remote, static_cast<std::uint32_t>(addr_rng.uniform(params.n_blocks)),
          Op::read);

    const std::uint64_t blocks_before = client.stats().blocks_transferred;
    std::vector<double> samples;
    samples.reserve(accesses);
    for (std::uint32_t i = 0; i < accesses; ++i) {
      const auto addr =
          static_cast<std::uint32_t>(addr_rng.uniform(params.n_blocks));
      const double t0 = steady_seconds();
      client.normal_access(remote, addr, Op::read);
      samples.push_back((steady_seconds() - t0) * 1e3);
    }
    const std::uint64_t blocks_moved =
        client.stats().blocks_transferred - blocks_before;

    std::sort(samples.begin(), samples.end());
    BenchRow row;
    row.cell = cell;
    row.mean_ms = std::accumulate(samples.begin(), samples.end(), 0.0) /
                  static_cast<double>(samples.size());
    row.p50_ms = samples[samples.size() / 2];
    row.p95_ms = samples[std::min(samples.size() - 1,
                                  static_cast<std::size_t>(
                                      0.95 * static_cast<double>(samples.size())))];
    row.blocks_per_access =
        static_cast<double>(blocks_moved) / static_cast<double>(accesses);
    rows.push_back(row);

    server.stop();
  }
  return rows;
}

}  // namespace rootoram

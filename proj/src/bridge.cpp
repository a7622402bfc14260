#include "patchservo/bridge.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>

#include "patchservo/errors.hpp"

namespace patchservo {
namespace {

void put_u32_le(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xffu));
}

uint32_t get_u32_le(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

float get_f32_le(const uint8_t* p) {
  const uint32_t bits = get_u32_le(p);
  float f;
  std::memcpy(&f, &bits, sizeof f);
  return f;
}

constexpr uint32_t kMaxHeaderBytes = 1u << 20;

nlohmann::json parse_header(const uint8_t* data, size_t n) {
  try {
    auto header = nlohmann::json::parse(data, data + n);
    if (!header.is_object()) throw BridgeUnavailable("frame header is not a JSON object");
    if (!header.contains("payload_bytes") || !header["payload_bytes"].is_number_unsigned()) {
      throw BridgeUnavailable("frame header lacks payload_bytes");
    }
    return header;
  } catch (const nlohmann::json::exception& e) {
    throw BridgeUnavailable(std::string("bad frame header: ") + e.what());
  }
}

}  // namespace

std::vector<uint8_t> encode_frame(nlohmann::json header, const std::vector<uint8_t>& payload) {
  header["payload_bytes"] = payload.size();
  const std::string text = header.dump();
  std::vector<uint8_t> out;
  out.reserve(4 + text.size() + payload.size());
  put_u32_le(out, static_cast<uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

Frame decode_frame(const std::vector<uint8_t>& bytes) {
  if (bytes.size() < 4) throw BridgeUnavailable("truncated frame prefix");
  const uint32_t header_len = get_u32_le(bytes.data());
  if (header_len > kMaxHeaderBytes || 4 + static_cast<size_t>(header_len) > bytes.size()) {
    throw BridgeUnavailable("truncated frame header");
  }
  Frame frame;
  frame.header = parse_header(bytes.data() + 4, header_len);
  const size_t payload_len = frame.header["payload_bytes"].get<size_t>();
  if (4 + static_cast<size_t>(header_len) + payload_len != bytes.size()) {
    throw BridgeUnavailable("frame payload length mismatch");
  }
  frame.payload.assign(bytes.begin() + 4 + header_len, bytes.end());
  return frame;
}

BridgeClient::BridgeClient(int read_fd, int write_fd, int child_pid)
    : read_fd_(read_fd), write_fd_(write_fd), child_pid_(child_pid) {}

BridgeClient::~BridgeClient() {
  if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
  if (read_fd_ >= 0) ::close(read_fd_);
  if (child_pid_ > 0) {
    int status = 0;
    if (::waitpid(child_pid_, &status, WNOHANG) == 0) {
      ::kill(child_pid_, SIGTERM);
      ::waitpid(child_pid_, &status, 0);
    }
  }
}

std::shared_ptr<BridgeClient> BridgeClient::connect_tcp(const std::string& host, int port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  if (::getaddrinfo(host.c_str(), service.c_str(), &hints, &res) != 0 || res == nullptr) {
    throw BridgeUnavailable("cannot resolve " + host);
  }
  int fd = -1;
  for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) throw BridgeUnavailable("cannot connect to " + host + ":" + service);
  return std::shared_ptr<BridgeClient>(new BridgeClient(fd, fd, -1));
}

std::shared_ptr<BridgeClient> BridgeClient::spawn(const std::vector<std::string>& argv) {
  if (argv.empty()) throw BridgeUnavailable("empty bridge command");
  // A dead child must surface as a failed write, not a fatal signal.
  ::signal(SIGPIPE, SIG_IGN);
  int to_child[2], from_child[2];
  if (::pipe(to_child) != 0) throw BridgeUnavailable("pipe failed");
  if (::pipe(from_child) != 0) {
    ::close(to_child[0]);
    ::close(to_child[1]);
    throw BridgeUnavailable("pipe failed");
  }
  const pid_t pid = ::fork();
  if (pid < 0) throw BridgeUnavailable("fork failed");
  if (pid == 0) {
    ::dup2(to_child[0], STDIN_FILENO);
    ::dup2(from_child[1], STDOUT_FILENO);
    ::close(to_child[0]);
    ::close(to_child[1]);
    ::close(from_child[0]);
    ::close(from_child[1]);
    std::vector<char*> args;
    for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
    args.push_back(nullptr);
    ::execvp(args[0], args.data());
    ::_exit(127);
  }
  ::close(to_child[0]);
  ::close(from_child[1]);
  return std::shared_ptr<BridgeClient>(new BridgeClient(from_child[0], to_child[1], pid));
}

std::shared_ptr<BridgeClient> BridgeClient::open(const BridgeEndpoint& endpoint) {
  auto client = endpoint.command.empty() ? connect_tcp(endpoint.host, endpoint.port) : spawn(endpoint.command);
  client->handshake();
  return client;
}

void BridgeClient::write_all(const uint8_t* data, size_t n) {
  while (n > 0) {
    const ssize_t w = ::send(write_fd_, data, n, MSG_NOSIGNAL);
    if (w < 0 && errno == ENOTSOCK) {
      const ssize_t pw = ::write(write_fd_, data, n);
      if (pw <= 0) throw BridgeUnavailable("bridge write failed");
      data += pw;
      n -= static_cast<size_t>(pw);
      continue;
    }
    if (w < 0 && errno == EINTR) continue;
    if (w <= 0) throw BridgeUnavailable("bridge write failed");
    data += w;
    n -= static_cast<size_t>(w);
  }
}

void BridgeClient::read_exact(uint8_t* data, size_t n) {
  while (n > 0) {
    const ssize_t r = ::read(read_fd_, data, n);
    if (r < 0 && errno == EINTR) continue;
    if (r <= 0) throw BridgeUnavailable("bridge closed the connection");
    data += r;
    n -= static_cast<size_t>(r);
  }
}

Frame BridgeClient::round_trip(const nlohmann::json& header, const std::vector<uint8_t>& payload) {
  const std::lock_guard<std::mutex> lock(mutex_);
  const auto bytes = encode_frame(header, payload);
  write_all(bytes.data(), bytes.size());

  uint8_t prefix[4];
  read_exact(prefix, 4);
  const uint32_t header_len = get_u32_le(prefix);
  if (header_len > kMaxHeaderBytes) throw BridgeUnavailable("oversized response header");
  std::vector<uint8_t> text(header_len);
  read_exact(text.data(), text.size());
  Frame frame;
  frame.header = parse_header(text.data(), text.size());
  frame.payload.resize(frame.header["payload_bytes"].get<size_t>());
  read_exact(frame.payload.data(), frame.payload.size());
  return frame;
}

BridgeHealth BridgeClient::health() {
  const Frame f = round_trip({{"op", "health"}}, {});
  if (f.header.value("status", -1) != 0) throw BridgeUnavailable("health check failed");
  return {f.header.value("version", ""), f.header.value("model", "")};
}

void BridgeClient::handshake() {
  const BridgeHealth h = health();
  if (h.version != kBridgeProtocolVersion) {
    throw BridgeUnavailable("protocol version mismatch: server speaks '" + h.version + "'");
  }
  handshaken_ = true;
}

DescriptorGrid BridgeClient::extract(const Image& image, int resolution, int layer) {
  if (image.empty()) throw EmptyImage("bridge extract on an empty image");
  if (!handshaken_) handshake();
  const nlohmann::json header = {{"op", "extract"},
                                 {"width", image.width},
                                 {"height", image.height},
                                 {"resolution", resolution},
                                 {"layer", layer}};
  const Frame f = round_trip(header, encode_png(image));
  const int status = f.header.value("status", -1);
  if (status != 0) {
    throw BridgeUnavailable("bridge error " + std::to_string(status) + ": " + f.header.value("message", ""));
  }
  DescriptorGrid grid;
  grid.rows = f.header.value("rows", 0);
  grid.cols = f.header.value("cols", 0);
  grid.dim = f.header.value("dim", 0);
  grid.input_resolution = resolution;
  if (grid.rows <= 0 || grid.cols <= 0 || grid.dim <= 0 ||
      f.payload.size() != grid.cell_count() * grid.dim * 4) {
    throw BridgeUnavailable("inconsistent descriptor payload");
  }
  grid.data.resize(grid.cell_count() * grid.dim);
  for (size_t i = 0; i < grid.data.size(); ++i) grid.data[i] = get_f32_le(&f.payload[i * 4]);
  grid.eligible.assign(grid.cell_count(), 0);
  for (int r = 0; r < grid.rows; ++r) {
    for (int c = 0; c < grid.cols; ++c) {
      double n2 = 0.0;
      bool finite = true;
      for (float v : grid.cell(r, c)) {
        finite = finite && std::isfinite(v);
        n2 += static_cast<double>(v) * v;
      }
      grid.eligible[grid.index(r, c)] = finite && n2 > 0.0 ? 1 : 0;
      if (!finite) {
        auto cell = grid.cell(r, c);
        std::fill(cell.begin(), cell.end(), 0.0f);
      }
    }
  }
  return grid;
}

}  // namespace patchservo

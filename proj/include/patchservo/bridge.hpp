#pragma once

// Client side of the feature-bridge wire protocol.
//
// Every message is a frame:
//   uint32 little-endian  header length in bytes
//   header                UTF-8 JSON object, always carrying "payload_bytes"
//   payload               raw bytes, exactly payload_bytes long
//
// Requests:
//   {"op":"health","payload_bytes":0}
//   {"op":"extract","width":W,"height":H,"resolution":R,"layer":L,
//    "payload_bytes":N}  + N bytes of PNG
// Responses:
//   {"status":0,"version":"1","model":"...","payload_bytes":0}
//   {"status":0,"rows":H',"cols":W',"dim":D,"payload_bytes":H'*W'*D*4}
//     + row-major little-endian float32 descriptors
//   {"status":<nonzero>,"message":"...","payload_bytes":0} on failure

#include <cstdint>
#include <mutex>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "patchservo/descriptors.hpp"

namespace patchservo {

inline constexpr const char* kBridgeProtocolVersion = "1";

enum class BridgeStatus : int {
  kOk = 0,
  kDecodeFailure = 1,
  kUnsupportedResolution = 2,
  kModelFailure = 3,
  kMalformedFrame = 4,
};

struct Frame {
  nlohmann::json header;
  std::vector<uint8_t> payload;
};

/// Serialises a frame; header["payload_bytes"] is set from the payload.
std::vector<uint8_t> encode_frame(nlohmann::json header, const std::vector<uint8_t>& payload);

/// Parses one complete frame from `bytes`. Throws BridgeUnavailable on a
/// malformed or truncated buffer.
Frame decode_frame(const std::vector<uint8_t>& bytes);

struct BridgeHealth {
  std::string version;
  std::string model;
};

/// One connection to a feature bridge. Requests are serialised internally.
class BridgeClient {
 public:
  static std::shared_ptr<BridgeClient> connect_tcp(const std::string& host, int port);
  static std::shared_ptr<BridgeClient> spawn(const std::vector<std::string>& argv);
  /// Connects according to the endpoint and performs the version handshake.
  static std::shared_ptr<BridgeClient> open(const BridgeEndpoint& endpoint);

  ~BridgeClient();
  BridgeClient(const BridgeClient&) = delete;
  BridgeClient& operator=(const BridgeClient&) = delete;

  BridgeHealth health();
  /// Raises BridgeUnavailable unless the server speaks our protocol version.
  void handshake();

  /// Raw descriptor grid for `image` resized bridge-side to `resolution`.
  DescriptorGrid extract(const Image& image, int resolution, int layer);

  Frame round_trip(const nlohmann::json& header, const std::vector<uint8_t>& payload);

 private:
  BridgeClient(int read_fd, int write_fd, int child_pid);
  void write_all(const uint8_t* data, size_t n);
  void read_exact(uint8_t* data, size_t n);

  std::mutex mutex_;
  int read_fd_ = -1;
  int write_fd_ = -1;
  int child_pid_ = -1;
  bool handshaken_ = false;
};

}  // namespace patchservo

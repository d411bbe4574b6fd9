#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "swarmmap/geometry.hpp"
#include "swarmmap/pose_id.hpp"
#include "swarmmap/sensing.hpp"

namespace swarmmap {

inline constexpr uint8_t kBroadcastAddress = 0xF;
inline constexpr size_t kMaxPayload = 60;       // physical-layer user data
inline constexpr size_t kHeaderBytes = 2;
inline constexpr size_t kAckBytes = 2;          // header only, no payload
inline constexpr size_t kMaxMessageBytes = 1146;
inline constexpr int kScanFragments = 20;       // ceil(1146 / 60)

// 16-bit packet header, MSB to LSB:
//   source[15:12] destination[11:8] ack[7] end[6] tag[5:4] seq[3:0]
struct PacketHeader {
  uint8_t source = 0;       // must not be the broadcast address
  uint8_t destination = 0;  // 0xF = broadcast
  bool ack = false;
  bool end = false;
  uint8_t tag = 0;  // 2 bits
  uint8_t seq = 0;  // 4 bits
};

class WireError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::array<uint8_t, 2> encode_header(const PacketHeader& h);
PacketHeader decode_header(const uint8_t* bytes);  // throws WireError

struct Packet {
  PacketHeader header;
  std::vector<uint8_t> payload;  // <= 60 bytes, empty for ACKs

  size_t wire_size() const { return kHeaderBytes + payload.size(); }
};

enum class MessageTag : uint8_t {
  PoseUpdate = 0,    // PUM, 16-byte body, broadcast
  TofScanRequest = 1,  // TSR, 4-byte body, unicast
  TofScanResponse = 2, // SR, up to 1146-byte body, unicast
  Control = 3,       // 16-byte body
};

struct PoseUpdateMessage {
  PoseId id;
  float x = 0.0f;
  float y = 0.0f;
  float psi = 0.0f;
};

struct ScanRequestMessage {
  PoseId id;
};

// Scan points travel as signed-millimeter world-axis offsets from the
// anchor position; scans above 285 points are uniformly downsampled to fit
// the 1146-byte body.
struct ScanResponseMessage {
  PoseId id;
  std::vector<Vec2> offsets;  // relative to the anchor position, meters
};
inline constexpr size_t kMaxScanResponsePoints = 285;

enum class ControlCommand : uint8_t {
  Takeoff = 1,
  Land = 2,
  ElectMain = 3,
};

struct ControlMessage {
  ControlCommand command = ControlCommand::Takeoff;
  std::array<uint8_t, 15> params{};
};

struct Message {
  MessageTag tag = MessageTag::PoseUpdate;
  std::vector<uint8_t> body;
};

Message encode_pose_update(const PoseUpdateMessage& m);
Message encode_scan_request(const ScanRequestMessage& m);
Message encode_scan_response(const Scan& scan);
Message encode_control(const ControlMessage& m);

PoseUpdateMessage decode_pose_update(const Message& m);
ScanRequestMessage decode_scan_request(const Message& m);
ScanResponseMessage decode_scan_response(const Message& m);
ControlMessage decode_control(const Message& m);

PoseUpdateMessage make_pose_update(PoseId id, const Pose2D& pose);
inline Pose2D pose_from_update(const PoseUpdateMessage& m) {
  return {double(m.x), double(m.y), wrap_angle(double(m.psi))};
}

// Encode such that decode(encode(x)) == x bit-exactly: near +-pi the f32
// rounding can leave (-pi, pi] and re-wrap to a different value, so iterate
// the encode/decode pair to its fixed point. Every drone then stores the
// same bytes it saw on the air.
PoseUpdateMessage make_canonical_pose_update(PoseId id, const Pose2D& pose);

// Required swarm bandwidth for n agents at pose spacing d with
// scan-match probability p_sm. The map-broadcast term is zero here (SLAM
// runs once at the end of the mission).
struct BandwidthEstimate {
  double bytes_per_meter = 0.0;
  double bits_per_meter = 0.0;
  double bits_per_second = 0.0;  // at the given flight velocity
};
BandwidthEstimate required_bandwidth(int n, double d, double p_sm,
                                     double velocity = 0.0);

}  // namespace swarmmap

#include "swarmmap/net.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace swarmmap {

namespace {

void put_u16(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(uint8_t(v & 0xFF));
  out.push_back(uint8_t(v >> 8));
}

uint16_t get_u16(const uint8_t* p) {
  return uint16_t(p[0]) | (uint16_t(p[1]) << 8);
}

void put_f32(std::vector<uint8_t>& out, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  for (int i = 0; i < 4; ++i) out.push_back(uint8_t(bits >> (8 * i)));
}

float get_f32(const uint8_t* p) {
  uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= uint32_t(p[i]) << (8 * i);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

// pose id: drone u8 + local index u24, little-endian
void put_pose_id(std::vector<uint8_t>& out, PoseId id) {
  out.push_back(id.drone);
  out.push_back(uint8_t(id.index & 0xFF));
  out.push_back(uint8_t((id.index >> 8) & 0xFF));
  out.push_back(uint8_t((id.index >> 16) & 0xFF));
}

PoseId get_pose_id(const uint8_t* p) {
  return {p[0], uint32_t(p[1]) | (uint32_t(p[2]) << 8) |
                    (uint32_t(p[3]) << 16)};
}

void require_size(const Message& m, size_t n, const char* what) {
  if (m.body.size() != n)
    throw WireError(std::string(what) + ": bad body size");
}

}  // namespace

std::array<uint8_t, 2> encode_header(const PacketHeader& h) {
  const uint8_t b0 = uint8_t((h.source & 0xF) << 4) | (h.destination & 0xF);
  const uint8_t b1 = uint8_t((h.ack ? 0x80 : 0) | (h.end ? 0x40 : 0) |
                             ((h.tag & 0x3) << 4) | (h.seq & 0xF));
  return {b0, b1};
}

PacketHeader decode_header(const uint8_t* bytes) {
  PacketHeader h;
  h.source = bytes[0] >> 4;
  h.destination = bytes[0] & 0xF;
  h.ack = (bytes[1] & 0x80) != 0;
  h.end = (bytes[1] & 0x40) != 0;
  h.tag = (bytes[1] >> 4) & 0x3;
  h.seq = bytes[1] & 0xF;
  if (h.source == kBroadcastAddress)
    throw WireError("header: source must not be the broadcast address");
  return h;
}

Message encode_pose_update(const PoseUpdateMessage& m) {
  Message out;
  out.tag = MessageTag::PoseUpdate;
  put_pose_id(out.body, m.id);
  put_f32(out.body, m.x);
  put_f32(out.body, m.y);
  put_f32(out.body, m.psi);
  return out;
}

PoseUpdateMessage decode_pose_update(const Message& m) {
  require_size(m, 16, "PUM");
  PoseUpdateMessage out;
  out.id = get_pose_id(m.body.data());
  out.x = get_f32(m.body.data() + 4);
  out.y = get_f32(m.body.data() + 8);
  out.psi = get_f32(m.body.data() + 12);
  return out;
}

Message encode_scan_request(const ScanRequestMessage& m) {
  Message out;
  out.tag = MessageTag::TofScanRequest;
  put_pose_id(out.body, m.id);
  return out;
}

ScanRequestMessage decode_scan_request(const Message& m) {
  require_size(m, 4, "TSR");
  return {get_pose_id(m.body.data())};
}

Message encode_scan_response(const Scan& scan) {
  Message out;
  out.tag = MessageTag::TofScanResponse;
  put_pose_id(out.body, scan.pose_id);

  size_t n = scan.points.size();
  size_t stride_num = 1, stride_den = 1;
  if (n > kMaxScanResponsePoints) {
    stride_num = n;
    stride_den = kMaxScanResponsePoints;
    n = kMaxScanResponsePoints;
  }
  put_u16(out.body, uint16_t(n));
  const Vec2 anchor = scan.anchor_pose.position();
  for (size_t k = 0; k < n; ++k) {
    const size_t idx = k * stride_num / stride_den;
    const Vec2 off = scan.points[idx] - anchor;
    const auto mm = [](double v) {
      double r = std::round(v * 1000.0);
      r = std::clamp(r, -32768.0, 32767.0);
      return int16_t(r);
    };
    put_u16(out.body, uint16_t(mm(off.x)));
    put_u16(out.body, uint16_t(mm(off.y)));
  }
  return out;
}

ScanResponseMessage decode_scan_response(const Message& m) {
  if (m.body.size() < 6) throw WireError("SR: truncated body");
  ScanResponseMessage out;
  out.id = get_pose_id(m.body.data());
  const size_t n = get_u16(m.body.data() + 4);
  if (m.body.size() != 6 + 4 * n) throw WireError("SR: bad body size");
  out.offsets.reserve(n);
  for (size_t k = 0; k < n; ++k) {
    const auto dx = int16_t(get_u16(m.body.data() + 6 + 4 * k));
    const auto dy = int16_t(get_u16(m.body.data() + 8 + 4 * k));
    out.offsets.push_back({dx / 1000.0, dy / 1000.0});
  }
  return out;
}

Message encode_control(const ControlMessage& m) {
  Message out;
  out.tag = MessageTag::Control;
  out.body.push_back(uint8_t(m.command));
  out.body.insert(out.body.end(), m.params.begin(), m.params.end());
  return out;
}

ControlMessage decode_control(const Message& m) {
  require_size(m, 16, "control");
  ControlMessage out;
  out.command = ControlCommand(m.body[0]);
  std::memcpy(out.params.data(), m.body.data() + 1, 15);
  return out;
}

PoseUpdateMessage make_pose_update(PoseId id, const Pose2D& pose) {
  return {id, float(pose.x), float(pose.y), float(pose.psi)};
}

PoseUpdateMessage make_canonical_pose_update(PoseId id, const Pose2D& pose) {
  PoseUpdateMessage m = make_pose_update(id, pose);
  for (int i = 0; i < 3; ++i) {
    const PoseUpdateMessage next = make_pose_update(id, pose_from_update(m));
    if (next.psi == m.psi && next.x == m.x && next.y == m.y) break;
    m = next;
  }
  return m;
}

BandwidthEstimate required_bandwidth(int n, double d, double p_sm,
                                     double velocity) {
  const double pum = 16.0, tsr = 4.0, sr = 1146.0, ack = double(kAckBytes);
  BandwidthEstimate out;
  out.bytes_per_meter = (n / d) * (pum + ack * (n - 1)) +
                        n * p_sm * (tsr + sr + kScanFragments * ack);
  out.bits_per_meter = out.bytes_per_meter * 8.0;
  out.bits_per_second = out.bits_per_meter * velocity;
  return out;
}

}  // namespace swarmmap

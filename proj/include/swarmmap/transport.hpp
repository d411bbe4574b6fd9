#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <vector>

#include "swarmmap/net.hpp"
#include "swarmmap/world.hpp"

namespace swarmmap {

struct ChannelModel {
  double loss_prob = 0.0;        // per receiver, per packet
  double max_bitrate = 64100.0;  // bits/s, sets the per-tick packet budget
  uint64_t seed = 1;
};

struct PacketLogEntry {
  double t = 0.0;
  uint8_t src = 0;
  uint8_t dst = 0;
  bool ack = false;
  bool end = false;
  uint8_t tag = 0;
  uint8_t seq = 0;
  size_t len = 0;  // full on-air bytes including the header
};

struct DeliveryReport {
  uint64_t message_id = 0;  // per-node outgoing counter
  MessageTag tag = MessageTag::PoseUpdate;
  uint8_t destination = 0;
  bool success = false;
  std::vector<uint8_t> failed_recipients;
};

struct ReceivedMessage {
  uint8_t source = 0;
  Message message;
};

// Stop-and-wait transmitter plus reassembling receiver for one node.
// One data packet is in flight at a time; it is retransmitted every 50 ms
// of simulated time until every intended recipient has acknowledged, up to
// 20 retries. Outgoing messages queue behind the one in flight.
class TransportNode {
 public:
  explicit TransportNode(uint8_t address);

  uint8_t address() const { return address_; }
  void set_peers(std::vector<uint8_t> peers);
  const std::set<uint8_t>& peers() const { return peers_; }

  // Queues a message; destination 0xF broadcasts to all current peers.
  uint64_t send_message(Message msg, uint8_t destination);
  bool idle() const { return queue_.empty() && !in_flight_; }
  size_t queued() const { return queue_.size() + (in_flight_ ? 1 : 0); }

  // Engine side.
  std::optional<Packet> next_transmission(double now);
  // Handles a delivered packet; data packets addressed here produce an ACK.
  std::optional<Packet> on_packet(const Packet& pkt);
  std::vector<ReceivedMessage> take_received();
  std::vector<DeliveryReport> take_reports();
  // Seq of the data packet currently awaiting acknowledgment, if any.
  std::optional<uint8_t> awaiting_ack_seq() const;

  int reassembly_resets() const { return reassembly_resets_; }

  static constexpr double kRetryTimeout = 0.05;  // seconds
  static constexpr int kMaxRetries = 20;

 private:
  struct Outgoing {
    uint64_t message_id = 0;
    Message message;
    uint8_t destination = 0;
    std::set<uint8_t> recipients;  // resolved at send time for broadcasts
    size_t fragment = 0;           // index of the fragment in flight
    std::set<uint8_t> pending;     // recipients that have not acked it
    std::set<uint8_t> failed;
    int retries = 0;
    double last_tx = -1.0;
    bool transmitted_once = false;
  };

  size_t fragment_count(const Outgoing& o) const;
  std::vector<uint8_t> fragment_payload(const Outgoing& o) const;
  void start_next_message();
  void finish_in_flight(bool success);

  uint8_t address_;
  std::set<uint8_t> peers_;
  std::deque<Outgoing> queue_;
  std::optional<Outgoing> in_flight_;
  uint8_t next_seq_ = 0;
  uint64_t next_message_id_ = 0;

  struct ReassemblyState {
    std::vector<uint8_t> buffer;
    int last_seq = -1;
  };
  std::map<uint8_t, ReassemblyState> reassembly_;
  std::vector<ReceivedMessage> received_;
  std::vector<DeliveryReport> reports_;
  int reassembly_resets_ = 0;
};

// Simulated lossy broadcast medium driven by the engine tick. Every
// transmitted packet reaches each other live node independently with
// probability 1 - loss_prob; nodes are serviced in ascending address order,
// ACKs are delivered within the same round.
class Network {
 public:
  explicit Network(ChannelModel model);

  TransportNode& add_node(uint8_t address);
  TransportNode& node(uint8_t address);
  bool has_node(uint8_t address) const;
  void set_failed(uint8_t address, bool failed = true);
  bool is_failed(uint8_t address) const;

  void tick(double now);
  bool idle() const;

  const std::vector<PacketLogEntry>& log() const { return log_; }
  // Bandwidth-model accounting: payload bytes for data packets, 2 bytes
  // per ACK (data headers are not counted, matching the message sizes the
  // closed-form estimate uses).
  uint64_t accounted_bytes() const { return accounted_bytes_; }
  uint64_t accounted_data_bytes() const { return accounted_data_bytes_; }
  uint64_t accounted_ack_bytes() const { return accounted_ack_bytes_; }
  int stop_and_wait_violations() const { return stop_and_wait_violations_; }
  int rounds_per_tick() const { return rounds_per_tick_; }

 private:
  void transmit(TransportNode& sender, const Packet& pkt, double now);
  void log_packet(const Packet& pkt, double now);

  ChannelModel model_;
  int rounds_per_tick_ = 1;
  Rng rng_;
  std::map<uint8_t, std::unique_ptr<TransportNode>> nodes_;
  std::set<uint8_t> failed_;
  std::vector<PacketLogEntry> log_;
  uint64_t accounted_bytes_ = 0;
  uint64_t accounted_data_bytes_ = 0;
  uint64_t accounted_ack_bytes_ = 0;
  int stop_and_wait_violations_ = 0;
  std::map<uint8_t, std::pair<int, bool>> outstanding_;  // src -> (seq, open)
};

std::string packet_log_csv(const std::vector<PacketLogEntry>& log);

}  // namespace swarmmap

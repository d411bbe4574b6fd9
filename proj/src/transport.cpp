#include "swarmmap/transport.hpp"

#include <algorithm>
#include <sstream>
#include <utility>

namespace swarmmap {

TransportNode::TransportNode(uint8_t address) : address_(address) {}

void TransportNode::set_peers(std::vector<uint8_t> peers) {
  peers_ = std::set<uint8_t>(peers.begin(), peers.end());
  peers_.erase(address_);
}

uint64_t TransportNode::send_message(Message msg, uint8_t destination) {
  Outgoing o;
  o.message_id = next_message_id_++;
  const uint64_t id = o.message_id;
  o.message = std::move(msg);
  o.destination = destination;
  if (destination == kBroadcastAddress) {
    o.recipients = peers_;
  } else {
    o.recipients = {destination};
  }
  queue_.push_back(std::move(o));
  if (!in_flight_) start_next_message();
  return id;
}

size_t TransportNode::fragment_count(const Outgoing& o) const {
  if (o.message.body.empty()) return 1;
  return (o.message.body.size() + kMaxPayload - 1) / kMaxPayload;
}

std::vector<uint8_t> TransportNode::fragment_payload(const Outgoing& o) const {
  const size_t begin = o.fragment * kMaxPayload;
  const size_t end = std::min(o.message.body.size(), begin + kMaxPayload);
  if (begin >= o.message.body.size()) return {};
  return {o.message.body.begin() + begin, o.message.body.begin() + end};
}

void TransportNode::start_next_message() {
  if (queue_.empty()) return;
  in_flight_ = std::move(queue_.front());
  queue_.pop_front();
  in_flight_->fragment = 0;
  in_flight_->pending = in_flight_->recipients;
  in_flight_->retries = 0;
  in_flight_->last_tx = -1.0;
  in_flight_->transmitted_once = false;
}

void TransportNode::finish_in_flight(bool success) {
  DeliveryReport r;
  r.message_id = in_flight_->message_id;
  r.tag = in_flight_->message.tag;
  r.destination = in_flight_->destination;
  r.success = success;
  r.failed_recipients.assign(in_flight_->failed.begin(),
                             in_flight_->failed.end());
  if (!success)
    r.failed_recipients.insert(r.failed_recipients.end(),
                               in_flight_->pending.begin(),
                               in_flight_->pending.end());
  reports_.push_back(std::move(r));
  in_flight_.reset();
  start_next_message();
}

std::optional<Packet> TransportNode::next_transmission(double now) {
  if (!in_flight_) return std::nullopt;
  Outgoing& o = *in_flight_;

  // No recipients at all (e.g. broadcast in a one-node network): the packet
  // still goes on air once per fragment, nothing to wait for.
  if (o.pending.empty()) {
    // fall through to transmit the current fragment once
  } else if (o.transmitted_once) {
    if (now - o.last_tx < kRetryTimeout) return std::nullopt;
    if (o.retries >= kMaxRetries) {
      finish_in_flight(false);
      return next_transmission(now);
    }
    ++o.retries;
  }

  Packet pkt;
  pkt.header.source = address_;
  pkt.header.destination = o.destination;
  pkt.header.tag = uint8_t(o.message.tag);
  pkt.header.seq = next_seq_;
  pkt.header.end = o.fragment + 1 == fragment_count(o);
  pkt.payload = fragment_payload(o);
  o.transmitted_once = true;
  o.last_tx = now;

  if (o.pending.empty()) {
    // advance immediately; seq still increments per packet
    next_seq_ = (next_seq_ + 1) & 0xF;
    if (pkt.header.end) {
      finish_in_flight(true);
    } else {
      ++o.fragment;
      o.transmitted_once = false;
    }
  }
  return pkt;
}

std::optional<Packet> TransportNode::on_packet(const Packet& pkt) {
  const PacketHeader& h = pkt.header;
  if (h.ack) {
    if (h.destination != address_ || !in_flight_) return std::nullopt;
    Outgoing& o = *in_flight_;
    if (h.seq != next_seq_) return std::nullopt;  // stale ack
    o.pending.erase(h.source);
    if (o.pending.empty()) {
      next_seq_ = (next_seq_ + 1) & 0xF;
      const bool last = o.fragment + 1 == fragment_count(o);
      if (last) {
        finish_in_flight(o.failed.empty());
      } else {
        ++o.fragment;
        o.pending = o.recipients;
        o.retries = 0;
        o.transmitted_once = false;
      }
    }
    return std::nullopt;
  }

  // Data packet: ignore unless addressed to us or broadcast.
  if (h.destination != address_ && h.destination != kBroadcastAddress)
    return std::nullopt;

  Packet ack;
  ack.header.source = address_;
  ack.header.destination = h.source;
  ack.header.ack = true;
  ack.header.tag = h.tag;
  ack.header.seq = h.seq;

  ReassemblyState& st = reassembly_[h.source];
  if (int(h.seq) == st.last_seq) return ack;  // retransmission, ack only
  st.last_seq = h.seq;

  if (st.buffer.size() + pkt.payload.size() > kMaxMessageBytes) {
    st.buffer.clear();
    ++reassembly_resets_;
    return ack;
  }
  st.buffer.insert(st.buffer.end(), pkt.payload.begin(), pkt.payload.end());
  if (h.end) {
    Message m;
    m.tag = MessageTag(h.tag);
    m.body = std::move(st.buffer);
    st.buffer = {};
    received_.push_back({h.source, std::move(m)});
  }
  return ack;
}

std::optional<uint8_t> TransportNode::awaiting_ack_seq() const {
  if (in_flight_ && in_flight_->transmitted_once && !in_flight_->pending.empty())
    return next_seq_;
  return std::nullopt;
}

std::vector<ReceivedMessage> TransportNode::take_received() {
  return std::exchange(received_, {});
}

std::vector<DeliveryReport> TransportNode::take_reports() {
  return std::exchange(reports_, {});
}

Network::Network(ChannelModel model) : model_(model), rng_(model.seed) {
  const double packet_bits = 8.0 * (kHeaderBytes + kMaxPayload);
  rounds_per_tick_ = std::max(
      1, int(model_.max_bitrate / packet_bits / kTickRate));
}

TransportNode& Network::add_node(uint8_t address) {
  auto [it, fresh] =
      nodes_.emplace(address, std::make_unique<TransportNode>(address));
  (void)fresh;
  return *it->second;
}

TransportNode& Network::node(uint8_t address) { return *nodes_.at(address); }

bool Network::has_node(uint8_t address) const {
  return nodes_.count(address) != 0;
}

void Network::set_failed(uint8_t address, bool failed) {
  if (failed)
    failed_.insert(address);
  else
    failed_.erase(address);
}

bool Network::is_failed(uint8_t address) const {
  return failed_.count(address) != 0;
}

void Network::log_packet(const Packet& pkt, double now) {
  log_.push_back({now, pkt.header.source, pkt.header.destination,
                  pkt.header.ack, pkt.header.end, pkt.header.tag,
                  pkt.header.seq, pkt.wire_size()});
  if (pkt.header.ack) {
    accounted_bytes_ += kAckBytes;
    accounted_ack_bytes_ += kAckBytes;
  } else {
    accounted_bytes_ += pkt.payload.size();
    accounted_data_bytes_ += pkt.payload.size();
  }
}

void Network::transmit(TransportNode& sender, const Packet& pkt, double now) {
  log_packet(pkt, now);

  if (!pkt.header.ack) {
    auto& [seq, open] = outstanding_[sender.address()];
    if (open && seq != pkt.header.seq) ++stop_and_wait_violations_;
    seq = pkt.header.seq;
    open = true;
  }

  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (auto& [addr, receiver] : nodes_) {
    if (addr == sender.address() || failed_.count(addr)) continue;
    const bool lost = uni(rng_) < model_.loss_prob;
    if (lost) continue;
    if (auto ack = receiver->on_packet(pkt)) {
      log_packet(*ack, now);
      // The ack is itself subject to loss on its way back.
      if (uni(rng_) >= model_.loss_prob && !failed_.count(pkt.header.source)) {
        if (auto it = nodes_.find(pkt.header.source); it != nodes_.end())
          it->second->on_packet(*ack);
      }
    }
  }

  // The window closes once the sender no longer waits on this seq (fully
  // acked, abandoned, or fragment advanced).
  if (!pkt.header.ack) {
    auto& [seq, open] = outstanding_[sender.address()];
    open = sender.awaiting_ack_seq() == std::optional<uint8_t>(seq);
  }
}

void Network::tick(double now) {
  for (int round = 0; round < rounds_per_tick_; ++round) {
    bool any = false;
    for (auto& [addr, node] : nodes_) {
      if (failed_.count(addr)) continue;
      if (auto pkt = node->next_transmission(now)) {
        transmit(*node, *pkt, now);
        any = true;
      }
    }
    if (!any) break;
  }
}

bool Network::idle() const {
  for (const auto& [addr, node] : nodes_) {
    if (failed_.count(addr)) continue;
    if (!node->idle()) return false;
  }
  return true;
}

std::string packet_log_csv(const std::vector<PacketLogEntry>& log) {
  std::ostringstream os;
  os << "t,src,dst,ack,end,tag,seq,len\n";
  char buf[32];
  for (const auto& e : log) {
    std::snprintf(buf, sizeof buf, "%.6f", e.t);
    os << buf << ',' << int(e.src) << ',' << int(e.dst) << ',' << int(e.ack)
       << ',' << int(e.end) << ',' << int(e.tag) << ',' << int(e.seq) << ','
       << e.len << '\n';
  }
  return os.str();
}

}  // namespace swarmmap

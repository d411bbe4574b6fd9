#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <map>
#include <set>

#include "doctest.h"
#include "swarmmap/net.hpp"
#include "swarmmap/transport.hpp"

using namespace swarmmap;

namespace {

Scan make_scan(PoseId id, int points, Vec2 anchor = {2.0, 3.0}) {
  Scan s;
  s.pose_id = id;
  s.anchor_pose = {anchor.x, anchor.y, 0.0};
  for (int i = 0; i < points; ++i)
    s.points.push_back({anchor.x + 0.001 * i, anchor.y - 0.002 * i});
  return s;
}

// drive a network until quiescent, collecting completed messages per node
std::map<uint8_t, std::vector<ReceivedMessage>> pump(Network& net,
                                                     double& t,
                                                     int max_ticks = 4000) {
  std::map<uint8_t, std::vector<ReceivedMessage>> inbox;
  for (int k = 0; k < max_ticks; ++k) {
    net.tick(t);
    t += kTickDt;
    for (uint8_t a = 0; a < 15; ++a) {
      if (!net.has_node(a)) continue;
      for (auto& m : net.node(a).take_received()) inbox[a].push_back(std::move(m));
    }
    if (net.idle()) break;
  }
  return inbox;
}

}  // namespace

TEST_CASE("header bit layout is frozen") {
  // source[15:12] destination[11:8] ack[7] end[6] tag[5:4] seq[3:0]
  PacketHeader h;
  h.source = 0;
  h.destination = 0xF;
  h.ack = false;
  h.end = true;
  h.tag = 0;
  h.seq = 0;
  const auto bytes = encode_header(h);
  CHECK(bytes[0] == 0x0F);
  CHECK(bytes[1] == 0x40);

  PacketHeader h2;
  h2.source = 0xA;
  h2.destination = 0x3;
  h2.ack = true;
  h2.end = false;
  h2.tag = 2;
  h2.seq = 0xB;
  const auto b2 = encode_header(h2);
  CHECK(b2[0] == 0xA3);
  CHECK(b2[1] == 0xAB);  // 1000 0000 | 10 << 4 | 1011
}

TEST_CASE("header codec is a bijection over valid values") {
  int checked = 0;
  for (int v = 0; v < 0x10000; ++v) {
    const uint8_t bytes[2] = {uint8_t(v >> 8), uint8_t(v & 0xFF)};
    if ((bytes[0] >> 4) == kBroadcastAddress) {
      CHECK_THROWS_AS(decode_header(bytes), WireError);
      continue;
    }
    const PacketHeader h = decode_header(bytes);
    const auto re = encode_header(h);
    CHECK(re[0] == bytes[0]);
    CHECK(re[1] == bytes[1]);
    ++checked;
  }
  CHECK(checked == 0x10000 - 0x1000);
}

TEST_CASE("an ACK is exactly two bytes on the wire") {
  Packet ack;
  ack.header.ack = true;
  CHECK(ack.wire_size() == 2);
}

TEST_CASE("message bodies have the protocol sizes") {
  const PoseUpdateMessage pum = make_pose_update({3, 1234}, {1.5, -2.25, 0.75});
  const Message m = encode_pose_update(pum);
  CHECK(m.body.size() == 16);
  const auto back = decode_pose_update(m);
  CHECK(back.id == PoseId{3, 1234});
  CHECK(back.x == doctest::Approx(1.5));
  CHECK(back.psi == doctest::Approx(0.75));

  CHECK(encode_scan_request({{2, 77}}).body.size() == 4);
  CHECK(decode_scan_request(encode_scan_request({{2, 77}})).id ==
        PoseId{2, 77});

  ControlMessage ctl;
  ctl.command = ControlCommand::ElectMain;
  ctl.params[0] = 4;
  const Message cm = encode_control(ctl);
  CHECK(cm.body.size() == 16);
  CHECK(decode_control(cm).command == ControlCommand::ElectMain);
  CHECK(decode_control(cm).params[0] == 4);
}

TEST_CASE("scan responses cap at 285 points inside 1146 bytes") {
  SUBCASE("full 480-point scan is downsampled") {
    const Message m = encode_scan_response(make_scan({1, 9}, 480));
    CHECK(m.body.size() == kMaxMessageBytes);  // 4 + 2 + 285*4
    const auto sr = decode_scan_response(m);
    CHECK(sr.offsets.size() == kMaxScanResponsePoints);
    CHECK(sr.id == PoseId{1, 9});
  }
  SUBCASE("small scans round-trip within a millimeter") {
    const Scan s = make_scan({1, 9}, 40);
    const auto sr = decode_scan_response(encode_scan_response(s));
    REQUIRE(sr.offsets.size() == 40);
    for (int i = 0; i < 40; ++i) {
      const Vec2 reconstructed = s.anchor_pose.position() + sr.offsets[i];
      CHECK(std::abs(reconstructed.x - s.points[i].x) <= 0.0005 + 1e-12);
      CHECK(std::abs(reconstructed.y - s.points[i].y) <= 0.0005 + 1e-12);
    }
  }
  SUBCASE("empty scan is a 6-byte body") {
    CHECK(encode_scan_response(make_scan({1, 9}, 0)).body.size() == 6);
  }
}

TEST_CASE("broadcast PUM to three peers accounts 22 bytes") {
  Network net({0.0, 64100.0, 1});
  for (uint8_t a : {0, 1, 2, 3}) net.add_node(a).set_peers({0, 1, 2, 3});
  net.node(0).send_message(encode_pose_update(make_pose_update({0, 0}, {})),
                           kBroadcastAddress);
  double t = 0.0;
  const auto inbox = pump(net, t);
  // PUM payload 16 + 3 ACK headers = 22 accounted bytes
  CHECK(net.accounted_bytes() == 22);
  CHECK(inbox.at(1).size() == 1);
  CHECK(inbox.at(2).size() == 1);
  CHECK(inbox.at(3).size() == 1);
  CHECK(net.stop_and_wait_violations() == 0);
}

TEST_CASE("a 1146-byte scan response travels as 20 fragments") {
  Network net({0.0, 64100.0, 1});
  net.add_node(0).set_peers({0, 1});
  net.add_node(1).set_peers({0, 1});
  const Message sr = encode_scan_response(make_scan({0, 3}, 480));
  REQUIRE(sr.body.size() == 1146);
  net.node(0).send_message(sr, 1);
  double t = 0.0;
  const auto inbox = pump(net, t);

  int data_packets = 0, end_packets = 0;
  for (const auto& e : net.log()) {
    if (e.ack || e.src != 0) continue;
    ++data_packets;
    if (e.end) ++end_packets;
  }
  CHECK(data_packets == kScanFragments);
  CHECK(end_packets == 1);
  REQUIRE(inbox.at(1).size() == 1);
  CHECK(inbox.at(1)[0].message.body == sr.body);  // byte-exact reassembly
}

TEST_CASE("lossy channel still delivers exactly once") {
  Network net({0.3, 64100.0, 99});
  net.add_node(2).set_peers({2, 5});
  net.add_node(5).set_peers({2, 5});
  const Message m = encode_pose_update(make_pose_update({2, 42}, {1, 2, 0.5}));
  net.node(2).send_message(m, kBroadcastAddress);
  double t = 0.0;
  const auto inbox = pump(net, t);

  REQUIRE(inbox.at(5).size() == 1);  // deduplicated
  CHECK(inbox.at(5)[0].message.body == m.body);
  int data_tx = 0;
  for (const auto& e : net.log())
    if (!e.ack && e.src == 2) ++data_tx;
  CHECK(data_tx >= 1);  // retransmissions appear in the log when lost
  const auto reports = net.node(2).take_reports();
  REQUIRE(reports.size() == 1);
  CHECK(reports[0].success);
}

TEST_CASE("receiver acks and deduplicates fragments directly") {
  TransportNode rx(4);
  auto packet = [](uint8_t seq, bool end, const std::vector<uint8_t>& body) {
    Packet p;
    p.header.source = 1;
    p.header.destination = 4;
    p.header.tag = uint8_t(MessageTag::TofScanResponse);
    p.header.seq = seq;
    p.header.end = end;
    p.payload = body;
    return p;
  };

  SUBCASE("single packet completes immediately") {
    const auto ack = rx.on_packet(packet(0, true, {1, 2, 3}));
    REQUIRE(ack);
    CHECK(ack->header.ack);
    CHECK(ack->header.destination == 1);
    CHECK(ack->header.seq == 0);
    const auto msgs = rx.take_received();
    REQUIRE(msgs.size() == 1);
    CHECK(msgs[0].message.body == std::vector<uint8_t>{1, 2, 3});
  }
  SUBCASE("duplicate packets are acked but delivered once") {
    const auto a1 = rx.on_packet(packet(7, true, {9}));
    const auto a2 = rx.on_packet(packet(7, true, {9}));
    REQUIRE(a1);
    REQUIRE(a2);
    CHECK(rx.take_received().size() == 1);
  }
  SUBCASE("fragments 1,2,2,3 reassemble into one message") {
    rx.on_packet(packet(1, false, {10}));
    rx.on_packet(packet(2, false, {20}));
    rx.on_packet(packet(2, false, {20}));  // retransmission
    rx.on_packet(packet(3, true, {30}));
    const auto msgs = rx.take_received();
    REQUIRE(msgs.size() == 1);
    CHECK(msgs[0].message.body == std::vector<uint8_t>{10, 20, 30});
  }
  SUBCASE("oversized reassembly resets the buffer") {
    for (uint8_t i = 0; i < 20; ++i)
      rx.on_packet(packet(i, false, std::vector<uint8_t>(60, i)));
    CHECK(rx.reassembly_resets() == 1);
  }
  SUBCASE("unicast to someone else is ignored") {
    Packet p = packet(0, true, {1});
    p.header.destination = 9;
    CHECK(!rx.on_packet(p));
    CHECK(rx.take_received().empty());
  }
}

TEST_CASE("required_bandwidth reproduces the pose-broadcast term") {
  SUBCASE("two agents") {
    const auto b = required_bandwidth(2, 1.0, 0.0);
    CHECK(b.bytes_per_meter == doctest::Approx(36.0));
    CHECK(b.bits_per_meter == doctest::Approx(288.0));
  }
  SUBCASE("four agents") {
    const auto b = required_bandwidth(4, 1.0, 0.0);
    CHECK(b.bytes_per_meter == doctest::Approx(88.0));
    CHECK(b.bits_per_meter == doctest::Approx(704.0));
  }
  SUBCASE("scan term uses TSR + SR + 20 ACKs") {
    const auto b = required_bandwidth(2, 1.0, 0.5);
    // 36 + 2 * 0.5 * (4 + 1146 + 40)
    CHECK(b.bytes_per_meter == doctest::Approx(36.0 + 1190.0));
  }
  SUBCASE("twenty agents fit the measured channel at one-meter spacing") {
    const auto b = required_bandwidth(20, 1.0, 0.05, 0.8);
    CHECK(b.bits_per_second <= 64100.0);
  }
}

TEST_CASE("exactly-once soak across loss rates") {
  for (const double loss : {0.0, 0.1, 0.3}) {
    Network net({loss, 64100.0, uint64_t(loss * 1000 + 7)});
    for (uint8_t a : {0, 1, 2}) net.add_node(a).set_peers({0, 1, 2});
    double t = 0.0;
    std::map<uint8_t, int> expected;
    for (int round = 0; round < 30; ++round) {
      const uint8_t sender = uint8_t(round % 3);
      net.node(sender).send_message(
          encode_pose_update(make_pose_update({sender, uint32_t(round)}, {})),
          kBroadcastAddress);
      const auto inbox = pump(net, t);
      for (const auto& [addr, msgs] : inbox) expected[addr] += int(msgs.size());
    }
    // every peer got each of the 30 messages exactly once: 2 receivers each
    int total = 0;
    for (const auto& [addr, n] : expected) total += n;
    CHECK(total == 30 * 2);
    CHECK(net.stop_and_wait_violations() == 0);
  }
}

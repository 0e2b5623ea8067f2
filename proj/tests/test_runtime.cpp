#include <gtest/gtest.h>

#include <fstream>
#include <future>
#include <sstream>
#include <thread>

#include "bfd/error.hpp"
#include "bfd/runtime.hpp"
#include "bfd/serialize.hpp"

using namespace bfd;

namespace {

Device untrained_device(std::uint64_t seed = 1) {
  const auto arch = canonical_architecture();
  return Device(arch, init_params<float>(arch, seed));
}

std::vector<double> ramp(std::size_t n) {
  std::vector<double> s(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = 0.5 + 0.5 * std::sin(0.37 * static_cast<double>(i));
  return s;
}

StreamSummary stream_over_pipe(const Device& device, std::span<const double> samples, int k) {
  auto [host, dev] = make_pipe();
  std::thread t([&device, ch = std::move(dev)] { device.serve_session(*ch); });
  auto s = host_stream(*host, samples, HostOptions{k, 0.0});
  t.join();
  return s;
}

}  // namespace

TEST(Card, GoldenRendering) {
  EXPECT_EQ(render_card(msg::Result{8, "21-Ball", 0.999856, 18}), "Fault: 21-Ball\nProb : 0.999856\nTime : 18 ticks\n");
  DiagnosisRecord rec{0, "00-Normal", 0.5, 1, {}};
  EXPECT_EQ(render_card(rec), "Fault: 00-Normal\nProb : 0.500000\nTime : 1 ticks\n");
}

TEST(Card, ClassLabels) {
  EXPECT_EQ(class_label(7, 10), "21-Ball");
  EXPECT_EQ(class_label(2, 3), "class-2");
}

TEST(PredictionCount, Arithmetic) {
  EXPECT_EQ(expected_predictions(400, 1), 1u);
  EXPECT_EQ(expected_predictions(399, 1), 0u);
  EXPECT_EQ(expected_predictions(1000, 10), 61u);
  EXPECT_EQ(expected_predictions(1000, 1), 601u);
  EXPECT_THROW(expected_predictions(10, 0), Error);
}

TEST(Device, ClassifyReportsSoftmaxMaxAndPositiveTicks) {
  const auto d = untrained_device();
  Frame f;
  f.values.assign(400, 0.3f);
  const auto r = d.classify(f);
  EXPECT_GE(r.class_id, 0);
  EXPECT_LT(r.class_id, 10);
  EXPECT_EQ(r.label, class_label(r.class_id, 10));
  EXPECT_GT(r.prob, 0.1);
  EXPECT_LE(r.prob, 1.0);
  EXPECT_GE(r.ticks, 1);
  const auto probs = forward(d.arch(), d.params(), Tensor(Shape{20, 20, 1}, f.values));
  EXPECT_EQ(r.prob, static_cast<double>(probs[static_cast<std::size_t>(r.class_id)]));
}

TEST(Device, RejectsBadModelFile) {
  const auto path = std::filesystem::temp_directory_path() / "bfd_bad_model.bin";
  const auto arch = canonical_architecture();
  auto bytes = encode_model(arch, init_params<float>(arch, 1));
  bytes[100] ^= 0x40;
  {
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }
  try {
    Device::from_file(path);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kCorruptModel);
  }
  std::filesystem::remove(path);
}

TEST(Host, PredictionCountsOverPipe) {
  const auto d = untrained_device();
  const auto s400 = ramp(400);
  auto a = stream_over_pipe(d, s400, 1);
  EXPECT_EQ(a.samples_sent, 400u);
  EXPECT_EQ(a.predictions, 1u);
  const auto s1000 = ramp(1000);
  auto b = stream_over_pipe(d, s1000, 10);
  EXPECT_EQ(b.predictions, 61u);
  std::size_t hist = 0;
  for (const auto& [cls, n] : b.histogram) hist += n;
  EXPECT_EQ(hist, 61u);
  EXPECT_GE(b.mean_ticks, 1.0);
  EXPECT_NE(b.render().find("predictions  : 61"), std::string::npos);
}

TEST(Host, BackToBackSessionsAgree) {
  const auto d = untrained_device(4);
  const auto s = ramp(700);
  const auto a = stream_over_pipe(d, s, 7);
  const auto b = stream_over_pipe(d, s, 7);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].class_id, b.records[i].class_id);
    EXPECT_EQ(a.records[i].prob, b.records[i].prob);
  }
}

TEST(Host, DeviceCountMatchesHostCount) {
  const auto d = untrained_device();
  auto [host, dev] = make_pipe();
  std::size_t device_count = 0;
  std::thread t([&, ch = std::move(dev)] { device_count = d.serve_session(*ch); });
  const auto s = host_stream(*host, ramp(555), HostOptions{3, 0.0});
  t.join();
  EXPECT_EQ(device_count, s.predictions);
  EXPECT_EQ(s.predictions, expected_predictions(555, 3));
}

TEST(Host, HandshakeFailures) {
  // Peer that closes immediately.
  {
    auto [host, dev] = make_pipe();
    dev->close();
    try {
      host_stream(*host, ramp(10), HostOptions{});
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kHandshakeFailed);
    }
  }
  // Peer that answers HELLO with ERR dims.
  {
    auto [host, dev] = make_pipe();
    std::thread t([ch = std::move(dev)] {
      ch->read_line();
      ch->write_line(encode(msg::Err{"dims", "device expects r=16 c=16"}));
    });
    try {
      host_stream(*host, ramp(10), HostOptions{});
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kHandshakeFailed);
      EXPECT_NE(std::string(e.what()).find("dims"), std::string::npos);
    }
    t.join();
  }
}

TEST(Host, ErrDuringStreamingIsPeerError) {
  auto [host, dev] = make_pipe();
  std::thread t([ch = std::move(dev)] {
    ch->read_line();
    ch->write_line(encode(msg::Ok{}));
    ch->read_line();
    ch->write_line(encode(msg::Err{"phase", "nope"}));
  });
  try {
    host_stream(*host, ramp(10), HostOptions{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kPeerError);
    EXPECT_NE(std::string(e.what()).find("phase"), std::string::npos);
  }
  t.join();
}

TEST(Tcp, UnreachableEndpointIsHandshakeFailure) {
  std::uint16_t port;
  {
    TcpListener probe(Endpoint{"127.0.0.1", 0});
    port = probe.port();
  }
  try {
    host_stream(Endpoint{"127.0.0.1", port}, ramp(10), HostOptions{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kHandshakeFailed);
  }
}

TEST(Tcp, DeviceServeStreamsAndPrintsCards) {
  const auto path = std::filesystem::temp_directory_path() / "bfd_tcp_model.bin";
  const auto arch = canonical_architecture();
  save_model(init_params<float>(arch, 2), arch, path);
  DeviceConfig cfg;
  cfg.model_path = path;
  cfg.listen = Endpoint{"127.0.0.1", 0};
  cfg.max_sessions = 2;
  std::ostringstream out;
  std::promise<std::uint16_t> bound;
  std::thread server([&] { device_serve(cfg, out, [&](std::uint16_t p) { bound.set_value(p); }); });
  const auto port = bound.get_future().get();
  const auto a = host_stream(Endpoint{"127.0.0.1", port}, ramp(420), HostOptions{10, 0.0});
  // A raw client that sends garbage and drops the connection must not stop the device.
  {
    auto ch = tcp_connect(Endpoint{"127.0.0.1", port});
    ch->write_line("\x01\x02 garbage");
    const auto reply = ch->read_line();
    ASSERT_TRUE(reply.has_value());
    EXPECT_EQ(reply->rfind("ERR parse", 0), 0u);
  }
  server.join();
  EXPECT_EQ(a.predictions, 3u);
  const auto text = out.str();
  std::size_t cards = 0;
  for (std::size_t at = 0; (at = text.find("Fault: ", at)) != std::string::npos; ++at) ++cards;
  EXPECT_EQ(cards, 3u);
  EXPECT_NE(text.find(" ticks\n"), std::string::npos);
  std::filesystem::remove(path);
}

TEST(Endpoint, Parsing) {
  const auto ep = parse_endpoint("localhost:8080");
  EXPECT_EQ(ep.host, "localhost");
  EXPECT_EQ(ep.port, 8080);
  EXPECT_EQ(parse_endpoint(":9").host, "127.0.0.1");
  EXPECT_THROW(parse_endpoint("nohost"), Error);
  EXPECT_THROW(parse_endpoint("h:70000"), Error);
}

TEST(E2E, UntrainedModelIsNearChanceAndDeterministic) {
  const auto d = untrained_device(3);
  SyntheticSpec spec;
  spec.recording_length = 3000;
  const auto recs = held_out_synthetic(spec);
  E2EConfig cfg;
  const auto a = e2e_run(d, recs, cfg);
  EXPECT_EQ(a.per_class.size(), 10u);
  EXPECT_EQ(a.predictions, 610u);
  EXPECT_EQ(a.scored, 600u);
  EXPECT_LT(a.accuracy, 0.35);
  const auto b = e2e_run(d, recs, cfg);
  EXPECT_EQ(a.correct, b.correct);
  for (std::size_t i = 0; i < a.per_class.size(); ++i) EXPECT_EQ(a.per_class[i].correct, b.per_class[i].correct);
}

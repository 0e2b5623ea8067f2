#include <gtest/gtest.h>

#include <cstring>
#include <limits>
#include <random>

#include "bfd/error.hpp"
#include "bfd/protocol.hpp"
#include "oracles.hpp"

using namespace bfd;

namespace {

msg::Result fixed_result(const Frame&) { return msg::Result{3, "07-OuterRace6", 0.5, 2}; }

Message random_message(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> kind(0, 7);
  std::uniform_int_distribution<int> small(1, 10000);
  switch (kind(rng)) {
    case 0:
      return msg::Hello{small(rng), small(rng), small(rng)};
    case 1:
      return msg::Ok{};
    case 2: {
      float v;
      switch (rng() % 4) {
        case 0: v = std::uniform_real_distribution<float>(0.0f, 1.0f)(rng); break;
        case 1: v = (rng() % 2 ? 1e-30f : 1e30f) * (rng() % 2 ? 1.0f : -1.0f); break;
        case 2: v = std::numeric_limits<float>::denorm_min() * static_cast<float>(rng() % 100); break;
        default: {
          // Any finite bit pattern.
          std::uint32_t bits;
          float f;
          do {
            bits = static_cast<std::uint32_t>(rng());
            std::memcpy(&f, &bits, 4);
          } while (!std::isfinite(f));
          v = f;
        }
      }
      return msg::Data{v};
    }
    case 3:
      return msg::Ack{};
    case 4: {
      const auto& l = kFaultLabels[rng() % kNumClasses];
      return msg::Result{l.id, std::string(l.name), quantize_prob(std::uniform_real_distribution<double>(0, 1)(rng)),
                         static_cast<std::int64_t>(rng() % 100000)};
    }
    case 5:
      return msg::End{};
    case 6:
      return msg::Bye{};
    default: {
      const char* codes[] = {"phase", "parse", "dims"};
      std::string text;
      const int n = static_cast<int>(rng() % 40);
      for (int i = 0; i < n; ++i) text.push_back(static_cast<char>(0x20 + rng() % 95));
      return msg::Err{codes[rng() % 3], text};
    }
  }
}

}  // namespace

TEST(ShiftBuffer, FourByFourWorkedExample) {
  // Fill with a..p (oldest a at the end after 16 pushes, so push p first).
  ShiftBuffer b(4, 4);
  for (int i = 15; i >= 0; --i) b.push(static_cast<float>('a' + i));
  for (int i = 0; i < 16; ++i) ASSERT_EQ(b.values()[i], static_cast<float>('a' + i));
  b.push('x');
  const std::string want = "xabcdefghijklmno";
  for (int i = 0; i < 16; ++i) EXPECT_EQ(b.values()[i], static_cast<float>(want[i])) << i;
  EXPECT_EQ(b.at(1, 0), 'd');  // rightmost of row 0 wrapped to row 1
  EXPECT_EQ(b.at(3, 3), 'o');
}

TEST(ShiftBuffer, SinglePushIntoEmpty) {
  const auto b = push(ShiftBuffer(2, 2), 7.0f);
  EXPECT_EQ(std::vector<float>(b.values().begin(), b.values().end()), (std::vector<float>{7, 0, 0, 0}));
  EXPECT_EQ(b.fill_count(), 1u);
  EXPECT_FALSE(b.full());
}

TEST(ShiftBuffer, MatchesBoundedQueue) {
  std::mt19937_64 rng(8);
  for (int n : {2, 4, 20}) {
    const int rows = n, cols = n, cap = n * n;
    for (int trial = 0; trial < 200; ++trial) {
      ShiftBuffer b(rows, cols);
      oracle::BoundedQueue q(static_cast<std::size_t>(cap));
      const int pushes = static_cast<int>(rng() % (3 * cap));
      for (int i = 0; i < pushes; ++i) {
        const float v = static_cast<float>(rng() % 1000);
        b.push(v);
        q.push(v);
      }
      const auto want = q.contents();
      ASSERT_EQ(std::vector<float>(b.values().begin(), b.values().end()), want);
      ASSERT_EQ(b.fill_count(), q.size());
      ASSERT_EQ(b.full(), q.size() == static_cast<std::size_t>(cap));
    }
  }
}

TEST(ShiftBuffer, ToFrameRestoresTimeOrder) {
  ShiftBuffer b(2, 2);
  EXPECT_THROW(to_frame(b), Error);
  for (float v : {1.0f, 2.0f, 3.0f}) b.push(v);
  try {
    to_frame(b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kBufferNotFull);
  }
  b.push(4.0f);
  EXPECT_EQ(to_frame(b).values, (std::vector<float>{1, 2, 3, 4}));
}

TEST(ShiftBuffer, PushedRecordingEqualsDirectFrame) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> s(400 + rng() % 200);
    for (auto& v : s) v = u(rng);
    ShiftBuffer b;
    for (std::size_t i = 0; i < 400; ++i) b.push(static_cast<float>(s[i]));
    ASSERT_EQ(to_frame(b), frame_direct(s, 20, 20, 0));
    // Continuing the stream keeps the frame aligned with the latest window.
    const std::size_t extra = s.size() - 400;
    for (std::size_t i = 400; i < s.size(); ++i) b.push(static_cast<float>(s[i]));
    ASSERT_EQ(to_frame(b), frame_direct(s, 20, 20, extra));
  }
}

TEST(Codec, GrammarExamples) {
  EXPECT_EQ(encode(msg::Result{8, "21-Ball", 0.999856, 18}), "R 8 21-Ball 0.999856 18\n");
  EXPECT_EQ(encode(msg::Hello{20, 20, 10}), "HELLO v1 r=20 c=20 k=10\n");
  EXPECT_EQ(encode(msg::Data{0.5f}), "D 0.5\n");
  EXPECT_EQ(encode(msg::Ok{}), "OK\n");
  EXPECT_EQ(encode(msg::Ack{}), "A\n");
  EXPECT_EQ(encode(msg::End{}), "END\n");
  EXPECT_EQ(encode(msg::Bye{}), "BYE\n");
  EXPECT_EQ(encode(msg::Err{"phase", "D before HELLO"}), "ERR phase D before HELLO\n");
  EXPECT_EQ(decode("D 0.500000"), Message(msg::Data{0.5f}));
  EXPECT_EQ(decode("OK\r\n"), Message(msg::Ok{}));
  EXPECT_EQ(decode("ERR dims"), Message(msg::Err{"dims", ""}));
}

TEST(Codec, MalformedLinesFailToParse) {
  for (const char* line : {"D abc", "", "D", "D 1 2", "HELLO v2 r=20 c=20 k=1", "HELLO v1 r=20 c=20", "HELLO v1 r=0 c=20 k=1",
                           "R 8 21-Ball 1.5 18", "R -1 x 0.5 1", "ok", "A ", " A", "D  0.5", "D nan", "D inf", "ERR",
                           "BYE now", "D 0.5\tx"}) {
    try {
      decode(line);
      FAIL() << "accepted '" << line << "'";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kParseError) << line;
    }
  }
  EXPECT_THROW(decode(std::string(120, 'A')), Error);
}

TEST(Codec, EncodeRejectsUnrepresentable) {
  EXPECT_THROW(encode(msg::Data{std::numeric_limits<float>::infinity()}), Error);
  EXPECT_THROW(encode(msg::Result{1, "two words", 0.5, 1}), Error);
  EXPECT_THROW(encode(msg::Result{1, "x", 1.5, 1}), Error);
  EXPECT_THROW(encode(msg::Err{"", "x"}), Error);
  // Long ERR text is clipped, not rejected.
  EXPECT_LE(encode(msg::Err{"parse", std::string(500, 'z')}).size(), kMaxLineBytes);
}

TEST(Codec, RoundTripOverRandomMessages) {
  std::mt19937_64 rng(42);
  for (int i = 0; i < 10000; ++i) {
    const auto m = random_message(rng);
    const auto line = encode(m);
    ASSERT_LE(line.size(), kMaxLineBytes);
    ASSERT_EQ(line.back(), '\n');
    ASSERT_EQ(line.find('\n'), line.size() - 1);
    for (char c : line.substr(0, line.size() - 1)) ASSERT_TRUE(c >= 0x20 && c < 0x7F);
    ASSERT_EQ(decode(line), m) << line;
  }
}

TEST(Codec, FloatTextIsShortest) {
  EXPECT_EQ(encode(msg::Data{0.1f}), "D 0.1\n");
  EXPECT_EQ(encode(msg::Data{1e-30f}), "D 1e-30\n");
  const auto line = encode(msg::Data{0.123456789f});
  // At most nine significant digits.
  std::size_t digits = 0;
  for (char c : line) digits += c >= '0' && c <= '9';
  EXPECT_LE(digits, 10u);
}

TEST(Session, FourHundredSamplesAtKOne) {
  SessionState st;
  ShiftBuffer buf;
  EXPECT_EQ(session_step(st, msg::Hello{20, 20, 1}, buf, fixed_result), Message(msg::Ok{}));
  int acks = 0, results = 0;
  for (int i = 0; i < 400; ++i) {
    const auto r = session_step(st, msg::Data{0.5f}, buf, fixed_result);
    acks += std::holds_alternative<msg::Ack>(r);
    results += std::holds_alternative<msg::Result>(r);
    if (i < 399) {
      ASSERT_TRUE(std::holds_alternative<msg::Ack>(r)) << i;
    }
  }
  EXPECT_EQ(acks, 399);
  EXPECT_EQ(results, 1);
  // k=1 keeps predicting on every further sample.
  EXPECT_TRUE(std::holds_alternative<msg::Result>(session_step(st, msg::Data{0.5f}, buf, fixed_result)));
  EXPECT_EQ(session_step(st, msg::End{}, buf, fixed_result), Message(msg::Bye{}));
  EXPECT_EQ(st.phase, Phase::kClosed);
}

TEST(Session, KTenCadence) {
  SessionState st;
  ShiftBuffer buf;
  session_step(st, msg::Hello{20, 20, 10}, buf, fixed_result);
  std::vector<int> at;
  for (int i = 1; i <= 1000; ++i) {
    if (std::holds_alternative<msg::Result>(session_step(st, msg::Data{0.1f}, buf, fixed_result))) at.push_back(i);
  }
  ASSERT_EQ(at.size(), 61u);
  EXPECT_EQ(at.front(), 400);
  for (std::size_t i = 1; i < at.size(); ++i) EXPECT_EQ(at[i] - at[i - 1], 10);
}

TEST(Session, OutOfPhaseMessages) {
  SessionState st;
  ShiftBuffer buf;
  const auto before = st;
  const auto r = session_step(st, msg::Data{0.5f}, buf, fixed_result);
  ASSERT_TRUE(std::holds_alternative<msg::Err>(r));
  EXPECT_EQ(std::get<msg::Err>(r).code, "phase");
  EXPECT_EQ(st.phase, before.phase);
  EXPECT_EQ(buf.fill_count(), 0u);

  EXPECT_EQ(std::get<msg::Err>(session_step(st, msg::Ack{}, buf, fixed_result)).code, "phase");
  EXPECT_EQ(std::get<msg::Err>(session_step(st, msg::Hello{16, 16, 1}, buf, fixed_result)).code, "dims");
  session_step(st, msg::Hello{20, 20, 1}, buf, fixed_result);
  EXPECT_EQ(std::get<msg::Err>(session_step(st, msg::Hello{20, 20, 1}, buf, fixed_result)).code, "phase");
  session_step(st, msg::End{}, buf, fixed_result);
  EXPECT_EQ(std::get<msg::Err>(session_step(st, msg::Data{0.5f}, buf, fixed_result)).code, "phase");
}

TEST(Session, EndBeforeHelloCloses) {
  SessionState st;
  ShiftBuffer buf;
  EXPECT_EQ(session_step(st, msg::End{}, buf, fixed_result), Message(msg::Bye{}));
  EXPECT_EQ(st.phase, Phase::kClosed);
}

TEST(Session, ReplyIsQuantized) {
  SessionState st;
  ShiftBuffer buf(2, 2);
  auto cls = [](const Frame&) { return msg::Result{1, "07-Ball", 0.12345678, 4}; };
  session_step(st, msg::Hello{2, 2, 1}, buf, cls, SessionLimits{2, 2});
  Message r;
  for (int i = 0; i < 4; ++i) r = session_step(st, msg::Data{1.0f}, buf, cls, SessionLimits{2, 2});
  EXPECT_EQ(std::get<msg::Result>(r).prob, 0.123457);
}

TEST(Session, FuzzedLinesAlwaysGetOneReply) {
  std::mt19937_64 rng(77);
  DeviceSession s(fixed_result);
  const std::vector<std::string> seeds = {"HELLO v1 r=20 c=20 k=1", "D 0.25", "END", "A", "R 1 x 0.5 1", "OK"};
  for (int i = 0; i < 20000; ++i) {
    std::string line;
    if (rng() % 3 == 0) {
      line = seeds[rng() % seeds.size()];
      if (rng() % 2 && !line.empty()) line[rng() % line.size()] = static_cast<char>(rng());
    } else {
      const int n = static_cast<int>(rng() % 140);
      for (int j = 0; j < n; ++j) line.push_back(static_cast<char>(rng()));
    }
    const auto reply = s.step_line(line);
    ASSERT_FALSE(reply.empty());
    ASSERT_EQ(reply.back(), '\n');
    ASSERT_EQ(reply.find('\n'), reply.size() - 1);
    ASSERT_NO_THROW(decode(reply));
  }
}

TEST(Session, DeterministicReplies) {
  auto run = [] {
    DeviceSession s([](const Frame& f) {
      double sum = 0;
      for (float v : f.values) sum += v;
      return msg::Result{static_cast<int>(sum) % 10, "x", 0.25, 1};
    });
    std::string all = s.step_line("HELLO v1 r=20 c=20 k=3");
    for (int i = 0; i < 500; ++i) all += s.step_line(encode(msg::Data{static_cast<float>(i % 7) / 7.0f}));
    return all + s.step_line("END");
  };
  EXPECT_EQ(run(), run());
}

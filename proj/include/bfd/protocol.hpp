#pragma once

// Host <-> device line protocol and the device-side shift-register buffer.
//
// Wire grammar, one message per '\n'-terminated line (a trailing '\r' is
// tolerated on input):
//
//   HELLO v1 r=<int> c=<int> k=<int>     host -> device
//   OK                                   device -> host
//   D <float>                            host -> device, one sample
//   A                                    device -> host, sample accepted
//   R <int> <label> <prob> <int>         device -> host, class/label/prob/ticks
//   END                                  host -> device
//   BYE                                  device -> host
//   ERR <code> <text>                    either direction
//
// Floats use the shortest decimal form that reads back to the same float32;
// probabilities always carry exactly six decimals.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "bfd/signal.hpp"

namespace bfd {

inline constexpr std::size_t kMaxLineBytes = 120;

// rows x cols register. A new sample enters at [0][0], everything moves one
// place right, the last element of each row wraps to the start of the next
// and the bottom-right element falls out.
class ShiftBuffer {
 public:
  explicit ShiftBuffer(int rows = kFrameRows, int cols = kFrameCols);

  void push(float x);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t capacity() const { return values_.size(); }
  std::size_t fill_count() const { return fill_; }
  bool full() const { return fill_ == values_.size(); }

  float at(int r, int c) const { return values_[static_cast<std::size_t>(r) * cols_ + c]; }
  // Row-major contents, newest sample first.
  std::span<const float> values() const { return values_; }

  void clear();

 private:
  int rows_;
  int cols_;
  std::vector<float> values_;
  std::size_t fill_ = 0;
};

// Value-returning form of ShiftBuffer::push.
ShiftBuffer push(ShiftBuffer buffer, float x);

// Reorders the newest-first register into the oldest-at-[0][0] frame layout
// used for training. Throws BufferNotFull.
Frame to_frame(const ShiftBuffer& buffer);

namespace msg {

struct Hello {
  int rows = kFrameRows;
  int cols = kFrameCols;
  int k = 1;
  friend bool operator==(const Hello&, const Hello&) = default;
};
struct Ok {
  friend bool operator==(const Ok&, const Ok&) = default;
};
struct Data {
  float value = 0.0f;
  friend bool operator==(const Data&, const Data&) = default;
};
struct Ack {
  friend bool operator==(const Ack&, const Ack&) = default;
};
struct Result {
  int class_id = 0;
  std::string label;
  double prob = 0.0;  // quantized to 1e-6 on the wire
  std::int64_t ticks = 0;
  friend bool operator==(const Result&, const Result&) = default;
};
struct End {
  friend bool operator==(const End&, const End&) = default;
};
struct Bye {
  friend bool operator==(const Bye&, const Bye&) = default;
};
struct Err {
  std::string code;
  std::string text;
  friend bool operator==(const Err&, const Err&) = default;
};

}  // namespace msg

using Message = std::variant<msg::Hello, msg::Ok, msg::Data, msg::Ack, msg::Result, msg::End, msg::Bye, msg::Err>;

// Rounds to the six decimals the wire carries.
double quantize_prob(double p);

// Serialized line including the trailing '\n'. Throws InvalidArgument for
// messages that cannot be represented (bad tokens, non-finite values).
// ERR text is clipped so the line stays within kMaxLineBytes.
std::string encode(const Message& m);

// Accepts a line with or without its '\n' / "\r\n". Throws ParseError.
Message decode(std::string_view line);

std::string_view message_name(const Message& m);

enum class Phase { kAwaitingHello, kStreaming, kClosed };

struct SessionState {
  Phase phase = Phase::kAwaitingHello;
  int samples_since_predict = 0;
  int predict_every = 1;
};

using Classifier = std::function<msg::Result(const Frame&)>;

// Frame geometry a device accepts in HELLO.
struct SessionLimits {
  int rows = kFrameRows;
  int cols = kFrameCols;
};

// Advances the device state machine by one message and returns its single
// reply. Out-of-phase messages reply ERR phase and leave the state alone.
Message session_step(SessionState& state, const Message& incoming, ShiftBuffer& buffer,
                     const Classifier& classifier, const SessionLimits& limits = {});

// Owns state and buffer for one connection; also handles undecodable lines.
class DeviceSession {
 public:
  DeviceSession(Classifier classifier, SessionLimits limits = {});

  Message step(const Message& incoming);
  // Decodes the line (ParseError -> ERR parse) and returns the encoded reply.
  std::string step_line(std::string_view line);

  const SessionState& state() const { return state_; }
  const ShiftBuffer& buffer() const { return buffer_; }

 private:
  Classifier classifier_;
  SessionLimits limits_;
  SessionState state_;
  ShiftBuffer buffer_;
};

}  // namespace bfd

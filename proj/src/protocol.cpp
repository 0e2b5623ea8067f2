#include "bfd/protocol.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>

#include "bfd/error.hpp"

namespace bfd {

ShiftBuffer::ShiftBuffer(int rows, int cols) : rows_(rows), cols_(cols) {
  if (rows < 1 || cols < 1) raise(ErrorCode::kInvalidArgument, "shift buffer dims must be positive");
  values_.assign(static_cast<std::size_t>(rows) * cols, 0.0f);
}

void ShiftBuffer::push(float x) {
  // Row wrap makes the grid one contiguous register in row-major order.
  std::copy_backward(values_.begin(), values_.end() - 1, values_.end());
  values_.front() = x;
  if (fill_ < values_.size()) ++fill_;
}

void ShiftBuffer::clear() {
  std::fill(values_.begin(), values_.end(), 0.0f);
  fill_ = 0;
}

ShiftBuffer push(ShiftBuffer buffer, float x) {
  buffer.push(x);
  return buffer;
}

Frame to_frame(const ShiftBuffer& buffer) {
  if (!buffer.full()) {
    raise(ErrorCode::kBufferNotFull, "buffer holds " + std::to_string(buffer.fill_count()) + " of " +
                                         std::to_string(buffer.capacity()) + " samples");
  }
  Frame f;
  f.rows = buffer.rows();
  f.cols = buffer.cols();
  const auto v = buffer.values();
  f.values.assign(v.rbegin(), v.rend());
  return f;
}

double quantize_prob(double p) { return std::round(p * 1e6) / 1e6; }

namespace {

[[noreturn]] void bad_message(const std::string& what) { raise(ErrorCode::kInvalidArgument, what); }
[[noreturn]] void parse_fail(const std::string& what) { raise(ErrorCode::kParseError, what); }

bool printable(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char ch) { return ch >= 0x20 && ch < 0x7F; });
}

bool is_token(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char ch) { return ch > 0x20 && ch < 0x7F; });
}

std::string format_float(float v) {
  if (!std::isfinite(v)) bad_message("DATA value must be finite");
  char buf[32];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

std::string format_prob(double p) {
  if (!std::isfinite(p) || p < 0.0 || p > 1.0) bad_message("probability must be within [0, 1]");
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", p);
  return buf;
}

template <typename Int>
Int parse_int(std::string_view s, const char* what) {
  Int v{};
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || p != s.data() + s.size()) {
    parse_fail(std::string("bad ") + what + " '" + std::string(s) + "'");
  }
  return v;
}

template <typename F>
F parse_real(std::string_view s, const char* what) {
  F v{};
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || p != s.data() + s.size() || !std::isfinite(v)) {
    parse_fail(std::string("bad ") + what + " '" + std::string(s) + "'");
  }
  return v;
}

std::vector<std::string_view> split(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const auto sp = s.find(' ', pos);
    out.push_back(s.substr(pos, sp == std::string_view::npos ? std::string_view::npos : sp - pos));
    if (sp == std::string_view::npos) break;
    pos = sp + 1;
  }
  return out;
}

void expect_count(const std::vector<std::string_view>& t, std::size_t n, const char* kind) {
  if (t.size() != n) parse_fail(std::string(kind) + " expects " + std::to_string(n - 1) + " field(s)");
}

int keyed(std::string_view token, std::string_view key) {
  if (token.substr(0, key.size()) != key) parse_fail("expected '" + std::string(key) + "' in HELLO");
  return parse_int<int>(token.substr(key.size()), "HELLO field");
}

struct Encoder {
  std::string operator()(const msg::Hello& h) const {
    if (h.rows < 1 || h.cols < 1 || h.k < 1) bad_message("HELLO fields must be positive");
    return "HELLO v1 r=" + std::to_string(h.rows) + " c=" + std::to_string(h.cols) + " k=" + std::to_string(h.k);
  }
  std::string operator()(const msg::Ok&) const { return "OK"; }
  std::string operator()(const msg::Data& d) const { return "D " + format_float(d.value); }
  std::string operator()(const msg::Ack&) const { return "A"; }
  std::string operator()(const msg::Result& r) const {
    if (r.class_id < 0 || r.ticks < 0) bad_message("RESULT class and ticks must be non-negative");
    if (!is_token(r.label)) bad_message("RESULT label must be a single printable token");
    return "R " + std::to_string(r.class_id) + " " + r.label + " " + format_prob(r.prob) + " " +
           std::to_string(r.ticks);
  }
  std::string operator()(const msg::End&) const { return "END"; }
  std::string operator()(const msg::Bye&) const { return "BYE"; }
  std::string operator()(const msg::Err& e) const {
    if (!is_token(e.code)) bad_message("ERR code must be a single printable token");
    std::string line = "ERR " + e.code;
    if (!e.text.empty()) {
      std::string text = e.text;
      for (auto& ch : text) {
        if (ch < 0x20 || ch >= 0x7F) ch = '?';
      }
      line += " " + text;
    }
    if (line.size() > kMaxLineBytes - 1) line.resize(kMaxLineBytes - 1);
    return line;
  }
};

}  // namespace

std::string encode(const Message& m) {
  std::string line = std::visit(Encoder{}, m);
  if (line.size() > kMaxLineBytes - 1) bad_message("encoded line exceeds " + std::to_string(kMaxLineBytes) + " bytes");
  line.push_back('\n');
  return line;
}

Message decode(std::string_view line) {
  if (!line.empty() && line.back() == '\n') line.remove_suffix(1);
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  if (line.size() + 1 > kMaxLineBytes) parse_fail("line longer than " + std::to_string(kMaxLineBytes) + " bytes");
  if (line.empty()) parse_fail("empty line");
  if (!printable(line)) parse_fail("non-printable byte in line");

  const auto t = split(line);
  const std::string_view kind = t[0];
  if (kind == "ERR") {
    if (t.size() < 2 || !is_token(t[1])) parse_fail("ERR expects a code");
    const std::size_t text_at = 4 + t[1].size() + 1;
    return msg::Err{std::string(t[1]), text_at <= line.size() ? std::string(line.substr(text_at)) : std::string()};
  }
  for (auto tok : t) {
    if (tok.empty()) parse_fail("fields must be separated by single spaces");
  }
  if (kind == "HELLO") {
    expect_count(t, 5, "HELLO");
    if (t[1] != "v1") parse_fail("unsupported protocol version '" + std::string(t[1]) + "'");
    msg::Hello h{keyed(t[2], "r="), keyed(t[3], "c="), keyed(t[4], "k=")};
    if (h.rows < 1 || h.cols < 1 || h.k < 1) parse_fail("HELLO fields must be positive");
    return h;
  }
  if (kind == "OK") {
    expect_count(t, 1, "OK");
    return msg::Ok{};
  }
  if (kind == "D") {
    expect_count(t, 2, "D");
    return msg::Data{parse_real<float>(t[1], "sample")};
  }
  if (kind == "A") {
    expect_count(t, 1, "A");
    return msg::Ack{};
  }
  if (kind == "R") {
    expect_count(t, 5, "R");
    msg::Result r;
    r.class_id = parse_int<int>(t[1], "class id");
    r.label = std::string(t[2]);
    r.prob = parse_real<double>(t[3], "probability");
    r.ticks = parse_int<std::int64_t>(t[4], "ticks");
    if (r.class_id < 0 || r.ticks < 0 || r.prob < 0.0 || r.prob > 1.0) parse_fail("RESULT field out of range");
    return r;
  }
  if (kind == "END") {
    expect_count(t, 1, "END");
    return msg::End{};
  }
  if (kind == "BYE") {
    expect_count(t, 1, "BYE");
    return msg::Bye{};
  }
  parse_fail("unknown message '" + std::string(kind.substr(0, 16)) + "'");
}

std::string_view message_name(const Message& m) {
  constexpr std::string_view kNames[] = {"HELLO", "OK", "D", "A", "R", "END", "BYE", "ERR"};
  return kNames[m.index()];
}

namespace {

msg::Err phase_error(const Message& m, std::string_view why) {
  return msg::Err{"phase", std::string(message_name(m)) + " " + std::string(why)};
}

}  // namespace

Message session_step(SessionState& state, const Message& incoming, ShiftBuffer& buffer,
                     const Classifier& classifier, const SessionLimits& limits) {
  if (state.phase == Phase::kClosed) return phase_error(incoming, "after END");

  if (const auto* h = std::get_if<msg::Hello>(&incoming)) {
    if (state.phase != Phase::kAwaitingHello) return phase_error(incoming, "while streaming");
    if (h->rows != limits.rows || h->cols != limits.cols) {
      return msg::Err{"dims", "device expects r=" + std::to_string(limits.rows) + " c=" + std::to_string(limits.cols)};
    }
    if (h->k < 1) return msg::Err{"parse", "k must be positive"};
    buffer = ShiftBuffer(h->rows, h->cols);
    state.phase = Phase::kStreaming;
    state.predict_every = h->k;
    state.samples_since_predict = 0;
    return msg::Ok{};
  }
  if (const auto* d = std::get_if<msg::Data>(&incoming)) {
    if (state.phase != Phase::kStreaming) return phase_error(incoming, "before HELLO");
    buffer.push(d->value);
    state.samples_since_predict = std::min(state.samples_since_predict + 1, state.predict_every);
    if (buffer.full() && state.samples_since_predict == state.predict_every) {
      state.samples_since_predict = 0;
      msg::Result r = classifier(to_frame(buffer));
      r.prob = quantize_prob(r.prob);
      return r;
    }
    return msg::Ack{};
  }
  if (std::holds_alternative<msg::End>(incoming)) {
    state.phase = Phase::kClosed;
    return msg::Bye{};
  }
  if (const auto* e = std::get_if<msg::Err>(&incoming)) {
    return msg::Err{"phase", "unexpected ERR " + e->code + " from host"};
  }
  return phase_error(incoming, "is a device reply");
}

DeviceSession::DeviceSession(Classifier classifier, SessionLimits limits)
    : classifier_(std::move(classifier)), limits_(limits), buffer_(limits.rows, limits.cols) {}

Message DeviceSession::step(const Message& incoming) {
  return session_step(state_, incoming, buffer_, classifier_, limits_);
}

std::string DeviceSession::step_line(std::string_view line) {
  Message reply;
  try {
    reply = step(decode(line));
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kParseError) throw;
    reply = msg::Err{"parse", e.what()};
  }
  return encode(reply);
}

}  // namespace bfd

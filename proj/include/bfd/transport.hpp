#pragma once

// Reliable ordered line transports: an in-process duplex pipe and TCP.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

namespace bfd {

class LineChannel {
 public:
  virtual ~LineChannel() = default;

  // Next line without its '\n'; nullopt once the peer has closed. Lines
  // longer than kMaxReadBytes are cut there and returned as-is.
  virtual std::optional<std::string> read_line() = 0;
  // Sends the line, appending '\n' if missing. Throws Io when the peer is gone.
  virtual void write_line(std::string_view line) = 0;
  virtual void close() = 0;

  static constexpr std::size_t kMaxReadBytes = 4096;
};

using ChannelPair = std::pair<std::unique_ptr<LineChannel>, std::unique_ptr<LineChannel>>;

// Two connected endpoints; closing either one ends the other's reads.
ChannelPair make_pipe();

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
};

// "host:port"; throws InvalidArgument.
Endpoint parse_endpoint(std::string_view text);
std::string to_string(const Endpoint& ep);

class TcpListener {
 public:
  // Port 0 picks a free port. Throws Io.
  explicit TcpListener(const Endpoint& ep);
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  std::uint16_t port() const { return port_; }
  // Blocks for the next connection. Throws Io.
  std::unique_ptr<LineChannel> accept();
  void close();

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

// Throws Io when the endpoint cannot be reached.
std::unique_ptr<LineChannel> tcp_connect(const Endpoint& ep);

}  // namespace bfd

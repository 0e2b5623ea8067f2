#include "bfd/transport.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <mutex>

#include "bfd/error.hpp"

namespace bfd {

namespace {

struct Queue {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<std::string> lines;
  bool closed = false;
};

class PipeEnd final : public LineChannel {
 public:
  PipeEnd(std::shared_ptr<Queue> in, std::shared_ptr<Queue> out) : in_(std::move(in)), out_(std::move(out)) {}
  ~PipeEnd() override { close(); }

  std::optional<std::string> read_line() override {
    std::unique_lock lock(in_->mu);
    in_->cv.wait(lock, [&] { return !in_->lines.empty() || in_->closed; });
    if (in_->lines.empty()) return std::nullopt;
    std::string line = std::move(in_->lines.front());
    in_->lines.pop_front();
    return line;
  }

  void write_line(std::string_view line) override {
    if (!line.empty() && line.back() == '\n') line.remove_suffix(1);
    {
      std::lock_guard lock(out_->mu);
      if (out_->closed) raise(ErrorCode::kIo, "pipe peer closed");
      out_->lines.emplace_back(line.substr(0, kMaxReadBytes));
    }
    out_->cv.notify_one();
  }

  void close() override {
    for (auto* q : {in_.get(), out_.get()}) {
      {
        std::lock_guard lock(q->mu);
        q->closed = true;
      }
      q->cv.notify_all();
    }
  }

 private:
  std::shared_ptr<Queue> in_;
  std::shared_ptr<Queue> out_;
};

[[noreturn]] void io_fail(const std::string& what) { raise(ErrorCode::kIo, what + ": " + std::strerror(errno)); }

class SocketChannel final : public LineChannel {
 public:
  explicit SocketChannel(int fd) : fd_(fd) {}
  ~SocketChannel() override { close(); }

  std::optional<std::string> read_line() override {
    while (true) {
      const auto nl = pending_.find('\n');
      if (nl != std::string::npos) {
        std::string line = pending_.substr(0, nl);
        pending_.erase(0, nl + 1);
        return line;
      }
      if (pending_.size() >= kMaxReadBytes) {
        std::string line = pending_.substr(0, kMaxReadBytes);
        pending_.erase(0, kMaxReadBytes);
        return line;
      }
      if (fd_ < 0) break;
      char buf[1024];
      const ssize_t n = ::recv(fd_, buf, sizeof(buf), 0);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) break;
      pending_.append(buf, static_cast<std::size_t>(n));
    }
    if (pending_.empty()) return std::nullopt;
    return std::exchange(pending_, {});
  }

  void write_line(std::string_view line) override {
    if (fd_ < 0) raise(ErrorCode::kIo, "socket closed");
    std::string out(line);
    if (out.empty() || out.back() != '\n') out.push_back('\n');
    std::size_t sent = 0;
    while (sent < out.size()) {
      const ssize_t n = ::send(fd_, out.data() + sent, out.size() - sent, MSG_NOSIGNAL);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) io_fail("send");
      sent += static_cast<std::size_t>(n);
    }
  }

  void close() override {
    if (fd_ >= 0) {
      ::shutdown(fd_, SHUT_RDWR);
      ::close(fd_);
      fd_ = -1;
    }
  }

 private:
  int fd_;
  std::string pending_;
};

addrinfo* resolve(const Endpoint& ep, bool passive) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  if (passive) hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  const std::string port = std::to_string(ep.port);
  const int rc = ::getaddrinfo(ep.host.empty() ? nullptr : ep.host.c_str(), port.c_str(), &hints, &res);
  if (rc != 0) raise(ErrorCode::kIo, "cannot resolve " + to_string(ep) + ": " + ::gai_strerror(rc));
  return res;
}

}  // namespace

ChannelPair make_pipe() {
  auto a = std::make_shared<Queue>();
  auto b = std::make_shared<Queue>();
  return {std::make_unique<PipeEnd>(a, b), std::make_unique<PipeEnd>(b, a)};
}

Endpoint parse_endpoint(std::string_view text) {
  const auto colon = text.rfind(':');
  if (colon == std::string_view::npos) raise(ErrorCode::kInvalidArgument, "endpoint must be host:port");
  const auto port_text = text.substr(colon + 1);
  unsigned port = 0;
  const auto [p, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
  if (port_text.empty() || ec != std::errc{} || p != port_text.data() + port_text.size() || port > 65535) {
    raise(ErrorCode::kInvalidArgument, "bad port in endpoint '" + std::string(text) + "'");
  }
  Endpoint ep;
  ep.host = std::string(text.substr(0, colon));
  if (ep.host.empty()) ep.host = "127.0.0.1";
  ep.port = static_cast<std::uint16_t>(port);
  return ep;
}

std::string to_string(const Endpoint& ep) { return ep.host + ":" + std::to_string(ep.port); }

TcpListener::TcpListener(const Endpoint& ep) {
  addrinfo* res = resolve(ep, true);
  for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
    const int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    const int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    if (::bind(fd, ai->ai_addr, ai->ai_addrlen) == 0 && ::listen(fd, 4) == 0) {
      fd_ = fd;
      break;
    }
    ::close(fd);
  }
  ::freeaddrinfo(res);
  if (fd_ < 0) io_fail("cannot listen on " + to_string(ep));

  sockaddr_storage addr{};
  socklen_t len = sizeof(addr);
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = addr.ss_family == AF_INET6 ? ntohs(reinterpret_cast<sockaddr_in6*>(&addr)->sin6_port)
                                     : ntohs(reinterpret_cast<sockaddr_in*>(&addr)->sin_port);
}

TcpListener::~TcpListener() { close(); }

std::unique_ptr<LineChannel> TcpListener::accept() {
  while (true) {
    if (fd_ < 0) raise(ErrorCode::kIo, "listener closed");
    const int fd = ::accept(fd_, nullptr, nullptr);
    if (fd >= 0) return std::make_unique<SocketChannel>(fd);
    if (errno != EINTR) io_fail("accept");
  }
}

void TcpListener::close() {
  if (fd_ >= 0) {
    ::shutdown(fd_, SHUT_RDWR);
    ::close(fd_);
    fd_ = -1;
  }
}

std::unique_ptr<LineChannel> tcp_connect(const Endpoint& ep) {
  addrinfo* res = resolve(ep, false);
  int fd = -1;
  int last_errno = 0;
  for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    last_errno = errno;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) {
    errno = last_errno;
    io_fail("cannot connect to " + to_string(ep));
  }
  return std::make_unique<SocketChannel>(fd);
}

}  // namespace bfd

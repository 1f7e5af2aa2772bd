#include "udp_socket.h"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>

#include "vidlink/errors.h"

namespace vidlink {
namespace {

std::string ErrnoText() {
  return std::strerror(errno);
}

addrinfo* Resolve(const Endpoint& ep, bool passive) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_DGRAM;
  if (passive)
    hints.ai_flags = AI_PASSIVE;
  addrinfo* result = nullptr;
  const std::string port = std::to_string(ep.port);
  const int rc = getaddrinfo(ep.host.empty() ? nullptr : ep.host.c_str(),
                             port.c_str(), &hints, &result);
  if (rc != 0)
    throw IoError("cannot resolve " + ep.ToString() + ": " + gai_strerror(rc));
  return result;
}

}  // namespace

Endpoint Endpoint::Parse(std::string_view text, uint16_t default_port) {
  Endpoint ep;
  ep.port = default_port;
  std::string_view host = text;
  // Bracketed IPv6 literal, or a single colon separating host and port.
  if (!text.empty() && text.front() == '[') {
    const auto close = text.find(']');
    if (close == std::string_view::npos)
      throw ConfigError("unterminated '[' in address " + std::string(text));
    host = text.substr(1, close - 1);
    text.remove_prefix(close + 1);
    if (!text.empty() && text.front() == ':')
      text.remove_prefix(1);
    else
      text = {};
  } else if (const auto colon = text.rfind(':');
             colon != std::string_view::npos &&
             text.find(':') == colon) {
    host = text.substr(0, colon);
    text.remove_prefix(colon + 1);
  } else {
    text = {};
  }
  if (!text.empty()) {
    unsigned long port = 0;
    for (char c : text) {
      if (c < '0' || c > '9')
        throw ConfigError("bad port in address: " + std::string(text));
      port = port * 10 + static_cast<unsigned long>(c - '0');
      if (port > 65535)
        throw ConfigError("port out of range: " + std::string(text));
    }
    ep.port = static_cast<uint16_t>(port);
  }
  ep.host = host.empty() ? "127.0.0.1" : std::string(host);
  return ep;
}

std::string Endpoint::ToString() const {
  if (host.find(':') != std::string::npos)
    return "[" + host + "]:" + std::to_string(port);
  return host + ":" + std::to_string(port);
}

std::string SocketAddress::ToString() const {
  char host[NI_MAXHOST] = {0};
  char serv[NI_MAXSERV] = {0};
  if (getnameinfo(reinterpret_cast<const sockaddr*>(&storage), length, host,
                  sizeof(host), serv, sizeof(serv),
                  NI_NUMERICHOST | NI_NUMERICSERV) != 0)
    return "?";
  return std::string(host) + ":" + serv;
}

UdpSocket UdpSocket::Bind(const Endpoint& local) {
  addrinfo* info = Resolve(local, true);
  const int fd = socket(info->ai_family, info->ai_socktype, info->ai_protocol);
  if (fd < 0) {
    freeaddrinfo(info);
    throw IoError("socket for " + local.ToString() + ": " + ErrnoText());
  }
  const int one = 1;
  setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  if (bind(fd, info->ai_addr, info->ai_addrlen) != 0) {
    const std::string why = ErrnoText();
    freeaddrinfo(info);
    close(fd);
    throw IoError("cannot bind " + local.ToString() + ": " + why);
  }
  freeaddrinfo(info);
  const int buf = 8 << 20;
  setsockopt(fd, SOL_SOCKET, SO_RCVBUF, &buf, sizeof(buf));
  setsockopt(fd, SOL_SOCKET, SO_SNDBUF, &buf, sizeof(buf));
  return UdpSocket(fd, local.ToString());
}

UdpSocket UdpSocket::ForPeer(const Endpoint& remote, SocketAddress* resolved) {
  addrinfo* info = Resolve(remote, false);
  const int fd = socket(info->ai_family, info->ai_socktype, info->ai_protocol);
  if (fd < 0) {
    freeaddrinfo(info);
    throw IoError("socket for peer " + remote.ToString() + ": " + ErrnoText());
  }
  std::memcpy(&resolved->storage, info->ai_addr, info->ai_addrlen);
  resolved->length = static_cast<socklen_t>(info->ai_addrlen);
  freeaddrinfo(info);
  const int buf = 8 << 20;
  setsockopt(fd, SOL_SOCKET, SO_RCVBUF, &buf, sizeof(buf));
  setsockopt(fd, SOL_SOCKET, SO_SNDBUF, &buf, sizeof(buf));
  return UdpSocket(fd, "peer " + remote.ToString());
}

UdpSocket::UdpSocket(UdpSocket&& other) noexcept
    : fd_(other.fd_), label_(std::move(other.label_)) {
  other.fd_ = -1;
}

UdpSocket& UdpSocket::operator=(UdpSocket&& other) noexcept {
  if (this != &other) {
    if (fd_ >= 0)
      close(fd_);
    fd_ = other.fd_;
    label_ = std::move(other.label_);
    other.fd_ = -1;
  }
  return *this;
}

UdpSocket::~UdpSocket() {
  if (fd_ >= 0)
    close(fd_);
}

void UdpSocket::SendTo(std::span<const uint8_t> data, const SocketAddress& to) {
  while (true) {
    const ssize_t n =
        sendto(fd_, data.data(), data.size(), 0,
               reinterpret_cast<const sockaddr*>(&to.storage), to.length);
    if (n >= 0)
      return;
    if (errno == EINTR)
      continue;
    // Refusals from an absent peer are reported through the receive timeout.
    if (errno == ECONNREFUSED)
      return;
    throw IoError("send to " + to.ToString() + " (" + label_ +
                  "): " + ErrnoText());
  }
}

std::optional<size_t> UdpSocket::ReceiveFrom(std::span<uint8_t> buffer,
                                             double timeout_s,
                                             SocketAddress* from) {
  pollfd pfd{fd_, POLLIN, 0};
  const int ms = static_cast<int>(std::ceil(std::max(0.0, timeout_s) * 1e3));
  const int ready = poll(&pfd, 1, ms);
  if (ready < 0) {
    if (errno == EINTR)
      return std::nullopt;
    throw IoError("poll on " + label_ + ": " + ErrnoText());
  }
  if (ready == 0)
    return std::nullopt;
  SocketAddress addr;
  addr.length = sizeof(addr.storage);
  const ssize_t n =
      recvfrom(fd_, buffer.data(), buffer.size(), 0,
               reinterpret_cast<sockaddr*>(&addr.storage), &addr.length);
  if (n < 0) {
    if (errno == EINTR || errno == ECONNREFUSED || errno == EAGAIN)
      return std::nullopt;
    throw IoError("receive on " + label_ + ": " + ErrnoText());
  }
  if (from)
    *from = addr;
  return static_cast<size_t>(n);
}

uint16_t UdpSocket::LocalPort() const {
  sockaddr_storage ss{};
  socklen_t len = sizeof(ss);
  if (getsockname(fd_, reinterpret_cast<sockaddr*>(&ss), &len) != 0)
    throw IoError("getsockname on " + label_ + ": " + ErrnoText());
  if (ss.ss_family == AF_INET6)
    return ntohs(reinterpret_cast<sockaddr_in6*>(&ss)->sin6_port);
  return ntohs(reinterpret_cast<sockaddr_in*>(&ss)->sin_port);
}

}  // namespace vidlink

#ifndef VIDLINK_SRC_UDP_SOCKET_H_
#define VIDLINK_SRC_UDP_SOCKET_H_

#include <sys/socket.h>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include "vidlink/live.h"

namespace vidlink {

struct SocketAddress {
  sockaddr_storage storage{};
  socklen_t length = 0;

  std::string ToString() const;
};

// Thin RAII wrapper over a POSIX datagram socket. Errors surface as IoError
// with the endpoint in the message.
class UdpSocket {
 public:
  // Socket bound to `local`. Port 0 picks an ephemeral port.
  static UdpSocket Bind(const Endpoint& local);
  // Unbound socket of the right family for sending to `remote`.
  static UdpSocket ForPeer(const Endpoint& remote, SocketAddress* resolved);

  UdpSocket(UdpSocket&& other) noexcept;
  UdpSocket& operator=(UdpSocket&& other) noexcept;
  UdpSocket(const UdpSocket&) = delete;
  UdpSocket& operator=(const UdpSocket&) = delete;
  ~UdpSocket();

  void SendTo(std::span<const uint8_t> data, const SocketAddress& to);
  // Waits up to timeout_s; empty on timeout.
  std::optional<size_t> ReceiveFrom(std::span<uint8_t> buffer,
                                    double timeout_s, SocketAddress* from);
  uint16_t LocalPort() const;

 private:
  UdpSocket(int fd, std::string label) : fd_(fd), label_(std::move(label)) {}

  int fd_ = -1;
  std::string label_;
};

}  // namespace vidlink

#endif  // VIDLINK_SRC_UDP_SOCKET_H_

#ifndef VIDLINK_LIVE_H_
#define VIDLINK_LIVE_H_

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include "vidlink/scenario.h"
#include "vidlink/simulation.h"

namespace vidlink {

// Blocking FIFO with a fixed capacity. Push blocks while full; Pop blocks
// while empty. After Close, pushes fail and pops drain what is left.
template <typename T>
class BoundedQueue {
 public:
  explicit BoundedQueue(size_t capacity) : capacity_(capacity ? capacity : 1) {}

  bool Push(T value) {
    std::unique_lock lock(mu_);
    not_full_.wait(lock, [&] { return closed_ || items_.size() < capacity_; });
    if (closed_)
      return false;
    items_.push_back(std::move(value));
    not_empty_.notify_one();
    return true;
  }

  // Never blocks: when full, the oldest item is discarded and returned.
  std::optional<T> PushReplacingOldest(T value) {
    std::lock_guard lock(mu_);
    std::optional<T> evicted;
    if (closed_)
      return evicted;
    if (items_.size() >= capacity_) {
      evicted = std::move(items_.front());
      items_.pop_front();
    }
    items_.push_back(std::move(value));
    not_empty_.notify_one();
    return evicted;
  }

  std::optional<T> Pop() {
    std::unique_lock lock(mu_);
    not_empty_.wait(lock, [&] { return closed_ || !items_.empty(); });
    return TakeLocked();
  }

  template <typename Clock, typename Duration>
  std::optional<T> PopUntil(std::chrono::time_point<Clock, Duration> deadline) {
    std::unique_lock lock(mu_);
    not_empty_.wait_until(lock, deadline,
                          [&] { return closed_ || !items_.empty(); });
    return TakeLocked();
  }

  std::optional<T> TryPop() {
    std::lock_guard lock(mu_);
    return TakeLocked();
  }

  void Close() {
    std::lock_guard lock(mu_);
    closed_ = true;
    not_empty_.notify_all();
    not_full_.notify_all();
  }

  bool closed() const {
    std::lock_guard lock(mu_);
    return closed_ && items_.empty();
  }

 private:
  std::optional<T> TakeLocked() {
    if (items_.empty())
      return std::nullopt;
    T value = std::move(items_.front());
    items_.pop_front();
    not_full_.notify_one();
    return value;
  }

  const size_t capacity_;
  mutable std::mutex mu_;
  std::condition_variable not_empty_;
  std::condition_variable not_full_;
  std::deque<T> items_;
  bool closed_ = false;
};

struct Endpoint {
  std::string host = "127.0.0.1";
  uint16_t port = 0;

  // "host:port" or "host" (uses default_port).
  static Endpoint Parse(std::string_view text, uint16_t default_port);
  std::string ToString() const;
};

struct LiveServerStats {
  uint64_t packets = 0;
  uint64_t frames = 0;
  uint64_t feedback_sent = 0;
  uint64_t results_sent = 0;
  uint64_t stale_dropped = 0;
};

// Streams the scenario to `peer` in real time and returns client-side
// records. One-way times in the records are RTT / 2 estimates and are flagged
// as such. Throws IoError naming the peer when nothing comes back within
// scenario.live.unreachable_timeout seconds, or on socket failure.
RunOutput RunLiveClient(const Scenario& scenario, const Endpoint& peer);

// Serves one client session on `bind`. Returns once the client has been
// silent for `idle_timeout` seconds after its first packet, or when `stop` is
// set. Throws IoError on socket failure.
LiveServerStats RunLiveServer(const Scenario& scenario, const Endpoint& bind,
                              const std::atomic<bool>* stop = nullptr,
                              double idle_timeout = 2.0);

}  // namespace vidlink

#endif  // VIDLINK_LIVE_H_

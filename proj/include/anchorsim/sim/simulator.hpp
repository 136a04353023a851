#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <queue>
#include <vector>

namespace anchorsim::sim {

/// Virtual time since simulation start, millisecond resolution.
using Duration = std::chrono::milliseconds;
using VirtualTime = std::chrono::milliseconds;

using namespace std::chrono_literals;

inline double to_seconds(Duration d) { return std::chrono::duration<double>(d).count(); }

/// Ordering of handlers that fire at the same virtual instant. Blocks are
/// produced before anyone observes them; scheduler ticks come last so a
/// round that finishes at t releases its lock before the tick at t.
enum class Phase : int {
  Blocks = 0,
  Protocol = 1,
  Load = 2,
  Ticks = 3,
  Observers = 4,
};

/// Deterministic discrete-event kernel. Events at equal time run in
/// (phase, insertion order).
class Simulator {
 public:
  using Handler = std::function<void()>;

  VirtualTime now() const { return now_; }

  void schedule_at(VirtualTime at, Phase phase, Handler fn);
  void schedule_in(Duration delay, Phase phase, Handler fn) { schedule_at(now_ + delay, phase, std::move(fn)); }
  /// Fires at `first`, `first + period`, ... until the simulation ends.
  void schedule_every(VirtualTime first, Duration period, Phase phase, Handler fn);

  /// Runs every event with time <= `until`, then sets now() = until.
  void run_until(VirtualTime until);
  /// Processes events while `keep_going()` holds and events remain at or
  /// before `limit`. Returns true if it stopped because the predicate cleared.
  bool run_while(const std::function<bool()>& keep_going, VirtualTime limit);

  std::size_t pending_events() const { return queue_.size(); }

 private:
  struct Event {
    VirtualTime at;
    int phase;
    std::uint64_t seq;
    Handler fn;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      if (a.at != b.at) return a.at > b.at;
      if (a.phase != b.phase) return a.phase > b.phase;
      return a.seq > b.seq;
    }
  };

  bool step(VirtualTime limit);

  VirtualTime now_{0};
  std::uint64_t next_seq_ = 0;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
};

}  // namespace anchorsim::sim

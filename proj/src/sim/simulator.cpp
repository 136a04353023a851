#include "anchorsim/sim/simulator.hpp"

#include <memory>
#include <stdexcept>

namespace anchorsim::sim {

void Simulator::schedule_at(VirtualTime at, Phase phase, Handler fn) {
  if (at < now_) throw std::logic_error("cannot schedule an event in the past");
  queue_.push(Event{at, static_cast<int>(phase), next_seq_++, std::move(fn)});
}

void Simulator::schedule_every(VirtualTime first, Duration period, Phase phase, Handler fn) {
  if (period <= Duration::zero()) throw std::invalid_argument("period must be positive");
  auto shared = std::make_shared<Handler>(std::move(fn));
  // Each firing schedules the next one, so the queue holds one entry per series.
  auto tick = std::make_shared<std::function<void(VirtualTime)>>();
  *tick = [this, shared, period, phase, weak = std::weak_ptr(tick)](VirtualTime at) {
    (*shared)();
    if (auto self = weak.lock()) {
      schedule_at(at + period, phase, [self, next = at + period] { (*self)(next); });
    }
  };
  schedule_at(first, phase, [tick, first] { (*tick)(first); });
}

bool Simulator::step(VirtualTime limit) {
  if (queue_.empty() || queue_.top().at > limit) return false;
  Event ev = queue_.top();
  queue_.pop();
  now_ = ev.at;
  ev.fn();
  return true;
}

void Simulator::run_until(VirtualTime until) {
  while (step(until)) {
  }
  if (until > now_) now_ = until;
}

bool Simulator::run_while(const std::function<bool()>& keep_going, VirtualTime limit) {
  while (keep_going()) {
    if (!step(limit)) {
      if (limit > now_) now_ = limit;
      return !keep_going();
    }
  }
  return true;
}

}  // namespace anchorsim::sim

#include "covnet/augmentation.hpp"

#include <random>

namespace covnet {

std::string TruncationStrategy::label() const {
  std::string end;
  if (!end_event)
    end = std::to_string(end_frame);
  else if (*end_event == EndEvent::Snap)
    end = "snap";
  else if (*end_event == EndEvent::PassForward)
    end = "pass_forward";
  else
    end = "pass_arrival";
  return "(" + std::to_string(start) + "," + end + ")";
}

EventOffsets EventOffsets::of(const Play& play) {
  return {play.relative_frame(EndEvent::PassForward), play.relative_frame(EndEvent::PassArrival)};
}

Index EventOffsets::resolve(EndEvent e) const {
  switch (e) {
    case EndEvent::Snap: return 0;
    case EndEvent::PassForward: return pass_forward;
    case EndEvent::PassArrival: return pass_arrival;
  }
  return 0;
}

const std::vector<TruncationStrategy>& fixed_strategies() {
  static const std::vector<TruncationStrategy> kFixed = {
      {-30, EndEvent::Snap, 0},        {-30, EndEvent::PassForward, 0}, {-30, EndEvent::PassArrival, 0},
      {-20, EndEvent::Snap, 0},        {-20, EndEvent::PassForward, 0}, {-20, EndEvent::PassArrival, 0},
      {-10, EndEvent::Snap, 0},        {-10, EndEvent::PassForward, 0}, {-10, EndEvent::PassArrival, 0},
      {0, EndEvent::PassForward, 0},   {0, EndEvent::PassArrival, 0},
  };
  return kFixed;
}

TruncationStrategy sample_truncation(Rng& rng, Index pass_arrival) {
  if (pass_arrival <= kEarliestStartOffset) throw ConfigError("pass arrival must come after the earliest start");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (u(rng) < kFixedStrategyShare) {
    const auto& fixed = fixed_strategies();
    std::uniform_int_distribution<std::size_t> pick(0, fixed.size() - 1);
    return fixed[pick(rng)];
  }
  // Uniform over ordered pairs start < end.
  const Index lo = kEarliestStartOffset;
  const Index hi = pass_arrival;
  std::uniform_int_distribution<Index> frame(lo, hi);
  Index a = 0, b = 0;
  do {
    a = frame(rng);
    b = frame(rng);
  } while (a == b);
  if (a > b) std::swap(a, b);
  TruncationStrategy s;
  s.start = static_cast<int>(a);
  s.end_event.reset();
  s.end_frame = b;
  return s;
}

Window resolve_window(const TruncationStrategy& s, const EventOffsets& events) {
  const Window w{s.start, s.end_event ? events.resolve(*s.end_event) : s.end_frame};
  if (w.end < w.start) throw ConfigError("truncation " + s.label() + " resolves to an empty window");
  return w;
}

}  // namespace covnet

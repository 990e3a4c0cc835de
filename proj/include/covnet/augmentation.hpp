#pragma once

#include <optional>
#include <string>
#include <vector>

#include "covnet/numerics/tensor.hpp"
#include "covnet/play.hpp"
#include "covnet/rng.hpp"

namespace covnet {

inline constexpr int kEarliestStartOffset = -30;

/// Window (start, end) in frames relative to the snap. A fixed strategy ends at an event; a random
/// one carries an explicit end frame.
struct TruncationStrategy {
  int start = kEarliestStartOffset;
  std::optional<EndEvent> end_event = EndEvent::PassArrival;
  Index end_frame = 0;  // used when end_event is empty

  bool is_random() const { return !end_event.has_value(); }
  std::string label() const;
  bool operator==(const TruncationStrategy&) const = default;
};

// Event frames relative to the snap.
struct EventOffsets {
  Index pass_forward = 0;
  Index pass_arrival = 0;

  static EventOffsets of(const Play& play);
  Index resolve(EndEvent e) const;
};

// Inclusive window, frames relative to the snap.
struct Window {
  Index start = 0;
  Index end = 0;
  Index length() const { return end - start + 1; }
  bool operator==(const Window&) const = default;
};

/// The eleven fixed strategies in their canonical order.
const std::vector<TruncationStrategy>& fixed_strategies();

inline constexpr double kFixedStrategyShare = 0.6;

/// With probability 0.6 a uniformly chosen fixed strategy, else a random window
/// -30 <= start < end <= pass_arrival.
TruncationStrategy sample_truncation(Rng& rng, Index pass_arrival);

Window resolve_window(const TruncationStrategy& s, const EventOffsets& events);

/// Slices frames [start, end] out of a [A, T, F] cube whose first frame sits at `first_offset`
/// relative to the snap.
template <typename S>
Tensor<S> apply_truncation(const Tensor<S>& seq, int first_offset, const Window& w) {
  if (seq.rank() != 3) throw ConfigError("apply_truncation expects a [A, T, F] tensor");
  if (w.end < w.start) throw ConfigError("empty truncation window");
  const Index t0 = w.start - first_offset;
  const Index t1 = w.end - first_offset;
  if (t0 < 0 || t1 >= seq.dim(1))
    throw ConfigError("truncation window [" + std::to_string(w.start) + ", " + std::to_string(w.end) +
                      "] outside sequence");
  const Index A = seq.dim(0), F = seq.dim(2), T = t1 - t0 + 1;
  Tensor<S> out({A, T, F});
  for (Index a = 0; a < A; ++a)
    for (Index t = 0; t < T; ++t)
      for (Index f = 0; f < F; ++f) out(a, t, f) = seq(a, t0 + t, f);
  return out;
}

template <typename S>
Tensor<S> apply_truncation(const Tensor<S>& seq, int first_offset, const EventOffsets& events,
                           const TruncationStrategy& s, Window* window = nullptr) {
  const Window w = resolve_window(s, events);
  if (window) *window = w;
  return apply_truncation(seq, first_offset, w);
}

}  // namespace covnet

#pragma once

// Segmented random frame selection: split the frame range into k balanced
// contiguous segments and draw one frame uniformly from each.
//
// Draws use rng::Stream with algorithm "splitmix64-v1", keyed by
// (seed, segment position), so each index depends only on its own segment.

#include <algorithm>
#include <cstdint>
#include <vector>

#include "ovemo/error.hpp"
#include "ovemo/rng.hpp"

namespace ovemo {

inline constexpr std::uint32_t kDefaultSegments = 6;

struct FrameRange {
  std::int64_t lo = 0;  // inclusive
  std::int64_t hi = 0;  // exclusive

  std::int64_t size() const { return hi - lo; }
  bool contains(std::int64_t i) const { return lo <= i && i < hi; }
  bool operator==(const FrameRange&) const = default;
};

struct SegmentPlan {
  std::vector<FrameRange> segments;
};

struct SamplerConfig {
  std::uint32_t k_segments = kDefaultSegments;
  std::uint64_t seed = 0;
};

// Balanced cover of [0, n_frames). Remainder frames go to the earliest
// segments. With fewer frames than segments every frame is its own segment.
inline SegmentPlan plan_segments(std::int64_t n_frames, std::int64_t k) {
  if (n_frames < 1) throw Error(ErrorCode::kNonPositiveFrameCount, "n_frames must be >= 1");
  if (k < 1) throw Error(ErrorCode::kConfig, "k_segments must be >= 1");
  const std::int64_t parts = std::min(n_frames, k);
  const std::int64_t base = n_frames / parts;
  const std::int64_t extra = n_frames % parts;
  SegmentPlan plan;
  plan.segments.reserve(static_cast<std::size_t>(parts));
  std::int64_t lo = 0;
  for (std::int64_t i = 0; i < parts; ++i) {
    const std::int64_t len = base + (i < extra ? 1 : 0);
    plan.segments.push_back({lo, lo + len});
    lo += len;
  }
  return plan;
}

inline std::vector<std::int64_t> sample_frames(std::int64_t n_frames, const SamplerConfig& config) {
  const SegmentPlan plan = plan_segments(n_frames, config.k_segments);
  std::vector<std::int64_t> indices;
  indices.reserve(plan.segments.size());
  for (std::size_t i = 0; i < plan.segments.size(); ++i) {
    const FrameRange& seg = plan.segments[i];
    rng::Stream stream(config.seed, i);
    indices.push_back(seg.lo +
                      static_cast<std::int64_t>(stream.uniform_below(
                          static_cast<std::uint64_t>(seg.size()))));
  }
  return indices;
}

}  // namespace ovemo

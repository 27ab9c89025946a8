#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "voxclust/volume.hpp"

namespace voxclust {

/// Linear-binned histogram. Bin b covers [lo + b*w, lo + (b+1)*w); the last bin is
/// closed at hi. Values outside [lo, hi] land in underflow/overflow, NaN in nan_count.
struct Histogram {
  std::uint64_t bin_count = 0;
  double lo = 0.0;
  double hi = 0.0;
  std::vector<std::uint64_t> counts;
  std::uint64_t underflow = 0;
  std::uint64_t overflow = 0;
  std::uint64_t nan_count = 0;

  double width() const { return (hi - lo) / static_cast<double>(bin_count); }
  double bin_lo(std::uint64_t b) const { return lo + static_cast<double>(b) * width(); }
  double bin_hi(std::uint64_t b) const {
    return b + 1 == bin_count ? hi : lo + static_cast<double>(b + 1) * width();
  }
  double bin_center(std::uint64_t b) const { return lo + (static_cast<double>(b) + 0.5) * width(); }
  /// Bin index for an in-range value; nullopt for under/overflow or NaN.
  std::optional<std::uint64_t> bin_of(double v) const;
  /// Sum of the in-range bin counts.
  std::uint64_t total() const;
};

struct IntensityStats {
  double vmean = 0.0;
  double vmedian = 0.0;
  double hmax = 0.0;  // center of the lowest-index maximal bin
  double min = 0.0;
  double max = 0.0;
  std::uint64_t finite_count = 0;
  Histogram histogram;
};

using IntensityRange = std::pair<double, double>;

/// Order-independent exact sum of single-precision values. Each float is an integer
/// mantissa times a power of two, so mantissas are accumulated per exponent in
/// 64-bit integers and only rounded once, in to_double(). Merging is exact, which
/// makes parallel reductions independent of chunking.
class ExactFloatSum {
 public:
  void add(float v);
  void merge(const ExactFloatSum& other);
  /// Correctly rounded (half-to-even) double nearest to the exact sum.
  double to_double() const;

 private:
  std::array<std::int64_t, 254> buckets_{};
};

/// Arithmetic mean of the finite values, computed from the exactly rounded sum.
double finite_mean(std::span<const float> values);
/// Exact median of the finite values (midpoint of the central pair for even counts).
/// Throws EmptyDataError when no finite value exists.
double finite_median(std::span<const float> values);

/// Mean, median, histogram and HMAX over the finite values. Without a range the
/// histogram spans [min, max] of the finite data; a constant input is widened to
/// [c - h, c + h] with h = |c|/2 (or 1/2 for c = 0).
IntensityStats intensity_stats(std::span<const float> values, std::uint64_t bin_count,
                               std::optional<IntensityRange> range = std::nullopt);
IntensityStats intensity_stats(const VoxelGrid& grid, std::uint64_t bin_count,
                               std::optional<IntensityRange> range = std::nullopt);

/// Sparse TSV: header, then `bin_lo bin_hi count` for every non-empty bin.
void export_histogram(const Histogram& h, const std::filesystem::path& path);
/// Same, followed by `# vmean`, `# vmedian` and `# hmax` comment lines.
void export_histogram(const IntensityStats& stats, const std::filesystem::path& path);

}  // namespace voxclust

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace voxclust {

using Dims = std::array<std::uint64_t, 3>;

/// Uniform sampling of one reciprocal-space axis: n points from q_min to q_max inclusive.
struct AxisSpec {
  double q_min = 0.0;
  double q_max = 1.0;
  std::uint64_t n = 2;

  /// Throws InvalidHeaderError unless n >= 2 and q_min < q_max (both finite).
  void validate() const;
  double spacing() const { return (q_max - q_min) / static_cast<double>(n - 1); }

  bool operator==(const AxisSpec&) const = default;
};

/// Physical coordinate of grid index i. Evaluated as a weighted blend of the two
/// endpoints so that symmetric axes give exactly mirrored coordinates.
double index_to_q(const AxisSpec& axis, std::uint64_t i);

/// Nearest grid index for q, ties rounded up. Throws OutOfRangeError when q lies
/// outside [q_min - dq/2, q_max + dq/2].
std::uint64_t q_to_index(const AxisSpec& axis, double q);

constexpr std::uint64_t voxel_count(const Dims& d) { return d[0] * d[1] * d[2]; }

/// Row-major with the third axis fastest.
constexpr std::uint64_t linear_index(const Dims& d, std::uint64_t i1, std::uint64_t i2,
                                     std::uint64_t i3) {
  return (i1 * d[1] + i2) * d[2] + i3;
}

constexpr std::array<std::uint64_t, 3> unravel(const Dims& d, std::uint64_t linear) {
  const std::uint64_t i3 = linear % d[2];
  const std::uint64_t rest = linear / d[2];
  return {rest / d[1], rest % d[1], i3};
}

/// Dense 3D float intensity volume. Immutable after construction.
class VoxelGrid {
 public:
  VoxelGrid(std::array<AxisSpec, 3> axes, std::vector<float> data);

  const std::array<AxisSpec, 3>& axes() const { return axes_; }
  const AxisSpec& axis(int k) const { return axes_[static_cast<std::size_t>(k)]; }
  Dims dims() const { return {axes_[0].n, axes_[1].n, axes_[2].n}; }
  std::uint64_t size() const { return data_.size(); }
  std::span<const float> data() const { return data_; }

  float at(std::uint64_t i1, std::uint64_t i2, std::uint64_t i3) const {
    return data_[linear_index(dims(), i1, i2, i3)];
  }
  std::array<double, 3> q_of(std::uint64_t linear) const;

  std::uint64_t nan_count() const;

 private:
  std::array<AxisSpec, 3> axes_;
  std::vector<float> data_;
};

struct LoadedVolume {
  VoxelGrid grid;
  std::uint64_t nan_count = 0;
};

LoadedVolume load_volume(const std::filesystem::path& path);
void save_volume(const VoxelGrid& grid, const std::filesystem::path& path);

}  // namespace voxclust

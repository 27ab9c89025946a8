#pragma once

// Intensity-weighted DBSCAN on a regular lattice.
//
// A voxel p is core when the weighted count of its closed neighborhood
// {p} + (p + stencil), truncated at the grid faces, reaches min_pts. Each voxel
// weighs 1 below the threshold and intensity/threshold at or above it; NaN voxels
// weigh 0 and are never core or border. Clusters are the connected components of
// the core graph; a non-core voxel next to at least one core joins the cluster of
// its adjacent core with the smallest linear index.

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "voxclust/volume.hpp"

namespace voxclust {

struct WdbscanParams {
  double eps = 1.7;
  double min_pts = 80.0;
  double threshold = 1.0;

  /// Throws InvalidArgumentError unless all three are finite and positive.
  void validate() const;
};

using Offset = std::array<int, 3>;

/// Lattice neighborhood: nonzero integer offsets with Euclidean norm <= eps.
/// Offsets are listed in ascending lexicographic (= linear index) order.
struct Stencil {
  std::vector<Offset> offsets;
  int radius = 0;  // max |component|

  std::size_t size() const { return offsets.size(); }
};

/// Slack on the eps comparison so that radii written to four decimals
/// (1.4142, 1.7320) include the sqrt(2) and sqrt(3) shells they stand for.
inline constexpr double kStencilTolerance = 1e-4;

Stencil build_stencil(double eps);

inline double weight(float intensity, double threshold) {
  if (std::isnan(intensity)) return 0.0;
  const double v = intensity;
  return v < threshold ? 1.0 : v / threshold;
}

/// Per-voxel core flag (1 = core).
std::vector<std::uint8_t> classify_cores(const VoxelGrid& grid, const WdbscanParams& params);

/// Per-voxel cluster ids with the VoxelGrid layout; 0 is noise.
struct LabelVolume {
  Dims dims{};
  std::vector<std::uint32_t> labels;

  std::uint64_t size() const { return labels.size(); }
  bool operator==(const LabelVolume&) const = default;
};

/// Provisional ids are assigned in ascending order of each cluster's smallest
/// core voxel; rank_clusters() turns them into size ranks.
LabelVolume cluster(const VoxelGrid& grid, const WdbscanParams& params);

/// Largest voxel count cluster() accepts (union-find parents are 32-bit).
inline constexpr std::uint64_t kMaxClusterVoxels = 0xFFFFFFFEull;

void save_labels(const LabelVolume& labels, const std::filesystem::path& path);
LabelVolume load_labels(const std::filesystem::path& path);

}  // namespace voxclust

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "voxclust/stats.hpp"
#include "voxclust/volume.hpp"
#include "voxclust/wdbscan.hpp"

namespace voxclust {

struct ClusterRecord {
  std::uint32_t rank = 0;  // 1 = largest
  std::uint64_t size = 0;
  std::array<std::uint64_t, 6> bbox{};  // i1min, i1max, i2min, i2max, i3min, i3max
  std::array<double, 6> q_bbox{};       // same order, physical units
  double sum_intensity = 0.0;
  float min_intensity = 0.0f;
  float max_intensity = 0.0f;
  std::uint64_t first_index = 0;  // smallest member linear index, breaks size ties
};

struct ClusterTable {
  std::vector<ClusterRecord> records;  // records[r - 1] has rank r
  std::uint64_t noise_count = 0;
  std::vector<std::uint64_t> group_breaks;

  std::uint64_t voxel_total() const;
};

struct RankedClusters {
  ClusterTable table;
  LabelVolume labels;  // id == rank
};

/// Sorts clusters by descending size (ties: ascending smallest member index) and
/// relabels so that id == rank. Takes the labels by value so callers can move a
/// large volume in and get it back relabeled in place.
RankedClusters rank_clusters(LabelVolume labels, const VoxelGrid& grid);

struct Multiplet {
  std::uint64_t first_rank = 0;
  std::uint64_t last_rank = 0;
  std::uint64_t multiplicity() const { return last_rank - first_rank + 1; }
};

/// Greedy runs over ranks where every size is within rel_tol (relative) of the
/// run's first size.
std::vector<Multiplet> symmetry_groups(const ClusterTable& table, double rel_tol);

/// Ranks r with log10(size(r)) - log10(size(r+1)) >= min_gap.
std::vector<std::uint64_t> detect_index_groups(const ClusterTable& table, double min_gap);

struct IndexGroup {
  std::uint64_t first_rank = 0;
  std::uint64_t last_rank = 0;
  std::uint64_t cluster_count = 0;
  std::uint64_t voxel_count = 0;
  double fraction = 0.0;  // of all voxels in the volume
};

/// Contiguous rank groups delimited by breaks (each break is the last rank of a group).
/// Throws InvalidArgumentError unless breaks are strictly increasing and <= max rank.
std::vector<IndexGroup> index_groups(const ClusterTable& table, const std::vector<std::uint64_t>& breaks);

struct RankRange {
  std::uint32_t lo = 1;
  std::uint32_t hi = 1;
};

struct QInterval {
  double lo = 0.0;
  double hi = 0.0;
};

enum class FilterKind { LowPass, HighPass };
enum class IntensityUnit { Raw, Scaled };

/// Low-pass keeps intensity <= cutoff, high-pass keeps intensity > cutoff.
struct IntensityFilter {
  FilterKind kind = FilterKind::LowPass;
  double cutoff = 0.0;
  IntensityUnit unit = IntensityUnit::Scaled;
};

struct Selection {
  std::optional<RankRange> ranks;
  std::optional<std::array<QInterval, 3>> q_region;
  std::optional<IntensityFilter> filter;

  void validate() const;
};

struct SelectedPoint {
  std::uint64_t linear = 0;
  std::array<std::uint64_t, 3> index{};
  std::array<double, 3> q{};
  float intensity = 0.0f;
  double scaled_intensity = 0.0;  // intensity / threshold, NaN when no threshold is known
  std::uint32_t rank = 0;
};

/// Voxels meeting every present criterion, in ascending linear order. NaN voxels
/// are never selected. Region bounds are clamped to the axes, then mapped with
/// q_to_index. Scaled filters need the clustering threshold.
std::vector<SelectedPoint> select(const VoxelGrid& grid, const LabelVolume& labels,
                                  const Selection& sel,
                                  std::optional<double> threshold = std::nullopt);

/// Intensity statistics of the selection's raw intensities.
IntensityStats characterize(const std::vector<SelectedPoint>& points, std::uint64_t bin_count);

void write_points_csv(const std::vector<SelectedPoint>& points, const std::filesystem::path& path);
void write_cluster_table_csv(const ClusterTable& table, const std::filesystem::path& path);
/// Two columns, rank and size: the data behind a size-vs-rank plot.
void write_size_rank_tsv(const ClusterTable& table, const std::filesystem::path& path);

}  // namespace voxclust

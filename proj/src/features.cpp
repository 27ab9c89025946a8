#include "voxclust/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <string>
#include <unordered_map>

#include "voxclust/errors.hpp"
#include "voxclust/format.hpp"

namespace voxclust {

namespace {

struct Accumulator {
  std::uint64_t size = 0;
  std::array<std::uint64_t, 3> lo{};
  std::array<std::uint64_t, 3> hi{};
  double sum = 0.0;
  float min = std::numeric_limits<float>::infinity();
  float max = -std::numeric_limits<float>::infinity();
  std::uint64_t first = 0;

  void add(std::uint64_t linear, const std::array<std::uint64_t, 3>& idx, float v) {
    if (size == 0) {
      first = linear;
      lo = idx;
      hi = idx;
    }
    ++size;
    for (std::size_t k = 0; k < 3; ++k) {
      lo[k] = std::min(lo[k], idx[k]);
      hi[k] = std::max(hi[k], idx[k]);
    }
    sum += v;
    min = std::min(min, v);
    max = std::max(max, v);
  }
};

std::ofstream open_text(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

// Index range [first, last] of the axis covered by [lo, hi]; nullopt when disjoint.
std::optional<std::array<std::uint64_t, 2>> index_span(const AxisSpec& axis, const QInterval& iv) {
  if (iv.hi < axis.q_min || iv.lo > axis.q_max) return std::nullopt;
  const double lo = std::max(iv.lo, axis.q_min);
  const double hi = std::min(iv.hi, axis.q_max);
  return std::array<std::uint64_t, 2>{q_to_index(axis, lo), q_to_index(axis, hi)};
}

}  // namespace

std::uint64_t ClusterTable::voxel_total() const {
  std::uint64_t total = noise_count;
  for (const auto& r : records) total += r.size;
  return total;
}

RankedClusters rank_clusters(LabelVolume labels, const VoxelGrid& grid) {
  if (labels.dims != grid.dims() || labels.labels.size() != grid.size())
    throw DimsMismatchError("label volume and intensity grid have different dimensions");

  const Dims d = grid.dims();
  const auto data = grid.data();
  const std::uint64_t n = labels.size();

  const std::uint32_t max_id =
      labels.labels.empty() ? 0 : *std::max_element(labels.labels.begin(), labels.labels.end());
  const bool dense = max_id <= n;

  // slot 0 unused; ids map to slots densely when possible, otherwise through a table.
  std::vector<Accumulator> acc(dense ? static_cast<std::size_t>(max_id) + 1 : 1);
  std::unordered_map<std::uint32_t, std::size_t> sparse_slot;

  const auto slot_of = [&](std::uint32_t id) -> std::size_t {
    if (dense) return id;
    auto [it, inserted] = sparse_slot.try_emplace(id, acc.size());
    if (inserted) acc.emplace_back();
    return it->second;
  };

  std::uint64_t noise = 0;
  for (std::uint64_t p = 0; p < n; ++p) {
    const std::uint32_t id = labels.labels[p];
    if (id == 0) {
      ++noise;
      continue;
    }
    acc[slot_of(id)].add(p, unravel(d, p), data[p]);
  }

  std::vector<std::size_t> order;
  for (std::size_t s = 1; s < acc.size(); ++s)
    if (acc[s].size > 0) order.push_back(s);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (acc[a].size != acc[b].size) return acc[a].size > acc[b].size;
    return acc[a].first < acc[b].first;
  });

  RankedClusters out;
  out.table.noise_count = noise;
  out.table.records.reserve(order.size());

  std::vector<std::uint32_t> new_id(acc.size(), 0);
  for (std::size_t r = 0; r < order.size(); ++r) {
    const Accumulator& a = acc[order[r]];
    ClusterRecord rec;
    rec.rank = static_cast<std::uint32_t>(r + 1);
    rec.size = a.size;
    for (std::size_t k = 0; k < 3; ++k) {
      rec.bbox[2 * k] = a.lo[k];
      rec.bbox[2 * k + 1] = a.hi[k];
      rec.q_bbox[2 * k] = index_to_q(grid.axis(static_cast<int>(k)), a.lo[k]);
      rec.q_bbox[2 * k + 1] = index_to_q(grid.axis(static_cast<int>(k)), a.hi[k]);
    }
    rec.sum_intensity = a.sum;
    rec.min_intensity = a.min;
    rec.max_intensity = a.max;
    rec.first_index = a.first;
    out.table.records.push_back(rec);
    new_id[order[r]] = rec.rank;
  }

  for (auto& id : labels.labels) {
    if (id == 0) continue;
    id = dense ? new_id[id] : new_id[sparse_slot.at(id)];
  }
  out.labels = std::move(labels);
  return out;
}

std::vector<Multiplet> symmetry_groups(const ClusterTable& table, double rel_tol) {
  if (!(rel_tol >= 0.0 && rel_tol < 1.0))
    throw InvalidArgumentError("rel_tol must lie in [0, 1)");
  std::vector<Multiplet> runs;
  const auto& recs = table.records;
  std::size_t start = 0;
  while (start < recs.size()) {
    const double head = static_cast<double>(recs[start].size);
    std::size_t end = start + 1;
    while (end < recs.size() &&
           std::abs(static_cast<double>(recs[end].size) - head) <= rel_tol * head)
      ++end;
    runs.push_back({start + 1, end});
    start = end;
  }
  return runs;
}

std::vector<std::uint64_t> detect_index_groups(const ClusterTable& table, double min_gap) {
  if (!(min_gap > 0.0)) throw InvalidArgumentError("min_gap must be positive");
  std::vector<std::uint64_t> breaks;
  const auto& recs = table.records;
  for (std::size_t r = 0; r + 1 < recs.size(); ++r) {
    const double gap = std::log10(static_cast<double>(recs[r].size)) -
                       std::log10(static_cast<double>(recs[r + 1].size));
    if (gap >= min_gap) breaks.push_back(r + 1);
  }
  return breaks;
}

std::vector<IndexGroup> index_groups(const ClusterTable& table,
                                     const std::vector<std::uint64_t>& breaks) {
  const std::uint64_t max_rank = table.records.size();
  for (std::size_t k = 0; k < breaks.size(); ++k) {
    if (breaks[k] == 0 || breaks[k] > max_rank)
      throw InvalidArgumentError("group break " + std::to_string(breaks[k]) +
                                 " outside ranks 1.." + std::to_string(max_rank));
    if (k > 0 && breaks[k] <= breaks[k - 1])
      throw InvalidArgumentError("group breaks must be strictly increasing");
  }
  const double total = static_cast<double>(table.voxel_total());
  std::vector<IndexGroup> groups;
  std::uint64_t first = 1;
  auto emit = [&](std::uint64_t last) {
    IndexGroup g;
    g.first_rank = first;
    g.last_rank = last;
    g.cluster_count = last - first + 1;
    for (std::uint64_t r = first; r <= last; ++r) g.voxel_count += table.records[r - 1].size;
    g.fraction = total > 0 ? static_cast<double>(g.voxel_count) / total : 0.0;
    groups.push_back(g);
    first = last + 1;
  };
  for (auto b : breaks) emit(b);
  if (first <= max_rank) emit(max_rank);
  return groups;
}

void Selection::validate() const {
  if (!ranks && !q_region && !filter) throw InvalidArgumentError("selection has no criteria");
  if (ranks && (ranks->lo == 0 || ranks->lo > ranks->hi))
    throw InvalidArgumentError("rank range must satisfy 1 <= lo <= hi");
  if (q_region) {
    for (const auto& iv : *q_region)
      if (!(iv.lo <= iv.hi)) throw InvalidArgumentError("Q interval must satisfy lo <= hi");
  }
  if (filter && !std::isfinite(filter->cutoff))
    throw InvalidArgumentError("intensity cutoff must be finite");
}

std::vector<SelectedPoint> select(const VoxelGrid& grid, const LabelVolume& labels,
                                  const Selection& sel, std::optional<double> threshold) {
  sel.validate();
  if (labels.dims != grid.dims() || labels.labels.size() != grid.size())
    throw DimsMismatchError("label volume and intensity grid have different dimensions");
  if (sel.filter && sel.filter->unit == IntensityUnit::Scaled && !threshold)
    throw MissingParameterError("a scaled intensity filter needs the clustering threshold");
  if (threshold && !(*threshold > 0.0)) throw InvalidArgumentError("threshold must be positive");

  const Dims d = grid.dims();
  std::array<std::uint64_t, 3> from{0, 0, 0};
  std::array<std::uint64_t, 3> to{d[0] - 1, d[1] - 1, d[2] - 1};
  if (sel.q_region) {
    for (std::size_t k = 0; k < 3; ++k) {
      const auto span = index_span(grid.axis(static_cast<int>(k)), (*sel.q_region)[k]);
      if (!span) return {};
      from[k] = (*span)[0];
      to[k] = (*span)[1];
    }
  }

  const auto data = grid.data();
  std::vector<SelectedPoint> out;
  for (std::uint64_t i1 = from[0]; i1 <= to[0]; ++i1)
    for (std::uint64_t i2 = from[1]; i2 <= to[1]; ++i2)
      for (std::uint64_t i3 = from[2]; i3 <= to[2]; ++i3) {
        const std::uint64_t p = linear_index(d, i1, i2, i3);
        const float v = data[p];
        if (std::isnan(v)) continue;
        const std::uint32_t rank = labels.labels[p];
        if (sel.ranks && (rank < sel.ranks->lo || rank > sel.ranks->hi)) continue;
        const double scaled = threshold ? static_cast<double>(v) / *threshold
                                        : std::numeric_limits<double>::quiet_NaN();
        if (sel.filter) {
          const double x = sel.filter->unit == IntensityUnit::Scaled ? scaled : v;
          const bool low = x <= sel.filter->cutoff;
          if ((sel.filter->kind == FilterKind::LowPass) != low) continue;
        }
        SelectedPoint pt;
        pt.linear = p;
        pt.index = {i1, i2, i3};
        pt.q = {index_to_q(grid.axis(0), i1), index_to_q(grid.axis(1), i2),
                index_to_q(grid.axis(2), i3)};
        pt.intensity = v;
        pt.scaled_intensity = scaled;
        pt.rank = rank;
        out.push_back(pt);
      }
  return out;
}

IntensityStats characterize(const std::vector<SelectedPoint>& points, std::uint64_t bin_count) {
  if (points.empty()) throw EmptyDataError("empty selection");
  std::vector<float> values;
  values.reserve(points.size());
  for (const auto& p : points) values.push_back(p.intensity);
  return intensity_stats(values, bin_count);
}

void write_points_csv(const std::vector<SelectedPoint>& points, const std::filesystem::path& path) {
  auto out = open_text(path);
  out << "i1,i2,i3,q1,q2,q3,intensity,scaled_intensity,rank\n";
  for (const auto& p : points) {
    out << p.index[0] << ',' << p.index[1] << ',' << p.index[2] << ',' << format_double(p.q[0])
        << ',' << format_double(p.q[1]) << ',' << format_double(p.q[2]) << ','
        << format_float(p.intensity) << ',' << format_double(p.scaled_intensity) << ',' << p.rank
        << '\n';
  }
  finish(out, path);
}

void write_cluster_table_csv(const ClusterTable& table, const std::filesystem::path& path) {
  auto out = open_text(path);
  out << "rank,size,i1min,i1max,i2min,i2max,i3min,i3max,q1min,q1max,q2min,q2max,q3min,q3max,"
         "sum_intensity,min_intensity,max_intensity\n";
  for (const auto& r : table.records) {
    out << r.rank << ',' << r.size;
    for (auto b : r.bbox) out << ',' << b;
    for (auto q : r.q_bbox) out << ',' << format_double(q);
    out << ',' << format_double(r.sum_intensity) << ',' << format_float(r.min_intensity) << ','
        << format_float(r.max_intensity) << '\n';
  }
  finish(out, path);
}

void write_size_rank_tsv(const ClusterTable& table, const std::filesystem::path& path) {
  auto out = open_text(path);
  out << "rank\tsize\n";
  for (const auto& r : table.records) out << r.rank << '\t' << r.size << '\n';
  finish(out, path);
}

}  // namespace voxclust

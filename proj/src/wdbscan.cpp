#include "voxclust/wdbscan.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "binio.hpp"
#include "voxclust/errors.hpp"

namespace voxclust {

namespace {

constexpr char kMagic[4] = {'V', 'X', 'L', '1'};
constexpr std::uint16_t kVersion = 1;

// Stencil resolved against concrete grid dims.
struct BoundStencil {
  std::vector<Offset> offsets;
  std::vector<std::int64_t> linear;
  int radius = 0;

  BoundStencil(const Stencil& s, const Dims& d) : offsets(s.offsets), radius(s.radius) {
    linear.reserve(offsets.size());
    for (const auto& o : offsets)
      linear.push_back((static_cast<std::int64_t>(o[0]) * static_cast<std::int64_t>(d[1]) + o[1]) *
                           static_cast<std::int64_t>(d[2]) +
                       o[2]);
  }
};

bool in_bounds(const Dims& d, std::uint64_t i1, std::uint64_t i2, std::uint64_t i3, const Offset& o) {
  const auto ok = [](std::uint64_t i, int delta, std::uint64_t n) {
    const auto j = static_cast<std::int64_t>(i) + delta;
    return j >= 0 && j < static_cast<std::int64_t>(n);
  };
  return ok(i1, o[0], d[0]) && ok(i2, o[1], d[1]) && ok(i3, o[2], d[2]);
}

bool interior(const Dims& d, std::uint64_t i, int axis, int radius) {
  const auto r = static_cast<std::uint64_t>(radius);
  return i >= r && i + r < d[static_cast<std::size_t>(axis)];
}

// Calls f(neighbor_linear_index) for every in-bounds stencil neighbor of (i1,i2,i3).
template <typename F>
void for_each_neighbor(const Dims& d, const BoundStencil& s, std::uint64_t i1, std::uint64_t i2,
                       std::uint64_t i3, std::uint64_t p, F&& f) {
  const bool inside = interior(d, i1, 0, s.radius) && interior(d, i2, 1, s.radius) &&
                      interior(d, i3, 2, s.radius);
  for (std::size_t k = 0; k < s.offsets.size(); ++k) {
    if (inside || in_bounds(d, i1, i2, i3, s.offsets[k]))
      f(static_cast<std::uint64_t>(static_cast<std::int64_t>(p) + s.linear[k]));
  }
}

std::uint32_t find_root(std::vector<std::uint32_t>& parent, std::uint32_t x) {
  while (parent[x] != x) {
    parent[x] = parent[parent[x]];
    x = parent[x];
  }
  return x;
}

// Links the larger root under the smaller one, so parent[x] <= x always holds.
void unite(std::vector<std::uint32_t>& parent, std::uint32_t a, std::uint32_t b) {
  a = find_root(parent, a);
  b = find_root(parent, b);
  if (a == b) return;
  if (a < b) parent[b] = a;
  else parent[a] = b;
}

}  // namespace

void WdbscanParams::validate() const {
  const auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!positive(eps)) throw InvalidArgumentError("eps must be positive");
  if (!positive(min_pts)) throw InvalidArgumentError("min_pts must be positive");
  if (!positive(threshold)) throw InvalidArgumentError("threshold must be positive");
}

Stencil build_stencil(double eps) {
  Stencil s;
  if (!(eps > 0.0) || !std::isfinite(eps)) throw InvalidArgumentError("eps must be positive");
  const double reach = eps + kStencilTolerance;
  const int r = static_cast<int>(std::floor(reach));
  const double limit = reach * reach;
  s.radius = r;
  for (int a = -r; a <= r; ++a)
    for (int b = -r; b <= r; ++b)
      for (int c = -r; c <= r; ++c) {
        if (a == 0 && b == 0 && c == 0) continue;
        if (static_cast<double>(a * a + b * b + c * c) <= limit) s.offsets.push_back({a, b, c});
      }
  return s;
}

std::vector<std::uint8_t> classify_cores(const VoxelGrid& grid, const WdbscanParams& params) {
  params.validate();
  const Dims d = grid.dims();
  const BoundStencil stencil(build_stencil(params.eps), d);
  const auto data = grid.data();
  const double threshold = params.threshold;
  const double min_pts = params.min_pts;

  std::vector<std::uint8_t> core(grid.size(), 0);
  const auto n1 = static_cast<std::int64_t>(d[0]);
#pragma omp parallel for schedule(static)
  for (std::int64_t s1 = 0; s1 < n1; ++s1) {
    const auto i1 = static_cast<std::uint64_t>(s1);
    for (std::uint64_t i2 = 0; i2 < d[1]; ++i2) {
      for (std::uint64_t i3 = 0; i3 < d[2]; ++i3) {
        const std::uint64_t p = linear_index(d, i1, i2, i3);
        if (std::isnan(data[p])) continue;
        double sum = weight(data[p], threshold);
        for_each_neighbor(d, stencil, i1, i2, i3, p,
                          [&](std::uint64_t q) { sum += weight(data[q], threshold); });
        core[p] = sum >= min_pts ? 1 : 0;
      }
    }
  }
  return core;
}

LabelVolume cluster(const VoxelGrid& grid, const WdbscanParams& params) {
  const Dims d = grid.dims();
  const std::uint64_t n = grid.size();
  if (n > kMaxClusterVoxels)
    throw InvalidArgumentError("volume of " + std::to_string(n) + " voxels exceeds the clustering limit");

  const std::vector<std::uint8_t> core = classify_cores(grid, params);
  const Stencil full = build_stencil(params.eps);
  const BoundStencil stencil(full, d);

  Stencil half_def;
  half_def.radius = full.radius;
  for (const auto& o : full.offsets)
    if (o > Offset{0, 0, 0}) half_def.offsets.push_back(o);
  const BoundStencil half(half_def, d);

  LabelVolume out;
  out.dims = d;
  // Holds union-find parents for core voxels until the labeling sweep below.
  std::vector<std::uint32_t>& parent = out.labels;
  parent.assign(n, 0);
  for (std::uint64_t p = 0; p < n; ++p)
    if (core[p]) parent[p] = static_cast<std::uint32_t>(p);

  for (std::uint64_t i1 = 0; i1 < d[0]; ++i1)
    for (std::uint64_t i2 = 0; i2 < d[1]; ++i2)
      for (std::uint64_t i3 = 0; i3 < d[2]; ++i3) {
        const std::uint64_t p = linear_index(d, i1, i2, i3);
        if (!core[p]) continue;
        for_each_neighbor(d, half, i1, i2, i3, p, [&](std::uint64_t q) {
          if (core[q]) unite(parent, static_cast<std::uint32_t>(p), static_cast<std::uint32_t>(q));
        });
      }

  // Ascending sweep: every index below p already holds its final label, and a
  // core's parent is a smaller index in the same component (or itself at a root).
  std::uint32_t next = 0;
  for (std::uint64_t p = 0; p < n; ++p) {
    if (!core[p]) continue;
    const std::uint32_t up = parent[p];
    parent[p] = up == p ? ++next : parent[up];
  }

  const auto data = grid.data();
  const auto n1 = static_cast<std::int64_t>(d[0]);
#pragma omp parallel for schedule(static)
  for (std::int64_t s1 = 0; s1 < n1; ++s1) {
    const auto i1 = static_cast<std::uint64_t>(s1);
    for (std::uint64_t i2 = 0; i2 < d[1]; ++i2) {
      for (std::uint64_t i3 = 0; i3 < d[2]; ++i3) {
        const std::uint64_t p = linear_index(d, i1, i2, i3);
        if (core[p] || std::isnan(data[p])) continue;
        std::uint64_t best = std::numeric_limits<std::uint64_t>::max();
        for_each_neighbor(d, stencil, i1, i2, i3, p, [&](std::uint64_t q) {
          if (core[q] && q < best) best = q;
        });
        if (best != std::numeric_limits<std::uint64_t>::max()) out.labels[p] = out.labels[best];
      }
    }
  }
  return out;
}

void save_labels(const LabelVolume& labels, const std::filesystem::path& path) {
  if (labels.labels.size() != voxel_count(labels.dims))
    throw InvalidArgumentError("label array does not match its dims");
  auto out = detail::open_for_write(path.string());
  out.write(kMagic, 4);
  detail::write_le<std::uint16_t>(out, kVersion);
  detail::write_le<std::uint16_t>(out, 0);
  for (auto n : labels.dims) detail::write_le<std::uint64_t>(out, n);
  detail::write_payload(out, labels.labels.data(), labels.labels.size());
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

LabelVolume load_labels(const std::filesystem::path& path) {
  auto in = detail::open_for_read(path.string());
  char magic[4] = {};
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError(path.string() + ": not a VXL1 label file (bad magic)");
  std::uint16_t version = 0, reserved = 0;
  LabelVolume out;
  bool ok = detail::read_le(in, version) && detail::read_le(in, reserved);
  for (auto& n : out.dims) ok = ok && detail::read_le(in, n);
  if (!ok) throw CorruptFileError(path.string() + ": truncated header");
  if (version != kVersion)
    throw FormatError(path.string() + ": unsupported VXL1 version " + std::to_string(version));
  std::uint64_t count = 1;
  for (auto n : out.dims) {
    if (n == 0) throw InvalidHeaderError(path.string() + ": zero-length dimension");
    if (count > std::numeric_limits<std::uint64_t>::max() / n)
      throw InvalidHeaderError(path.string() + ": dimensions overflow");
    count *= n;
  }
  out.labels.resize(count);
  const std::uint64_t got = detail::read_payload(in, out.labels.data(), count);
  if (got != count)
    throw CorruptFileError(path.string() + ": payload holds " + std::to_string(got) +
                           " labels, header promises " + std::to_string(count));
  return out;
}

}  // namespace voxclust

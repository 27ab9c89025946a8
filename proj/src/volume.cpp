#include "voxclust/volume.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "binio.hpp"
#include "voxclust/errors.hpp"

namespace voxclust {

namespace {

constexpr char kMagic[4] = {'V', 'X', 'G', '1'};
constexpr std::uint16_t kVersion = 1;

std::uint64_t checked_voxel_count(const Dims& d) {
  std::uint64_t total = 1;
  for (auto n : d) {
    if (n != 0 && total > std::numeric_limits<std::uint64_t>::max() / n)
      throw InvalidHeaderError("grid dimensions overflow a 64-bit voxel count");
    total *= n;
  }
  return total;
}

}  // namespace

void AxisSpec::validate() const {
  if (n < 2) throw InvalidHeaderError("axis needs at least 2 grid points, got " + std::to_string(n));
  if (!std::isfinite(q_min) || !std::isfinite(q_max) || !(q_min < q_max))
    throw InvalidHeaderError("axis requires finite q_min < q_max");
}

double index_to_q(const AxisSpec& axis, std::uint64_t i) {
  const double last = static_cast<double>(axis.n - 1);
  const double t = static_cast<double>(i);
  return (axis.q_min * (last - t) + axis.q_max * t) / last;
}

std::uint64_t q_to_index(const AxisSpec& axis, double q) {
  const double dq = axis.spacing();
  if (!(q >= axis.q_min - 0.5 * dq && q <= axis.q_max + 0.5 * dq))
    throw OutOfRangeError("coordinate " + std::to_string(q) + " outside axis [" +
                          std::to_string(axis.q_min) + ", " + std::to_string(axis.q_max) + "]");
  const double offset = (q - axis.q_min) / dq;
  const double rounded = std::floor(offset + 0.5);
  if (rounded <= 0.0) return 0;
  const auto idx = static_cast<std::uint64_t>(rounded);
  return idx > axis.n - 1 ? axis.n - 1 : idx;
}

VoxelGrid::VoxelGrid(std::array<AxisSpec, 3> axes, std::vector<float> data)
    : axes_(axes), data_(std::move(data)) {
  for (const auto& a : axes_) a.validate();
  if (data_.size() != checked_voxel_count(dims()))
    throw InvalidArgumentError("voxel data length " + std::to_string(data_.size()) +
                               " does not match grid dimensions");
}

std::array<double, 3> VoxelGrid::q_of(std::uint64_t linear) const {
  const auto idx = unravel(dims(), linear);
  return {index_to_q(axes_[0], idx[0]), index_to_q(axes_[1], idx[1]),
          index_to_q(axes_[2], idx[2])};
}

std::uint64_t VoxelGrid::nan_count() const {
  std::uint64_t count = 0;
  for (float v : data_) count += std::isnan(v) ? 1 : 0;
  return count;
}

LoadedVolume load_volume(const std::filesystem::path& path) {
  auto in = detail::open_for_read(path.string());

  char magic[4] = {};
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError(path.string() + ": not a VXG1 volume (bad magic)");

  std::uint16_t version = 0, reserved = 0;
  Dims dims{};
  std::array<AxisSpec, 3> axes{};
  bool ok = detail::read_le(in, version) && detail::read_le(in, reserved);
  for (auto& n : dims) ok = ok && detail::read_le(in, n);
  for (auto& a : axes) ok = ok && detail::read_le(in, a.q_min) && detail::read_le(in, a.q_max);
  if (!ok) throw CorruptFileError(path.string() + ": truncated header");
  if (version != kVersion)
    throw FormatError(path.string() + ": unsupported VXG1 version " + std::to_string(version));

  for (int k = 0; k < 3; ++k) {
    axes[static_cast<std::size_t>(k)].n = dims[static_cast<std::size_t>(k)];
    axes[static_cast<std::size_t>(k)].validate();
  }
  const std::uint64_t count = checked_voxel_count(dims);

  std::vector<float> data(count);
  const std::uint64_t got = detail::read_payload(in, data.data(), count);
  if (got != count)
    throw CorruptFileError(path.string() + ": payload holds " + std::to_string(got) +
                           " values, header promises " + std::to_string(count));

  VoxelGrid grid(axes, std::move(data));
  const std::uint64_t nans = grid.nan_count();
  return {std::move(grid), nans};
}

void save_volume(const VoxelGrid& grid, const std::filesystem::path& path) {
  auto out = detail::open_for_write(path.string());
  out.write(kMagic, 4);
  detail::write_le<std::uint16_t>(out, kVersion);
  detail::write_le<std::uint16_t>(out, 0);
  for (auto n : grid.dims()) detail::write_le<std::uint64_t>(out, n);
  for (const auto& a : grid.axes()) {
    detail::write_le(out, a.q_min);
    detail::write_le(out, a.q_max);
  }
  detail::write_payload(out, grid.data().data(), grid.size());
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace voxclust

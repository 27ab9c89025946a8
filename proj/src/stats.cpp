#include "voxclust/stats.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>

#include "voxclust/errors.hpp"
#include "voxclust/format.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace voxclust {

namespace {

// Unsigned fixed-point integer in units of 2^-149 (the smallest float subnormal).
struct BigMagnitude {
  static constexpr int kLimbs = 6;
  std::array<std::uint64_t, kLimbs> limb{};

  void add_shifted(std::uint64_t value, int shift) {
    const int word = shift / 64;
    const int bit = shift % 64;
    const std::uint64_t lo = value << bit;
    const std::uint64_t hi = bit == 0 ? 0 : value >> (64 - bit);
    add_at(word, lo);
    if (hi != 0) add_at(word + 1, hi);
  }

  void add_at(int word, std::uint64_t v) {
    for (int w = word; w < kLimbs && v != 0; ++w) {
      const std::uint64_t before = limb[static_cast<std::size_t>(w)];
      limb[static_cast<std::size_t>(w)] = before + v;
      v = limb[static_cast<std::size_t>(w)] < before ? 1 : 0;
    }
  }

  bool less_than(const BigMagnitude& o) const {
    for (int w = kLimbs - 1; w >= 0; --w) {
      if (limb[static_cast<std::size_t>(w)] != o.limb[static_cast<std::size_t>(w)])
        return limb[static_cast<std::size_t>(w)] < o.limb[static_cast<std::size_t>(w)];
    }
    return false;
  }

  // this -= o, requires o <= this.
  void subtract(const BigMagnitude& o) {
    std::uint64_t borrow = 0;
    for (std::size_t w = 0; w < kLimbs; ++w) {
      const std::uint64_t a = limb[w];
      const std::uint64_t b = o.limb[w];
      const std::uint64_t d = a - b - borrow;
      borrow = (a < b || (a == b && borrow)) ? 1 : 0;
      limb[w] = d;
    }
  }

  int highest_bit() const {
    for (int w = kLimbs - 1; w >= 0; --w) {
      const auto v = limb[static_cast<std::size_t>(w)];
      if (v != 0) return w * 64 + 63 - std::countl_zero(v);
    }
    return -1;
  }

  bool bit(int b) const { return (limb[static_cast<std::size_t>(b / 64)] >> (b % 64)) & 1u; }

  bool any_below(int b) const {
    for (int w = 0; w < b / 64; ++w)
      if (limb[static_cast<std::size_t>(w)] != 0) return true;
    const int rem = b % 64;
    return rem != 0 && (limb[static_cast<std::size_t>(b / 64)] & ((std::uint64_t{1} << rem) - 1)) != 0;
  }

  std::uint64_t bits_from(int lowest, int count) const {
    std::uint64_t out = 0;
    for (int i = count - 1; i >= 0; --i) out = (out << 1) | (bit(lowest + i) ? 1u : 0u);
    return out;
  }

  double to_double() const {
    const int top = highest_bit();
    if (top < 0) return 0.0;
    constexpr int kMant = 53;
    if (top < kMant) return std::ldexp(static_cast<double>(bits_from(0, top + 1)), -149);
    const int lowest = top - (kMant - 1);
    std::uint64_t mant = bits_from(lowest, kMant);
    const bool round = bit(lowest - 1);
    const bool sticky = any_below(lowest - 1);
    if (round && (sticky || (mant & 1u))) ++mant;
    return std::ldexp(static_cast<double>(mant), lowest - 149);
  }
};

struct Extrema {
  float min = std::numeric_limits<float>::infinity();
  float max = -std::numeric_limits<float>::infinity();
  std::uint64_t finite = 0;
  std::uint64_t nans = 0;
};

Extrema scan_extrema(std::span<const float> values) {
  Extrema total;
  const auto n = static_cast<std::int64_t>(values.size());
#pragma omp parallel
  {
    Extrema local;
#pragma omp for schedule(static) nowait
    for (std::int64_t i = 0; i < n; ++i) {
      const float v = values[static_cast<std::size_t>(i)];
      if (std::isnan(v)) {
        ++local.nans;
      } else if (std::isfinite(v)) {
        ++local.finite;
        local.min = std::min(local.min, v);
        local.max = std::max(local.max, v);
      }
    }
#pragma omp critical
    {
      total.min = std::min(total.min, local.min);
      total.max = std::max(total.max, local.max);
      total.finite += local.finite;
      total.nans += local.nans;
    }
  }
  return total;
}

}  // namespace

void ExactFloatSum::add(float v) {
  const auto bits = std::bit_cast<std::uint32_t>(v);
  const std::uint32_t exponent = (bits >> 23) & 0xFFu;
  if (exponent == 0xFFu) return;  // inf / NaN are not summable
  std::int64_t mant = bits & 0x7FFFFFu;
  std::size_t bucket = 0;
  if (exponent != 0) {
    mant |= std::int64_t{1} << 23;
    bucket = exponent - 1;
  }
  buckets_[bucket] += (bits >> 31) ? -mant : mant;
}

void ExactFloatSum::merge(const ExactFloatSum& other) {
  for (std::size_t k = 0; k < buckets_.size(); ++k) buckets_[k] += other.buckets_[k];
}

double ExactFloatSum::to_double() const {
  BigMagnitude pos, neg;
  for (std::size_t k = 0; k < buckets_.size(); ++k) {
    const std::int64_t b = buckets_[k];
    if (b > 0) pos.add_shifted(static_cast<std::uint64_t>(b), static_cast<int>(k));
    if (b < 0) neg.add_shifted(static_cast<std::uint64_t>(-(b + 1)) + 1, static_cast<int>(k));
  }
  if (pos.less_than(neg)) {
    neg.subtract(pos);
    return -neg.to_double();
  }
  pos.subtract(neg);
  return pos.to_double();
}

std::optional<std::uint64_t> Histogram::bin_of(double v) const {
  if (std::isnan(v) || v < lo || v > hi) return std::nullopt;
  if (v == hi) return bin_count - 1;
  const double pos = (v - lo) / width();
  auto b = static_cast<std::uint64_t>(pos);
  return std::min(b, bin_count - 1);
}

std::uint64_t Histogram::total() const {
  std::uint64_t t = 0;
  for (auto c : counts) t += c;
  return t;
}

double finite_mean(std::span<const float> values) {
  ExactFloatSum total;
  std::uint64_t count = 0;
  const auto n = static_cast<std::int64_t>(values.size());
#pragma omp parallel
  {
    ExactFloatSum local;
    std::uint64_t local_count = 0;
#pragma omp for schedule(static) nowait
    for (std::int64_t i = 0; i < n; ++i) {
      const float v = values[static_cast<std::size_t>(i)];
      if (std::isfinite(v)) {
        local.add(v);
        ++local_count;
      }
    }
#pragma omp critical
    {
      total.merge(local);
      count += local_count;
    }
  }
  if (count == 0) throw EmptyDataError("no finite intensity values");
  return total.to_double() / static_cast<double>(count);
}

double finite_median(std::span<const float> values) {
  std::vector<float> finite;
  finite.reserve(values.size());
  for (float v : values)
    if (std::isfinite(v)) finite.push_back(v);
  if (finite.empty()) throw EmptyDataError("no finite intensity values");

  const std::size_t mid = finite.size() / 2;
  std::nth_element(finite.begin(), finite.begin() + static_cast<std::ptrdiff_t>(mid), finite.end());
  const double upper = finite[mid];
  if (finite.size() % 2 == 1) return upper;
  const double lower = *std::max_element(finite.begin(), finite.begin() + static_cast<std::ptrdiff_t>(mid));
  return (lower + upper) / 2.0;
}

IntensityStats intensity_stats(std::span<const float> values, std::uint64_t bin_count,
                               std::optional<IntensityRange> range) {
  if (bin_count == 0) throw InvalidArgumentError("histogram needs at least one bin");
  const Extrema ext = scan_extrema(values);
  if (ext.finite == 0) throw EmptyDataError("no finite intensity values");

  IntensityStats out;
  out.finite_count = ext.finite;
  out.min = ext.min;
  out.max = ext.max;
  out.vmean = finite_mean(values);
  out.vmedian = finite_median(values);

  double lo = 0.0, hi = 0.0;
  if (range) {
    std::tie(lo, hi) = *range;
    if (!(lo < hi)) throw InvalidRangeError("histogram range requires lo < hi");
  } else if (ext.min < ext.max) {
    lo = ext.min;
    hi = ext.max;
  } else {
    const double c = ext.min;
    const double half = c != 0.0 ? std::abs(c) / 2.0 : 0.5;
    lo = c - half;
    hi = c + half;
  }

  Histogram& h = out.histogram;
  h.bin_count = bin_count;
  h.lo = lo;
  h.hi = hi;
  h.counts.assign(bin_count, 0);
  h.nan_count = ext.nans;

  const auto n = static_cast<std::int64_t>(values.size());
#pragma omp parallel
  {
    std::vector<std::uint64_t> local(bin_count, 0);
    std::uint64_t under = 0, over = 0;
#pragma omp for schedule(static) nowait
    for (std::int64_t i = 0; i < n; ++i) {
      const float v = values[static_cast<std::size_t>(i)];
      if (std::isnan(v)) continue;
      if (v < lo) {
        ++under;
      } else if (v > hi) {
        ++over;
      } else {
        ++local[*h.bin_of(v)];
      }
    }
#pragma omp critical
    {
      for (std::uint64_t b = 0; b < bin_count; ++b) h.counts[b] += local[b];
      h.underflow += under;
      h.overflow += over;
    }
  }

  const auto peak = std::max_element(h.counts.begin(), h.counts.end());
  out.hmax = h.bin_center(static_cast<std::uint64_t>(peak - h.counts.begin()));
  return out;
}

IntensityStats intensity_stats(const VoxelGrid& grid, std::uint64_t bin_count,
                               std::optional<IntensityRange> range) {
  return intensity_stats(grid.data(), bin_count, range);
}

namespace {

void write_rows(std::ofstream& out, const Histogram& h) {
  out << "bin_lo\tbin_hi\tcount\n";
  for (std::uint64_t b = 0; b < h.bin_count; ++b) {
    if (h.counts[b] == 0) continue;
    out << format_double(h.bin_lo(b)) << '\t' << format_double(h.bin_hi(b)) << '\t' << h.counts[b]
        << '\n';
  }
}

std::ofstream open_text(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  return out;
}

}  // namespace

void export_histogram(const Histogram& h, const std::filesystem::path& path) {
  auto out = open_text(path);
  write_rows(out, h);
  if (!out) throw IoError("write failed: " + path.string());
}

void export_histogram(const IntensityStats& stats, const std::filesystem::path& path) {
  auto out = open_text(path);
  write_rows(out, stats.histogram);
  out << "# vmean\t" << format_double(stats.vmean) << '\n';
  out << "# vmedian\t" << format_double(stats.vmedian) << '\n';
  out << "# hmax\t" << format_double(stats.hmax) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace voxclust

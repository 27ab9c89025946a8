#pragma once

// Deterministic synthetic volumes with known ground truth.
//
// intensity(q) = sum of primitive profiles at q (summed in ascending order of
// magnitude) + exponential noise with mean noise_floor. Noise for voxel p is
// drawn from the p-th output of SplitMix64 started at `seed`, so the volume does
// not depend on evaluation order or thread count.

#include <array>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <string>
#include <variant>
#include <vector>

#include "voxclust/volume.hpp"

namespace voxclust {

using Vec3 = std::array<double, 3>;

/// amplitude * exp(-1/2 * sum(((q - center) / sigma)^2))
struct GaussianPeak {
  Vec3 center{};
  Vec3 sigma{1.0, 1.0, 1.0};
  double amplitude = 0.0;
};

/// Double cone around `axis` through `apex`: Gaussian profile (width `thickness`)
/// in the perpendicular distance to the cone surface, cut off at |t| <= extent
/// along the axis. half_angle is in degrees.
struct ConeShell {
  Vec3 apex{};
  Vec3 axis{0.0, 0.0, 1.0};
  double half_angle = 30.0;
  double thickness = 0.1;
  double extent = 1.0;
  double amplitude = 0.0;
};

/// Cylinder of the given length centered on `center`, Gaussian radial profile.
struct Bar {
  Vec3 center{};
  Vec3 axis{0.0, 0.0, 1.0};
  double length = 1.0;
  double radius = 0.1;
  double amplitude = 0.0;
};

/// Streak from `base` along `direction` whose Gaussian radial width grows
/// linearly: sigma(t) = radius + spread * t for 0 <= t <= length.
struct Broomstick {
  Vec3 base{};
  Vec3 direction{0.0, 0.0, 1.0};
  double length = 1.0;
  double spread = 0.0;
  double radius = 0.0;  // 0 = smallest axis spacing
  double amplitude = 0.0;
};

using Primitive = std::variant<GaussianPeak, ConeShell, Bar, Broomstick>;

struct SynthSpec {
  std::array<AxisSpec, 3> axes{};
  double noise_floor = 0.0;
  std::uint64_t seed = 0;
  std::vector<Primitive> primitives;

  /// Throws InvalidArgumentError for bad axes, negative amplitudes or noise, and
  /// OutOfRangeError for an anchor point outside the axes.
  void validate() const;
};

/// Profile value of one primitive at physical position q.
double evaluate(const Primitive& prim, const Vec3& q, const std::array<AxisSpec, 3>& axes);

struct SynthVolume {
  VoxelGrid grid;
  /// Per primitive: ascending linear indices where its profile exceeds noise_floor.
  std::vector<std::vector<std::uint64_t>> masks;
};

SynthVolume generate(const SynthSpec& spec);

/// SplitMix64 output number `index` (0-based) for the given seed.
std::uint64_t splitmix64_at(std::uint64_t seed, std::uint64_t index);

/// Key-value text format, one setting or primitive per line:
///   dims = 201 201 201
///   q1 = -10 10            (likewise q2, q3)
///   noise_floor = 1.0
///   seed = 42
///   gaussian_peak center=x,y,z sigma=a,b,c amplitude=A
///   cone_shell apex=x,y,z axis=x,y,z half_angle=deg thickness=w extent=e amplitude=A
///   bar center=x,y,z axis=x,y,z length=L radius=r amplitude=A
///   broomstick base=x,y,z direction=x,y,z length=L spread=s [radius=r] amplitude=A
/// '#' starts a comment.
SynthSpec parse_synth_spec(std::istream& in);
SynthSpec load_synth_spec(const std::filesystem::path& path);

const char* primitive_name(const Primitive& prim);

}  // namespace voxclust

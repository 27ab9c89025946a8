#include "voxclust/synth.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "voxclust/errors.hpp"

namespace voxclust {

namespace {

double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

Vec3 sub(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }

Vec3 unit(const Vec3& v) {
  const double len = std::sqrt(dot(v, v));
  return {v[0] / len, v[1] / len, v[2] / len};
}

// Axial coordinate t and perpendicular distance of r from the line along u.
std::pair<double, double> axial(const Vec3& r, const Vec3& u) {
  const double t = dot(r, u);
  const double perp2 = dot(r, r) - t * t;
  return {t, std::sqrt(std::max(0.0, perp2))};
}

double gauss(double x, double width) { return std::exp(-0.5 * (x / width) * (x / width)); }

double min_spacing(const std::array<AxisSpec, 3>& axes) {
  return std::min({axes[0].spacing(), axes[1].spacing(), axes[2].spacing()});
}

struct Evaluator {
  const Vec3& q;
  const std::array<AxisSpec, 3>& axes;

  double operator()(const GaussianPeak& g) const {
    double e = 0.0;
    for (std::size_t k = 0; k < 3; ++k) {
      const double z = (q[k] - g.center[k]) / g.sigma[k];
      e += z * z;
    }
    return g.amplitude * std::exp(-0.5 * e);
  }

  double operator()(const ConeShell& c) const {
    const auto [t, rho] = axial(sub(q, c.apex), unit(c.axis));
    if (std::abs(t) > c.extent) return 0.0;
    const double angle = c.half_angle * std::numbers::pi / 180.0;
    const double dist = (rho - std::abs(t) * std::tan(angle)) * std::cos(angle);
    return c.amplitude * gauss(dist, c.thickness);
  }

  double operator()(const Bar& b) const {
    const auto [t, rho] = axial(sub(q, b.center), unit(b.axis));
    if (std::abs(t) > 0.5 * b.length) return 0.0;
    return b.amplitude * gauss(rho, b.radius);
  }

  double operator()(const Broomstick& s) const {
    const auto [t, rho] = axial(sub(q, s.base), unit(s.direction));
    if (t < 0.0 || t > s.length) return 0.0;
    const double r0 = s.radius > 0.0 ? s.radius : min_spacing(axes);
    return s.amplitude * gauss(rho, r0 + s.spread * t);
  }
};

const Vec3& anchor(const Primitive& p) {
  return std::visit(
      [](const auto& prim) -> const Vec3& {
        using T = std::decay_t<decltype(prim)>;
        if constexpr (std::is_same_v<T, GaussianPeak> || std::is_same_v<T, Bar>) return prim.center;
        else if constexpr (std::is_same_v<T, ConeShell>) return prim.apex;
        else return prim.base;
      },
      p);
}

double amplitude(const Primitive& p) {
  return std::visit([](const auto& prim) { return prim.amplitude; }, p);
}

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v))
    throw InvalidArgumentError(std::string(what) + " must be positive");
}

void require_direction(const Vec3& v, const char* what) {
  if (!(dot(v, v) > 0.0) || !std::isfinite(dot(v, v)))
    throw InvalidArgumentError(std::string(what) + " must be a nonzero vector");
}

void check_shape(const Primitive& p) {
  std::visit(
      [](const auto& prim) {
        using T = std::decay_t<decltype(prim)>;
        if constexpr (std::is_same_v<T, GaussianPeak>) {
          for (double s : prim.sigma) require_positive(s, "gaussian_peak sigma");
        } else if constexpr (std::is_same_v<T, ConeShell>) {
          require_direction(prim.axis, "cone_shell axis");
          require_positive(prim.thickness, "cone_shell thickness");
          require_positive(prim.extent, "cone_shell extent");
          if (!(prim.half_angle > 0.0 && prim.half_angle < 90.0))
            throw InvalidArgumentError("cone_shell half_angle must lie in (0, 90) degrees");
        } else if constexpr (std::is_same_v<T, Bar>) {
          require_direction(prim.axis, "bar axis");
          require_positive(prim.length, "bar length");
          require_positive(prim.radius, "bar radius");
        } else {
          require_direction(prim.direction, "broomstick direction");
          require_positive(prim.length, "broomstick length");
          if (!(prim.spread >= 0.0)) throw InvalidArgumentError("broomstick spread must be >= 0");
          if (!(prim.radius >= 0.0)) throw InvalidArgumentError("broomstick radius must be >= 0");
        }
      },
      p);
}

// ---- config parsing ------------------------------------------------------

[[noreturn]] void parse_fail(int line, const std::string& msg) {
  throw FormatError("synth spec line " + std::to_string(line) + ": " + msg);
}

double parse_number(const std::string& s, int line) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  auto res = std::from_chars(s.data(), end, v);
  if (res.ec != std::errc{} || res.ptr != end) parse_fail(line, "not a number: '" + s + "'");
  return v;
}

Vec3 parse_vec3(const std::string& s, int line) {
  Vec3 v{};
  std::size_t start = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    const auto comma = s.find(',', start);
    if ((k < 2) == (comma == std::string::npos)) parse_fail(line, "expected x,y,z: '" + s + "'");
    v[k] = parse_number(s.substr(start, k < 2 ? comma - start : std::string::npos), line);
    start = comma + 1;
  }
  return v;
}

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string tok; in >> tok;) out.push_back(tok);
  return out;
}

class Fields {
 public:
  Fields(const std::vector<std::string>& tokens, int line) : line_(line) {
    for (std::size_t i = 1; i < tokens.size(); ++i) {
      const auto eq = tokens[i].find('=');
      if (eq == std::string::npos || eq == 0) parse_fail(line, "expected key=value: '" + tokens[i] + "'");
      if (!kv_.emplace(tokens[i].substr(0, eq), tokens[i].substr(eq + 1)).second)
        parse_fail(line, "duplicate key '" + tokens[i].substr(0, eq) + "'");
    }
  }

  double number(const std::string& key) { return parse_number(take(key), line_); }
  double number_or(const std::string& key, double fallback) {
    return kv_.count(key) ? number(key) : fallback;
  }
  Vec3 vec(const std::string& key) { return parse_vec3(take(key), line_); }

  void done() const {
    if (!kv_.empty()) parse_fail(line_, "unknown key '" + kv_.begin()->first + "'");
  }

 private:
  std::string take(const std::string& key) {
    auto it = kv_.find(key);
    if (it == kv_.end()) parse_fail(line_, "missing key '" + key + "'");
    std::string v = it->second;
    kv_.erase(it);
    return v;
  }

  std::map<std::string, std::string> kv_;
  int line_;
};

Primitive parse_primitive(const std::vector<std::string>& tokens, int line) {
  Fields f(tokens, line);
  const std::string& kind = tokens[0];
  Primitive out;
  if (kind == "gaussian_peak") {
    GaussianPeak g;
    g.center = f.vec("center");
    g.sigma = f.vec("sigma");
    g.amplitude = f.number("amplitude");
    out = g;
  } else if (kind == "cone_shell") {
    ConeShell c;
    c.apex = f.vec("apex");
    c.axis = f.vec("axis");
    c.half_angle = f.number("half_angle");
    c.thickness = f.number("thickness");
    c.extent = f.number("extent");
    c.amplitude = f.number("amplitude");
    out = c;
  } else if (kind == "bar") {
    Bar b;
    b.center = f.vec("center");
    b.axis = f.vec("axis");
    b.length = f.number("length");
    b.radius = f.number("radius");
    b.amplitude = f.number("amplitude");
    out = b;
  } else if (kind == "broomstick") {
    Broomstick s;
    s.base = f.vec("base");
    s.direction = f.vec("direction");
    s.length = f.number("length");
    s.spread = f.number("spread");
    s.radius = f.number_or("radius", 0.0);
    s.amplitude = f.number("amplitude");
    out = s;
  } else {
    parse_fail(line, "unknown primitive '" + kind + "'");
  }
  f.done();
  return out;
}

}  // namespace

const char* primitive_name(const Primitive& prim) {
  switch (prim.index()) {
    case 0: return "gaussian_peak";
    case 1: return "cone_shell";
    case 2: return "bar";
    default: return "broomstick";
  }
}

void SynthSpec::validate() const {
  for (const auto& a : axes) {
    try {
      a.validate();
    } catch (const Error& e) {
      throw InvalidArgumentError(std::string("synth axis: ") + e.what());
    }
  }
  if (!(noise_floor >= 0.0) || !std::isfinite(noise_floor))
    throw InvalidArgumentError("noise_floor must be finite and >= 0");
  for (std::size_t i = 0; i < primitives.size(); ++i) {
    const auto& p = primitives[i];
    const double a = amplitude(p);
    if (!(a >= 0.0) || !std::isfinite(a))
      throw InvalidArgumentError(std::string(primitive_name(p)) + " amplitude must be >= 0");
    check_shape(p);
    const Vec3& at = anchor(p);
    for (std::size_t k = 0; k < 3; ++k) {
      if (!(at[k] >= axes[k].q_min && at[k] <= axes[k].q_max))
        throw OutOfRangeError("primitive " + std::to_string(i) + " (" + primitive_name(p) +
                              ") lies outside the volume on axis " + std::to_string(k + 1));
    }
  }
}

double evaluate(const Primitive& prim, const Vec3& q, const std::array<AxisSpec, 3>& axes) {
  return std::visit(Evaluator{q, axes}, prim);
}

std::uint64_t splitmix64_at(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + (index + 1) * 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

SynthVolume generate(const SynthSpec& spec) {
  spec.validate();
  const Dims d{spec.axes[0].n, spec.axes[1].n, spec.axes[2].n};
  const std::uint64_t n = voxel_count(d);
  const std::size_t prims = spec.primitives.size();

  std::vector<float> data(n);
  // masks collected per i1 slab, concatenated afterwards in slab order
  std::vector<std::vector<std::vector<std::uint64_t>>> slab_masks(
      d[0], std::vector<std::vector<std::uint64_t>>(prims));

  std::vector<double> q1(d[0]), q2(d[1]), q3(d[2]);
  for (std::uint64_t i = 0; i < d[0]; ++i) q1[i] = index_to_q(spec.axes[0], i);
  for (std::uint64_t i = 0; i < d[1]; ++i) q2[i] = index_to_q(spec.axes[1], i);
  for (std::uint64_t i = 0; i < d[2]; ++i) q3[i] = index_to_q(spec.axes[2], i);

  const auto n1 = static_cast<std::int64_t>(d[0]);
#pragma omp parallel
  {
    std::vector<double> parts(prims);
    std::vector<double> sorted(prims);
#pragma omp for schedule(static)
    for (std::int64_t s1 = 0; s1 < n1; ++s1) {
      const auto i1 = static_cast<std::uint64_t>(s1);
      auto& masks = slab_masks[i1];
      for (std::uint64_t i2 = 0; i2 < d[1]; ++i2) {
        for (std::uint64_t i3 = 0; i3 < d[2]; ++i3) {
          const std::uint64_t p = linear_index(d, i1, i2, i3);
          const Vec3 q{q1[i1], q2[i2], q3[i3]};
          for (std::size_t k = 0; k < prims; ++k) {
            parts[k] = evaluate(spec.primitives[k], q, spec.axes);
            if (parts[k] > spec.noise_floor) masks[k].push_back(p);
          }
          // order-free sum: mirrored volumes come out exactly mirrored
          sorted = parts;
          std::sort(sorted.begin(), sorted.end());
          double total = 0.0;
          for (double v : sorted) total += v;
          if (spec.noise_floor > 0.0) {
            const double u = static_cast<double>(splitmix64_at(spec.seed, p) >> 11) * 0x1.0p-53;
            total += -spec.noise_floor * std::log1p(-u);
          }
          data[p] = static_cast<float>(total);
        }
      }
    }
  }

  std::vector<std::vector<std::uint64_t>> masks(prims);
  for (std::size_t k = 0; k < prims; ++k)
    for (std::uint64_t i1 = 0; i1 < d[0]; ++i1)
      masks[k].insert(masks[k].end(), slab_masks[i1][k].begin(), slab_masks[i1][k].end());

  return {VoxelGrid(spec.axes, std::move(data)), std::move(masks)};
}

SynthSpec parse_synth_spec(std::istream& in) {
  SynthSpec spec;
  bool have_dims = false;
  std::array<bool, 3> have_axis{};
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    auto tokens = split_ws(raw);
    if (tokens.empty()) continue;

    const auto eq_pos = raw.find('=');
    const bool setting = tokens.size() >= 2 && tokens[1] == "=";
    if (!setting) {
      if (eq_pos == std::string::npos) parse_fail(line, "expected 'key = value' or a primitive");
      spec.primitives.push_back(parse_primitive(tokens, line));
      continue;
    }

    const std::string& key = tokens[0];
    const std::vector<std::string> values(tokens.begin() + 2, tokens.end());
    const auto expect = [&](std::size_t count) {
      if (values.size() != count)
        parse_fail(line, "'" + key + "' takes " + std::to_string(count) + " value(s)");
    };
    if (key == "dims") {
      expect(3);
      for (std::size_t k = 0; k < 3; ++k) {
        const double v = parse_number(values[k], line);
        if (!(v >= 2.0) || v != std::floor(v)) parse_fail(line, "dims must be integers >= 2");
        spec.axes[k].n = static_cast<std::uint64_t>(v);
      }
      have_dims = true;
    } else if (key == "q1" || key == "q2" || key == "q3") {
      expect(2);
      const std::size_t k = static_cast<std::size_t>(key[1] - '1');
      spec.axes[k].q_min = parse_number(values[0], line);
      spec.axes[k].q_max = parse_number(values[1], line);
      have_axis[k] = true;
    } else if (key == "noise_floor") {
      expect(1);
      spec.noise_floor = parse_number(values[0], line);
    } else if (key == "seed") {
      expect(1);
      std::uint64_t seed = 0;
      const auto& s = values[0];
      auto res = std::from_chars(s.data(), s.data() + s.size(), seed);
      if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        parse_fail(line, "seed must be an unsigned 64-bit integer");
      spec.seed = seed;
    } else {
      parse_fail(line, "unknown setting '" + key + "'");
    }
  }
  if (!have_dims) throw FormatError("synth spec: missing 'dims'");
  for (std::size_t k = 0; k < 3; ++k)
    if (!have_axis[k]) throw FormatError("synth spec: missing 'q" + std::to_string(k + 1) + "'");
  return spec;
}

SynthSpec load_synth_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  return parse_synth_spec(in);
}

}  // namespace voxclust

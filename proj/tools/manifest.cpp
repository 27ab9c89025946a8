#include "manifest.hpp"

#include <charconv>
#include <fstream>
#include <map>

#include "voxclust/errors.hpp"
#include "voxclust/format.hpp"

namespace voxclust::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc{} || res.ptr != v.data() + v.size())
    throw FormatError("manifest: '" + key + "' is not a number");
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc{} || res.ptr != v.data() + v.size())
    throw FormatError("manifest: '" + key + "' is not an unsigned integer");
  return out;
}

}  // namespace

void write_manifest(const RunManifest& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << "tool = voxclust\n";
  out << "tool_version = " << m.tool_version << '\n';
  out << "command = cluster\n";
  out << "input = " << m.input << '\n';
  out << "eps = " << format_double(m.eps) << '\n';
  out << "min_pts = " << format_double(m.min_pts) << '\n';
  if (m.threshold_frac) {
    out << "threshold_mode = median_fraction\n";
    out << "threshold_frac = " << format_double(*m.threshold_frac) << '\n';
    out << "vmedian = " << format_double(m.vmedian) << '\n';
  } else {
    out << "threshold_mode = absolute\n";
  }
  out << "threshold = " << format_double(m.threshold) << '\n';
  out << "labels = " << m.labels << '\n';
  if (!m.table.empty()) out << "table = " << m.table << '\n';
  out << "clusters = " << m.clusters << '\n';
  out << "noise = " << m.noise << '\n';
  out << "wall_time_s = " << format_double(m.wall_time_s) << '\n';
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

RunManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    const auto t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw FormatError("manifest: malformed line '" + t + "'");
    kv[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
  }
  const auto need = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw FormatError("manifest: missing '" + key + "'");
    return it->second;
  };
  if (need("tool") != "voxclust" || need("command") != "cluster")
    throw FormatError("manifest: not a voxclust cluster manifest");

  RunManifest m;
  m.tool_version = need("tool_version");
  m.input = need("input");
  m.eps = to_double("eps", need("eps"));
  m.min_pts = to_double("min_pts", need("min_pts"));
  const auto& mode = need("threshold_mode");
  if (mode == "median_fraction") {
    m.threshold_frac = to_double("threshold_frac", need("threshold_frac"));
    m.vmedian = to_double("vmedian", need("vmedian"));
  } else if (mode != "absolute") {
    throw FormatError("manifest: unknown threshold_mode '" + mode + "'");
  }
  m.threshold = to_double("threshold", need("threshold"));
  m.labels = need("labels");
  if (kv.count("table")) m.table = kv["table"];
  if (kv.count("clusters")) m.clusters = to_u64("clusters", kv["clusters"]);
  if (kv.count("noise")) m.noise = to_u64("noise", kv["noise"]);
  if (kv.count("wall_time_s")) m.wall_time_s = to_double("wall_time_s", kv["wall_time_s"]);
  return m;
}

}  // namespace voxclust::cli

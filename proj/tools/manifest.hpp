#pragma once

#include <filesystem>
#include <optional>
#include <string>

namespace voxclust::cli {

inline constexpr const char* kToolVersion = "1.0.0";

/// Everything needed to rerun a cluster command bit-identically.
struct RunManifest {
  std::string input;
  double eps = 1.7;
  double min_pts = 80.0;
  std::optional<double> threshold_frac;  // set when THRESHOLD came from the median
  double vmedian = 0.0;                  // only meaningful with threshold_frac
  double threshold = 0.0;                // resolved absolute THRESHOLD
  std::string labels;
  std::string table;  // empty when not written
  std::uint64_t clusters = 0;
  std::uint64_t noise = 0;
  std::string tool_version = kToolVersion;
  double wall_time_s = 0.0;
};

/// Flat `key = value` text, one entry per line.
void write_manifest(const RunManifest& m, const std::filesystem::path& path);
RunManifest read_manifest(const std::filesystem::path& path);

}  // namespace voxclust::cli

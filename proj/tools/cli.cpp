#include "cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>

#include "manifest.hpp"
#include "voxclust/errors.hpp"
#include "voxclust/features.hpp"
#include "voxclust/format.hpp"
#include "voxclust/parallel.hpp"
#include "voxclust/stats.hpp"
#include "voxclust/synth.hpp"
#include "voxclust/volume.hpp"
#include "voxclust/wdbscan.hpp"

namespace voxclust::cli {

namespace {

constexpr std::uint64_t kDefaultBins = 1000000;

std::pair<double, double> parse_interval(const std::string& text, const std::string& flag) {
  const auto colon = text.find(':', 1);
  if (colon == std::string::npos) throw UsageError(flag + " expects lo:hi, got '" + text + "'");
  try {
    std::size_t used_lo = 0, used_hi = 0;
    const std::string lo_s = text.substr(0, colon), hi_s = text.substr(colon + 1);
    const double lo = std::stod(lo_s, &used_lo);
    const double hi = std::stod(hi_s, &used_hi);
    if (used_lo != lo_s.size() || used_hi != hi_s.size()) throw std::invalid_argument(text);
    return {lo, hi};
  } catch (const std::logic_error&) {
    throw UsageError(flag + " expects numeric lo:hi, got '" + text + "'");
  }
}

std::vector<std::uint64_t> parse_breaks(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::stringstream in(text);
  for (std::string item; std::getline(in, item, ',');) {
    if (item.empty() || item.find_first_not_of("0123456789") != std::string::npos)
      throw UsageError("--breaks expects comma-separated ranks, got '" + text + "'");
    out.push_back(std::stoull(item));
  }
  return out;
}

void print_stats(std::ostream& out, const IntensityStats& s, std::uint64_t voxels, std::uint64_t nans) {
  out << "voxels\t" << voxels << '\n';
  out << "finite\t" << s.finite_count << '\n';
  out << "nan\t" << nans << '\n';
  out << "min\t" << format_double(s.min) << '\n';
  out << "max\t" << format_double(s.max) << '\n';
  out << "vmean\t" << format_double(s.vmean) << '\n';
  out << "vmedian\t" << format_double(s.vmedian) << '\n';
  out << "hmax\t" << format_double(s.hmax) << '\n';
  out << "bins\t" << s.histogram.bin_count << '\n';
}

// ---- selection flags shared by select / characterize -----------------------

struct SelectionArgs {
  std::string volume;
  std::string labels;
  std::string ranks;
  std::array<std::string, 3> q;
  std::optional<double> low_pass;
  std::optional<double> high_pass;
  bool scaled = false;
  std::optional<double> threshold;
  std::string manifest;
  std::string out;

  void attach(CLI::App* cmd) {
    cmd->add_option("volume", volume, "VXG1 intensity volume")->required();
    cmd->add_option("labels", labels, "VXL1 ranked label volume")->required();
    cmd->add_option("--ranks", ranks, "rank range lo:hi");
    cmd->add_option("--q1", q[0], "Q1 interval lo:hi");
    cmd->add_option("--q2", q[1], "Q2 interval lo:hi");
    cmd->add_option("--q3", q[2], "Q3 interval lo:hi");
    auto* lp = cmd->add_option("--low-pass", low_pass, "keep intensity <= cutoff");
    auto* hp = cmd->add_option("--high-pass", high_pass, "keep intensity > cutoff");
    lp->excludes(hp);
    cmd->add_flag("--scaled", scaled, "cutoff is in 1/THRESHOLD units");
    auto* th = cmd->add_option("--threshold", threshold, "clustering THRESHOLD");
    auto* mf = cmd->add_option("--manifest", manifest, "take THRESHOLD from a cluster manifest");
    th->excludes(mf);
  }

  std::optional<double> resolved_threshold() const {
    if (threshold) return threshold;
    if (!manifest.empty()) return read_manifest(manifest).threshold;
    return std::nullopt;
  }

  Selection selection(const VoxelGrid& grid) const {
    Selection sel;
    if (!ranks.empty()) {
      const auto [lo, hi] = parse_interval(ranks, "--ranks");
      if (lo < 1 || hi < lo || lo != std::floor(lo) || hi != std::floor(hi) || hi > 4294967295.0)
        throw UsageError("--ranks expects integers 1 <= lo <= hi");
      sel.ranks = RankRange{static_cast<std::uint32_t>(lo), static_cast<std::uint32_t>(hi)};
    }
    if (!q[0].empty() || !q[1].empty() || !q[2].empty()) {
      std::array<QInterval, 3> region{};
      for (std::size_t k = 0; k < 3; ++k) {
        const auto& axis = grid.axis(static_cast<int>(k));
        if (q[k].empty()) {
          region[k] = {axis.q_min, axis.q_max};
        } else {
          const auto [lo, hi] = parse_interval(q[k], "--q" + std::to_string(k + 1));
          region[k] = {lo, hi};
        }
      }
      sel.q_region = region;
    }
    const IntensityUnit unit = scaled ? IntensityUnit::Scaled : IntensityUnit::Raw;
    if (low_pass) sel.filter = IntensityFilter{FilterKind::LowPass, *low_pass, unit};
    if (high_pass) sel.filter = IntensityFilter{FilterKind::HighPass, *high_pass, unit};
    if (scaled && !sel.filter) throw UsageError("--scaled needs --low-pass or --high-pass");
    if (!sel.ranks && !sel.q_region && !sel.filter)
      throw UsageError("give at least one of --ranks, --q1/--q2/--q3, --low-pass, --high-pass");
    return sel;
  }
};

// ---- commands ----------------------------------------------------------------

struct StatsArgs {
  std::string volume;
  std::uint64_t bins = kDefaultBins;
  std::string range;
  std::string out;
};

int cmd_stats(const StatsArgs& a, std::ostream& out) {
  const auto loaded = load_volume(a.volume);
  std::optional<IntensityRange> range;
  if (!a.range.empty()) range = parse_interval(a.range, "--range");
  const auto s = intensity_stats(loaded.grid, a.bins, range);
  print_stats(out, s, loaded.grid.size(), loaded.nan_count);
  if (!a.out.empty()) export_histogram(s, a.out);
  return kOk;
}

struct ClusterArgs {
  std::string volume;
  double eps = 1.7;
  double min_pts = 80.0;
  std::optional<double> threshold_frac;
  std::optional<double> threshold;
  std::string labels;
  std::string manifest;
  std::string table;
  std::string from_manifest;
};

int cmd_cluster(ClusterArgs a, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  RunManifest m;
  if (!a.from_manifest.empty()) {
    const RunManifest prior = read_manifest(a.from_manifest);
    if (!a.volume.empty() || a.threshold || a.threshold_frac)
      throw UsageError("--from-manifest cannot be combined with a volume or threshold flags");
    a.volume = prior.input;
    a.eps = prior.eps;
    a.min_pts = prior.min_pts;
    // the frozen absolute value is reused so a rerun cannot drift
    a.threshold = prior.threshold;
    m.threshold_frac = prior.threshold_frac;
    m.vmedian = prior.vmedian;
    if (a.labels.empty()) a.labels = prior.labels;
    if (a.table.empty()) a.table = prior.table;
  } else {
    if (a.volume.empty()) throw UsageError("cluster needs a volume (or --from-manifest)");
    if (a.threshold && a.threshold_frac)
      throw UsageError("give only one of --threshold-frac and --threshold");
    if (!a.threshold && !a.threshold_frac) a.threshold_frac = 0.3;
  }
  if (a.labels.empty()) throw UsageError("cluster needs --labels");

  const auto loaded = load_volume(a.volume);
  const VoxelGrid& grid = loaded.grid;

  double threshold = 0.0;
  if (a.threshold) {
    threshold = *a.threshold;
  } else {
    m.vmedian = finite_median(grid.data());
    m.threshold_frac = a.threshold_frac;
    threshold = *a.threshold_frac * m.vmedian;
  }
  if (!(threshold > 0.0) || !std::isfinite(threshold))
    throw InvalidArgumentError("resolved THRESHOLD " + format_double(threshold) + " is not positive");

  WdbscanParams params{a.eps, a.min_pts, threshold};
  params.validate();
  auto ranked = rank_clusters(cluster(grid, params), grid);
  save_labels(ranked.labels, a.labels);
  if (!a.table.empty()) write_cluster_table_csv(ranked.table, a.table);

  m.input = a.volume;
  m.eps = a.eps;
  m.min_pts = a.min_pts;
  m.threshold = threshold;
  m.labels = a.labels;
  m.table = a.table;
  m.clusters = ranked.table.records.size();
  m.noise = ranked.table.noise_count;
  m.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!a.manifest.empty()) write_manifest(m, a.manifest);

  out << "clusters\t" << m.clusters << '\n';
  out << "noise\t" << m.noise << '\n';
  if (m.threshold_frac) out << "vmedian\t" << format_double(m.vmedian) << '\n';
  out << "threshold\t" << format_double(threshold) << '\n';
  out << "labels\t" << a.labels << '\n';
  return kOk;
}

struct RankArgs {
  std::string labels;
  std::string volume;
  std::string table;
  std::string sizes;
  std::string relabel;
};

int cmd_rank(const RankArgs& a, std::ostream& out) {
  const auto loaded = load_volume(a.volume);
  auto ranked = rank_clusters(load_labels(a.labels), loaded.grid);
  if (!a.table.empty()) write_cluster_table_csv(ranked.table, a.table);
  if (!a.sizes.empty()) write_size_rank_tsv(ranked.table, a.sizes);
  if (!a.relabel.empty()) save_labels(ranked.labels, a.relabel);
  out << "clusters\t" << ranked.table.records.size() << '\n';
  out << "noise\t" << ranked.table.noise_count << '\n';
  return kOk;
}

struct GroupsArgs {
  std::string labels;
  std::string volume;
  double rel_tol = 0.0;
  double min_gap = 1.0;
  std::string breaks;
  std::string out;
  std::string sizes;
};

void write_group_report(std::ostream& o, const ClusterTable& table, const std::vector<Multiplet>& runs,
                        const std::vector<IndexGroup>& groups, const GroupsArgs& a) {
  o << "clusters\t" << table.records.size() << '\n';
  o << "noise\t" << table.noise_count << '\n';
  o << "rel_tol\t" << format_double(a.rel_tol) << '\n';
  if (a.breaks.empty()) o << "min_gap\t" << format_double(a.min_gap) << '\n';
  else o << "breaks\t" << a.breaks << '\n';
  o << "# multiplets: first_rank last_rank multiplicity size\n";
  for (const auto& r : runs)
    o << "multiplet\t" << r.first_rank << '\t' << r.last_rank << '\t' << r.multiplicity() << '\t'
      << table.records[r.first_rank - 1].size << '\n';
  o << "# groups: first_rank last_rank clusters voxels fraction\n";
  for (const auto& g : groups)
    o << "group\t" << g.first_rank << '\t' << g.last_rank << '\t' << g.cluster_count << '\t'
      << g.voxel_count << '\t' << format_double(g.fraction) << '\n';
}

int cmd_groups(const GroupsArgs& a, std::ostream& out) {
  const auto loaded = load_volume(a.volume);
  auto ranked = rank_clusters(load_labels(a.labels), loaded.grid);
  ClusterTable& table = ranked.table;
  table.group_breaks = a.breaks.empty() ? detect_index_groups(table, a.min_gap) : parse_breaks(a.breaks);
  const auto groups = index_groups(table, table.group_breaks);
  const auto runs = symmetry_groups(table, a.rel_tol);
  write_group_report(out, table, runs, groups, a);
  if (!a.out.empty()) {
    std::ofstream f(a.out, std::ios::trunc);
    if (!f) throw IoError("cannot open for writing: " + a.out);
    write_group_report(f, table, runs, groups, a);
    if (!f.flush()) throw IoError("write failed: " + a.out);
  }
  if (!a.sizes.empty()) write_size_rank_tsv(table, a.sizes);
  return kOk;
}

int cmd_select(const SelectionArgs& a, std::ostream& out) {
  const auto loaded = load_volume(a.volume);
  const auto labels = load_labels(a.labels);
  const auto points = select(loaded.grid, labels, a.selection(loaded.grid), a.resolved_threshold());
  if (!a.out.empty()) write_points_csv(points, a.out);
  out << "points\t" << points.size() << '\n';
  return kOk;
}

struct CharacterizeArgs {
  SelectionArgs sel;
  std::uint64_t bins = kDefaultBins;
  std::string hist;
};

int cmd_characterize(const CharacterizeArgs& a, std::ostream& out) {
  const auto loaded = load_volume(a.sel.volume);
  const auto labels = load_labels(a.sel.labels);
  const auto points =
      select(loaded.grid, labels, a.sel.selection(loaded.grid), a.sel.resolved_threshold());
  if (!a.sel.out.empty()) write_points_csv(points, a.sel.out);
  const auto s = characterize(points, a.bins);
  out << "points\t" << points.size() << '\n';
  print_stats(out, s, points.size(), 0);
  if (!a.hist.empty()) export_histogram(s, a.hist);
  return kOk;
}

struct SynthArgs {
  std::string spec;
  std::string out;
  std::string masks;
  bool no_masks = false;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  const SynthSpec spec = load_synth_spec(a.spec);
  const SynthVolume vol = generate(spec);
  save_volume(vol.grid, a.out);
  out << "voxels\t" << vol.grid.size() << '\n';
  if (a.no_masks) return kOk;

  std::filesystem::path prefix = a.masks;
  if (prefix.empty()) {
    prefix = std::filesystem::path(a.out);
    prefix.replace_extension();
  }
  LabelVolume mask;
  mask.dims = vol.grid.dims();
  for (std::size_t k = 0; k < vol.masks.size(); ++k) {
    mask.labels.assign(vol.grid.size(), 0);
    const auto id = static_cast<std::uint32_t>(k + 1);
    for (auto p : vol.masks[k]) mask.labels[p] = id;
    const std::string path =
        prefix.string() + ".mask" + std::to_string(k + 1) + "." + primitive_name(spec.primitives[k]) + ".vxl";
    save_labels(mask, path);
    out << "mask\t" << id << '\t' << primitive_name(spec.primitives[k]) << '\t' << vol.masks[k].size()
        << '\t' << path << '\n';
  }
  return kOk;
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Usage: return kUsage;
    case ErrorKind::Format: return kFormat;
    case ErrorKind::Io: return kIo;
    case ErrorKind::Data: return kData;
  }
  return kUnexpected;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"voxclust: weighted density-based feature extraction from 3D intensity volumes", "voxclust"};
  app.require_subcommand(1);
  app.fallthrough();
  int threads = 0;
  app.add_option("--threads", threads, "worker threads (0 = all cores); never changes results");

  StatsArgs stats;
  auto* c_stats = app.add_subcommand("stats", "VMEAN / VMEDIAN / HMAX and the intensity histogram");
  c_stats->add_option("volume", stats.volume, "VXG1 volume")->required();
  c_stats->add_option("--bins", stats.bins, "linear histogram bins")->check(CLI::PositiveNumber);
  c_stats->add_option("--range", stats.range, "histogram range lo:hi (default: data min:max)");
  c_stats->add_option("--out", stats.out, "histogram TSV");

  ClusterArgs clus;
  auto* c_cluster = app.add_subcommand("cluster", "intensity-weighted DBSCAN, labels ranked by size");
  c_cluster->add_option("volume", clus.volume, "VXG1 volume");
  c_cluster->add_option("--eps", clus.eps, "neighborhood radius in voxels");
  c_cluster->add_option("--minpts", clus.min_pts, "weighted minimum neighborhood count");
  c_cluster->add_option("--threshold-frac", clus.threshold_frac, "THRESHOLD as a fraction of VMEDIAN (default 0.3)");
  c_cluster->add_option("--threshold", clus.threshold, "absolute THRESHOLD");
  c_cluster->add_option("--labels", clus.labels, "output VXL1 label volume");
  c_cluster->add_option("--manifest", clus.manifest, "output run manifest");
  c_cluster->add_option("--table", clus.table, "output cluster table CSV");
  c_cluster->add_option("--from-manifest", clus.from_manifest, "rerun the command recorded in a manifest");

  RankArgs rank;
  auto* c_rank = app.add_subcommand("rank", "cluster table and size-vs-rank data");
  c_rank->add_option("labels", rank.labels, "VXL1 label volume")->required();
  c_rank->add_option("volume", rank.volume, "VXG1 volume")->required();
  c_rank->add_option("--table", rank.table, "cluster table CSV");
  c_rank->add_option("--sizes", rank.sizes, "size-vs-rank TSV");
  c_rank->add_option("--relabel", rank.relabel, "write rank-ordered labels");

  GroupsArgs groups;
  auto* c_groups = app.add_subcommand("groups", "symmetry multiplets and index groups");
  c_groups->add_option("labels", groups.labels, "VXL1 label volume")->required();
  c_groups->add_option("volume", groups.volume, "VXG1 volume")->required();
  c_groups->add_option("--rel-tol", groups.rel_tol, "relative size tolerance within a multiplet");
  c_groups->add_option("--min-gap", groups.min_gap, "decades of size drop that start a new group");
  c_groups->add_option("--breaks", groups.breaks, "manual group breaks, e.g. 2,27865");
  c_groups->add_option("--out", groups.out, "report file");
  c_groups->add_option("--sizes", groups.sizes, "size-vs-rank TSV");

  SelectionArgs sel;
  auto* c_select = app.add_subcommand("select", "export voxels by rank, Q region and intensity");
  sel.attach(c_select);
  c_select->add_option("--out", sel.out, "point CSV");

  CharacterizeArgs chr;
  auto* c_char = app.add_subcommand("characterize", "intensity statistics of a selection");
  chr.sel.attach(c_char);
  c_char->add_option("--out", chr.sel.out, "point CSV");
  c_char->add_option("--bins", chr.bins, "linear histogram bins")->check(CLI::PositiveNumber);
  c_char->add_option("--hist", chr.hist, "histogram TSV");

  SynthArgs syn;
  auto* c_synth = app.add_subcommand("synth", "generate a synthetic volume from a spec file");
  c_synth->add_option("spec", syn.spec, "synth spec (key = value text)")->required();
  c_synth->add_option("--out", syn.out, "output VXG1 volume")->required();
  c_synth->add_option("--masks", syn.masks, "mask file prefix (default: output path without extension)");
  c_synth->add_flag("--no-masks", syn.no_masks, "skip ground-truth mask files");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kUsage;
  }

  set_thread_count(threads);
  try {
    if (c_stats->parsed()) return cmd_stats(stats, out);
    if (c_cluster->parsed()) return cmd_cluster(clus, out);
    if (c_rank->parsed()) return cmd_rank(rank, out);
    if (c_groups->parsed()) return cmd_groups(groups, out);
    if (c_select->parsed()) return cmd_select(sel, out);
    if (c_char->parsed()) return cmd_characterize(chr, out);
    if (c_synth->parsed()) return cmd_synth(syn, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kUnexpected;
  }
  return kUsage;
}

}  // namespace voxclust::cli

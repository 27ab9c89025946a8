#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <set>

#include "oracles.hpp"
#include "test_util.hpp"
#include "voxclust/errors.hpp"
#include "voxclust/features.hpp"
#include "voxclust/synth.hpp"

using namespace voxclust;

namespace {

ClusterTable table_of(std::vector<std::uint64_t> sizes) {
  ClusterTable t;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    ClusterRecord r;
    r.rank = static_cast<std::uint32_t>(i + 1);
    r.size = sizes[i];
    r.first_index = i;
    t.records.push_back(r);
  }
  return t;
}

LabelVolume labels_for(const VoxelGrid& g, std::vector<std::uint32_t> ids) {
  return LabelVolume{g.dims(), std::move(ids)};
}

VoxelGrid random_grid(std::uint64_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::exponential_distribution<float> expo(1.0f);
  std::vector<float> data(n * n * n);
  for (auto& v : data) v = expo(rng);
  return VoxelGrid({AxisSpec{-10, 10, n}, AxisSpec{-10, 10, n}, AxisSpec{-25, 25, n}}, data);
}

std::vector<std::uint64_t> linears(const std::vector<SelectedPoint>& pts) {
  std::vector<std::uint64_t> out;
  for (const auto& p : pts) out.push_back(p.linear);
  return out;
}

}  // namespace

TEST_CASE("ranking by size with ties broken by first index") {
  // Cluster ids 7 (size 5), 3 (size 9, first at 5), 9 (size 9, first at 14).
  const auto g = testutil::make_grid(2, 3, 5, std::vector<float>(30, 1.0f));
  std::vector<std::uint32_t> ids(30, 0);
  for (int i = 0; i < 5; ++i) ids[static_cast<std::size_t>(i)] = 7;
  for (int i = 5; i < 14; ++i) ids[static_cast<std::size_t>(i)] = 3;
  for (int i = 14; i < 23; ++i) ids[static_cast<std::size_t>(i)] = 9;
  const auto ranked = rank_clusters(labels_for(g, ids), g);
  REQUIRE(ranked.table.records.size() == 3);
  CHECK(ranked.table.records[0].size == 9);
  CHECK(ranked.table.records[0].first_index == 5);
  CHECK(ranked.table.records[1].size == 9);
  CHECK(ranked.table.records[1].first_index == 14);
  CHECK(ranked.table.records[2].size == 5);
  CHECK(ranked.table.noise_count == 7);
  CHECK(ranked.labels.labels[0] == 3);
  CHECK(ranked.labels.labels[5] == 1);
  CHECK(ranked.labels.labels[14] == 2);
  CHECK(ranked.labels.labels[29] == 0);
}

TEST_CASE("cluster records carry bounding boxes and intensity summaries") {
  std::vector<float> data(27, 0.0f);
  const Dims d{3, 3, 3};
  std::vector<std::uint32_t> ids(27, 0);
  ids[linear_index(d, 0, 1, 2)] = 1;
  data[linear_index(d, 0, 1, 2)] = 2.0f;
  ids[linear_index(d, 2, 0, 1)] = 1;
  data[linear_index(d, 2, 0, 1)] = 5.0f;
  const VoxelGrid g({AxisSpec{-1, 1, 3}, AxisSpec{-1, 1, 3}, AxisSpec{-2, 2, 3}}, data);
  const auto r = rank_clusters(labels_for(g, ids), g).table.records.at(0);
  CHECK(r.bbox == std::array<std::uint64_t, 6>{0, 2, 0, 1, 1, 2});
  CHECK(r.q_bbox == std::array<double, 6>{-1, 1, -1, 0, 0, 2});
  CHECK(r.sum_intensity == 7.0);
  CHECK(r.min_intensity == 2.0f);
  CHECK(r.max_intensity == 5.0f);
}

TEST_CASE("all-noise volume gives an empty table") {
  const auto g = testutil::constant_grid(4, 1.0f);
  const auto ranked = rank_clusters(labels_for(g, std::vector<std::uint32_t>(64, 0)), g);
  CHECK(ranked.table.records.empty());
  CHECK(ranked.table.noise_count == 64);
}

TEST_CASE("ranking is idempotent and conserves voxels") {
  const auto g = random_grid(20, 1);
  const auto labels = cluster(g, {1.7, 22, 1.0});
  const auto once = rank_clusters(labels, g);
  const auto twice = rank_clusters(once.labels, g);
  CHECK(twice.labels == once.labels);
  CHECK(once.table.voxel_total() == g.size());
  CHECK(oracle::canonical(once.labels.labels) == oracle::canonical(labels.labels));
  for (std::size_t i = 1; i < once.table.records.size(); ++i)
    CHECK(once.table.records[i - 1].size >= once.table.records[i].size);
}

TEST_CASE("sparse ids beyond the voxel count are handled") {
  const auto g = testutil::make_grid(2, 2, 2, std::vector<float>(8, 1.0f));
  std::vector<std::uint32_t> ids{4000000000u, 4000000000u, 0, 17, 17, 17, 0, 5};
  const auto ranked = rank_clusters(labels_for(g, ids), g);
  CHECK(ranked.labels.labels == std::vector<std::uint32_t>{2, 2, 0, 1, 1, 1, 0, 3});
}

TEST_CASE("rank_clusters rejects mismatched dimensions") {
  const auto g = testutil::constant_grid(3, 1.0f);
  LabelVolume wrong{{3, 3, 2}, std::vector<std::uint32_t>(18, 0)};
  CHECK_THROWS_AS(rank_clusters(wrong, g), DimsMismatchError);
}

TEST_CASE("symmetry_groups") {
  SUBCASE("exact multiplets") {
    const auto groups = symmetry_groups(table_of({100, 100, 100, 100, 40, 40, 7}), 0.0);
    REQUIRE(groups.size() == 3);
    CHECK(groups[0].multiplicity() == 4);
    CHECK(groups[1].multiplicity() == 2);
    CHECK(groups[1].first_rank == 5);
    CHECK(groups[2].multiplicity() == 1);
  }
  SUBCASE("relative tolerance") {
    const auto groups = symmetry_groups(table_of({100, 99, 50}), 0.02);
    REQUIRE(groups.size() == 2);
    CHECK(groups[0].multiplicity() == 2);
    CHECK(groups[1].first_rank == 3);
  }
  SUBCASE("empty table and bad tolerance") {
    CHECK(symmetry_groups(table_of({}), 0.1).empty());
    CHECK_THROWS_AS(symmetry_groups(table_of({1}), -0.1), InvalidArgumentError);
    CHECK_THROWS_AS(symmetry_groups(table_of({1}), 1.0), InvalidArgumentError);
  }
}

TEST_CASE("detect_index_groups") {
  CHECK(detect_index_groups(table_of({10000000, 10000000, 1000, 1000, 10}), 2.0) ==
        std::vector<std::uint64_t>{2, 4});
  std::vector<std::uint64_t> decay;
  double s = 1e6;
  for (int i = 0; i < 60; ++i, s *= 0.9) decay.push_back(static_cast<std::uint64_t>(s));
  CHECK(detect_index_groups(table_of(decay), 1.0).empty());
  // Three tiers of cluster sizes, like a giant region, mid-size features, and noise specks.
  CHECK(detect_index_groups(table_of({1500000, 1490000, 320000, 37000, 36000, 19000, 12600, 97, 40, 3}), 2.0) ==
        std::vector<std::uint64_t>{7});
  CHECK(detect_index_groups(table_of({1500000, 1490000, 320000, 37000, 36000, 19000, 12600, 97, 40, 3}), 0.6) ==
        std::vector<std::uint64_t>{2, 3, 7, 9});
  CHECK_THROWS_AS(detect_index_groups(table_of({1, 2}), 0.0), InvalidArgumentError);
}

TEST_CASE("index_groups summarizes contiguous rank blocks") {
  auto t = table_of({50, 40, 5, 4, 1});
  t.noise_count = 900;
  const auto groups = index_groups(t, {2, 4});
  REQUIRE(groups.size() == 3);
  CHECK(groups[0].cluster_count == 2);
  CHECK(groups[0].voxel_count == 90);
  CHECK(groups[0].fraction == doctest::Approx(0.09));
  CHECK(groups[1].first_rank == 3);
  CHECK(groups[1].last_rank == 4);
  CHECK(groups[2].voxel_count == 1);
  CHECK(index_groups(t, {}).size() == 1);
  CHECK_THROWS_AS(index_groups(t, {3, 3}), InvalidArgumentError);
  CHECK_THROWS_AS(index_groups(t, {9}), InvalidArgumentError);
}

TEST_CASE("eight mirror-symmetric peaks form one multiplet of eight") {
  SynthSpec spec;
  spec.axes = {AxisSpec{-10, 10, 61}, AxisSpec{-10, 10, 61}, AxisSpec{-10, 10, 61}};
  spec.noise_floor = 0.0;
  for (double x : {-5.0, 5.0})
    for (double y : {-5.0, 5.0})
      for (double z : {-5.0, 5.0}) spec.primitives.push_back(GaussianPeak{{x, y, z}, {0.6, 0.6, 0.6}, 100.0});
  const auto synth = generate(spec);
  const auto labels = cluster(synth.grid, {1.7, 30, 1.0});
  const auto ranked = rank_clusters(labels, synth.grid);
  REQUIRE(ranked.table.records.size() == 8);
  for (const auto& r : ranked.table.records) CHECK(r.size == ranked.table.records[0].size);
  const auto groups = symmetry_groups(ranked.table, 0.0);
  REQUIRE(groups.size() == 1);
  CHECK(groups[0].multiplicity() == 8);
}

TEST_CASE("selection") {
  const auto g = random_grid(21, 7);
  const auto ranked = rank_clusters(cluster(g, {1.7, 30, 1.0}), g);
  const auto& labels = ranked.labels;
  REQUIRE(ranked.table.records.size() >= 3);

  SUBCASE("low-pass and high-pass partition a cluster range") {
    Selection lo, hi, all;
    all.ranks = lo.ranks = hi.ranks = RankRange{1, 3};
    lo.filter = IntensityFilter{FilterKind::LowPass, 1.5, IntensityUnit::Scaled};
    hi.filter = IntensityFilter{FilterKind::HighPass, 1.5, IntensityUnit::Scaled};
    const auto a = linears(select(g, labels, lo, 0.5));
    const auto b = linears(select(g, labels, hi, 0.5));
    const auto c = linears(select(g, labels, all));
    std::set<std::uint64_t> joined(a.begin(), a.end());
    joined.insert(b.begin(), b.end());
    CHECK(joined.size() == a.size() + b.size());
    CHECK(std::vector<std::uint64_t>(joined.begin(), joined.end()) == c);
  }
  SUBCASE("raising a low-pass cutoff only adds voxels") {
    std::size_t prev = 0;
    for (double cut : {0.1, 0.5, 1.0, 2.0, 8.0, 1e30}) {
      Selection s;
      s.filter = IntensityFilter{FilterKind::LowPass, cut, IntensityUnit::Raw};
      const auto n = select(g, labels, s).size();
      CHECK(n >= prev);
      prev = n;
    }
    CHECK(prev == g.size());
  }
  SUBCASE("rank range picks exactly those labels") {
    Selection s;
    s.ranks = RankRange{2, 3};
    for (const auto& p : select(g, labels, s)) {
      CHECK(p.rank >= 2);
      CHECK(p.rank <= 3);
    }
    CHECK(select(g, labels, s).size() == ranked.table.records[1].size + ranked.table.records[2].size);
  }
  SUBCASE("Q box selects the index box given by q_to_index") {
    Selection s;
    s.q_region = std::array<QInterval, 3>{QInterval{-4, 4}, QInterval{-7, 7}, QInterval{10, 25}};
    const auto pts = select(g, labels, s);
    const auto& ax = g.axes();
    const std::uint64_t e1 = q_to_index(ax[0], 4) - q_to_index(ax[0], -4) + 1;
    const std::uint64_t e2 = q_to_index(ax[1], 7) - q_to_index(ax[1], -7) + 1;
    const std::uint64_t e3 = q_to_index(ax[2], 25) - q_to_index(ax[2], 10) + 1;
    CHECK(pts.size() == e1 * e2 * e3);
    for (const auto& p : pts) {
      CHECK(p.index[0] >= q_to_index(ax[0], -4));
      CHECK(p.index[2] <= 20);
      CHECK(p.q == g.q_of(p.linear));
    }
  }
  SUBCASE("Q region extending past the volume is clamped, disjoint regions are empty") {
    Selection s;
    s.q_region = std::array<QInterval, 3>{QInterval{-100, 100}, QInterval{-100, 100}, QInterval{-100, 100}};
    CHECK(select(g, labels, s).size() == g.size());
    s.q_region = std::array<QInterval, 3>{QInterval{50, 60}, QInterval{-1, 1}, QInterval{-1, 1}};
    CHECK(select(g, labels, s).empty());
  }
  SUBCASE("scaled intensity needs a threshold") {
    Selection s;
    s.filter = IntensityFilter{FilterKind::LowPass, 1.0, IntensityUnit::Scaled};
    CHECK_THROWS_AS(select(g, labels, s), MissingParameterError);
    for (const auto& p : select(g, labels, s, 2.0)) CHECK(p.scaled_intensity == doctest::Approx(p.intensity / 2.0));
  }
  SUBCASE("invalid selections") {
    CHECK_THROWS_AS(select(g, labels, Selection{}), InvalidArgumentError);
    Selection s;
    s.ranks = RankRange{3, 2};
    CHECK_THROWS_AS(select(g, labels, s), InvalidArgumentError);
  }
}

TEST_CASE("NaN voxels are never selected") {
  std::vector<float> data(8, 1.0f);
  data[3] = std::numeric_limits<float>::quiet_NaN();
  const auto g = testutil::make_grid(2, 2, 2, data);
  const LabelVolume labels{g.dims(), std::vector<std::uint32_t>(8, 0)};
  Selection lo, hi;
  lo.filter = IntensityFilter{FilterKind::LowPass, 5.0, IntensityUnit::Raw};
  hi.filter = IntensityFilter{FilterKind::HighPass, 5.0, IntensityUnit::Raw};
  CHECK(select(g, labels, lo).size() == 7);
  CHECK(select(g, labels, hi).empty());
}

TEST_CASE("characterize") {
  const auto g = random_grid(12, 3);
  const LabelVolume labels{g.dims(), std::vector<std::uint32_t>(g.size(), 0)};

  SUBCASE("single voxel") {
    Selection s;
    s.q_region = std::array<QInterval, 3>{QInterval{-10, -10}, QInterval{-10, -10}, QInterval{-25, -25}};
    const auto pts = select(g, labels, s);
    REQUIRE(pts.size() == 1);
    const auto st = characterize(pts, 10);
    CHECK(st.vmean == static_cast<double>(g.data()[0]));
    CHECK(st.vmedian == static_cast<double>(g.data()[0]));
  }
  SUBCASE("whole volume equals intensity_stats") {
    Selection s;
    s.filter = IntensityFilter{FilterKind::LowPass, 1e30, IntensityUnit::Raw};
    const auto st = characterize(select(g, labels, s), 500);
    const auto ref = intensity_stats(g, 500);
    CHECK(st.vmean == ref.vmean);
    CHECK(st.vmedian == ref.vmedian);
    CHECK(st.hmax == ref.hmax);
    CHECK(st.histogram.counts == ref.histogram.counts);
  }
  SUBCASE("empty selection") {
    CHECK_THROWS_AS(characterize({}, 10), EmptyDataError);
  }
}

TEST_CASE("CSV and TSV writers") {
  testutil::TempDir tmp("feat");
  auto t = table_of({5, 2});
  write_cluster_table_csv(t, tmp / "t.csv");
  write_size_rank_tsv(t, tmp / "s.tsv");
  std::ifstream a(tmp / "t.csv"), b(tmp / "s.tsv");
  std::string line;
  std::getline(a, line);
  CHECK(line ==
        "rank,size,i1min,i1max,i2min,i2max,i3min,i3max,q1min,q1max,q2min,q2max,q3min,q3max,"
        "sum_intensity,min_intensity,max_intensity");
  std::getline(b, line);
  CHECK(line == "rank\tsize");
  std::getline(b, line);
  CHECK(line == "1\t5");

  const auto g = testutil::make_grid(2, 2, 2, std::vector<float>(8, 0.5f));
  Selection s;
  s.ranks = RankRange{1, 1};
  const LabelVolume labels{g.dims(), {1, 0, 0, 0, 0, 0, 0, 0}};
  write_points_csv(select(g, labels, s), tmp / "p.csv");
  std::ifstream p(tmp / "p.csv");
  std::getline(p, line);
  CHECK(line == "i1,i2,i3,q1,q2,q3,intensity,scaled_intensity,rank");
  std::getline(p, line);
  CHECK(line == "0,0,0,0,0,0,0.5,nan,1");
  CHECK_THROWS_AS(write_size_rank_tsv(t, tmp / "x" / "y.tsv"), IoError);
}

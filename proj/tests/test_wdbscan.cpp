#include <doctest.h>

#include <cmath>
#include <deque>
#include <limits>
#include <random>
#include <set>

#include "oracles.hpp"
#include "test_util.hpp"
#include "voxclust/errors.hpp"
#include "voxclust/parallel.hpp"
#include "voxclust/wdbscan.hpp"

using namespace voxclust;

namespace {

oracle::Grid to_oracle(const VoxelGrid& g) {
  const auto d = g.dims();
  return {static_cast<int>(d[0]), static_cast<int>(d[1]), static_cast<int>(d[2]),
          std::vector<float>(g.data().begin(), g.data().end())};
}

VoxelGrid random_grid(std::mt19937_64& rng, int max_n, double nan_fraction, float bright_scale) {
  std::uniform_int_distribution<int> dim(1, max_n);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::exponential_distribution<float> expo(1.0f);
  std::uint64_t n1 = std::max(2, dim(rng)), n2 = std::max(2, dim(rng)), n3 = std::max(2, dim(rng));
  std::vector<float> data(n1 * n2 * n3);
  for (auto& v : data) {
    const double r = u(rng);
    if (r < nan_fraction) v = std::numeric_limits<float>::quiet_NaN();
    else v = expo(rng) * (u(rng) < 0.1 ? bright_scale : 1.0f);
  }
  return testutil::make_grid(n1, n2, n3, std::move(data));
}

bool is_partition(const LabelVolume& a, const LabelVolume& b) {
  return oracle::canonical(a.labels) == oracle::canonical(b.labels);
}

}  // namespace

TEST_CASE("stencil sizes") {
  CHECK(build_stencil(0.5).size() == 0);
  CHECK(build_stencil(1.0).size() == 6);
  CHECK(build_stencil(1.2).size() == 6);
  CHECK(build_stencil(1.4142).size() == 18);
  CHECK(build_stencil(1.5).size() == 18);
  CHECK(build_stencil(1.7).size() == 18);
  CHECK(build_stencil(1.7320).size() == 26);
  CHECK(build_stencil(1.8).size() == 26);
  CHECK(build_stencil(2.0).size() == 32);
  CHECK_THROWS_AS(build_stencil(0.0), InvalidArgumentError);
  CHECK_THROWS_AS(build_stencil(-1.0), InvalidArgumentError);
}

TEST_CASE("stencil is symmetric, excludes the origin and is lexicographically sorted") {
  for (double eps : {1.0, 1.7, 2.5, 3.2}) {
    const auto st = build_stencil(eps);
    const std::set<Offset> all(st.offsets.begin(), st.offsets.end());
    CHECK(all.size() == st.size());
    CHECK(std::is_sorted(st.offsets.begin(), st.offsets.end()));
    CHECK(all.count(Offset{0, 0, 0}) == 0);
    for (const auto& o : st.offsets) CHECK(all.count(Offset{-o[0], -o[1], -o[2]}) == 1);
  }
}

TEST_CASE("weight function") {
  CHECK(weight(0.0f, 1.0) == 1.0);
  CHECK(weight(0.99f, 1.0) == 1.0);
  CHECK(weight(1.0f, 1.0) == 1.0);
  CHECK(weight(5.0f, 1.0) == 5.0);
  CHECK(weight(std::numeric_limits<float>::quiet_NaN(), 1.0) == 0.0);
  CHECK(weight(-3.0f, 1.0) == 1.0);
}

TEST_CASE("parameter validation") {
  CHECK_NOTHROW(WdbscanParams{}.validate());
  CHECK_THROWS_AS((WdbscanParams{0.0, 10, 1}.validate()), InvalidArgumentError);
  CHECK_THROWS_AS((WdbscanParams{1.0, 0, 1}.validate()), InvalidArgumentError);
  CHECK_THROWS_AS((WdbscanParams{1.0, 10, -1}.validate()), InvalidArgumentError);
  CHECK_THROWS_AS((WdbscanParams{1.0, 10, std::nan("")}.validate()), InvalidArgumentError);
}

TEST_CASE("all-zero 10^3 grid has no cores at min_pts 80") {
  const auto g = testutil::constant_grid(10, 0.0f);
  const auto cores = classify_cores(g, {1.7, 80, 1.0});
  CHECK(std::count(cores.begin(), cores.end(), 1) == 0);
  const auto labels = cluster(g, {1.7, 80, 1.0});
  CHECK(std::all_of(labels.labels.begin(), labels.labels.end(), [](auto l) { return l == 0; }));
}

TEST_CASE("one bright voxel in a zero 9^3 grid") {
  std::vector<float> data(729, 0.0f);
  data[linear_index({9, 9, 9}, 4, 4, 4)] = 1000.0f;
  const auto g = testutil::make_grid(9, 9, 9, data);
  const WdbscanParams p{1.7, 80, 1.0};
  const auto cores = classify_cores(g, p);
  const auto expect = oracle::cores(to_oracle(g), p.eps, p.min_pts, p.threshold);
  CHECK(cores == expect);
  // The bright voxel and its 18 stencil neighbors are core, nothing else.
  CHECK(std::count(cores.begin(), cores.end(), 1) == 19);
  const auto labels = cluster(g, p);
  std::set<std::uint32_t> ids(labels.labels.begin(), labels.labels.end());
  CHECK(ids == std::set<std::uint32_t>{0, 1});
}

TEST_CASE("all-NaN grid has no cores and no clusters") {
  const auto g = testutil::constant_grid(6, std::numeric_limits<float>::quiet_NaN());
  const auto cores = classify_cores(g, {1.0, 0.5, 1.0});
  CHECK(std::count(cores.begin(), cores.end(), 1) == 0);
  const auto labels = cluster(g, {1.0, 0.5, 1.0});
  CHECK(std::all_of(labels.labels.begin(), labels.labels.end(), [](auto l) { return l == 0; }));
}

TEST_CASE("two separated bright blocks give exactly two clusters") {
  std::vector<float> data(20 * 20 * 20, 0.0f);
  const Dims d{20, 20, 20};
  for (std::uint64_t a = 0; a < 3; ++a)
    for (std::uint64_t b = 0; b < 3; ++b)
      for (std::uint64_t c = 0; c < 3; ++c) {
        data[linear_index(d, 2 + a, 2 + b, 2 + c)] = 100.0f;
        data[linear_index(d, 14 + a, 14 + b, 14 + c)] = 100.0f;
      }
  const auto g = testutil::make_grid(20, 20, 20, data);
  const auto labels = cluster(g, {1.7, 200, 1.0});
  std::set<std::uint32_t> ids(labels.labels.begin(), labels.labels.end());
  CHECK(ids == std::set<std::uint32_t>{0, 1, 2});
  CHECK(labels.labels[linear_index(d, 3, 3, 3)] == 1);
  CHECK(labels.labels[linear_index(d, 15, 15, 15)] == 2);
}

TEST_CASE("uniform grid above min_pts is a single cluster") {
  const auto g = testutil::constant_grid(8, 1.0f);
  const auto labels = cluster(g, {1.0, 4, 1.0});
  CHECK(std::all_of(labels.labels.begin(), labels.labels.end(), [](auto l) { return l == 1; }));
}

TEST_CASE("border voxel joins the adjacent core with the smallest index") {
  // Two core runs along one line, separated by a dim voxel that touches both.
  std::vector<float> data(2 * 2 * 9, std::numeric_limits<float>::quiet_NaN());
  const Dims d{2, 2, 9};
  for (std::uint64_t c : {0u, 1u, 2u, 3u, 5u, 6u, 7u, 8u}) {
    data[linear_index(d, 0, 0, c)] = 20.0f;
    data[linear_index(d, 1, 0, c)] = 10.0f;
  }
  data[linear_index(d, 0, 0, 4)] = 0.0f;
  const auto g = testutil::make_grid(2, 2, 9, data);
  const WdbscanParams p{1.0, 45, 1.0};
  const auto cores = classify_cores(g, p);
  CHECK(cores[linear_index(d, 0, 0, 3)] == 1);
  CHECK(cores[linear_index(d, 0, 0, 5)] == 1);
  CHECK(cores[linear_index(d, 0, 0, 4)] == 0);
  const auto labels = cluster(g, p);
  CHECK(labels.labels[linear_index(d, 0, 0, 3)] == 1);
  CHECK(labels.labels[linear_index(d, 0, 0, 5)] == 2);
  CHECK(labels.labels[linear_index(d, 0, 0, 4)] == 1);
  CHECK(labels.labels[linear_index(d, 1, 1, 4)] == 0);
}

TEST_CASE("unweighted clustering equals brute-force DBSCAN") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> mp(1.0, 12.0);
  for (int trial = 0; trial < 60; ++trial) {
    const auto g = random_grid(rng, 9, 0.05, 1.0f);
    const double eps = std::array{1.0, 1.5, 1.8, 2.0}[trial % 4];
    const WdbscanParams p{eps, std::floor(mp(rng)), 1e30};
    const auto labels = cluster(g, p);
    REQUIRE(labels.labels == oracle::dbscan(to_oracle(g), eps, p.min_pts, p.threshold));
  }
}

TEST_CASE("weighted clustering equals brute-force DBSCAN") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> mp(2.0, 40.0);
  for (int trial = 0; trial < 60; ++trial) {
    const auto g = random_grid(rng, 9, 0.05, 30.0f);
    const double eps = std::array{1.0, 1.5, 1.8}[trial % 3];
    const WdbscanParams p{eps, mp(rng), 0.5};
    CHECK(classify_cores(g, p) == oracle::cores(to_oracle(g), eps, p.min_pts, p.threshold));
    REQUIRE(cluster(g, p).labels == oracle::dbscan(to_oracle(g), eps, p.min_pts, p.threshold));
  }
}

TEST_CASE("core components match a BFS over the core graph") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const auto g = random_grid(rng, 14, 0.0, 20.0f);
    const WdbscanParams p{1.7, 25, 0.8};
    const auto cores = classify_cores(g, p);
    const auto labels = cluster(g, p);
    const auto og = to_oracle(g);
    std::vector<std::uint32_t> comp(g.size(), 0);
    std::uint32_t next = 0;
    for (std::size_t s = 0; s < g.size(); ++s) {
      if (!cores[s] || comp[s]) continue;
      comp[s] = ++next;
      std::deque<std::size_t> q{s};
      while (!q.empty()) {
        auto u = q.front();
        q.pop_front();
        for (auto v : oracle::neighbors(og, u, p.eps))
          if (cores[v] && !comp[v]) {
            comp[v] = next;
            q.push_back(v);
          }
      }
    }
    for (std::size_t i = 0; i < g.size(); ++i)
      if (cores[i]) REQUIRE(labels.labels[i] == comp[i]);
  }
}

TEST_CASE("raising min_pts never grows the core set") {
  std::mt19937_64 rng(12);
  const auto g = random_grid(rng, 16, 0.02, 10.0f);
  std::vector<std::uint8_t> prev(g.size(), 1);
  for (double mp : {1.0, 5.0, 10.0, 19.0, 30.0, 60.0, 120.0}) {
    const auto cores = classify_cores(g, {1.7, mp, 1.0});
    for (std::size_t i = 0; i < g.size(); ++i) REQUIRE(cores[i] <= prev[i]);
    prev = cores;
  }
}

TEST_CASE("scaling intensities and threshold together leaves labels unchanged") {
  std::mt19937_64 rng(21);
  const auto g = random_grid(rng, 14, 0.02, 10.0f);
  std::vector<float> scaled(g.data().begin(), g.data().end());
  for (auto& v : scaled) v *= 4.0f;
  const VoxelGrid g4(g.axes(), scaled);
  CHECK(cluster(g, {1.7, 30, 0.7}) == cluster(g4, {1.7, 30, 2.8}));
}

TEST_CASE("labels do not depend on the thread count") {
  std::mt19937_64 rng(31);
  const auto g = random_grid(rng, 30, 0.01, 10.0f);
  set_thread_count(1);
  const auto one = cluster(g, {1.7, 25, 0.9});
  set_thread_count(8);
  const auto eight = cluster(g, {1.7, 25, 0.9});
  set_thread_count(0);
  CHECK(one == eight);
}

TEST_CASE("relabeling is a partition-preserving no-op for cluster ids") {
  std::mt19937_64 rng(41);
  const auto g = random_grid(rng, 12, 0.0, 10.0f);
  const auto a = cluster(g, {1.5, 12, 1.0});
  auto b = a;
  for (auto& l : b.labels)
    if (l) l += 1000;
  CHECK(is_partition(a, b));
}

TEST_CASE("VXL1 round trip and errors") {
  testutil::TempDir tmp("wdb");
  std::mt19937_64 rng(51);
  const auto g = random_grid(rng, 12, 0.0, 10.0f);
  const auto labels = cluster(g, {1.5, 10, 1.0});
  save_labels(labels, tmp / "l.vxl");
  CHECK(load_labels(tmp / "l.vxl") == labels);
  CHECK_THROWS_AS(load_labels(tmp / "absent.vxl"), IoError);
  {
    std::ofstream out(tmp / "bad.vxl", std::ios::binary);
    out << "VXG1garbage-garbage-garbage-garbage";
  }
  CHECK_THROWS_AS(load_labels(tmp / "bad.vxl"), FormatError);
  const auto bytes = testutil::read_bytes(tmp / "l.vxl");
  {
    std::ofstream out(tmp / "short.vxl", std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 4));
  }
  CHECK_THROWS_AS(load_labels(tmp / "short.vxl"), CorruptFileError);
}

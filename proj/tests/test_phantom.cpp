#include "test_support.hpp"
#include "ttfe/errors.hpp"
#include "ttfe/phantom.hpp"

#include <doctest.h>

#include <deque>

using namespace ttfe;

namespace {

// Independent classifier: concentric ellipsoids by explicit radii list plus
// the tumor ball, evaluated per voxel with no shared helpers.
std::array<Index, 9> classify_counts(const PhantomSpec& s) {
  std::array<Index, 9> counts{};
  const auto& m = s.meta;
  const double cx = (m.dims[0] - 1) * m.spacing[0] / 2.0;
  const double cy = (m.dims[1] - 1) * m.spacing[1] / 2.0;
  const double cz = (m.dims[2] - 1) * m.spacing[2] / 2.0;
  const double inset[5] = {0.0, s.skin_mm, s.skin_mm + s.skull_mm,
                           s.skin_mm + s.skull_mm + s.csf_mm,
                           s.skin_mm + s.skull_mm + s.csf_mm + s.grey_mm};
  const int shell_label[6] = {0, 1, 2, 3, 5, 4};
  for (int z = 0; z < m.dims[2]; ++z) {
    for (int y = 0; y < m.dims[1]; ++y) {
      for (int x = 0; x < m.dims[0]; ++x) {
        const double px = x * m.spacing[0] - cx;
        const double py = y * m.spacing[1] - cy;
        const double pz = z * m.spacing[2] - cz;
        int depth = 0;
        while (depth < 5) {
          const double a = s.semi_axes_mm[0] - inset[depth];
          const double b = s.semi_axes_mm[1] - inset[depth];
          const double c = s.semi_axes_mm[2] - inset[depth];
          if (px * px / (a * a) + py * py / (b * b) + pz * pz / (c * c) > 1.0) break;
          ++depth;
        }
        int label = shell_label[depth];
        const double tx = px - s.tumor_offset_mm[0];
        const double ty = py - s.tumor_offset_mm[1];
        const double tz = pz - s.tumor_offset_mm[2];
        const double r2 = tx * tx + ty * ty + tz * tz;
        if (r2 <= s.tumor_enhancing_radius_mm * s.tumor_enhancing_radius_mm) {
          label = r2 <= s.tumor_necrotic_radius_mm * s.tumor_necrotic_radius_mm ? 7 : 6;
        }
        ++counts[label];
      }
    }
  }
  return counts;
}

PhantomSpec still() {
  PhantomSpec s;
  s.jitter_semi_axes_mm = 0.0;
  s.jitter_tumor_offset_mm = 0.0;
  s.jitter_tumor_radius_mm = 0.0;
  return s;
}

}  // namespace

TEST_CASE("centered phantom: interior is brain, corner is air") {
  const LabelVolume v = make_phantom(still());
  const std::uint8_t center = v(24, 24, 24);
  CHECK((center == std::uint8_t(Tissue::WhiteMatter) || center == std::uint8_t(Tissue::TumorEnhancing) ||
         center == std::uint8_t(Tissue::TumorNecrotic)));
  CHECK(v(0, 0, 0) == 0);
  CHECK(v(47, 47, 47) == 0);
}

TEST_CASE("phantom is deterministic for a fixed seed") {
  PhantomSpec s;
  s.seed = 1234;
  CHECK(make_phantom(s) == make_phantom(s));
  PhantomSpec t = s;
  t.seed = 1235;
  CHECK_FALSE(make_phantom(s) == make_phantom(t));
}

TEST_CASE("default phantom label counts match an independent classifier") {
  const PhantomSpec s = still();
  const auto expected = classify_counts(s);
  const auto got = make_phantom(s).counts();
  for (int t = 0; t < 9; ++t) CHECK(got[t] == expected[t]);
  CHECK(got[8] == 0);
  for (int t = 0; t < 8; ++t) CHECK(got[t] > 0);

  // the jittered spec reported by jittered_spec is what gets rasterized
  PhantomSpec j;
  j.seed = 99;
  const auto jc = classify_counts(jittered_spec(j));
  const auto jg = make_phantom(j).counts();
  for (int t = 0; t < 9; ++t) CHECK(jg[t] == jc[t]);
}

TEST_CASE("phantom topology: no enclosed air, head is 6-connected") {
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    PhantomSpec s;
    s.seed = seed;
    const LabelVolume v = make_phantom(s);
    const GridMeta& m = v.meta;
    // flood air from the boundary
    std::vector<char> reached(static_cast<std::size_t>(m.size()), 0);
    std::deque<Index> q;
    for (Index i = 0; i < m.size(); ++i) {
      const auto c = m.coords(i);
      const bool edge = (c == 0).any() || (c == m.dims - 1).any();
      if (edge && v.labels[i] == 0) {
        reached[i] = 1;
        q.push_back(i);
      }
    }
    auto expand = [&](auto&& passable) {
      while (!q.empty()) {
        const Index i = q.front();
        q.pop_front();
        const auto c = m.coords(i);
        for (const auto& o : kFaceOffsets) {
          const Eigen::Array3i n = c + Eigen::Array3i(o[0], o[1], o[2]);
          if (!m.contains(n)) continue;
          const Index j = m.index(n);
          if (!reached[j] && passable(j)) {
            reached[j] = 1;
            q.push_back(j);
          }
        }
      }
    };
    expand([&](Index j) { return v.labels[j] == 0; });
    for (Index i = 0; i < m.size(); ++i) {
      if (v.labels[i] == 0) CHECK(reached[i]);
    }
    // every non-air voxel connects to the center voxel through non-air voxels
    std::fill(reached.begin(), reached.end(), 0);
    const Index c = m.index(24, 24, 24);
    reached[c] = 1;
    q.push_back(c);
    expand([&](Index j) { return v.labels[j] != 0; });
    for (Index i = 0; i < m.size(); ++i) {
      if (v.labels[i] != 0) CHECK(reached[i]);
    }
    const auto counts = v.counts();
    CHECK(counts[8] == 0);
  }
}

TEST_CASE("phantom spec invariants") {
  PhantomSpec s = still();
  s.skull_mm = 0.0;
  CHECK_THROWS_AS(make_phantom(s), DataError);
  s = still();
  s.grey_mm = 30.0;
  CHECK_THROWS_AS(make_phantom(s), DataError);
  s = still();
  s.tumor_necrotic_radius_mm = s.tumor_enhancing_radius_mm;
  CHECK_THROWS_AS(make_phantom(s), DataError);
  s = still();
  s.tumor_offset_mm = {0.0, 25.0, 0.0};  // reaches into CSF
  CHECK_THROWS_AS(make_phantom(s), DataError);
  s = still();
  s.semi_axes_mm = {60.0, 42.0, 38.0};  // wider than the grid
  CHECK_THROWS_AS(make_phantom(s), DataError);
}

TEST_CASE("cohort") {
  PhantomSpec zero = still();
  SUBCASE("n=1 without jitter equals make_phantom") {
    const auto c = make_cohort(1, zero, 77);
    REQUIRE(c.size() == 1);
    CHECK(c[0] == make_phantom(zero));
  }
  SUBCASE("repeatable and pairwise distinct with jitter") {
    const PhantomSpec base;
    const auto a = make_cohort(8, base, 2024);
    const auto b = make_cohort(8, base, 2024);
    REQUIRE(a.size() == 8);
    for (int i = 0; i < 8; ++i) CHECK(a[i] == b[i]);
    for (int i = 0; i < 8; ++i)
      for (int j = i + 1; j < 8; ++j) CHECK_FALSE(a[i] == a[j]);
  }
  SUBCASE("n < 1 rejected") { CHECK_THROWS_AS(make_cohort(0, zero, 1), DataError); }
}

TEST_CASE("phantom spec JSON round trip") {
  PhantomSpec s;
  s.seed = 42;
  s.tumor_offset_mm = {1.5, -2.0, 0.25};
  const PhantomSpec back = PhantomSpec::from_json_text(s.to_json_text());
  CHECK(back.to_json_text() == s.to_json_text());
  CHECK(make_phantom(back) == make_phantom(s));
}

#include "test_support.hpp"
#include "ttfe/errors.hpp"
#include "ttfe/features.hpp"
#include "ttfe/phantom.hpp"

#include <doctest.h>

#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

using namespace ttfe;
using ttfe::testing::TempDir;

namespace {

struct Fixture {
  LabelVolume vol;
  ElectrodeLayout layout;
  ScalarField gold;
};

Fixture small_case(int phantom = 0, Axis axis = Axis::AP) {
  PhantomSpec base;
  base.meta = GridMeta(24, 24, 24, 4, 4, 4);
  Fixture f;
  f.vol = make_phantom(cohort_member_spec(base, 11, phantom));
  f.layout = place_pair(f.vol, axis, 12.0);
  f.gold = ScalarField(f.vol.meta, Unit::VoltPerCm);
  std::mt19937_64 rng(phantom);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (Index i = 0; i < f.gold.meta.size(); ++i) f.gold[i] = f.vol.labels[i] ? u(rng) : 0.0;
  return f;
}

// Synthetic dataset with the given number of rows per tissue code.
FeatureDataset counted(const std::map<int, int>& per_tissue) {
  FeatureDataset ds;
  Index n = 0;
  for (const auto& [code, count] : per_tissue) n += count;
  ds.resize(n);
  Index r = 0;
  for (const auto& [code, count] : per_tissue) {
    for (int k = 0; k < count; ++k, ++r) {
      FeatureRow row;
      row.sigma = code * 0.1;
      row.eps = 1.0 + code;
      row.d_e = double(r);
      row.voxel_index = r;
      row.tissue = std::uint8_t(code);
      ds.set_row(r, row);
    }
  }
  return ds;
}

std::map<int, Index> tissue_counts(const FeatureDataset& ds) {
  std::map<int, Index> out;
  for (auto t : ds.tissue) ++out[t];
  return out;
}

}  // namespace

TEST_CASE("every voxel gets a row matching independently computed features") {
  const Fixture f = small_case();
  const TissueTable table = TissueTable::defaults();
  const FeatureDataset ds = extract_features(f.vol, table, f.layout, f.gold, {4, Axis::LR});
  CHECK(ds.rows() == f.vol.meta.size());
  CHECK(ds.case_id.str() == "phantom_004_LR");
  CHECK_NOTHROW(ds.validate());

  const Mask patches = f.layout.patch_mask(f.vol.meta);
  const Eigen::ArrayXd de = ttfe::testing::brute_force_edt(patches, f.vol.meta);
  const Eigen::ArrayXd dc = ttfe::testing::brute_force_edt(f.vol.mask_of(Tissue::Csf), f.vol.meta);
  for (Index r = 0; r < ds.rows(); r += 53) {
    const FeatureRow row = ds.row(r);
    const Index v = row.voxel_index;
    CHECK(row.tissue == f.vol.labels[v]);
    CHECK(row.sigma == table.at(row.tissue).sigma);
    CHECK(row.eps == table.at(row.tissue).eps_rel);
    CHECK(row.d_e == doctest::Approx(de[v]).epsilon(1e-12));
    CHECK(row.d_c == doctest::Approx(dc[v]).epsilon(1e-12));
    CHECK(row.d_l == doctest::Approx(ttfe::testing::brute_segment_distance(
                                         f.vol.meta.world(v), f.layout.center_a, f.layout.center_b))
                         .epsilon(1e-9));
    CHECK(row.target_E == f.gold[v]);
  }
  for (Index r = 0; r < ds.rows(); ++r) {
    if (patches[ds.voxel_index[std::size_t(r)]]) CHECK(ds.x(r, kDe) == 0.0);
    if (ds.tissue[std::size_t(r)] == std::uint8_t(Tissue::Csf)) CHECK(ds.x(r, kDc) == 0.0);
  }
}

TEST_CASE("extract_features rejects mismatched grids and missing CSF") {
  Fixture f = small_case();
  ScalarField wrong(GridMeta(24, 24, 23, 4, 4, 4), Unit::VoltPerCm);
  CHECK_THROWS_AS(extract_features(f.vol, TissueTable::defaults(), f.layout, wrong), DataError);
  for (Index i = 0; i < f.vol.meta.size(); ++i) {
    if (f.vol.labels[i] == std::uint8_t(Tissue::Csf)) f.vol.labels[i] = std::uint8_t(Tissue::GreyMatter);
  }
  CHECK_THROWS_AS(extract_features(f.vol, TissueTable::defaults(), f.layout, f.gold), DataError);
}

TEST_CASE("air subsampling follows the mean-count target") {
  const FeatureDataset ds = counted({{0, 1000}, {1, 100}, {4, 200}, {5, 300}});
  CHECK(air_target_count(ds) == 200);
  const FeatureDataset sub = subsample_air(ds, 5);
  auto counts = tissue_counts(sub);
  CHECK(counts[0] == 200);
  CHECK(counts[1] == 100);
  CHECK(counts[4] == 200);
  CHECK(counts[5] == 300);
  // original relative order and rows
  for (Index r = 1; r < sub.rows(); ++r) CHECK(sub.voxel_index[r - 1] < sub.voxel_index[r]);
  for (Index r = 0; r < sub.rows(); ++r) CHECK(sub.x(r, kDe) == double(sub.voxel_index[r]));

  const FeatureDataset again = subsample_air(ds, 5);
  CHECK(again.voxel_index == sub.voxel_index);
  CHECK(subsample_air(ds, 6).voxel_index != sub.voxel_index);

  // rounding: mean of {1, 2} is 1.5 -> 2
  CHECK(air_target_count(counted({{0, 10}, {2, 1}, {3, 2}})) == 2);
}

TEST_CASE("air subsampling leaves small or air-free datasets alone") {
  const FeatureDataset no_air = counted({{1, 10}, {2, 20}});
  CHECK(subsample_air(no_air, 1).voxel_index == no_air.voxel_index);
  const FeatureDataset little_air = counted({{0, 5}, {1, 10}, {2, 20}});
  CHECK(subsample_air(little_air, 1).voxel_index == little_air.voxel_index);
}

TEST_CASE("air subsampling is uniform across seeds") {
  const FeatureDataset ds = counted({{0, 40}, {1, 10}});
  std::vector<int> hits(40, 0);
  const int trials = 4000;
  for (int s = 0; s < trials; ++s) {
    const FeatureDataset sub = subsample_air(ds, std::uint64_t(s));
    for (Index r = 0; r < sub.rows(); ++r) {
      if (sub.tissue[r] == 0) ++hits[std::size_t(sub.voxel_index[r])];
    }
  }
  // each air row kept with probability 10/40
  for (int h : hits) CHECK(std::abs(h / double(trials) - 0.25) < 0.035);
}

TEST_CASE("LOOCV split partitions the cohort by phantom") {
  std::vector<FeatureDataset> cases;
  for (int p = 0; p < 8; ++p) {
    for (Axis axis : {Axis::AP, Axis::LR}) {
      FeatureDataset ds = counted({{0, 300}, {1, 20 + p}, {2, 40}});
      ds.case_id = {p, axis};
      cases.push_back(ds);
    }
  }
  const LoocvSplit split = split_loocv(cases, 3, 77);
  CHECK(split.train_cases.size() == 14);
  CHECK(split.test.size() == 2);
  std::set<std::string> seen;
  for (const auto& c : split.train_cases) {
    CHECK(c.phantom != 3);
    seen.insert(c.str());
  }
  for (const auto& t : split.test) {
    CHECK(t.case_id.phantom == 3);
    CHECK(t.rows() == 300 + 23 + 40);  // never subsampled
    seen.insert(t.case_id.str());
  }
  CHECK(seen.size() == 16);

  // training rows: each case keeps its non-air rows and round(mean) air rows
  Index expected = 0;
  for (int p = 0; p < 8; ++p) {
    if (p != 3) expected += 2 * ((20 + p) + 40 + Index(std::llround((20 + p + 40) / 2.0)));
  }
  CHECK(split.train.rows() == expected);

  const LoocvSplit again = split_loocv(cases, 3, 77);
  CHECK(again.train.x == split.train.x);

  CHECK_THROWS_AS(split_loocv(cases, 9, 77), DataError);
  const std::vector<FeatureDataset> one(cases.begin(), cases.begin() + 2);
  CHECK_THROWS_AS(split_loocv(one, 0, 77), DataError);
  const std::vector<FeatureDataset> two(cases.begin(), cases.begin() + 4);
  const LoocvSplit s2 = split_loocv(two, 1, 77);
  CHECK(s2.train_cases.size() == 2);
  CHECK(s2.test.size() == 2);
}

TEST_CASE("dataset validation") {
  FeatureDataset ds = counted({{1, 3}});
  CHECK_NOTHROW(ds.validate());
  FeatureDataset dup = ds;
  dup.voxel_index[2] = 0;
  CHECK_THROWS_AS(dup.validate(), DataError);
  FeatureDataset neg = ds;
  neg.x(1, kDl) = -1.0;
  CHECK_THROWS_AS(neg.validate(), DataError);
  FeatureDataset nan = ds;
  nan.y[0] = std::nan("");
  CHECK_THROWS_AS(nan.validate(), DataError);
  CHECK_THROWS_AS(FeatureDataset{}.validate(), DataError);
}

TEST_CASE("feature file and CSV round trip") {
  TempDir dir("features");
  const Fixture f = small_case(2, Axis::LR);
  FeatureDataset ds = extract_features(f.vol, TissueTable::defaults(), f.layout, f.gold, {2, Axis::LR});
  save_features(dir / "a.feat", ds);
  const FeatureDataset back = load_features(dir / "a.feat");
  CHECK(back.case_id == ds.case_id);
  CHECK(back.voxel_index == ds.voxel_index);
  CHECK(back.tissue == ds.tissue);
  // columns are stored as f32
  CHECK((back.x - ds.x.cast<float>().cast<double>()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.y - ds.y.cast<float>().cast<double>()).cwiseAbs().maxCoeff() == 0.0);

  export_features_csv(dir / "a.csv", ds);
  std::ifstream in(dir / "a.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "voxel_index,tissue,sigma,eps,d_e,d_c,d_l,target_E");
  Index n = 0;
  while (std::getline(in, line)) {
    if (n == 100) {
      std::stringstream ss(line);
      std::string cell;
      std::getline(ss, cell, ',');
      CHECK(std::stoll(cell) == ds.voxel_index[100]);
      std::getline(ss, cell, ',');
      CHECK(std::stoi(cell) == ds.tissue[100]);
      for (int c = 0; c < kNumFeatures; ++c) {
        std::getline(ss, cell, ',');
        CHECK(std::stod(cell) == doctest::Approx(ds.x(100, c)).epsilon(1e-8));
      }
    }
    ++n;
  }
  CHECK(n == ds.rows());

  std::ofstream(dir / "bad.feat") << "{\"magic\": \"nope\"}\n";
  CHECK_THROWS_AS(load_features(dir / "bad.feat"), DataError);
  CHECK_THROWS_AS(load_features(dir / "missing.feat"), DataError);
}

TEST_CASE("concatenate and select_rows keep columns aligned") {
  FeatureDataset a = counted({{1, 3}});
  FeatureDataset b = counted({{2, 2}});
  for (auto& v : b.voxel_index) v += 100;
  const FeatureDataset c = concatenate({&a, &b});
  CHECK(c.rows() == 5);
  CHECK(c.voxel_index[3] == 100);
  CHECK(c.tissue[4] == 2);
  const FeatureDataset s = select_rows(c, {4, 0});
  CHECK(s.voxel_index == std::vector<Index>{101, 0});
  CHECK(s.x.row(0) == c.x.row(4));
}

#include "ttfe/features.hpp"

#include "ttfe/errors.hpp"
#include "ttfe/random.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

namespace ttfe {

using nlohmann::json;

std::string CaseId::str() const {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "phantom_%03d_%s", phantom, axis_name(axis).c_str());
  return buf;
}

FeatureRow FeatureDataset::row(Index r) const {
  FeatureRow out;
  out.sigma = x(r, kSigma);
  out.eps = x(r, kEps);
  out.d_e = x(r, kDe);
  out.d_c = x(r, kDc);
  out.d_l = x(r, kDl);
  out.target_E = y[r];
  out.voxel_index = voxel_index[static_cast<std::size_t>(r)];
  out.tissue = tissue[static_cast<std::size_t>(r)];
  return out;
}

void FeatureDataset::resize(Index n) {
  x.resize(n, kNumFeatures);
  y.resize(n);
  voxel_index.resize(static_cast<std::size_t>(n));
  tissue.resize(static_cast<std::size_t>(n));
}

void FeatureDataset::set_row(Index r, const FeatureRow& row) {
  x.row(r) = row.features();
  y[r] = row.target_E;
  voxel_index[static_cast<std::size_t>(r)] = row.voxel_index;
  tissue[static_cast<std::size_t>(r)] = row.tissue;
}

void FeatureDataset::validate() const {
  const Index n = rows();
  if (n == 0) throw DataError("feature dataset " + case_id.str() + " is empty");
  if (y.size() != n || Index(voxel_index.size()) != n || Index(tissue.size()) != n) {
    throw DataError("feature dataset " + case_id.str() + ": column length mismatch");
  }
  if (!x.allFinite() || !y.allFinite()) {
    throw DataError("feature dataset " + case_id.str() + ": non-finite value");
  }
  if ((x.rightCols<3>().array() < 0.0).any() || (y.array() < 0.0).any()) {
    throw DataError("feature dataset " + case_id.str() + ": negative distance or target");
  }
  std::vector<Index> sorted = voxel_index;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw DataError("feature dataset " + case_id.str() + ": duplicate voxel index");
  }
}

FeatureMaps compute_feature_maps(const LabelVolume& vol, const TissueTable& table,
                                 const ElectrodeLayout& layout) {
  auto [sigma, eps] = lookup_properties(table, vol);
  return {std::move(sigma), std::move(eps), electrode_distance(vol.meta, layout),
          csf_distance(vol), midline_distance(vol.meta, layout)};
}

FeatureDataset assemble_features(const LabelVolume& vol, const FeatureMaps& maps,
                                 const ScalarField& gold, CaseId id) {
  if (!(gold.meta == vol.meta)) {
    throw DataError("extract_features: gold field grid does not match the label volume");
  }
  const Index n = vol.meta.size();
  FeatureDataset ds;
  ds.case_id = id;
  ds.resize(n);
  ds.x.col(kSigma) = maps.sigma.values.matrix();
  ds.x.col(kEps) = maps.eps.values.matrix();
  ds.x.col(kDe) = maps.d_e.values.matrix();
  ds.x.col(kDc) = maps.d_c.values.matrix();
  ds.x.col(kDl) = maps.d_l.values.matrix();
  ds.y = gold.values.matrix();
  std::iota(ds.voxel_index.begin(), ds.voxel_index.end(), Index{0});
  std::copy(vol.labels.data(), vol.labels.data() + n, ds.tissue.begin());
  return ds;
}

FeatureDataset extract_features(const LabelVolume& vol, const TissueTable& table,
                                const ElectrodeLayout& layout, const ScalarField& gold,
                                CaseId id) {
  if (!(gold.meta == vol.meta)) {
    throw DataError("extract_features: gold field grid does not match the label volume");
  }
  layout.validate(vol);
  return assemble_features(vol, compute_feature_maps(vol, table, layout), gold, id);
}

Index air_target_count(const FeatureDataset& ds) {
  std::array<Index, 256> counts{};
  for (std::uint8_t t : ds.tissue) ++counts[t];
  Index total = 0;
  int present = 0;
  for (int t = 1; t < 256; ++t) {
    if (counts[t] > 0) {
      total += counts[t];
      ++present;
    }
  }
  if (present == 0) return 0;
  return static_cast<Index>(std::llround(double(total) / present));
}

FeatureDataset select_rows(const FeatureDataset& ds, const std::vector<Index>& rows) {
  FeatureDataset out;
  out.case_id = ds.case_id;
  out.resize(static_cast<Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const Index r = rows[k];
    out.x.row(Index(k)) = ds.x.row(r);
    out.y[Index(k)] = ds.y[r];
    out.voxel_index[k] = ds.voxel_index[static_cast<std::size_t>(r)];
    out.tissue[k] = ds.tissue[static_cast<std::size_t>(r)];
  }
  return out;
}

FeatureDataset subsample_air(const FeatureDataset& ds, std::uint64_t seed) {
  std::vector<Index> air;
  for (Index r = 0; r < ds.rows(); ++r) {
    if (ds.tissue[static_cast<std::size_t>(r)] == 0) air.push_back(r);
  }
  const Index target = air_target_count(ds);
  if (Index(air.size()) <= target) return ds;

  // Partial Fisher-Yates: the first `target` slots become the sample.
  std::mt19937_64 rng(seed);
  for (Index k = 0; k < target; ++k) {
    std::uniform_int_distribution<Index> pick(k, Index(air.size()) - 1);
    std::swap(air[static_cast<std::size_t>(k)], air[static_cast<std::size_t>(pick(rng))]);
  }
  std::vector<char> keep(static_cast<std::size_t>(ds.rows()), 1);
  for (Index r : air) keep[static_cast<std::size_t>(r)] = 0;
  for (Index k = 0; k < target; ++k) keep[static_cast<std::size_t>(air[k])] = 1;

  std::vector<Index> rows;
  rows.reserve(static_cast<std::size_t>(ds.rows() - Index(air.size()) + target));
  for (Index r = 0; r < ds.rows(); ++r) {
    if (keep[static_cast<std::size_t>(r)]) rows.push_back(r);
  }
  return select_rows(ds, rows);
}

FeatureDataset concatenate(const std::vector<const FeatureDataset*>& parts) {
  Index total = 0;
  for (const auto* p : parts) total += p->rows();
  FeatureDataset out;
  if (!parts.empty()) out.case_id = parts.front()->case_id;
  out.resize(total);
  Index at = 0;
  for (const auto* p : parts) {
    const Index n = p->rows();
    out.x.middleRows(at, n) = p->x;
    out.y.segment(at, n) = p->y;
    std::copy(p->voxel_index.begin(), p->voxel_index.end(), out.voxel_index.begin() + at);
    std::copy(p->tissue.begin(), p->tissue.end(), out.tissue.begin() + at);
    at += n;
  }
  return out;
}

LoocvSplit split_loocv(const std::vector<FeatureDataset>& cases, int held_out,
                       std::uint64_t seed) {
  std::set<int> phantoms;
  for (const auto& c : cases) phantoms.insert(c.case_id.phantom);
  if (phantoms.size() < 2) throw DataError("split_loocv: need at least two phantoms");
  if (!phantoms.count(held_out)) {
    throw DataError("split_loocv: unknown phantom id " + std::to_string(held_out));
  }

  LoocvSplit split;
  std::vector<FeatureDataset> reduced;
  reduced.reserve(cases.size());
  for (const auto& c : cases) {
    if (c.case_id.phantom == held_out) {
      split.test.push_back(c);
    } else {
      const std::uint64_t stream =
          static_cast<std::uint64_t>(c.case_id.phantom) * 2 + (c.case_id.axis == Axis::AP ? 0 : 1);
      reduced.push_back(subsample_air(c, derive_seed(seed, stream)));
      split.train_cases.push_back(c.case_id);
    }
  }
  std::vector<const FeatureDataset*> parts;
  for (const auto& r : reduced) parts.push_back(&r);
  split.train = concatenate(parts);
  return split;
}

namespace {

constexpr const char* kFeatureMagic = "TTFEAT1";

template <typename T>
void write_column(std::ofstream& out, const std::vector<T>& col) {
  out.write(reinterpret_cast<const char*>(col.data()),
            static_cast<std::streamsize>(col.size() * sizeof(T)));
}

template <typename T>
std::vector<T> read_column(std::ifstream& in, Index n, const std::string& path) {
  std::vector<T> col(static_cast<std::size_t>(n));
  in.read(reinterpret_cast<char*>(col.data()), static_cast<std::streamsize>(col.size() * sizeof(T)));
  if (in.gcount() != static_cast<std::streamsize>(col.size() * sizeof(T))) {
    throw DataError(path + ": truncated feature column");
  }
  return col;
}

}  // namespace

void save_features(const std::filesystem::path& path, const FeatureDataset& ds) {
  if (ds.voxel_index.empty() == false &&
      *std::max_element(ds.voxel_index.begin(), ds.voxel_index.end()) > Index(UINT32_MAX)) {
    throw DataError("save_features: voxel index exceeds u32 range");
  }
  json cols = json::array();
  for (auto name : kFeatureNames) cols.push_back({{"name", name}, {"dtype", "f32"}});
  cols.push_back({{"name", "target_E"}, {"dtype", "f32"}});
  cols.push_back({{"name", "voxel_index"}, {"dtype", "u32"}});
  cols.push_back({{"name", "tissue"}, {"dtype", "u8"}});
  const json header = {{"magic", kFeatureMagic},
                       {"case_id", ds.case_id.str()},
                       {"phantom", ds.case_id.phantom},
                       {"axis", axis_name(ds.case_id.axis)},
                       {"rows", ds.rows()},
                       {"columns", cols}};

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  const std::string line = header.dump() + "\n";
  out.write(line.data(), static_cast<std::streamsize>(line.size()));
  for (int f = 0; f < kNumFeatures; ++f) {
    std::vector<float> col(static_cast<std::size_t>(ds.rows()));
    for (Index r = 0; r < ds.rows(); ++r) col[static_cast<std::size_t>(r)] = float(ds.x(r, f));
    write_column(out, col);
  }
  std::vector<float> target(static_cast<std::size_t>(ds.rows()));
  for (Index r = 0; r < ds.rows(); ++r) target[static_cast<std::size_t>(r)] = float(ds.y[r]);
  write_column(out, target);
  std::vector<std::uint32_t> vox(ds.voxel_index.begin(), ds.voxel_index.end());
  write_column(out, vox);
  write_column(out, ds.tissue);
  if (!out) throw DataError("write failed for " + path.string());
}

FeatureDataset load_features(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": missing header");
  FeatureDataset ds;
  Index n = 0;
  try {
    const json h = json::parse(line);
    if (h.at("magic").get<std::string>() != kFeatureMagic) throw DataError("bad magic");
    n = h.at("rows").get<Index>();
    ds.case_id.phantom = h.at("phantom").get<int>();
    ds.case_id.axis = parse_axis(h.at("axis").get<std::string>());
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": malformed header: " + e.what());
  }
  if (n < 0) throw DataError(path.string() + ": negative row count");
  ds.resize(n);
  for (int f = 0; f < kNumFeatures; ++f) {
    const auto col = read_column<float>(in, n, path.string());
    for (Index r = 0; r < n; ++r) ds.x(r, f) = col[static_cast<std::size_t>(r)];
  }
  const auto target = read_column<float>(in, n, path.string());
  for (Index r = 0; r < n; ++r) ds.y[r] = target[static_cast<std::size_t>(r)];
  const auto vox = read_column<std::uint32_t>(in, n, path.string());
  std::copy(vox.begin(), vox.end(), ds.voxel_index.begin());
  ds.tissue = read_column<std::uint8_t>(in, n, path.string());
  if (in.peek() != std::char_traits<char>::eof()) {
    throw DataError(path.string() + ": trailing bytes after feature columns");
  }
  return ds;
}

void export_features_csv(const std::filesystem::path& path, const FeatureDataset& ds) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "voxel_index,tissue,sigma,eps,d_e,d_c,d_l,target_E\n";
  out.precision(9);
  for (Index r = 0; r < ds.rows(); ++r) {
    out << ds.voxel_index[static_cast<std::size_t>(r)] << ','
        << int(ds.tissue[static_cast<std::size_t>(r)]);
    for (int f = 0; f < kNumFeatures; ++f) out << ',' << ds.x(r, f);
    out << ',' << ds.y[r] << '\n';
  }
}

}  // namespace ttfe

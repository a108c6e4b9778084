#include "ttfe/electrodes.hpp"

#include "ttfe/distance.hpp"
#include "ttfe/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>

namespace ttfe {

using nlohmann::json;

std::string axis_name(Axis a) { return a == Axis::LR ? "LR" : "AP"; }

Axis parse_axis(const std::string& s) {
  if (s == "LR") return Axis::LR;
  if (s == "AP") return Axis::AP;
  throw DataError("unknown axis '" + s + "' (expected AP or LR)");
}

namespace {

Eigen::Vector3d centroid_mm(const GridMeta& meta, const std::vector<Index>& voxels) {
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  for (Index i : voxels) sum += meta.world(i);
  return sum / static_cast<double>(voxels.size());
}

std::vector<Index> surface_ball(const LabelVolume& vol, const Eigen::Array3i& hit, double radius) {
  const GridMeta& m = vol.meta;
  const Eigen::Vector3d p = m.world(hit);
  const Eigen::Array3i reach = (radius / m.spacing).floor().cast<int>();
  const Eigen::Array3i lo = (hit - reach).max(0);
  const Eigen::Array3i hi = (hit + reach).min(m.dims - 1);
  std::vector<Index> out;
  for (int z = lo[2]; z <= hi[2]; ++z) {
    for (int y = lo[1]; y <= hi[1]; ++y) {
      for (int x = lo[0]; x <= hi[0]; ++x) {
        const Index i = m.index(x, y, z);
        if ((m.world(i) - p).norm() <= radius && is_surface_voxel(vol, i)) out.push_back(i);
      }
    }
  }
  return out;
}

}  // namespace

void ElectrodeLayout::validate(const LabelVolume& vol) const {
  if (patch_a.empty() || patch_b.empty()) throw DataError("electrode layout: empty patch");
  for (const auto* patch : {&patch_a, &patch_b}) {
    for (Index i : *patch) {
      if (i < 0 || i >= vol.meta.size()) throw DataError("electrode layout: voxel out of range");
      if (!is_surface_voxel(vol, i)) {
        throw DataError("electrode layout: voxel " + std::to_string(i) + " is not on the surface");
      }
    }
  }
  std::vector<Index> a = patch_a;
  std::vector<Index> b = patch_b;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::vector<Index> common;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
  if (!common.empty()) throw DataError("electrode layout: patches overlap");
  if (center_a == center_b) throw DataError("electrode layout: coincident patch centers");
}

Mask ElectrodeLayout::patch_mask(const GridMeta& meta) const {
  Mask m = Mask::Zero(meta.size());
  for (Index i : patch_a) m[i] = 1;
  for (Index i : patch_b) m[i] = 1;
  return m;
}

ElectrodeLayout place_pair(const LabelVolume& vol, Axis axis, double patch_radius_mm) {
  if (!(patch_radius_mm > 0.0)) throw DataError("place_pair: patch radius must be positive");
  const GridMeta& m = vol.meta;
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  Index count = 0;
  for (Index i = 0; i < m.size(); ++i) {
    if (vol.labels[i] != 0) {
      sum += m.coords(i).cast<double>().matrix();
      ++count;
    }
  }
  if (count == 0) throw DataError("place_pair: volume has no non-air voxels");
  const Eigen::Array3i c = (sum / double(count)).array().round().cast<int>();

  const int k = axis_dim(axis);
  Eigen::Array3i lo_hit = c;
  Eigen::Array3i hi_hit = c;
  int first = -1;
  int last = -1;
  for (int t = 0; t < m.dims[k]; ++t) {
    Eigen::Array3i p = c;
    p[k] = t;
    if (vol.labels[m.index(p)] != 0) {
      if (first < 0) first = t;
      last = t;
    }
  }
  if (first < 0) throw DataError("place_pair: ray through the centroid misses the head");
  lo_hit[k] = first;
  hi_hit[k] = last;

  ElectrodeLayout layout;
  layout.axis = axis;
  layout.patch_radius_mm = patch_radius_mm;
  layout.patch_a = surface_ball(vol, lo_hit, patch_radius_mm);
  layout.patch_b = surface_ball(vol, hi_hit, patch_radius_mm);
  if (layout.patch_a.empty() || layout.patch_b.empty()) {
    throw DataError("place_pair: electrode patch is empty");
  }
  layout.center_a = centroid_mm(m, layout.patch_a);
  layout.center_b = centroid_mm(m, layout.patch_b);
  layout.validate(vol);
  return layout;
}

ScalarField electrode_distance(const GridMeta& meta, const ElectrodeLayout& layout) {
  return distance_transform(layout.patch_mask(meta), meta);
}

ScalarField csf_distance(const LabelVolume& vol) {
  const Mask csf = vol.mask_of(Tissue::Csf);
  if ((csf == 0).all()) throw DataError("csf_distance: volume contains no CSF voxels");
  return distance_transform(csf, vol.meta);
}

ScalarField midline_distance(const GridMeta& meta, const ElectrodeLayout& layout) {
  return distance_to_segment(meta, layout.center_a, layout.center_b);
}

std::string ElectrodeLayout::to_json_text() const {
  const auto v3 = [](const Eigen::Vector3d& v) { return json::array({v[0], v[1], v[2]}); };
  json j = {{"axis", axis_name(axis)},
            {"patch_a", patch_a},
            {"patch_b", patch_b},
            {"center_a_mm", v3(center_a)},
            {"center_b_mm", v3(center_b)},
            {"patch_radius_mm", patch_radius_mm}};
  return j.dump();
}

ElectrodeLayout ElectrodeLayout::from_json_text(const std::string& text) {
  ElectrodeLayout l;
  try {
    const json j = json::parse(text);
    l.axis = parse_axis(j.at("axis").get<std::string>());
    l.patch_a = j.at("patch_a").get<std::vector<Index>>();
    l.patch_b = j.at("patch_b").get<std::vector<Index>>();
    const auto a = j.at("center_a_mm").get<std::vector<double>>();
    const auto b = j.at("center_b_mm").get<std::vector<double>>();
    if (a.size() != 3 || b.size() != 3) throw DataError("electrode layout: centers need 3 entries");
    l.center_a = Eigen::Vector3d(a[0], a[1], a[2]);
    l.center_b = Eigen::Vector3d(b[0], b[1], b[2]);
    l.patch_radius_mm = j.at("patch_radius_mm").get<double>();
  } catch (const json::exception& e) {
    throw DataError(std::string("electrode layout: ") + e.what());
  }
  return l;
}

}  // namespace ttfe

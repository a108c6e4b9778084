#pragma once

#include "ttfe/volume.hpp"

#include <string>
#include <vector>

namespace ttfe {

/// Array-pair orientation. LR runs along grid x, AP along grid y.
enum class Axis : std::uint8_t { LR, AP };

std::string axis_name(Axis a);
Axis parse_axis(const std::string& s);
inline int axis_dim(Axis a) { return a == Axis::LR ? 0 : 1; }

struct ElectrodeLayout {
  Axis axis = Axis::AP;
  std::vector<Index> patch_a;  ///< sorted voxel indices, low-coordinate side
  std::vector<Index> patch_b;  ///< sorted voxel indices, high-coordinate side
  Eigen::Vector3d center_a = Eigen::Vector3d::Zero();  ///< mm
  Eigen::Vector3d center_b = Eigen::Vector3d::Zero();  ///< mm
  double patch_radius_mm = 15.0;

  /// Patches non-empty, disjoint, in range, on the surface of `vol`; centers distinct.
  void validate(const LabelVolume& vol) const;
  Mask patch_mask(const GridMeta& meta) const;

  std::string to_json_text() const;
  static ElectrodeLayout from_json_text(const std::string& text);
};

/// Cast rays along +/-axis through the head centroid and cover the surface
/// within `patch_radius_mm` of each outermost hit.
ElectrodeLayout place_pair(const LabelVolume& vol, Axis axis, double patch_radius_mm = 15.0);

/// Distance to the nearest patch voxel (d_e).
ScalarField electrode_distance(const GridMeta& meta, const ElectrodeLayout& layout);

/// Distance to the nearest CSF voxel (d_c).
ScalarField csf_distance(const LabelVolume& vol);

/// Distance to the segment joining the two patch centers (d_l).
ScalarField midline_distance(const GridMeta& meta, const ElectrodeLayout& layout);

}  // namespace ttfe

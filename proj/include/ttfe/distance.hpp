#pragma once

#include "ttfe/volume.hpp"

namespace ttfe {

/// Exact Euclidean distance (mm) from each voxel center to the nearest voxel
/// center in `mask`, honouring anisotropic spacing. Separable lower-envelope
/// transform over squared distances, one pass per axis.
ScalarField distance_transform(const Mask& mask, const GridMeta& meta);

/// Distance (mm) from each voxel center to the closed segment [p0, p1].
ScalarField distance_to_segment(const GridMeta& meta, const Eigen::Vector3d& p0,
                                const Eigen::Vector3d& p1);

/// Point-to-closed-segment distance.
double point_segment_distance(const Eigen::Vector3d& p, const Eigen::Vector3d& a,
                              const Eigen::Vector3d& b);

}  // namespace ttfe

#pragma once

#include "ttfe/volume.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace ttfe {

/// Layered-ellipsoid head with a two-zone spherical tumor. All lengths in mm;
/// the head is centered in the grid.
struct PhantomSpec {
  GridMeta meta{48, 48, 48, 2.0, 2.0, 2.0};
  std::uint64_t seed = 0;

  Eigen::Vector3d semi_axes_mm{36.0, 42.0, 38.0};  // LR (x), AP (y), SI (z)
  double skin_mm = 4.0;
  double skull_mm = 5.0;
  double csf_mm = 3.0;
  double grey_mm = 5.0;

  Eigen::Vector3d tumor_offset_mm{6.0, 8.0, 3.0};
  double tumor_enhancing_radius_mm = 7.0;
  double tumor_necrotic_radius_mm = 3.5;

  // Uniform perturbation half-widths applied per phantom.
  double jitter_semi_axes_mm = 2.0;
  double jitter_tumor_offset_mm = 3.0;
  double jitter_tumor_radius_mm = 1.5;

  /// Throws DataError on a violated invariant (before jitter).
  void validate() const;

  std::string to_json_text() const;
  static PhantomSpec from_json_text(const std::string& text);
};

/// Rasterize the phantom. Jitter is drawn from `spec.seed`; a draw that breaks
/// the geometric invariants is redrawn from the same stream.
LabelVolume make_phantom(const PhantomSpec& spec);

/// Spec actually rasterized by make_phantom (base spec plus drawn jitter).
PhantomSpec jittered_spec(const PhantomSpec& spec);

/// `n` phantoms whose seeds derive from `master_seed` and the member index.
std::vector<LabelVolume> make_cohort(int n, const PhantomSpec& base, std::uint64_t master_seed);
PhantomSpec cohort_member_spec(const PhantomSpec& base, std::uint64_t master_seed, int index);

}  // namespace ttfe

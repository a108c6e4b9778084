#include "ttfe/volume.hpp"

#include "ttfe/errors.hpp"

#include <cmath>
#include <string>

namespace ttfe {

std::string_view tissue_name(std::uint8_t code) {
  switch (code) {
    case 0: return "air";
    case 1: return "skin";
    case 2: return "skull";
    case 3: return "csf";
    case 4: return "white_matter";
    case 5: return "grey_matter";
    case 6: return "tumor_enhancing";
    case 7: return "tumor_necrotic";
    case 8: return "resection_cavity";
    default: return "unknown";
  }
}

GridMeta::GridMeta(int nx, int ny, int nz, double sx, double sy, double sz)
    : dims(nx, ny, nz), spacing(sx, sy, sz) {
  validate();
}

GridMeta::GridMeta(const Eigen::Array3i& d, const Eigen::Array3d& s) : dims(d), spacing(s) {
  validate();
}

void GridMeta::validate() const {
  if ((dims < 1).any()) {
    throw DataError("grid dims must be >= 1, got " + std::to_string(dims[0]) + "x" +
                    std::to_string(dims[1]) + "x" + std::to_string(dims[2]));
  }
  if (!spacing.isFinite().all() || (spacing <= 0.0).any()) {
    throw DataError("grid spacing must be positive and finite");
  }
}

std::string_view unit_name(Unit u) {
  switch (u) {
    case Unit::Volt: return "volt";
    case Unit::VoltPerCm: return "volt_per_cm";
    case Unit::Millimeter: return "mm";
    case Unit::Dimensionless: return "dimensionless";
  }
  return "dimensionless";
}

Unit parse_unit(std::string_view name) {
  if (name == "volt") return Unit::Volt;
  if (name == "volt_per_cm") return Unit::VoltPerCm;
  if (name == "mm") return Unit::Millimeter;
  if (name == "dimensionless") return Unit::Dimensionless;
  throw DataError("unsupported unit tag '" + std::string(name) + "'");
}

std::array<Index, kMaxTissueCode + 1> LabelVolume::counts() const {
  std::array<Index, kMaxTissueCode + 1> out{};
  for (Index i = 0; i < labels.size(); ++i) {
    if (labels[i] <= kMaxTissueCode) ++out[labels[i]];
  }
  return out;
}

Mask LabelVolume::mask_of(Tissue t) const {
  return (labels == static_cast<std::uint8_t>(t)).cast<std::uint8_t>();
}

Mask LabelVolume::non_air() const {
  return (labels != static_cast<std::uint8_t>(Tissue::Air)).cast<std::uint8_t>();
}

bool is_surface_voxel(const LabelVolume& vol, Index i) {
  if (vol.is(i, Tissue::Air)) return false;
  const Eigen::Array3i c = vol.meta.coords(i);
  for (const auto& off : kFaceOffsets) {
    const Eigen::Array3i n = c + Eigen::Array3i(off[0], off[1], off[2]);
    if (!vol.meta.contains(n) || vol.is(vol.meta.index(n), Tissue::Air)) return true;
  }
  return false;
}

}  // namespace ttfe

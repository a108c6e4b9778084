#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <string_view>

namespace ttfe {

using Index = std::int64_t;

/// Tissue codes stored per voxel.
enum class Tissue : std::uint8_t {
  Air = 0,
  Skin = 1,
  Skull = 2,
  Csf = 3,
  WhiteMatter = 4,
  GreyMatter = 5,
  TumorEnhancing = 6,
  TumorNecrotic = 7,
  ResectionCavity = 8,
};

inline constexpr std::uint8_t kMaxTissueCode = 8;

inline constexpr bool is_valid_tissue_code(std::uint8_t code) { return code <= kMaxTissueCode; }

std::string_view tissue_name(std::uint8_t code);

/// Grid dimensions and physical spacing (mm). Voxel (x, y, z) has linear index
/// x + nx * (y + ny * z) and its center sits at (x*sx, y*sy, z*sz) mm.
struct GridMeta {
  Eigen::Array3i dims{1, 1, 1};
  Eigen::Array3d spacing{1.0, 1.0, 1.0};

  GridMeta() = default;
  GridMeta(int nx, int ny, int nz, double sx, double sy, double sz);
  GridMeta(const Eigen::Array3i& d, const Eigen::Array3d& s);

  Index size() const { return Index(dims[0]) * dims[1] * dims[2]; }

  Index index(int x, int y, int z) const {
    return Index(x) + Index(dims[0]) * (Index(y) + Index(dims[1]) * z);
  }
  Index index(const Eigen::Array3i& c) const { return index(c[0], c[1], c[2]); }

  Eigen::Array3i coords(Index i) const {
    const Index plane = Index(dims[0]) * dims[1];
    const int z = static_cast<int>(i / plane);
    const Index rem = i - Index(z) * plane;
    const int y = static_cast<int>(rem / dims[0]);
    const int x = static_cast<int>(rem - Index(y) * dims[0]);
    return {x, y, z};
  }

  bool contains(const Eigen::Array3i& c) const {
    return (c >= 0).all() && (c < dims).all();
  }

  /// Voxel-center position in mm.
  Eigen::Vector3d world(Index i) const { return (coords(i).cast<double>() * spacing).matrix(); }
  Eigen::Vector3d world(const Eigen::Array3i& c) const {
    return (c.cast<double>() * spacing).matrix();
  }

  /// Throws DataError unless dims >= 1 and spacing > 0 and finite.
  void validate() const;

  friend bool operator==(const GridMeta& a, const GridMeta& b) {
    return (a.dims == b.dims).all() && (a.spacing == b.spacing).all();
  }
};

enum class Unit : std::uint8_t { Volt, VoltPerCm, Millimeter, Dimensionless };

std::string_view unit_name(Unit u);
Unit parse_unit(std::string_view name);

/// A real value per voxel, x-fastest.
template <typename Scalar>
struct Field {
  using Values = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  GridMeta meta;
  Values values;
  Unit unit = Unit::Dimensionless;

  Field() = default;
  Field(const GridMeta& m, Unit u) : meta(m), values(Values::Zero(m.size())), unit(u) {}
  Field(const GridMeta& m, Values v, Unit u) : meta(m), values(std::move(v)), unit(u) {}

  Scalar& operator()(int x, int y, int z) { return values[meta.index(x, y, z)]; }
  Scalar operator()(int x, int y, int z) const { return values[meta.index(x, y, z)]; }
  Scalar& operator[](Index i) { return values[i]; }
  Scalar operator[](Index i) const { return values[i]; }

  bool all_finite() const { return values.isFinite().all(); }
};

using ScalarField = Field<double>;

/// Boolean voxel set, one byte per voxel (0/1).
using Mask = Eigen::Array<std::uint8_t, Eigen::Dynamic, 1>;

struct LabelVolume {
  using Labels = Eigen::Array<std::uint8_t, Eigen::Dynamic, 1>;

  GridMeta meta;
  Labels labels;

  LabelVolume() = default;
  explicit LabelVolume(const GridMeta& m, Tissue fill = Tissue::Air)
      : meta(m), labels(Labels::Constant(m.size(), static_cast<std::uint8_t>(fill))) {}

  std::uint8_t& operator()(int x, int y, int z) { return labels[meta.index(x, y, z)]; }
  std::uint8_t operator()(int x, int y, int z) const { return labels[meta.index(x, y, z)]; }
  std::uint8_t operator[](Index i) const { return labels[i]; }

  bool is(Index i, Tissue t) const { return labels[i] == static_cast<std::uint8_t>(t); }

  /// Voxel count per tissue code 0..kMaxTissueCode.
  std::array<Index, kMaxTissueCode + 1> counts() const;

  Mask mask_of(Tissue t) const;
  Mask non_air() const;

  friend bool operator==(const LabelVolume& a, const LabelVolume& b) {
    return a.meta == b.meta && a.labels.size() == b.labels.size() &&
           (a.labels == b.labels).all();
  }
};

/// Six face neighbours as index offsets.
inline constexpr std::array<std::array<int, 3>, 6> kFaceOffsets{{
    {-1, 0, 0}, {1, 0, 0}, {0, -1, 0}, {0, 1, 0}, {0, 0, -1}, {0, 0, 1}}};

/// A non-air voxel with at least one face neighbour that is air or outside the grid.
bool is_surface_voxel(const LabelVolume& vol, Index i);

}  // namespace ttfe

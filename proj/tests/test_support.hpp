#pragma once

// Independent reference implementations used as oracles by the tests. Nothing
// here calls into the code paths it checks.

#include "ttfe/electrodes.hpp"
#include "ttfe/tissue.hpp"
#include "ttfe/volume.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <limits>
#include <random>
#include <string>

#include <unistd.h>

namespace ttfe::testing {

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("ttfe_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

/// All-pairs minimum distance from each voxel center to the mask voxels.
inline Eigen::ArrayXd brute_force_edt(const Mask& mask, const GridMeta& m) {
  std::vector<Eigen::Vector3d> seeds;
  for (Index i = 0; i < m.size(); ++i) {
    if (mask[i]) {
      const Eigen::Array3i c = m.coords(i);
      seeds.emplace_back(c[0] * m.spacing[0], c[1] * m.spacing[1], c[2] * m.spacing[2]);
    }
  }
  Eigen::ArrayXd out(m.size());
  for (Index i = 0; i < m.size(); ++i) {
    const Eigen::Array3i c = m.coords(i);
    const Eigen::Vector3d p(c[0] * m.spacing[0], c[1] * m.spacing[1], c[2] * m.spacing[2]);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& s : seeds) best = std::min(best, (p - s).norm());
    out[i] = best;
  }
  return out;
}

/// Closest point on [a, b] by ternary search on the (convex) distance.
inline double brute_segment_distance(const Eigen::Vector3d& p, const Eigen::Vector3d& a,
                                     const Eigen::Vector3d& b) {
  double lo = 0.0;
  double hi = 1.0;
  const auto f = [&](double t) { return (p - (a + t * (b - a))).norm(); };
  for (int it = 0; it < 200; ++it) {
    const double m1 = lo + (hi - lo) / 3.0;
    const double m2 = hi - (hi - lo) / 3.0;
    if (f(m1) < f(m2)) {
      hi = m2;
    } else {
      lo = m1;
    }
  }
  return std::min({f(0.0), f(1.0), f(0.5 * (lo + hi))});
}

/// Synthetic table for tests; values are arbitrary but valid.
inline TissueTable synthetic_table() {
  TissueTable t;
  t.set(0, {0.0, 1.0, "air"});
  t.set(1, {1.0, 10.0, "a"});
  t.set(2, {0.5, 20.0, "b"});
  t.set(3, {2.0, 5.0, "c"});
  t.set(4, {0.25, 40.0, "d"});
  t.set(5, {0.8, 30.0, "e"});
  t.set(6, {0.6, 25.0, "f"});
  t.set(7, {1.5, 8.0, "g"});
  t.set(8, {1.79, 100.0, "h"});
  return t;
}

/// Bar of `label(z)` filling an nx x ny x nz grid; electrodes on the z=0 and
/// z=nz-1 faces.
template <typename LabelOfZ>
inline std::pair<LabelVolume, ElectrodeLayout> bar_case(int nx, int ny, int nz, double spacing,
                                                        LabelOfZ&& label_of_z) {
  LabelVolume vol(GridMeta(nx, ny, nz, spacing, spacing, spacing));
  for (int z = 0; z < nz; ++z)
    for (int y = 0; y < ny; ++y)
      for (int x = 0; x < nx; ++x) vol(x, y, z) = label_of_z(z);
  ElectrodeLayout l;
  l.axis = Axis::AP;
  for (int y = 0; y < ny; ++y) {
    for (int x = 0; x < nx; ++x) {
      l.patch_a.push_back(vol.meta.index(x, y, 0));
      l.patch_b.push_back(vol.meta.index(x, y, nz - 1));
    }
  }
  l.center_a = Eigen::Vector3d((nx - 1) * spacing / 2, (ny - 1) * spacing / 2, 0.0);
  l.center_b = Eigen::Vector3d((nx - 1) * spacing / 2, (ny - 1) * spacing / 2, (nz - 1) * spacing);
  return {std::move(vol), std::move(l)};
}

/// Sphere of a single tissue centered in a cubic grid.
inline LabelVolume sphere_volume(int n, double spacing, double radius_mm, Tissue t) {
  LabelVolume vol(GridMeta(n, n, n, spacing, spacing, spacing));
  const double c = (n - 1) * spacing / 2.0;
  for (Index i = 0; i < vol.meta.size(); ++i) {
    const Eigen::Vector3d p = vol.meta.world(i);
    if ((p - Eigen::Vector3d(c, c, c)).norm() <= radius_mm) vol.labels[i] = std::uint8_t(t);
  }
  return vol;
}

}  // namespace ttfe::testing

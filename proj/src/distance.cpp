#include "ttfe/distance.hpp"

#include "ttfe/errors.hpp"

#include <algorithm>
#include <limits>
#include <vector>

namespace ttfe {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// 1-D squared-distance transform of sampled function f on positions k*h:
// out[p] = min_q f[q] + (h*(p-q))^2. Lower envelope of parabolas.
class LineTransform {
 public:
  void run(const std::vector<double>& f, double h, std::vector<double>& out) {
    const int n = static_cast<int>(f.size());
    v_.resize(static_cast<std::size_t>(n));
    z_.resize(static_cast<std::size_t>(n) + 1);
    out.assign(static_cast<std::size_t>(n), kInf);

    int k = -1;
    for (int q = 0; q < n; ++q) {
      if (f[q] == kInf) continue;
      const double xq = q * h;
      double s = -kInf;
      while (k >= 0) {
        const int vk = v_[k];
        const double xv = vk * h;
        s = ((f[q] + xq * xq) - (f[vk] + xv * xv)) / (2.0 * (xq - xv));
        if (s <= z_[k]) {
          --k;
        } else {
          break;
        }
      }
      ++k;
      v_[k] = q;
      z_[k] = k == 0 ? -kInf : s;
      z_[k + 1] = kInf;
    }
    if (k < 0) return;

    int j = 0;
    for (int p = 0; p < n; ++p) {
      const double xp = p * h;
      while (z_[j + 1] < xp) ++j;
      const double d = xp - v_[j] * h;
      out[p] = f[v_[j]] + d * d;
    }
  }

 private:
  std::vector<int> v_;
  std::vector<double> z_;
};

}  // namespace

ScalarField distance_transform(const Mask& mask, const GridMeta& meta) {
  if (mask.size() != meta.size()) throw DataError("distance_transform: mask size mismatch");
  if ((mask == 0).all()) throw DataError("distance_transform: mask is empty");

  const int nx = meta.dims[0];
  const int ny = meta.dims[1];
  const int nz = meta.dims[2];
  Eigen::ArrayXd d2 = (mask != 0).select(Eigen::ArrayXd::Zero(meta.size()), kInf);

  LineTransform lt;
  std::vector<double> line;
  std::vector<double> out;
  const auto sweep = [&](int n, double h, Index stride, auto&& starts) {
    line.resize(static_cast<std::size_t>(n));
    starts([&](Index base) {
      for (int k = 0; k < n; ++k) line[k] = d2[base + k * stride];
      lt.run(line, h, out);
      for (int k = 0; k < n; ++k) d2[base + k * stride] = out[k];
    });
  };

  const Index sx = 1;
  const Index sy = nx;
  const Index sz = Index(nx) * ny;
  sweep(nx, meta.spacing[0], sx, [&](auto&& f) {
    for (int z = 0; z < nz; ++z)
      for (int y = 0; y < ny; ++y) f(meta.index(0, y, z));
  });
  sweep(ny, meta.spacing[1], sy, [&](auto&& f) {
    for (int z = 0; z < nz; ++z)
      for (int x = 0; x < nx; ++x) f(meta.index(x, 0, z));
  });
  sweep(nz, meta.spacing[2], sz, [&](auto&& f) {
    for (int y = 0; y < ny; ++y)
      for (int x = 0; x < nx; ++x) f(meta.index(x, y, 0));
  });

  return ScalarField(meta, d2.sqrt(), Unit::Millimeter);
}

double point_segment_distance(const Eigen::Vector3d& p, const Eigen::Vector3d& a,
                              const Eigen::Vector3d& b) {
  const Eigen::Vector3d ab = b - a;
  const double t = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

ScalarField distance_to_segment(const GridMeta& meta, const Eigen::Vector3d& p0,
                                const Eigen::Vector3d& p1) {
  if (!p0.allFinite() || !p1.allFinite()) throw DataError("distance_to_segment: non-finite endpoint");
  if (p0 == p1) throw DataError("distance_to_segment: degenerate segment");
  ScalarField out(meta, Unit::Millimeter);
  for (Index i = 0; i < meta.size(); ++i) out[i] = point_segment_distance(meta.world(i), p0, p1);
  return out;
}

}  // namespace ttfe

#include "ttfe/oracle.hpp"

#include "ttfe/errors.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCore>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <deque>
#include <vector>

namespace ttfe {

namespace {

using SpMat = Eigen::SparseMatrix<double, Eigen::RowMajor, std::int64_t>;

double harmonic(double a, double b) { return 2.0 * a * b / (a + b); }

// Face conductance factor A/h per axis, with A the face area and h the
// center spacing.
Eigen::Array3d face_factor(const GridMeta& m) {
  const Eigen::Array3d& s = m.spacing;
  return {s[1] * s[2] / s[0], s[0] * s[2] / s[1], s[0] * s[1] / s[2]};
}

template <typename Fn>
void for_each_neighbor(const GridMeta& m, Index i, Fn&& fn) {
  const Eigen::Array3i c = m.coords(i);
  for (int k = 0; k < 6; ++k) {
    const auto& off = kFaceOffsets[k];
    const Eigen::Array3i n = c + Eigen::Array3i(off[0], off[1], off[2]);
    if (m.contains(n)) fn(m.index(n), k / 2);
  }
}

Mask flood(const GridMeta& m, const Mask& passable, const std::vector<Index>& seeds) {
  Mask seen = Mask::Zero(m.size());
  std::deque<Index> queue;
  for (Index s : seeds) {
    if (passable[s] && !seen[s]) {
      seen[s] = 1;
      queue.push_back(s);
    }
  }
  while (!queue.empty()) {
    const Index i = queue.front();
    queue.pop_front();
    for_each_neighbor(m, i, [&](Index n, int) {
      if (passable[n] && !seen[n]) {
        seen[n] = 1;
        queue.push_back(n);
      }
    });
  }
  return seen;
}

}  // namespace

void SolveParams::validate() const {
  if (!std::isfinite(voltage_a) || !std::isfinite(voltage_b) || voltage_a == voltage_b) {
    throw DataError("solve params: electrode voltages must be finite and distinct");
  }
  if (!(rel_residual_tol > 0.0)) throw DataError("solve params: tolerance must be positive");
  if (max_iterations < 0) throw DataError("solve params: max_iterations must be >= 0");
  if (!(sigma_floor >= 0.0)) throw DataError("solve params: sigma_floor must be >= 0");
}

std::string PotentialSolution::log_json() const {
  nlohmann::json j = {{"iterations", iterations},
                      {"final_relative_residual", final_residual},
                      {"n_unknowns", n_unknowns},
                      {"wall_seconds", wall_seconds}};
  return j.dump(2);
}

PotentialSolution solve_potential(const LabelVolume& vol, const TissueTable& table,
                                  const ElectrodeLayout& layout, const SolveParams& params) {
  layout.validate(vol);
  return solve_potential(lookup_properties(table, vol).first, layout, params);
}

PotentialSolution solve_potential(const ScalarField& sigma, const ElectrodeLayout& layout,
                                  const SolveParams& params) {
  // Equal voltages are accepted here; the solution is then constant.
  if (!std::isfinite(params.voltage_a) || !std::isfinite(params.voltage_b) ||
      !(params.rel_residual_tol > 0.0) || params.max_iterations < 0 ||
      !(params.sigma_floor >= 0.0)) {
    throw DataError("solve params: invalid voltages, tolerance, budget or sigma floor");
  }
  const auto t0 = std::chrono::steady_clock::now();
  const GridMeta& m = sigma.meta;
  const Index n = m.size();

  const Mask conductive = (sigma.values >= params.sigma_floor && sigma.values > 0.0)
                              .cast<std::uint8_t>();
  Eigen::ArrayXd fixed = Eigen::ArrayXd::Zero(n);
  Mask dirichlet = Mask::Zero(n);
  for (const auto& [patch, volts] :
       {std::pair{&layout.patch_a, params.voltage_a}, std::pair{&layout.patch_b, params.voltage_b}}) {
    if (patch->empty()) throw DataError("solve_potential: empty electrode patch");
    for (Index i : *patch) {
      if (i < 0 || i >= n) throw DataError("solve_potential: patch voxel out of range");
      if (!conductive[i]) throw DataError("solve_potential: electrode voxel is not conductive");
      dirichlet[i] = 1;
      fixed[i] = volts;
    }
  }

  const Mask from_a = flood(m, conductive, layout.patch_a);
  bool connected = false;
  for (Index i : layout.patch_b) connected = connected || from_a[i];
  if (!connected) {
    throw NumericalError("solve_potential: no conductive path between the electrode patches");
  }
  std::vector<Index> all_patches = layout.patch_a;
  all_patches.insert(all_patches.end(), layout.patch_b.begin(), layout.patch_b.end());
  const Mask solved = flood(m, conductive, all_patches);

  std::vector<std::int64_t> unknown(static_cast<std::size_t>(n), -1);
  std::vector<Index> voxel_of;
  for (Index i = 0; i < n; ++i) {
    if (solved[i] && !dirichlet[i]) {
      unknown[i] = static_cast<std::int64_t>(voxel_of.size());
      voxel_of.push_back(i);
    }
  }
  const Index nu = static_cast<Index>(voxel_of.size());
  const Eigen::Array3d ff = face_factor(m);

  PotentialSolution sol;
  sol.solved = solved;
  sol.n_unknowns = nu;
  sol.phi = ScalarField(m, Unit::Volt);
  for (Index i = 0; i < n; ++i) {
    if (dirichlet[i]) sol.phi[i] = fixed[i];
  }

  if (nu > 0) {
    std::vector<Eigen::Triplet<double, std::int64_t>> trip;
    trip.reserve(static_cast<std::size_t>(nu) * 7);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nu);
    for (Index r = 0; r < nu; ++r) {
      const Index i = voxel_of[r];
      double diag = 0.0;
      for_each_neighbor(m, i, [&](Index j, int axis) {
        if (!solved[j]) return;
        const double g = harmonic(sigma[i], sigma[j]) * ff[axis];
        diag += g;
        if (dirichlet[j]) {
          rhs[r] += g * fixed[j];
        } else {
          trip.emplace_back(r, unknown[j], -g);
        }
      });
      trip.emplace_back(r, r, diag);
    }
    SpMat a(nu, nu);
    a.setFromTriplets(trip.begin(), trip.end());

    const long budget = params.max_iterations > 0
                            ? params.max_iterations
                            : static_cast<long>(std::ceil(200.0 * std::cbrt(double(nu))));
    Eigen::ConjugateGradient<SpMat, Eigen::Lower | Eigen::Upper, Eigen::DiagonalPreconditioner<double>>
        cg;
    cg.setTolerance(params.rel_residual_tol);
    cg.setMaxIterations(budget);
    cg.compute(a);
    const Eigen::VectorXd guess =
        Eigen::VectorXd::Constant(nu, 0.5 * (params.voltage_a + params.voltage_b));
    const Eigen::VectorXd x = cg.solveWithGuess(rhs, guess);
    sol.iterations = cg.iterations();

    const double bnorm = rhs.norm();
    sol.final_residual = bnorm > 0.0 ? (rhs - a * x).norm() / bnorm : (a * x).norm();
    if (!x.allFinite()) throw NumericalError("solve_potential: solver produced non-finite values");
    if (sol.final_residual > params.rel_residual_tol) {
      throw NumericalError("solve_potential: iteration budget of " + std::to_string(budget) +
                           " exhausted at relative residual " + std::to_string(sol.final_residual));
    }
    for (Index r = 0; r < nu; ++r) sol.phi[voxel_of[r]] = x[r];
  }
  sol.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return sol;
}

ScalarField field_magnitude(const PotentialSolution& sol, const GridMeta& meta) {
  ScalarField out(meta, Unit::VoltPerCm);
  const Index plane = Index(meta.dims[0]) * meta.dims[1];
  const std::array<Index, 3> stride{1, meta.dims[0], plane};
  for (Index i = 0; i < meta.size(); ++i) {
    if (!sol.solved[i]) continue;
    const Eigen::Array3i c = meta.coords(i);
    double g2 = 0.0;
    for (int k = 0; k < 3; ++k) {
      const bool lo = c[k] > 0 && sol.solved[i - stride[k]];
      const bool hi = c[k] < meta.dims[k] - 1 && sol.solved[i + stride[k]];
      double g = 0.0;
      if (lo && hi) {
        g = (sol.phi[i + stride[k]] - sol.phi[i - stride[k]]) / (2.0 * meta.spacing[k]);
      } else if (hi) {
        g = (sol.phi[i + stride[k]] - sol.phi[i]) / meta.spacing[k];
      } else if (lo) {
        g = (sol.phi[i] - sol.phi[i - stride[k]]) / meta.spacing[k];
      }
      g2 += g * g;
    }
    out[i] = 10.0 * std::sqrt(g2);  // V/mm -> V/cm
  }
  return out;
}

Index max_principle_violations(const PotentialSolution& sol, const SolveParams& params,
                               double slack) {
  const double lo = std::min(params.voltage_a, params.voltage_b) - slack;
  const double hi = std::max(params.voltage_a, params.voltage_b) + slack;
  Index bad = 0;
  for (Index i = 0; i < sol.phi.values.size(); ++i) {
    if (sol.solved[i] && (sol.phi[i] < lo || sol.phi[i] > hi)) ++bad;
  }
  return bad;
}

double max_relative_current_imbalance(const ScalarField& sigma, const ElectrodeLayout& layout,
                                      const PotentialSolution& sol) {
  const GridMeta& m = sigma.meta;
  const Mask dirichlet = layout.patch_mask(m);
  const Eigen::Array3d ff = face_factor(m);
  double worst = 0.0;
  double largest_face = 0.0;
  for (Index i = 0; i < m.size(); ++i) {
    if (!sol.solved[i]) continue;
    double net = 0.0;
    for_each_neighbor(m, i, [&](Index j, int axis) {
      if (!sol.solved[j]) return;
      const double current = harmonic(sigma[i], sigma[j]) * ff[axis] * (sol.phi[j] - sol.phi[i]);
      net += current;
      largest_face = std::max(largest_face, std::abs(current));
    });
    if (!dirichlet[i]) worst = std::max(worst, std::abs(net));
  }
  return largest_face > 0.0 ? worst / largest_face : 0.0;
}

LinearityReport linearity_check(const LabelVolume& vol, const TissueTable& table,
                                const ElectrodeLayout& layout, const SolveParams& params) {
  SolveParams doubled = params;
  doubled.voltage_a *= 2.0;
  doubled.voltage_b *= 2.0;
  const ScalarField sigma = lookup_properties(table, vol).first;
  layout.validate(vol);
  const PotentialSolution s1 = solve_potential(sigma, layout, params);
  const PotentialSolution s2 = solve_potential(sigma, layout, doubled);
  const ScalarField e1 = field_magnitude(s1, vol.meta);
  const ScalarField e2 = field_magnitude(s2, vol.meta);

  LinearityReport rep;
  double scale = 0.0;
  double worst = 0.0;
  for (Index i = 0; i < vol.meta.size(); ++i) {
    if (!s1.solved[i]) continue;
    ++rep.n_compared;
    scale = std::max(scale, std::abs(2.0 * e1[i]));
    worst = std::max(worst, std::abs(e2[i] - 2.0 * e1[i]));
  }
  rep.max_rel_deviation = scale > 0.0 ? worst / scale : worst;
  return rep;
}

}  // namespace ttfe

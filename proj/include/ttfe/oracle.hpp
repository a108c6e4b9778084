#pragma once

#include "ttfe/electrodes.hpp"
#include "ttfe/tissue.hpp"
#include "ttfe/volume.hpp"

#include <string>

namespace ttfe {

struct SolveParams {
  double voltage_a = 1.0;
  double voltage_b = -1.0;
  double rel_residual_tol = 1e-8;
  /// 0 selects 200 * cbrt(n_unknowns).
  long max_iterations = 0;
  double sigma_floor = 1e-9;  ///< S/m; below this a voxel is insulating

  void validate() const;
};

struct PotentialSolution {
  ScalarField phi;  ///< volts; 0 outside `solved`
  Mask solved;      ///< conductive voxels connected to an electrode
  long iterations = 0;
  double final_residual = 0.0;  ///< ||b - A x|| / ||b|| over the unknowns
  Index n_unknowns = 0;
  double wall_seconds = 0.0;

  std::string log_json() const;
};

/// Finite-volume solve of div(sigma grad phi) = 0 with 7-point stencil,
/// harmonic-mean face conductivity, Dirichlet patches and insulating faces
/// toward air and the grid boundary. Conductive voxels not connected to any
/// patch are excluded from `solved`.
PotentialSolution solve_potential(const LabelVolume& vol, const TissueTable& table,
                                  const ElectrodeLayout& layout, const SolveParams& params = {});

/// Same solve from a precomputed conductivity map (S/m).
PotentialSolution solve_potential(const ScalarField& sigma, const ElectrodeLayout& layout,
                                  const SolveParams& params = {});

/// |grad phi| in V/cm; central differences inside the solved set, one-sided at
/// its border, 0 outside.
ScalarField field_magnitude(const PotentialSolution& sol, const GridMeta& meta);

/// Voxels whose potential leaves [min V, max V] by more than `slack` volts.
Index max_principle_violations(const PotentialSolution& sol, const SolveParams& params,
                               double slack);

/// Per-unknown net face current magnitude (same units as the assembled
/// system), max over non-Dirichlet solved voxels, relative to the largest
/// single face current in the solution.
double max_relative_current_imbalance(const ScalarField& sigma, const ElectrodeLayout& layout,
                                      const PotentialSolution& sol);

struct LinearityReport {
  double max_rel_deviation = 0.0;  ///< max |E2 - 2 E1| / max |2 E1|
  Index n_compared = 0;
};

/// Solves at the configured voltages and at twice them and compares |E|.
LinearityReport linearity_check(const LabelVolume& vol, const TissueTable& table,
                                const ElectrodeLayout& layout, const SolveParams& params = {});

}  // namespace ttfe

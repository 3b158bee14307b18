// Steady advection-diffusion-reaction for species A, B and product P with
// the fast irreversible pair reaction A + B -> P. Discretization:
// first-order upwind advection on face velocities, central diffusion,
// no-flux walls, Dirichlet split inlet, zero-gradient outlet.
//
// The steady system is solved by alternating downstream/upstream
// Gauss-Seidel plane sweeps (lateral neighbors read old values, so the
// result is independent of the thread count). The reaction term is treated
// implicitly inside the sweep, which keeps every update a ratio of
// non-negative numbers: concentrations can never go negative.
#pragma once

#include <span>

#include "micromix/flow.hpp"
#include "micromix/geometry.hpp"

namespace micromix {

struct TransportParams {
  double diffusivity_m2_s = 5e-10;
  double rate_constant_m3_mol_s = 6000.0;  // second order, A + B -> P
  double inlet_conc_a_mol_m3 = 1.0;
  double inlet_conc_b_mol_m3 = 1.0;
  double reaction_threshold = 0.1;  // fraction of stoichiometric product
  bool premixed_inlet = false;      // both species on the whole inlet face

  void validate() const {
    if (!(diffusivity_m2_s > 0))
      throw std::invalid_argument("diffusivity_m2_s must be > 0");
    if (rate_constant_m3_mol_s < 0)
      throw std::invalid_argument("rate_constant_m3_mol_s must be >= 0");
    if (!(inlet_conc_a_mol_m3 > 0) || !(inlet_conc_b_mol_m3 > 0))
      throw std::invalid_argument("inlet concentrations must be > 0");
    if (!(reaction_threshold > 0) || !(reaction_threshold < 1))
      throw std::invalid_argument("reaction_threshold must be in (0,1)");
  }
  double stoichiometric_product() const {
    return 0.5 * std::min(inlet_conc_a_mol_m3, inlet_conc_b_mol_m3);
  }
};

struct SpeciesFields {
  std::vector<double> ca, cb, cp;  // mol/m^3 per cell, zero at solid
  int64_t sweeps = 0;
  double residual = 0;
  double max_cell_peclet = 0;
  std::vector<std::string> warnings;
};

struct TransportSolveOptions {
  double tol = 1e-9;  // relative max change per sweep
  int64_t max_sweeps = 40000;
};

inline SpeciesFields solve_transport(const VelocityField& f, const VoxelGrid& g,
                                     const TransportParams& params,
                                     const TransportSolveOptions& opts = {}) {
  params.validate();
  if (!(opts.tol > 0))
    throw std::invalid_argument("solve_transport: tol must be > 0");
  const size_t n = g.size();
  if (f.u.size() != n)
    throw std::invalid_argument("solve_transport: field/grid mismatch");

  const double h_m = g.h_um * units::um_to_m;
  const double dcoef = params.diffusivity_m2_s / (h_m * h_m);
  const double k_rate = params.rate_constant_m3_mol_s;
  const int nx = g.nx, ny = g.ny, nz = g.nz;
  const int64_t sx = 1, sy = nx, sz = static_cast<int64_t>(nx) * ny;
  const int64_t offs[6] = {-sx, sx, -sy, sy, -sz, sz};

  // Face coefficients. coef_in[d*n + c] multiplies the neighbor value in
  // direction d; coef_out[c] multiplies the cell's own value. Both sides of
  // a face are accumulated from the same rounded value, so the discrete
  // system transports exactly what it removes. Face velocities come from
  // the solver's staggered arrays when present (exactly mass-conserving),
  // otherwise from cell-center averages.
  std::vector<float> coef_in(6 * n, 0.0f);
  std::vector<double> coef_out(n, 0.0);
  const bool native_faces = f.has_faces();
  double max_pe = 0;
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        const size_t c = g.idx(i, j, k);
        if (!is_open(g.cells[c])) continue;
        const double vel_c[3] = {f.u[c], f.v[c], f.w[c]};
        for (int axis = 0; axis < 3; ++axis) {
          const int d_hi = 2 * axis + 1, d_lo = 2 * axis;
          const int pos = axis == 0 ? i : (axis == 1 ? j : k);
          const int lim = axis == 0 ? nx : (axis == 1 ? ny : nz);
          if (pos + 1 >= lim) {
            // domain edge: wall, except the outlet's downstream ghost face
            if (axis == 1 && g.cells[c] == CellKind::Outlet) {
              const double uo =
                  native_faces ? f.fv[f.fvi(i, ny, k)] : vel_c[1];
              coef_out[c] += std::max(uo, 0.0) / h_m;
            }
            continue;
          }
          const size_t m = c + offs[d_hi];
          if (!is_open(g.cells[m])) continue;  // wall face
          double uf;
          if (native_faces) {
            uf = axis == 0 ? f.fu[f.fui(i + 1, j, k)]
                 : axis == 1 ? f.fv[f.fvi(i, j + 1, k)]
                             : f.fw[f.fwi(i, j, k + 1)];
          } else {
            const double vel_m =
                axis == 0 ? f.u[m] : (axis == 1 ? f.v[m] : f.w[m]);
            uf = 0.5 * (vel_c[axis] + vel_m);
          }
          const float up = static_cast<float>(std::max(uf, 0.0) / h_m + dcoef);
          const float dn = static_cast<float>(std::max(-uf, 0.0) / h_m + dcoef);
          coef_out[c] += up;                               // c loses through +face
          coef_in[static_cast<size_t>(d_lo) * n + m] = up;  // m gains from below
          coef_out[m] += dn;
          coef_in[static_cast<size_t>(d_hi) * n + c] = dn;
        }
        const double speed =
            std::sqrt(vel_c[0] * vel_c[0] + vel_c[1] * vel_c[1] +
                      vel_c[2] * vel_c[2]);
        max_pe = std::max(max_pe, speed * h_m / params.diffusivity_m2_s);
      }

  SpeciesFields sf;
  sf.max_cell_peclet = max_pe;
  if (max_pe > 50.0)
    sf.warnings.push_back(strfmt(
        "cell Peclet %.1f exceeds 50: upwind false diffusion is significant",
        max_pe));
  sf.ca.assign(n, 0.0);
  sf.cb.assign(n, 0.0);
  sf.cp.assign(n, 0.0);

  // Dirichlet inlet layer.
  for (int k = 0; k < nz; ++k)
    for (int i = 0; i < nx; ++i) {
      const size_t c = g.idx(i, 0, k);
      const CellKind ck = g.cells[c];
      if (ck == CellKind::InletA || ck == CellKind::InletB) {
        const bool a_here = params.premixed_inlet || ck == CellKind::InletA;
        const bool b_here = params.premixed_inlet || ck == CellKind::InletB;
        sf.ca[c] = a_here ? params.inlet_conc_a_mol_m3 : 0.0;
        sf.cb[c] = b_here ? params.inlet_conc_b_mol_m3 : 0.0;
      }
    }

  // Open cells per y layer, fixed visit order.
  std::vector<std::vector<size_t>> layers(ny);
  for (int j = 1; j < ny; ++j) {
    for (int k = 0; k < nz; ++k)
      for (int i = 0; i < nx; ++i) {
        const size_t c = g.idx(i, j, k);
        if (is_open(g.cells[c])) layers[j].push_back(c);
      }
  }

  const double scale =
      std::max(params.inlet_conc_a_mol_m3, params.inlet_conc_b_mol_m3);
  const size_t layer_sz = static_cast<size_t>(nx) * nz;
  std::vector<double> old_a(layer_sz), old_b(layer_sz), old_p(layer_sz);
  std::vector<double> change(layer_sz);

  double residual = std::numeric_limits<double>::infinity();
  int consecutive_ok = 0;
  int64_t sweep = 0;
  for (sweep = 1; sweep <= opts.max_sweeps; ++sweep) {
    const bool forward = (sweep % 2) == 1;
    double max_change = 0;
    for (int jj = 1; jj < ny; ++jj) {
      const int j = forward ? jj : ny - jj;
      const auto& cells = layers[j];
      if (cells.empty()) continue;
      for (size_t li = 0; li < cells.size(); ++li) {
        const size_t c = cells[li];
        const size_t l = static_cast<size_t>(c / sz) * nx + (c % nx);
        old_a[l] = sf.ca[c];
        old_b[l] = sf.cb[c];
        old_p[l] = sf.cp[c];
      }
      // Lateral (same-layer) neighbors read the pre-update copy, so the
      // layer update is order-free and thread-count independent.
      parallel_for(0, static_cast<int64_t>(cells.size()), [&](int64_t li) {
        const size_t c = cells[static_cast<size_t>(li)];
        double in_a = 0, in_b = 0, in_p = 0;
        for (int d = 0; d < 6; ++d) {
          const float ci = coef_in[static_cast<size_t>(d) * n + c];
          if (ci == 0.0f) continue;
          const size_t cn = c + offs[d];
          double va, vb, vp;
          if (d == 2 || d == 3) {  // y neighbors live in the main arrays
            va = sf.ca[cn];
            vb = sf.cb[cn];
            vp = sf.cp[cn];
          } else {  // lateral neighbors read the old layer copy
            const size_t l2 = static_cast<size_t>(cn / sz) * nx + (cn % nx);
            va = old_a[l2];
            vb = old_b[l2];
            vp = old_p[l2];
          }
          in_a += ci * va;
          in_b += ci * vb;
          in_p += ci * vp;
        }
        const size_t lc = static_cast<size_t>(c / sz) * nx + (c % nx);
        const double a_old = old_a[lc], b_old = old_b[lc], p_old = old_p[lc];
        const double a_new = in_a / (coef_out[c] + k_rate * b_old);
        const double b_new = in_b / (coef_out[c] + k_rate * a_old);
        const double p_new = (in_p + k_rate * a_new * b_new) / coef_out[c];
        sf.ca[c] = a_new;
        sf.cb[c] = b_new;
        sf.cp[c] = p_new;
        change[static_cast<size_t>(li)] =
            std::max(std::abs(a_new - a_old),
                     std::max(std::abs(b_new - b_old), std::abs(p_new - p_old)));
      });
      for (size_t li = 0; li < cells.size(); ++li)
        max_change = std::max(max_change, change[li]);
    }
    residual = max_change / scale;
    if (!std::isfinite(residual))
      throw std::runtime_error("solve_transport: iteration diverged");
    if (residual < opts.tol) {
      if (++consecutive_ok >= 2) break;  // both sweep directions settled
    } else {
      consecutive_ok = 0;
    }
  }
  if (sweep > opts.max_sweeps)
    throw std::runtime_error(
        strfmt("solve_transport: no convergence after %lld sweeps "
               "(residual %.3e, tol %.3e)",
               static_cast<long long>(opts.max_sweeps), residual, opts.tol));
  sf.sweeps = sweep;
  sf.residual = residual;
  return sf;
}

// Advective plus diffusive flux of a scalar through the cell-face plane
// nearest y (mol/s). Used for conserved-scalar checks.
inline double plane_scalar_flux(const VelocityField& f, const VoxelGrid& g,
                                const std::vector<double>& c, double y_um,
                                double diffusivity_m2_s) {
  const double rel = (y_um - g.origin_um.y) / g.h_um;
  const int jf = std::clamp(static_cast<int>(std::lround(rel)), 1, g.ny - 1);
  const double h_m = g.h_um * units::um_to_m;
  const double area = h_m * h_m;
  double total = 0;
  for (int k = 0; k < g.nz; ++k)
    for (int i = 0; i < g.nx; ++i) {
      const size_t lo = g.idx(i, jf - 1, k), hi = g.idx(i, jf, k);
      if (!is_open(g.cells[lo]) || !is_open(g.cells[hi])) continue;
      const double vf =
          f.has_faces() ? f.fv[f.fvi(i, jf, k)] : 0.5 * (f.v[lo] + f.v[hi]);
      const double c_up = vf >= 0 ? c[lo] : c[hi];
      total += (vf * c_up - diffusivity_m2_s * (c[hi] - c[lo]) / h_m) * area;
    }
  return total;
}

// Reacted-area fraction of the xz cross-section at y: the share of fluid
// cells on the plane whose product concentration reaches the threshold
// fraction of the stoichiometric maximum min(cA0, cB0)/2 (the two inlet
// half-streams merge, halving the attainable product).
inline double fret_factor(const SpeciesFields& sf, const VoxelGrid& g,
                          double y_um, const TransportParams& params) {
  const double rel = (y_um - g.origin_um.y) / g.h_um;
  if (rel < -1e-9 || rel > g.ny + 1e-9)
    throw std::invalid_argument("fret_factor: plane outside domain");
  const int j = std::clamp(static_cast<int>(std::lround(rel - 0.5)), 0, g.ny - 1);
  const double c_thresh =
      params.reaction_threshold * params.stoichiometric_product();
  size_t n_fluid = 0, n_reacted = 0;
  for (int k = 0; k < g.nz; ++k)
    for (int i = 0; i < g.nx; ++i) {
      const size_t c = g.idx(i, j, k);
      if (!is_open(g.cells[c])) continue;
      ++n_fluid;
      if (sf.cp[c] >= c_thresh) ++n_reacted;
    }
  if (n_fluid == 0) throw std::invalid_argument("fret_factor: plane in solid");
  return static_cast<double>(n_reacted) / static_cast<double>(n_fluid);
}

// fret_factor evaluated at each period plane, in order.
inline std::vector<std::pair<int, double>> fret_profile(
    const SpeciesFields& sf, const VoxelGrid& g,
    std::span<const double> planes_um, const TransportParams& params) {
  std::vector<std::pair<int, double>> out;
  out.reserve(planes_um.size());
  for (size_t k = 0; k < planes_um.size(); ++k)
    out.emplace_back(static_cast<int>(k + 1),
                     fret_factor(sf, g, planes_um[k], params));
  return out;
}

}  // namespace micromix

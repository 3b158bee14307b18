// Steady laminar flow in the voxelized mixer at a prescribed volumetric
// flow rate.
//
// Scheme: staggered-grid (MAC) finite volumes with a SIMPLE-type pressure
// correction iteration. Momentum is relaxed by red-black Gauss-Seidel
// sweeps (first-order upwind advection, dropped entirely in stokes_mode);
// the pressure-correction Poisson equation is solved by geometric multigrid
// V-cycles on the voxel mask. Walls pass through cell faces, so staircase
// no-slip is sharp: normal velocities on wall faces are identically zero
// and tangential ghosts mirror across the wall plane.
//
// Boundary conditions: uniform plug on the inlet face (discrete flux equals
// Q_total exactly), zero-gradient outlet with global flux closure, no-slip
// everywhere else. Iteration stops when the relative L2 change of the
// velocity field over a 100-iteration window drops below tol.
//
// Every update is either embarrassingly parallel or red-black colored, and
// all reductions run serially in fixed order: results are bit-identical
// for any thread count.
#pragma once

#include <array>
#include <cstring>
#include <limits>
#include <utility>

#include "micromix/geometry.hpp"
#include "micromix/units.hpp"

namespace micromix {

struct FlowConditions {
  double flow_rate_per_inlet_ul_min = 5.0;
  double density_kg_m3 = 1000.0;
  double dynamic_viscosity_pa_s = 1e-3;
  bool stokes_mode = false;  // drop inertial terms (exactly linear solve)

  double q_total_m3_s() const {
    return 2.0 * flow_rate_per_inlet_ul_min * units::ul_per_min_to_m3_per_s;
  }
  void validate() const {
    // Negative rates are accepted: reversed flow is used by the Stokes
    // linearity check.
    if (!std::isfinite(flow_rate_per_inlet_ul_min))
      throw std::invalid_argument("flow_rate_per_inlet must be finite");
    if (!(density_kg_m3 > 0))
      throw std::invalid_argument("density_kg_m3 must be > 0");
    if (!(dynamic_viscosity_pa_s > 0))
      throw std::invalid_argument("dynamic_viscosity_pa_s must be > 0");
  }
};

struct FlowSolveOptions {
  double tol = 1e-7;  // relative L2 change of u over 100 iterations
  int64_t max_iterations = 20000;
  double alpha_u = 0.7;      // momentum under-relaxation
  double alpha_p = 0.6;      // pressure under-relaxation
  int mg_cycles = 2;         // V-cycles per pressure correction
  int mg_smooth = 3;         // red-black sweeps per level, pre and post
  double laminar_re_limit = 100.0;  // reject configs beyond steady laminar reach
};

struct SolverInfo {
  double dx_m = 0;
  int64_t outer_iterations = 0;
  double alpha_u = 0, alpha_p = 0;
  bool stokes = false;
  double max_divergence_per_s = 0;  // native staggered flux-form divergence
};

struct VelocityField {
  int nx = 0, ny = 0, nz = 0;
  double h_um = 0;
  Vec3 origin_um;
  std::vector<double> u, v, w;  // m/s at cell centers, zero at solid cells
  std::vector<double> p;        // Pa, zero reference at the outlet
  // Native staggered face velocities (x/y/z-normal faces). These carry the
  // solver's exact mass fluxes; transport and conservation checks prefer
  // them over cell-center averages when present.
  std::vector<double> fu, fv, fw;
  double residual = 0;  // final windowed-change measure
  std::vector<std::pair<int64_t, double>> residual_history;
  SolverInfo scaling;

  size_t idx(int i, int j, int k) const {
    return (static_cast<size_t>(k) * ny + j) * nx + i;
  }
  size_t fui(int i, int j, int k) const {  // i in [0, nx]
    return (static_cast<size_t>(k) * ny + j) * (nx + 1) + i;
  }
  size_t fvi(int i, int j, int k) const {  // j in [0, ny]
    return (static_cast<size_t>(k) * (ny + 1) + j) * nx + i;
  }
  size_t fwi(int i, int j, int k) const {  // k in [0, nz]
    return (static_cast<size_t>(k) * ny + j) * nx + i;
  }
  bool has_faces() const { return !fv.empty(); }
  Vec3 velocity_at(size_t cell) const { return {u[cell], v[cell], w[cell]}; }
  double max_speed() const {
    double m = 0;
    for (size_t c = 0; c < u.size(); ++c) {
      const double s = u[c] * u[c] + v[c] * v[c] + w[c] * w[c];
      if (s > m) m = s;
    }
    return std::sqrt(m);
  }
  double mean_axial_speed(const VoxelGrid& g) const {
    double sum = 0;
    size_t n = 0;
    for (size_t c = 0; c < v.size(); ++c)
      if (is_open(g.cells[c])) {
        sum += v[c];
        ++n;
      }
    return n ? sum / n : 0.0;
  }
};

class FlowSolveError : public std::runtime_error {
 public:
  FlowSolveError(const std::string& msg,
                 std::vector<std::pair<int64_t, double>> history)
      : std::runtime_error(msg), residual_history(std::move(history)) {}
  std::vector<std::pair<int64_t, double>> residual_history;
};

// Reynolds number of the run conditions: Re = rho * U_mean * D_h / mu with
// U_mean = Q_total / (W*H) and hydraulic diameter D_h = 2WH/(W+H).
inline double reynolds(const FlowConditions& cond, const MixerConfig& cfg) {
  const double W = cfg.channel_width_um * units::um_to_m;
  const double H = cfg.channel_height_um * units::um_to_m;
  const double u_mean = cond.q_total_m3_s() / (W * H);
  const double dh = 2.0 * W * H / (W + H);
  return cond.density_kg_m3 * std::abs(u_mean) * dh / cond.dynamic_viscosity_pa_s;
}

// Volumetric flux (m^3/s) through the xz plane at the given y position.
inline double flux_through_plane(const VelocityField& f, const VoxelGrid& g,
                                 double y_um) {
  const double rel = (y_um - g.origin_um.y) / g.h_um;
  if (rel < -1e-9 || rel > g.ny + 1e-9)
    throw std::invalid_argument("flux_through_plane: plane outside domain");
  const int j = std::clamp(static_cast<int>(std::lround(rel - 0.5)), 0, g.ny - 1);
  const double area = g.h_um * g.h_um * units::um_to_m * units::um_to_m;
  double q = 0;
  for (int k = 0; k < g.nz; ++k)
    for (int i = 0; i < g.nx; ++i) {
      const size_t c = g.idx(i, j, k);
      if (is_open(g.cells[c])) q += f.v[c] * area;
    }
  return q;
}

struct DivergenceStats {
  double max_central = 0;    // central differences of cell-center values
  double max_flux_form = 0;  // native staggered face fluxes
};

// Discrete divergence over interior FLUID cells, s^-1. The flux form uses
// the solver's face velocities (the discrete operator the pressure solve
// drives to zero); the central-difference form is reported for reference.
inline DivergenceStats divergence_stats(const VelocityField& f,
                                        const VoxelGrid& g) {
  DivergenceStats st;
  const double inv2h = 1.0 / (2.0 * g.h_um * units::um_to_m);
  const double invh = 1.0 / (g.h_um * units::um_to_m);
  for (int k = 0; k < g.nz; ++k)
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        const size_t c = g.idx(i, j, k);
        if (g.cells[c] != CellKind::Fluid) continue;
        auto val = [&](const std::vector<double>& a, int ii, int jj, int kk) {
          return g.in_bounds(ii, jj, kk) ? a[g.idx(ii, jj, kk)] : 0.0;
        };
        const double dc =
            (val(f.u, i + 1, j, k) - val(f.u, i - 1, j, k)) * inv2h +
            (val(f.v, i, j + 1, k) - val(f.v, i, j - 1, k)) * inv2h +
            (val(f.w, i, j, k + 1) - val(f.w, i, j, k - 1)) * inv2h;
        st.max_central = std::max(st.max_central, std::abs(dc));
        double df;
        if (f.has_faces()) {
          df = (f.fu[f.fui(i + 1, j, k)] - f.fu[f.fui(i, j, k)] +
                f.fv[f.fvi(i, j + 1, k)] - f.fv[f.fvi(i, j, k)] +
                f.fw[f.fwi(i, j, k + 1)] - f.fw[f.fwi(i, j, k)]) *
               invh;
        } else {
          auto face = [&](const std::vector<double>& a, int ii, int jj, int kk) {
            if (!g.in_bounds(ii, jj, kk) || !is_open(g.cells[g.idx(ii, jj, kk)]))
              return 0.0;
            return 0.5 * (a[c] + a[g.idx(ii, jj, kk)]);
          };
          df = (face(f.u, i + 1, j, k) - face(f.u, i - 1, j, k) +
                face(f.v, i, j + 1, k) - face(f.v, i, j - 1, k) +
                face(f.w, i, j, k + 1) - face(f.w, i, j, k - 1)) *
               invh;
        }
        st.max_flux_form = std::max(st.max_flux_form, std::abs(df));
      }
  return st;
}

namespace detail {

// Geometric multigrid for the pressure-correction Poisson equation on the
// voxel mask: unit-coefficient 7-point graph Laplacian with an extra
// Dirichlet ghost link on outlet cells, red-black smoothing, residual
// restriction by child sums (scaled), piecewise-constant prolongation.
class PoissonMg {
 public:
  struct Level {
    int nx, ny, nz;
    std::vector<uint8_t> open;
    std::vector<uint8_t> nout;  // outlet (Dirichlet) ghost links per cell
    std::vector<uint8_t> diag;  // open-neighbor count + outlet ghost links
    std::vector<double> x, b, r;
    size_t idx(int i, int j, int k) const {
      return (static_cast<size_t>(k) * ny + j) * nx + i;
    }
  };

  PoissonMg(const VoxelGrid& g, int smooth_sweeps)
      : smooth_(smooth_sweeps) {
    Level l0;
    l0.nx = g.nx;
    l0.ny = g.ny;
    l0.nz = g.nz;
    l0.open.resize(g.size());
    l0.nout.assign(g.size(), 0);
    for (size_t c = 0; c < g.size(); ++c) {
      l0.open[c] = is_open(g.cells[c]) ? 1 : 0;
      if (g.cells[c] == CellKind::Outlet) l0.nout[c] = 1;
    }
    init_level(l0);
    levels_.push_back(std::move(l0));
    while (true) {
      const Level& f = levels_.back();
      if (static_cast<size_t>(f.nx) * f.ny * f.nz <= 64 ||
          (f.nx == 1 && f.nz == 1 && f.ny <= 4))
        break;
      Level c;
      c.nx = std::max(1, (f.nx + 1) / 2);
      c.ny = std::max(1, (f.ny + 1) / 2);
      c.nz = std::max(1, (f.nz + 1) / 2);
      c.open.assign(static_cast<size_t>(c.nx) * c.ny * c.nz, 0);
      c.nout.assign(c.open.size(), 0);
      for (int k = 0; k < f.nz; ++k)
        for (int j = 0; j < f.ny; ++j)
          for (int i = 0; i < f.nx; ++i) {
            const size_t cf = f.idx(i, j, k);
            if (!f.open[cf]) continue;
            const size_t cc = c.idx(i / 2, j / 2, k / 2);
            c.open[cc] = 1;
            if (f.nout[cf]) c.nout[cc] = 1;
          }
      init_level(c);
      levels_.push_back(std::move(c));
    }
  }

  // Solve A x = b approximately with n_cycles V-cycles, starting from 0.
  void solve(const std::vector<double>& rhs, std::vector<double>& out,
             int n_cycles) {
    Level& l0 = levels_[0];
    l0.b = rhs;
    std::fill(l0.x.begin(), l0.x.end(), 0.0);
    for (int c = 0; c < n_cycles; ++c) vcycle(0);
    out = l0.x;
  }

 private:
  void init_level(Level& l) {
    const size_t n = static_cast<size_t>(l.nx) * l.ny * l.nz;
    l.diag.assign(n, 0);
    for (int k = 0; k < l.nz; ++k)
      for (int j = 0; j < l.ny; ++j)
        for (int i = 0; i < l.nx; ++i) {
          const size_t c = l.idx(i, j, k);
          if (!l.open[c]) continue;
          int d = 0;
          if (i > 0 && l.open[c - 1]) ++d;
          if (i < l.nx - 1 && l.open[c + 1]) ++d;
          if (j > 0 && l.open[c - l.nx]) ++d;
          if (j < l.ny - 1 && l.open[c + l.nx]) ++d;
          const size_t sz = static_cast<size_t>(l.nx) * l.ny;
          if (k > 0 && l.open[c - sz]) ++d;
          if (k < l.nz - 1 && l.open[c + sz]) ++d;
          d += l.nout[c];
          l.diag[c] = static_cast<uint8_t>(d);
        }
    l.x.assign(n, 0.0);
    l.b.assign(n, 0.0);
    l.r.assign(n, 0.0);
  }

  void smooth(Level& l, int sweeps) {
    const int64_t sz = static_cast<int64_t>(l.nx) * l.ny;
    for (int s = 0; s < sweeps; ++s)
      for (int color = 0; color < 2; ++color)
        parallel_for(0, static_cast<int64_t>(l.nz) * l.ny, [&](int64_t kj) {
          const int k = static_cast<int>(kj / l.ny);
          const int j = static_cast<int>(kj % l.ny);
          const int start = (j + k + color) & 1;
          for (int i = start; i < l.nx; i += 2) {
            const size_t c = l.idx(i, j, k);
            if (!l.open[c] || l.diag[c] == 0) continue;
            double s_nb = 0;
            if (i > 0 && l.open[c - 1]) s_nb += l.x[c - 1];
            if (i < l.nx - 1 && l.open[c + 1]) s_nb += l.x[c + 1];
            if (j > 0 && l.open[c - l.nx]) s_nb += l.x[c - l.nx];
            if (j < l.ny - 1 && l.open[c + l.nx]) s_nb += l.x[c + l.nx];
            if (k > 0 && l.open[c - sz]) s_nb += l.x[c - sz];
            if (k < l.nz - 1 && l.open[c + sz]) s_nb += l.x[c + sz];
            l.x[c] = (l.b[c] + s_nb) / l.diag[c];
          }
        });
  }

  void residual(Level& l) {
    const int64_t sz = static_cast<int64_t>(l.nx) * l.ny;
    parallel_for(0, static_cast<int64_t>(l.nz) * l.ny, [&](int64_t kj) {
      const int k = static_cast<int>(kj / l.ny);
      const int j = static_cast<int>(kj % l.ny);
      for (int i = 0; i < l.nx; ++i) {
        const size_t c = l.idx(i, j, k);
        if (!l.open[c]) {
          l.r[c] = 0;
          continue;
        }
        double s_nb = 0;
        if (i > 0 && l.open[c - 1]) s_nb += l.x[c - 1];
        if (i < l.nx - 1 && l.open[c + 1]) s_nb += l.x[c + 1];
        if (j > 0 && l.open[c - l.nx]) s_nb += l.x[c - l.nx];
        if (j < l.ny - 1 && l.open[c + l.nx]) s_nb += l.x[c + l.nx];
        if (k > 0 && l.open[c - sz]) s_nb += l.x[c - sz];
        if (k < l.nz - 1 && l.open[c + sz]) s_nb += l.x[c + sz];
        l.r[c] = l.b[c] - (l.diag[c] * l.x[c] - s_nb);
      }
    });
  }

  void vcycle(size_t lev) {
    Level& l = levels_[lev];
    if (lev + 1 == levels_.size()) {
      smooth(l, 60);  // coarsest level: iterate to near-exact
      return;
    }
    smooth(l, smooth_);
    residual(l);
    Level& c = levels_[lev + 1];
    std::fill(c.b.begin(), c.b.end(), 0.0);
    std::fill(c.x.begin(), c.x.end(), 0.0);
    for (int k = 0; k < l.nz; ++k)
      for (int j = 0; j < l.ny; ++j)
        for (int i = 0; i < l.nx; ++i) {
          const size_t cc = c.idx(i / 2, j / 2, k / 2);
          if (c.open[cc]) c.b[cc] += 0.5 * l.r[l.idx(i, j, k)];
        }
    vcycle(lev + 1);
    parallel_for(0, static_cast<int64_t>(l.nz) * l.ny, [&](int64_t kj) {
      const int k = static_cast<int>(kj / l.ny);
      const int j = static_cast<int>(kj % l.ny);
      for (int i = 0; i < l.nx; ++i) {
        const size_t cf = l.idx(i, j, k);
        if (l.open[cf]) l.x[cf] += c.x[c.idx(i / 2, j / 2, k / 2)];
      }
    });
    smooth(l, smooth_);
  }

  int smooth_;
  std::vector<Level> levels_;
};

}  // namespace detail

// Steady solve; see the header comment for the discretization. Throws
// FlowSolveError (with the residual history) on non-convergence and
// std::invalid_argument for configs outside the solver's validity.
inline VelocityField solve_steady(const VoxelGrid& g, const FlowConditions& cond,
                                  const FlowSolveOptions& opts = {}) {
  cond.validate();
  if (!(opts.tol > 0) || opts.tol > 1e-3)
    throw std::invalid_argument("solve_steady: tol must be in (0, 1e-3]");

  const int nx = g.nx, ny = g.ny, nz = g.nz;
  const double h = g.h_um * units::um_to_m;
  const double nu = cond.dynamic_viscosity_pa_s / cond.density_kg_m3;
  const double rho = cond.density_kg_m3;
  const double q_total = cond.q_total_m3_s();
  const bool stokes = cond.stokes_mode;

  VelocityField f;
  f.nx = nx;
  f.ny = ny;
  f.nz = nz;
  f.h_um = g.h_um;
  f.origin_um = g.origin_um;

  // Inlet plug speed from the discrete inlet area.
  size_t n_inlet = 0;
  for (int k = 0; k < nz; ++k)
    for (int i = 0; i < nx; ++i) {
      const CellKind ck = g.at(i, 0, k);
      if (ck == CellKind::InletA || ck == CellKind::InletB) ++n_inlet;
    }
  if (n_inlet == 0)
    throw std::invalid_argument("solve_steady: grid has no inlet cells");
  const double u_plug = q_total / (static_cast<double>(n_inlet) * h * h);

  {  // steady laminar applicability guard
    const double dh_est = 2.0 * (nx * h) * (nz * h) / (nx * h + nz * h);
    const double re_est = rho * std::abs(u_plug) * dh_est /
                          cond.dynamic_viscosity_pa_s;
    if (re_est > opts.laminar_re_limit)
      throw std::invalid_argument(
          "solve_steady: flow outside the steady laminar regime, reduce flow "
          "rate or refine");
  }

  // Face states: 0 locked (zero), 1 unknown, 2 inlet (fixed), 3 outlet.
  auto open_cell = [&](int i, int j, int k) {
    return g.in_bounds(i, j, k) && is_open(g.cells[g.idx(i, j, k)]);
  };
  const size_t nfu = static_cast<size_t>(nx + 1) * ny * nz;
  const size_t nfv = static_cast<size_t>(nx) * (ny + 1) * nz;
  const size_t nfw = static_cast<size_t>(nx) * ny * (nz + 1);
  std::vector<uint8_t> su(nfu, 0), sv(nfv, 0), sw(nfw, 0);
  std::vector<double> u(nfu, 0.0), v(nfv, 0.0), w(nfw, 0.0);
  std::vector<double> p(g.size(), 0.0);

  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 1; i < nx; ++i)
        if (open_cell(i - 1, j, k) && open_cell(i, j, k))
          su[f.fui(i, j, k)] = 1;
  for (int k = 0; k < nz; ++k)
    for (int i = 0; i < nx; ++i) {
      const CellKind first = g.at(i, 0, k);
      if (first == CellKind::InletA || first == CellKind::InletB) {
        sv[f.fvi(i, 0, k)] = 2;
        v[f.fvi(i, 0, k)] = u_plug;
      }
      if (g.at(i, ny - 1, k) == CellKind::Outlet) sv[f.fvi(i, ny, k)] = 3;
      for (int j = 1; j < ny; ++j)
        if (open_cell(i, j - 1, k) && open_cell(i, j, k))
          sv[f.fvi(i, j, k)] = 1;
    }
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i)
      for (int k = 1; k < nz; ++k)
        if (open_cell(i, j, k - 1) && open_cell(i, j, k))
          sw[f.fwi(i, j, k)] = 1;

  // Initialize v so that every layer carries Q_total exactly.
  for (int j = 0; j <= ny; ++j) {
    size_t cnt = 0;
    for (int k = 0; k < nz; ++k)
      for (int i = 0; i < nx; ++i)
        if (sv[f.fvi(i, j, k)]) ++cnt;
    if (cnt == 0) continue;
    const double vj = q_total / (static_cast<double>(cnt) * h * h);
    for (int k = 0; k < nz; ++k)
      for (int i = 0; i < nx; ++i) {
        const size_t fc = f.fvi(i, j, k);
        if (sv[fc] == 1 || sv[fc] == 3) v[fc] = vj;
      }
  }

  detail::PoissonMg mg(g, opts.mg_smooth);
  const double inv_h2 = 1.0 / (h * h);
  const double ap0 = 6.0 * nu * inv_h2;            // base momentum diagonal
  const double d0 = 1.0 / (rho * ap0 * h);         // correction coefficient
  std::vector<double> rhs(g.size(), 0.0), pcorr(g.size(), 0.0);
  std::vector<double> pu(g.size(), 0.0), pv(g.size(), 0.0), pw(g.size(), 0.0);
  std::vector<std::pair<int64_t, double>> history;

  // One red-black momentum relaxation pass for one velocity component.
  // axis: 0=u, 1=v, 2=w. Assembles the steady stencil on the fly.
  auto momentum_sweep = [&](int axis) {
    std::vector<double>& q = axis == 0 ? u : (axis == 1 ? v : w);
    const std::vector<uint8_t>& st = axis == 0 ? su : (axis == 1 ? sv : sw);
    const int fnx = axis == 0 ? nx + 1 : nx;
    const int fny = axis == 1 ? ny + 1 : ny;
    const int fnz = axis == 2 ? nz + 1 : nz;
    auto fidx = [&](int i, int j, int k) {
      return (static_cast<size_t>(k) * fny + j) * static_cast<size_t>(fnx) + i;
    };
    for (int color = 0; color < 2; ++color)
      parallel_for(0, static_cast<int64_t>(fnz) * fny, [&](int64_t kj) {
        const int k = static_cast<int>(kj / fny);
        const int j = static_cast<int>(kj % fny);
        for (int i = (j + k + color) & 1; i < fnx; i += 2) {
          const size_t fc = fidx(i, j, k);
          if (st[fc] != 1) continue;
          double ap = 0.0, sum = 0.0;
          const int di[3] = {1, 0, 0}, dj[3] = {0, 1, 0}, dk[3] = {0, 0, 1};
          for (int dir = 0; dir < 3; ++dir)
            for (int sgn = -1; sgn <= 1; sgn += 2) {
              const int ii = i + sgn * di[dir], jj = j + sgn * dj[dir],
                        kk = k + sgn * dk[dir];
              const bool inb = ii >= 0 && ii < fnx && jj >= 0 && jj < fny &&
                               kk >= 0 && kk < fnz;
              const double nb_val = inb ? q[fidx(ii, jj, kk)] : 0.0;
              const bool nb_active = inb && st[fidx(ii, jj, kk)] != 0;
              if (dir == axis) {  // wall sits a full spacing away
                ap += nu * inv_h2;
                if (nb_active) sum += nu * inv_h2 * nb_val;
              } else if (nb_active) {
                ap += nu * inv_h2;
                sum += nu * inv_h2 * nb_val;
              } else {
                ap += 2.0 * nu * inv_h2;  // no-slip wall halfway
              }
            }
          if (!stokes) {
            // donor-cell advection on the face control volume
            for (int dir = 0; dir < 3; ++dir) {
              std::vector<double>& adv = dir == 0 ? u : (dir == 1 ? v : w);
              auto aidx = [&](int i2, int j2, int k2) {
                const int anx = dir == 0 ? nx + 1 : nx;
                const int any = dir == 1 ? ny + 1 : ny;
                return (static_cast<size_t>(k2) * any + j2) *
                           static_cast<size_t>(anx) +
                       i2;
              };
              // advecting velocity at the +/- faces of this CV: average of
              // the dir-normal face velocities straddling it
              for (int sgn = -1; sgn <= 1; sgn += 2) {
                int ai = i, aj = j, ak = k;   // base for the two samples
                int bi = i, bj = j, bk = k;
                if (dir == 0) { ai += (sgn + 1) / 2; bi = ai; }
                if (dir == 1) { aj += (sgn + 1) / 2; bj = aj; }
                if (dir == 2) { ak += (sgn + 1) / 2; bk = ak; }
                // second sample shifted along the component axis
                if (axis == 0) --bi;
                if (axis == 1) --bj;
                if (axis == 2) --bk;
                auto safe = [&](int i2, int j2, int k2) {
                  const int anx = dir == 0 ? nx + 1 : nx;
                  const int any = dir == 1 ? ny + 1 : ny;
                  const int anz = dir == 2 ? nz + 1 : nz;
                  if (i2 < 0 || j2 < 0 || k2 < 0 || i2 >= anx || j2 >= any ||
                      k2 >= anz)
                    return 0.0;
                  return adv[aidx(i2, j2, k2)];
                };
                const double uadv = 0.5 * (safe(ai, aj, ak) + safe(bi, bj, bk));
                const double flux = sgn * uadv / h;  // outward-positive
                ap += std::max(flux, 0.0);
                const int ii = i + sgn * di[dir], jj = j + sgn * dj[dir],
                          kk = k + sgn * dk[dir];
                const bool inb = ii >= 0 && ii < fnx && jj >= 0 && jj < fny &&
                                 kk >= 0 && kk < fnz;
                if (inb && st[fidx(ii, jj, kk)] != 0)
                  sum += std::max(-flux, 0.0) * q[fidx(ii, jj, kk)];
                else
                  ap += std::max(-flux, 0.0);  // inflow from a wall carries 0
              }
            }
          }
          // pressure gradient between the two adjacent cells
          const int li = i - (axis == 0), lj = j - (axis == 1),
                    lk = k - (axis == 2);
          const double dp = p[g.idx(i, j, k)] - p[g.idx(li, lj, lk)];
          sum -= dp / (rho * h);
          q[fc] = (1.0 - opts.alpha_u) * q[fc] + opts.alpha_u * sum / ap;
        }
      });
  };

  auto outlet_flux = [&]() {
    double qo = 0;
    for (int k = 0; k < nz; ++k)
      for (int i = 0; i < nx; ++i)
        if (sv[f.fvi(i, ny, k)] == 3) qo += v[f.fvi(i, ny, k)] * h * h;
    return qo;
  };
  auto rescale_outlet = [&]() {
    if (q_total == 0.0) return;
    // zero-gradient copy, then global closure to Q_total
    for (int k = 0; k < nz; ++k)
      for (int i = 0; i < nx; ++i) {
        const size_t fo = f.fvi(i, ny, k);
        if (sv[fo] == 3) v[fo] = v[f.fvi(i, ny - 1, k)];
      }
    const double qo = outlet_flux();
    if (std::abs(qo) > 1e-6 * std::abs(q_total)) {
      const double s = q_total / qo;
      for (int k = 0; k < nz; ++k)
        for (int i = 0; i < nx; ++i) {
          const size_t fo = f.fvi(i, ny, k);
          if (sv[fo] == 3) v[fo] *= s;
        }
    }
  };

  double residual = std::numeric_limits<double>::infinity();
  double max_div = 0;
  bool converged = false;
  int64_t it = 0;
  for (it = 1; it <= opts.max_iterations; ++it) {
    momentum_sweep(0);
    momentum_sweep(1);
    momentum_sweep(2);
    rescale_outlet();

    // continuity defect and pressure correction
    parallel_for(0, static_cast<int64_t>(nz) * ny, [&](int64_t kj) {
      const int k = static_cast<int>(kj / ny);
      const int j = static_cast<int>(kj % ny);
      for (int i = 0; i < nx; ++i) {
        const size_t c = g.idx(i, j, k);
        if (!is_open(g.cells[c])) {
          rhs[c] = 0;
          continue;
        }
        const double div = (u[f.fui(i + 1, j, k)] - u[f.fui(i, j, k)] +
                            v[f.fvi(i, j + 1, k)] - v[f.fvi(i, j, k)] +
                            w[f.fwi(i, j, k + 1)] - w[f.fwi(i, j, k)]) /
                           h;
        rhs[c] = div * h / d0;
      }
    });
    mg.solve(rhs, pcorr, opts.mg_cycles);

    parallel_for(0, static_cast<int64_t>(nz) * ny, [&](int64_t kj) {
      const int k = static_cast<int>(kj / ny);
      const int j = static_cast<int>(kj % ny);
      for (int i = 0; i <= nx; ++i) {
        if (i < nx) {
          const size_t fc = f.fvi(i, j, k);
          if (sv[fc] == 1)
            v[fc] -= d0 * (pcorr[g.idx(i, j, k)] - pcorr[g.idx(i, j - 1, k)]);
          const size_t fk = f.fwi(i, j, k);
          if (sw[fk] == 1)
            w[fk] -= d0 * (pcorr[g.idx(i, j, k)] - pcorr[g.idx(i, j, k - 1)]);
          if (j == ny - 1) {
            const size_t fo = f.fvi(i, ny, k);
            if (sv[fo] == 3) v[fo] += d0 * pcorr[g.idx(i, ny - 1, k)];
          }
        }
        const size_t fc = f.fui(i, j, k);
        if (su[fc] == 1)
          u[fc] -= d0 * (pcorr[g.idx(i, j, k)] - pcorr[g.idx(i - 1, j, k)]);
      }
    });
    for (size_t c = 0; c < p.size(); ++c) p[c] += opts.alpha_p * pcorr[c];

    if (it % 100 == 0) {
      // windowed relative L2 change of the cell-centered velocity
      double num = 0, den = 0;
      max_div = 0;
      for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
          for (int i = 0; i < nx; ++i) {
            const size_t c = g.idx(i, j, k);
            if (!is_open(g.cells[c])) continue;
            const double uc = 0.5 * (u[f.fui(i, j, k)] + u[f.fui(i + 1, j, k)]);
            const double vc = 0.5 * (v[f.fvi(i, j, k)] + v[f.fvi(i, j + 1, k)]);
            const double wc = 0.5 * (w[f.fwi(i, j, k)] + w[f.fwi(i, j, k + 1)]);
            num += (uc - pu[c]) * (uc - pu[c]) + (vc - pv[c]) * (vc - pv[c]) +
                   (wc - pw[c]) * (wc - pw[c]);
            den += uc * uc + vc * vc + wc * wc;
            pu[c] = uc;
            pv[c] = vc;
            pw[c] = wc;
            const double div =
                std::abs((u[f.fui(i + 1, j, k)] - u[f.fui(i, j, k)] +
                          v[f.fvi(i, j + 1, k)] - v[f.fvi(i, j, k)] +
                          w[f.fwi(i, j, k + 1)] - w[f.fwi(i, j, k)]) /
                         h);
            max_div = std::max(max_div, div);
          }
      residual = den > 0 ? std::sqrt(num / den) : (num > 0 ? 1.0 : 0.0);
      history.emplace_back(it, residual);
      if (!std::isfinite(residual))
        throw FlowSolveError("solve_steady: iteration diverged", history);
      if (residual < opts.tol) {
        converged = true;
        break;
      }
    }
  }
  if (!converged)
    throw FlowSolveError(
        strfmt("solve_steady: no convergence after %lld iterations "
               "(residual %.3e, tol %.3e)",
               static_cast<long long>(opts.max_iterations), residual, opts.tol),
        history);

  f.scaling = {h, it, opts.alpha_u, opts.alpha_p, stokes, max_div};
  f.residual = residual;
  f.residual_history = std::move(history);
  const size_t n = g.size();
  f.u.assign(n, 0.0);
  f.v.assign(n, 0.0);
  f.w.assign(n, 0.0);
  f.p.assign(n, 0.0);
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        const size_t c = g.idx(i, j, k);
        if (!is_open(g.cells[c])) continue;
        f.u[c] = 0.5 * (u[f.fui(i, j, k)] + u[f.fui(i + 1, j, k)]);
        f.v[c] = 0.5 * (v[f.fvi(i, j, k)] + v[f.fvi(i, j + 1, k)]);
        f.w[c] = 0.5 * (w[f.fwi(i, j, k)] + w[f.fwi(i, j, k + 1)]);
        f.p[c] = p[c];
      }
  f.fu = std::move(u);
  f.fv = std::move(v);
  f.fw = std::move(w);
  return f;
}

}  // namespace micromix

// Two-species passive particle tracking through the steady field:
// jitter-free inlet seeding, RK4 advection with trilinear velocity
// interpolation, per-period crossing snapshots and the binned mixing index.
#pragma once

#include <cmath>
#include <span>

#include "micromix/flow.hpp"
#include "micromix/geometry.hpp"

namespace micromix {

enum class ParticleStatus : uint8_t { Active = 0, Exited = 1, Stalled = 2 };

struct SnapshotPoint {
  double x_um = 0, z_um = 0;
  uint8_t species = 0;  // 0 = A, 1 = B
};

struct PlaneCrossing {
  double x_um = 0, z_um = 0;
  uint8_t hit = 0;
};

struct ParticleEnsemble {
  std::vector<Vec3> positions_um;
  std::vector<uint8_t> species;
  std::vector<ParticleStatus> status;
  // One list of plane crossings per period plane, in particle-index order.
  std::vector<std::vector<SnapshotPoint>> period_snapshots;
  std::vector<double> plane_y_um;
  // First-crossing record per (particle, plane); basis of the snapshots.
  std::vector<PlaneCrossing> crossings;
  // Grid identity, checked against the velocity field before advection.
  int nx = 0, ny = 0, nz = 0;
  double h_um = 0;
  Vec3 origin_um;

  size_t size() const { return positions_um.size(); }
  size_t count(ParticleStatus s) const {
    size_t n = 0;
    for (auto st : status) n += (st == s);
    return n;
  }
  const PlaneCrossing& crossing(size_t particle, size_t plane) const {
    return crossings[particle * plane_y_um.size() + plane];
  }
};

// Uniform jitter-free lattice over the inlet fluid cross-section, species A
// on the x < centerline half, mirrored to species B, exactly n_total/2 each.
inline ParticleEnsemble seed_inlet(const VoxelGrid& g, int n_total) {
  if (n_total <= 0 || n_total % 2 != 0)
    throw std::invalid_argument("seed_inlet: n_total must be positive and even");

  double x_lo = 1e300, x_hi = -1e300, z_lo = 1e300, z_hi = -1e300;
  size_t n_inlet = 0;
  for (int k = 0; k < g.nz; ++k)
    for (int i = 0; i < g.nx; ++i) {
      const CellKind ck = g.at(i, 0, k);
      if (ck != CellKind::InletA && ck != CellKind::InletB) continue;
      ++n_inlet;
      x_lo = std::min(x_lo, g.origin_um.x + i * g.h_um);
      x_hi = std::max(x_hi, g.origin_um.x + (i + 1) * g.h_um);
      z_lo = std::min(z_lo, g.origin_um.z + k * g.h_um);
      z_hi = std::max(z_hi, g.origin_um.z + (k + 1) * g.h_um);
    }
  if (n_inlet == 0)
    throw std::invalid_argument("seed_inlet: inlet face has no fluid cells");
  const double area = (x_hi - x_lo) * (z_hi - z_lo);
  if (n_total > area / 0.1)
    throw std::invalid_argument(
        "seed_inlet: n_total exceeds one particle per 0.1 um^2 of inlet area");

  const double cx = 0.5 * (x_lo + x_hi);
  const double half_w = cx - x_lo;
  const double height = z_hi - z_lo;
  const int n_side = n_total / 2;
  const int cols = std::max(
      1, static_cast<int>(std::lround(std::sqrt(n_side * half_w / height))));
  const int rows = (n_side + cols - 1) / cols;

  ParticleEnsemble ens;
  ens.nx = g.nx;
  ens.ny = g.ny;
  ens.nz = g.nz;
  ens.h_um = g.h_um;
  ens.origin_um = g.origin_um;
  ens.positions_um.reserve(n_total);
  ens.species.reserve(n_total);
  const double ddx = half_w / cols, ddz = height / rows;
  int placed = 0;
  for (int r = 0; r < rows && placed < n_side; ++r)
    for (int c = 0; c < cols && placed < n_side; ++c, ++placed) {
      const double xa = x_lo + (c + 0.5) * ddx;
      const double z = z_lo + (r + 0.5) * ddz;
      ens.positions_um.push_back({xa, g.origin_um.y, z});
      ens.species.push_back(0);
      ens.positions_um.push_back({2.0 * cx - xa, g.origin_um.y, z});
      ens.species.push_back(1);
    }
  ens.status.assign(ens.positions_um.size(), ParticleStatus::Active);
  return ens;
}

// Trilinear interpolation over the cell-center lattice; solid cells hold
// zero velocity, consistent with no-slip walls. Positions are clamped to
// the center lattice, so queries on the domain boundary are valid. The
// _clamped variant accepts positions outside the bounding box (used for
// RK4 trial points that may momentarily poke past a face).
inline Vec3 interpolate_velocity_clamped(const VelocityField& f,
                                         const Vec3& p_um) {
  auto locate = [](double rel, int n, int& i0, double& t) {
    double gc = rel - 0.5;  // cell-center coordinate
    gc = std::clamp(gc, 0.0, static_cast<double>(n - 1));
    i0 = std::min(static_cast<int>(gc), n - 2 >= 0 ? n - 2 : 0);
    t = gc - i0;
  };
  int i0, j0, k0;
  double tx, ty, tz;
  locate((p_um.x - f.origin_um.x) / f.h_um, f.nx, i0, tx);
  locate((p_um.y - f.origin_um.y) / f.h_um, f.ny, j0, ty);
  locate((p_um.z - f.origin_um.z) / f.h_um, f.nz, k0, tz);

  Vec3 out;
  for (int dk = 0; dk < 2; ++dk)
    for (int dj = 0; dj < 2; ++dj)
      for (int di = 0; di < 2; ++di) {
        const double wgt = (di ? tx : 1 - tx) * (dj ? ty : 1 - ty) *
                           (dk ? tz : 1 - tz);
        const size_t c = f.idx(std::min(i0 + di, f.nx - 1),
                               std::min(j0 + dj, f.ny - 1),
                               std::min(k0 + dk, f.nz - 1));
        out.x += wgt * f.u[c];
        out.y += wgt * f.v[c];
        out.z += wgt * f.w[c];
      }
  return out;
}

inline Vec3 interpolate_velocity(const VelocityField& f, const Vec3& p_um) {
  const double eps = 1e-6;
  if (p_um.x < f.origin_um.x - eps ||
      p_um.x > f.origin_um.x + f.nx * f.h_um + eps ||
      p_um.y < f.origin_um.y - eps ||
      p_um.y > f.origin_um.y + f.ny * f.h_um + eps ||
      p_um.z < f.origin_um.z - eps ||
      p_um.z > f.origin_um.z + f.nz * f.h_um + eps)
    throw std::invalid_argument("interpolate_velocity: position outside domain");
  return interpolate_velocity_clamped(f, p_um);
}

struct AdvectOptions {
  double cfl = 0.5;                  // dt = cfl * h / max speed
  double stall_displacement = 1e-6;  // in units of h, per step
  int stall_patience = 10000;        // consecutive slow steps before STALLED
  double max_transit_factor = 50.0;  // step cap, in mean flow-through times
  int64_t max_steps_override = 0;    // >0: explicit step cap
};

// Classical RK4 advection of the whole ensemble. Records the first crossing
// of each period plane per particle; reflects wall-bound steps back to the
// last in-fluid point along the step; marks particles that stop advancing
// as STALLED and particles that reach the outlet plane as EXITED.
inline ParticleEnsemble advect(const VelocityField& f, const VoxelGrid& g,
                               ParticleEnsemble ens,
                               std::span<const double> planes_um,
                               const AdvectOptions& opts = {}) {
  if (ens.nx != f.nx || ens.ny != f.ny || ens.nz != f.nz ||
      ens.h_um != f.h_um)
    throw std::invalid_argument("advect: field/ensemble grid mismatch");
  if (ens.size() == 0)
    throw std::invalid_argument("advect: empty ensemble");

  const int n_planes = static_cast<int>(planes_um.size());
  ens.plane_y_um.assign(planes_um.begin(), planes_um.end());
  ens.period_snapshots.assign(n_planes, {});
  for (int k = 1; k < n_planes; ++k)
    if (planes_um[k] <= planes_um[k - 1])
      throw std::invalid_argument("advect: planes must be strictly increasing");

  const double u_max = f.max_speed();
  ens.crossings.assign(ens.size() * std::max(n_planes, 1), {});
  if (u_max <= 0.0) return ens;  // quiescent field: nothing moves

  const double dt = opts.cfl * (f.h_um * units::um_to_m) / u_max;
  const double scale = dt * units::m_to_um;  // velocity m/s -> step in um
  const double y_out = f.origin_um.y + f.ny * f.h_um;
  const double u_mean = std::max(f.mean_axial_speed(g), 0.05 * u_max);
  const double transit_s = (f.ny * f.h_um * units::um_to_m) / u_mean;
  const int64_t max_steps =
      opts.max_steps_override > 0
          ? opts.max_steps_override
          : static_cast<int64_t>(opts.max_transit_factor * transit_s / dt) + 1;
  const double stall_um = opts.stall_displacement * f.h_um;

  auto in_open_cell = [&](const Vec3& p) {
    const int i = static_cast<int>((p.x - g.origin_um.x) / g.h_um);
    const int j = static_cast<int>((p.y - g.origin_um.y) / g.h_um);
    const int k = static_cast<int>((p.z - g.origin_um.z) / g.h_um);
    const int ic = std::clamp(i, 0, g.nx - 1);
    const int jc = std::clamp(j, 0, g.ny - 1);
    const int kc = std::clamp(k, 0, g.nz - 1);
    if (ic != i || kc != k || j < 0) return false;  // left through a wall
    return is_open(g.at(ic, jc, kc));
  };

  parallel_for(0, static_cast<int64_t>(ens.size()), [&](int64_t pi) {
    Vec3 p = ens.positions_um[static_cast<size_t>(pi)];
    int next_plane = 0;
    while (next_plane < n_planes && planes_um[next_plane] <= p.y) ++next_plane;
    int stall_run = 0;
    ParticleStatus st = ParticleStatus::Active;

    for (int64_t step = 0; step < max_steps; ++step) {
      const Vec3 k1 = interpolate_velocity_clamped(f, p);
      const Vec3 k2 = interpolate_velocity_clamped(f, p + (0.5 * scale) * k1);
      const Vec3 k3 = interpolate_velocity_clamped(f, p + (0.5 * scale) * k2);
      const Vec3 k4 = interpolate_velocity_clamped(f, p + scale * k3);
      Vec3 pn = p + (scale / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

      if (!in_open_cell(pn)) {
        // shorten the step along the chord to the last in-fluid point
        double lo = 0.0, hi = 1.0;
        const Vec3 d = pn - p;
        for (int b = 0; b < 40; ++b) {
          const double mid = 0.5 * (lo + hi);
          if (in_open_cell(p + mid * d))
            lo = mid;
          else
            hi = mid;
        }
        pn = p + lo * d;
      }

      while (next_plane < n_planes && pn.y >= planes_um[next_plane]) {
        const double t =
            (planes_um[next_plane] - p.y) / std::max(pn.y - p.y, 1e-300);
        PlaneCrossing& c =
            ens.crossings[static_cast<size_t>(pi) * n_planes + next_plane];
        c.x_um = p.x + t * (pn.x - p.x);
        c.z_um = p.z + t * (pn.z - p.z);
        c.hit = 1;
        ++next_plane;
      }

      const double disp = (pn - p).norm();
      p = pn;
      if (p.y >= y_out - 1e-12) {
        st = ParticleStatus::Exited;
        break;
      }
      if (disp < stall_um) {
        if (++stall_run >= opts.stall_patience) {
          st = ParticleStatus::Stalled;
          break;
        }
      } else {
        stall_run = 0;
      }
    }
    ens.positions_um[static_cast<size_t>(pi)] = p;
    ens.status[static_cast<size_t>(pi)] = st;
  });

  for (int k = 0; k < n_planes; ++k) {
    auto& snap = ens.period_snapshots[k];
    for (size_t pi = 0; pi < ens.size(); ++pi) {
      const PlaneCrossing& c = ens.crossings[pi * n_planes + k];
      if (c.hit) snap.push_back({c.x_um, c.z_um, ens.species[pi]});
    }
  }
  return ens;
}

// Binned mixing index M = 1 - sigma/sigma0 with sigma0 = 0.5: the standard
// species-fraction standard deviation over bins holding at least 5
// particles, clamped to [0, 1].
inline double mixing_index(std::span<const SnapshotPoint> snapshot, int nbx,
                           int nbz, double width_um, double height_um) {
  if (snapshot.empty())
    throw std::invalid_argument("mixing_index: empty snapshot");
  if (nbx < 1 || nbz < 1)
    throw std::invalid_argument("mixing_index: bin counts must be >= 1");
  std::vector<int> total(static_cast<size_t>(nbx) * nbz, 0);
  std::vector<int> count_a(static_cast<size_t>(nbx) * nbz, 0);
  for (const auto& s : snapshot) {
    const int bi = std::clamp(static_cast<int>(s.x_um / width_um * nbx), 0, nbx - 1);
    const int bk = std::clamp(static_cast<int>(s.z_um / height_um * nbz), 0, nbz - 1);
    const size_t b = static_cast<size_t>(bk) * nbx + bi;
    ++total[b];
    if (s.species == 0) ++count_a[b];
  }
  std::vector<double> fractions;
  for (size_t b = 0; b < total.size(); ++b)
    if (total[b] >= 5)
      fractions.push_back(static_cast<double>(count_a[b]) / total[b]);
  if (fractions.empty())
    throw std::invalid_argument("mixing_index: no bin reaches 5 particles");
  double mean = 0;
  for (double fr : fractions) mean += fr;
  mean /= fractions.size();
  double var = 0;
  for (double fr : fractions) var += (fr - mean) * (fr - mean);
  var /= fractions.size();
  const double m = 1.0 - std::sqrt(var) / 0.5;
  return std::clamp(m, 0.0, 1.0);
}

// Ensemble-mean angular displacement (radians) about the channel axis
// between two period planes, over particles that crossed every plane in
// [first_plane, last_plane]. The per-period increment is unwrapped to
// (-pi, pi], assuming less than half a turn per period. Positive =
// counterclockwise in the x-right, z-up cross-section view. n_used reports
// how many particles qualified.
inline double mean_rotation(const ParticleEnsemble& ens, int first_plane,
                            int last_plane, double center_x_um,
                            double center_z_um, size_t* n_used = nullptr) {
  const int np = static_cast<int>(ens.plane_y_um.size());
  if (first_plane < 0 || last_plane >= np || first_plane >= last_plane)
    throw std::invalid_argument("mean_rotation: bad plane range");
  const double pi = std::acos(-1.0);
  size_t used = 0;
  double sum = 0;
  for (size_t i = 0; i < ens.size(); ++i) {
    bool complete = true;
    for (int k = first_plane; k <= last_plane && complete; ++k)
      complete = ens.crossing(i, k).hit != 0;
    if (!complete) continue;
    double theta_prev = 0, accum = 0;
    for (int k = first_plane; k <= last_plane; ++k) {
      const auto& c = ens.crossing(i, k);
      const double theta =
          std::atan2(c.z_um - center_z_um, c.x_um - center_x_um);
      if (k > first_plane) {
        double d = theta - theta_prev;
        while (d > pi) d -= 2 * pi;
        while (d < -pi) d += 2 * pi;
        accum += d;
      }
      theta_prev = theta;
    }
    sum += accum;
    ++used;
  }
  if (n_used) *n_used = used;
  return used ? sum / used : 0.0;
}

}  // namespace micromix

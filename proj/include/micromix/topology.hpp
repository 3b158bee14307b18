// Cross-sectional flow topology: in-plane slice sampling (optionally on
// slanted planes projected onto xz), critical-point detection on the
// bilinear interpolant, Jacobian classification, and a vortex census from
// the slice vorticity.
//
// Orientation convention: slices are viewed with x to the right and z up.
// CCW rotation in that view corresponds to negative axial vorticity
// w_y = d(u_x)/dz - d(u_z)/dx.
#pragma once

#include <optional>

#include "micromix/tracer.hpp"

namespace micromix {

struct SlicePlane {
  double y_um = 0;       // y where the plane crosses the channel centerline
  double slant_deg = 0;  // rotation about z; 0 = pure xz plane
};

struct SliceField {
  SlicePlane plane;
  double spacing_um = 0;
  int ns = 0, nz = 0;            // samples across (projected x) and up (z)
  double x0_um = 0, z0_um = 0;   // coordinates of sample (0,0)
  std::vector<double> ux, uz;    // in-plane velocity, m/s
  std::vector<double> vort;      // w_y, 1/s
  std::vector<uint8_t> mask;     // 1 = fluid sample

  size_t idx(int is, int iz) const {
    return static_cast<size_t>(iz) * ns + is;
  }
  bool valid(int is, int iz) const {
    return is >= 0 && is < ns && iz >= 0 && iz < nz && mask[idx(is, iz)];
  }
  double sx(int is) const { return x0_um + is * spacing_um; }
  double sz(int iz) const { return z0_um + iz * spacing_um; }
};

enum class CriticalPointKind {
  Saddle,
  NodeSource,
  NodeSink,
  FocusCw,
  FocusCcw,
  Center,
  Degenerate
};

inline std::string to_string(CriticalPointKind k) {
  switch (k) {
    case CriticalPointKind::Saddle: return "SADDLE";
    case CriticalPointKind::NodeSource: return "NODE_SOURCE";
    case CriticalPointKind::NodeSink: return "NODE_SINK";
    case CriticalPointKind::FocusCw: return "FOCUS_CW";
    case CriticalPointKind::FocusCcw: return "FOCUS_CCW";
    case CriticalPointKind::Center: return "CENTER";
    case CriticalPointKind::Degenerate: return "DEGENERATE";
  }
  return "?";
}

enum class RotationSense { None, Cw, Ccw };

struct Mat2 {
  // row = velocity component (ux, uz), column = direction (x, z); 1/s
  double a11 = 0, a12 = 0, a21 = 0, a22 = 0;
  double det() const { return a11 * a22 - a12 * a21; }
  double trace() const { return a11 + a22; }
  double frob() const {
    return std::sqrt(a11 * a11 + a12 * a12 + a21 * a21 + a22 * a22);
  }
};

struct Classification {
  CriticalPointKind kind = CriticalPointKind::Degenerate;
  RotationSense sense = RotationSense::None;
};

struct CriticalPoint {
  double x_um = 0, z_um = 0;  // projected-xz location
  Mat2 jacobian;              // of the in-plane field at the point
  CriticalPointKind kind = CriticalPointKind::Degenerate;
  RotationSense sense = RotationSense::None;
  double speed = 0;  // residual in-plane speed at the refined root
};

struct Vortex {
  CriticalPoint center;
  RotationSense sense = RotationSense::None;
  double size_um2 = 0;         // area of the vorticity-threshold region
  double peak_vorticity = 0;   // signed w_y of largest magnitude in region
};

// Scale-invariant Jacobian classification. Thresholds are relative to the
// Frobenius norm, so classify(cJ) == classify(J) for any c > 0.
inline Classification classify_critical_point(const Mat2& j) {
  if (!std::isfinite(j.a11) || !std::isfinite(j.a12) ||
      !std::isfinite(j.a21) || !std::isfinite(j.a22))
    throw std::invalid_argument("classify_critical_point: non-finite Jacobian");
  const double scale = j.frob();
  if (scale == 0.0) return {CriticalPointKind::Degenerate, RotationSense::None};
  const double eps_d = 1e-9 * scale * scale;
  const double eps_t = 1e-9 * scale;
  const double det = j.det(), tr = j.trace();
  if (det < -eps_d) return {CriticalPointKind::Saddle, RotationSense::None};
  if (det > eps_d) {
    const double disc = tr * tr - 4.0 * det;
    if (disc < 0.0) {
      // rotational part: positive a21 - a12 spins CCW in the x-right, z-up view
      const RotationSense sense =
          (j.a21 - j.a12) > 0 ? RotationSense::Ccw : RotationSense::Cw;
      if (std::abs(tr) < eps_t) return {CriticalPointKind::Center, sense};
      return {sense == RotationSense::Ccw ? CriticalPointKind::FocusCcw
                                          : CriticalPointKind::FocusCw,
              sense};
    }
    return {tr > 0 ? CriticalPointKind::NodeSource : CriticalPointKind::NodeSink,
            RotationSense::None};
  }
  return {CriticalPointKind::Degenerate, RotationSense::None};
}

// Sample the in-plane velocity on a (possibly slanted) plane, projected
// onto the xz frame. The slanted plane contains the z axis direction and
// the unit vector (cos a, sin a, 0); the plane-normal component of the
// velocity is removed and the remainder expressed in that basis.
inline SliceField slice_field(const VelocityField& f, const VoxelGrid& g,
                              const SlicePlane& plane, double spacing_um = 0) {
  SliceField s;
  s.plane = plane;
  s.spacing_um = spacing_um > 0 ? spacing_um : f.h_um;
  const double a = plane.slant_deg * std::acos(-1.0) / 180.0;
  const double ca = std::cos(a), sa = std::sin(a);
  if (std::abs(ca) < 1e-9)
    throw std::invalid_argument("slice_field: slant angle too close to 90deg");
  const double width = g.nx * g.h_um;
  const double zext = g.nz * g.h_um;
  s.ns = static_cast<int>(std::lround(width / s.spacing_um));
  s.nz = static_cast<int>(std::lround(zext / s.spacing_um));
  s.x0_um = g.origin_um.x + 0.5 * s.spacing_um;
  s.z0_um = g.origin_um.z + 0.5 * s.spacing_um;
  s.ux.assign(static_cast<size_t>(s.ns) * s.nz, 0.0);
  s.uz.assign(static_cast<size_t>(s.ns) * s.nz, 0.0);
  s.vort.assign(static_cast<size_t>(s.ns) * s.nz, 0.0);
  s.mask.assign(static_cast<size_t>(s.ns) * s.nz, 0);

  const double y_lo = g.origin_um.y, y_hi = g.origin_um.y + g.ny * g.h_um;
  const double xc = g.origin_um.x + 0.5 * width;
  size_t n_fluid = 0;
  for (int iz = 0; iz < s.nz; ++iz)
    for (int is = 0; is < s.ns; ++is) {
      const double x = s.sx(is);
      const double z = s.sz(iz);
      const double y = plane.y_um + (x - xc) * (sa / ca);
      if (y < y_lo || y >= y_hi) continue;
      const int ci = std::clamp(
          static_cast<int>((x - g.origin_um.x) / g.h_um), 0, g.nx - 1);
      const int cj = std::clamp(
          static_cast<int>((y - g.origin_um.y) / g.h_um), 0, g.ny - 1);
      const int ck = std::clamp(
          static_cast<int>((z - g.origin_um.z) / g.h_um), 0, g.nz - 1);
      if (!is_open(g.at(ci, cj, ck))) continue;
      const Vec3 u = interpolate_velocity(f, {x, y, z});
      const size_t c = s.idx(is, iz);
      s.ux[c] = u.x * ca + u.y * sa;
      s.uz[c] = u.z;
      s.mask[c] = 1;
      ++n_fluid;
    }
  if (n_fluid == 0)
    throw std::invalid_argument("slice_field: plane entirely in solid");

  // w_y = d(ux)/dz - d(uz)/dx, central differences where possible.
  const double inv_m = 1.0 / (s.spacing_um * units::um_to_m);
  for (int iz = 0; iz < s.nz; ++iz)
    for (int is = 0; is < s.ns; ++is) {
      if (!s.mask[s.idx(is, iz)]) continue;
      auto deriv = [&](const std::vector<double>& a2, int di, int dk) {
        const bool p_ok = s.valid(is + di, iz + dk);
        const bool m_ok = s.valid(is - di, iz - dk);
        const size_t c0 = s.idx(is, iz);
        if (p_ok && m_ok)
          return (a2[s.idx(is + di, iz + dk)] - a2[s.idx(is - di, iz - dk)]) *
                 0.5 * inv_m;
        if (p_ok) return (a2[s.idx(is + di, iz + dk)] - a2[c0]) * inv_m;
        if (m_ok) return (a2[c0] - a2[s.idx(is - di, iz - dk)]) * inv_m;
        return 0.0;
      };
      s.vort[s.idx(is, iz)] = deriv(s.ux, 0, 1) - deriv(s.uz, 1, 0);
    }
  return s;
}

// Zeros of the in-plane field: candidate cells where both components change
// sign, refined by Newton iteration on the bilinear interpolant. Duplicates
// within half a sample spacing are merged.
inline std::vector<CriticalPoint> find_critical_points(const SliceField& s) {
  double vmax = 0;
  for (size_t c = 0; c < s.ux.size(); ++c)
    if (s.mask[c])
      vmax = std::max(vmax, std::hypot(s.ux[c], s.uz[c]));
  std::vector<CriticalPoint> found;
  if (vmax <= 0) return found;
  const double eps_v = 1e-6 * vmax;
  const double inv_m = 1.0 / (s.spacing_um * units::um_to_m);

  for (int iz = 0; iz + 1 < s.nz; ++iz)
    for (int is = 0; is + 1 < s.ns; ++is) {
      if (!(s.valid(is, iz) && s.valid(is + 1, iz) && s.valid(is, iz + 1) &&
            s.valid(is + 1, iz + 1)))
        continue;
      const double x00 = s.ux[s.idx(is, iz)], x10 = s.ux[s.idx(is + 1, iz)];
      const double x01 = s.ux[s.idx(is, iz + 1)],
                   x11 = s.ux[s.idx(is + 1, iz + 1)];
      const double z00 = s.uz[s.idx(is, iz)], z10 = s.uz[s.idx(is + 1, iz)];
      const double z01 = s.uz[s.idx(is, iz + 1)],
                   z11 = s.uz[s.idx(is + 1, iz + 1)];
      auto straddles = [](double a, double b, double c, double d) {
        return std::min(std::min(a, b), std::min(c, d)) <= 0.0 &&
               std::max(std::max(a, b), std::max(c, d)) >= 0.0;
      };
      if (!straddles(x00, x10, x01, x11) || !straddles(z00, z10, z01, z11))
        continue;

      // bilinear u(t, v) = a + b t + c v + d t v on the unit cell
      const double bx = x10 - x00, cxv = x01 - x00, dx2 = x11 - x10 - x01 + x00;
      const double bz = z10 - z00, czv = z01 - z00, dz2 = z11 - z10 - z01 + z00;
      double t = 0.5, v = 0.5;
      bool ok = false;
      for (int it = 0; it < 50; ++it) {
        const double fx = x00 + bx * t + cxv * v + dx2 * t * v;
        const double fz = z00 + bz * t + czv * v + dz2 * t * v;
        if (std::hypot(fx, fz) < eps_v) {
          ok = true;
          break;
        }
        const double j11 = bx + dx2 * v, j12 = cxv + dx2 * t;
        const double j21 = bz + dz2 * v, j22 = czv + dz2 * t;
        const double det = j11 * j22 - j12 * j21;
        if (std::abs(det) < 1e-300) break;
        t -= (fx * j22 - fz * j12) / det;
        v -= (fz * j11 - fx * j21) / det;
        if (t < -1.0 || t > 2.0 || v < -1.0 || v > 2.0) break;
      }
      if (!ok || t < -0.05 || t > 1.05 || v < -0.05 || v > 1.05) continue;

      CriticalPoint cp;
      cp.x_um = s.sx(is) + t * s.spacing_um;
      cp.z_um = s.sz(iz) + v * s.spacing_um;
      cp.jacobian = {(bx + dx2 * v) * inv_m, (cxv + dx2 * t) * inv_m,
                     (bz + dz2 * v) * inv_m, (czv + dz2 * t) * inv_m};
      const double fx = x00 + bx * t + cxv * v + dx2 * t * v;
      const double fz = z00 + bz * t + czv * v + dz2 * t * v;
      cp.speed = std::hypot(fx, fz);
      const Classification cl = classify_critical_point(cp.jacobian);
      cp.kind = cl.kind;
      cp.sense = cl.sense;

      bool merged = false;
      for (auto& prev : found) {
        if (std::hypot(prev.x_um - cp.x_um, prev.z_um - cp.z_um) <
            0.5 * s.spacing_um) {
          if (cp.speed < prev.speed) prev = cp;
          merged = true;
          break;
        }
      }
      if (!merged) found.push_back(cp);
    }
  return found;
}

// One vortex per focus/center critical point; its size is the area of the
// 4-connected region with |w_y| >= 0.2 * max |w_y| containing the center
// (at least one sample cell).
inline std::vector<Vortex> vortex_census(const SliceField& s) {
  const auto cps = find_critical_points(s);
  double wmax = 0;
  for (size_t c = 0; c < s.vort.size(); ++c)
    if (s.mask[c]) wmax = std::max(wmax, std::abs(s.vort[c]));
  const double thr = 0.2 * wmax;
  const double cell_area = s.spacing_um * s.spacing_um;

  std::vector<Vortex> out;
  for (const auto& cp : cps) {
    if (cp.kind != CriticalPointKind::FocusCw &&
        cp.kind != CriticalPointKind::FocusCcw &&
        cp.kind != CriticalPointKind::Center)
      continue;
    Vortex v;
    v.center = cp;
    const int is0 = std::clamp(
        static_cast<int>(std::lround((cp.x_um - s.x0_um) / s.spacing_um)), 0,
        s.ns - 1);
    const int iz0 = std::clamp(
        static_cast<int>(std::lround((cp.z_um - s.z0_um) / s.spacing_um)), 0,
        s.nz - 1);
    const double w_center = s.vort[s.idx(is0, iz0)];
    v.sense = w_center > 0 ? RotationSense::Cw
                           : (w_center < 0 ? RotationSense::Ccw
                                           : cp.sense);
    v.peak_vorticity = w_center;
    size_t n_region = 0;
    if (s.valid(is0, iz0) && std::abs(w_center) >= thr && wmax > 0) {
      std::vector<uint8_t> seen(s.ux.size(), 0);
      std::vector<std::pair<int, int>> stack{{is0, iz0}};
      seen[s.idx(is0, iz0)] = 1;
      while (!stack.empty()) {
        auto [is, iz] = stack.back();
        stack.pop_back();
        ++n_region;
        const double wv = s.vort[s.idx(is, iz)];
        if (std::abs(wv) > std::abs(v.peak_vorticity)) v.peak_vorticity = wv;
        const int di[4] = {1, -1, 0, 0}, dk[4] = {0, 0, 1, -1};
        for (int d = 0; d < 4; ++d) {
          const int ni = is + di[d], nk = iz + dk[d];
          if (!s.valid(ni, nk)) continue;
          const size_t nc = s.idx(ni, nk);
          if (seen[nc] || std::abs(s.vort[nc]) < thr) continue;
          seen[nc] = 1;
          stack.push_back({ni, nk});
        }
      }
    }
    v.size_um2 = std::max<size_t>(n_region, 1) * cell_area;
    out.push_back(v);
  }
  std::sort(out.begin(), out.end(), [](const Vortex& a, const Vortex& b) {
    if (a.size_um2 != b.size_um2) return a.size_um2 > b.size_um2;
    return a.center.x_um < b.center.x_um;
  });
  return out;
}

}  // namespace micromix

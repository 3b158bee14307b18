// Parametric mixer geometry: exact point membership for the three channel
// variants (plain duct, slanted-groove mixer, groove + zigzag-barrier mixer)
// and voxelization onto a flagged uniform grid.
//
// Coordinates (micrometres):
//   x in [0, channel_width]   across the channel
//   y in [-inlet_length, channel_length]   along the channel; the merged
//       inlet arm occupies y < 0, the patterned mixing channel y >= 0
//   z in [-groove_depth, channel_height]   grooves are slots below the
//       z = 0 floor, the barrier hangs down from the z = channel_height wall
#pragma once

#include <algorithm>
#include <cstdint>
#include <queue>
#include <string>
#include <vector>

#include "micromix/core.hpp"

namespace micromix {

enum class MixerVariant { Plain, Sgm, Cdm };

inline std::string to_string(MixerVariant v) {
  switch (v) {
    case MixerVariant::Plain: return "PLAIN";
    case MixerVariant::Sgm: return "SGM";
    case MixerVariant::Cdm: return "CDM";
  }
  return "?";
}

inline MixerVariant variant_from_string(const std::string& s) {
  if (s == "PLAIN") return MixerVariant::Plain;
  if (s == "SGM") return MixerVariant::Sgm;
  if (s == "CDM") return MixerVariant::Cdm;
  throw std::invalid_argument("variant: unknown value \"" + s +
                              "\" (allowed: PLAIN, SGM, CDM)");
}

struct MixerConfig {
  MixerVariant variant = MixerVariant::Cdm;

  // Mixing channel box.
  double channel_length_um = 8100.0;
  double channel_width_um = 200.0;
  double channel_height_um = 70.0;
  // Merged inlet arm prepended along -y.
  double inlet_length_um = 500.0;

  // Slanted grooves patterned into the floor (SGM, CDM).
  double groove_width_um = 50.0;   // measured perpendicular to the groove axis
  double groove_depth_um = 50.0;
  double groove_angle_deg = 45.0;  // from the x-axis, in the xy plane
  double groove_pitch_um = 100.0;  // center-to-center along y
  int grooves_per_period = 8;

  // Zigzag barrier hanging from the top wall (CDM).
  double barrier_width_um = 20.0;
  double barrier_height_um = 40.0;
  double barrier_period_um = 800.0;
  double barrier_amplitude_um = 50.0;  // lateral half-excursion of the centerline

  double entrance_offset_um = 100.0;  // straight run before period 1
  int n_periods = 10;

  bool has_grooves() const { return variant != MixerVariant::Plain; }
  bool has_barrier() const { return variant == MixerVariant::Cdm; }
  double floor_z_um() const { return has_grooves() ? -groove_depth_um : 0.0; }
  double pattern_begin_um() const { return entrance_offset_um; }
  double pattern_end_um() const {
    return entrance_offset_um + n_periods * barrier_period_um;
  }
  double domain_y_min_um() const { return -inlet_length_um; }

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0))
        throw std::invalid_argument(std::string(name) + " must be > 0");
    };
    positive(channel_length_um, "channel_length_um");
    positive(channel_width_um, "channel_width_um");
    positive(channel_height_um, "channel_height_um");
    positive(inlet_length_um, "inlet_length_um");
    positive(entrance_offset_um, "entrance_offset_um");
    positive(barrier_period_um, "barrier_period_um");
    if (n_periods < 0) throw std::invalid_argument("n_periods must be >= 0");
    if (entrance_offset_um + n_periods * barrier_period_um >
        channel_length_um + 1e-9)
      throw std::invalid_argument(
          "entrance_offset_um + n_periods * barrier_period_um must not exceed "
          "channel_length_um");
    if (has_grooves()) {
      positive(groove_width_um, "groove_width_um");
      positive(groove_depth_um, "groove_depth_um");
      positive(groove_pitch_um, "groove_pitch_um");
      if (grooves_per_period <= 0)
        throw std::invalid_argument("grooves_per_period must be > 0");
      if (grooves_per_period * groove_pitch_um > barrier_period_um + 1e-9)
        throw std::invalid_argument(
            "grooves_per_period * groove_pitch_um must not exceed "
            "barrier_period_um");
      if (std::abs(groove_angle_deg) >= 90.0)
        throw std::invalid_argument("groove_angle_deg must lie in (-90, 90)");
    }
    if (has_barrier()) {
      positive(barrier_width_um, "barrier_width_um");
      positive(barrier_height_um, "barrier_height_um");
      positive(barrier_amplitude_um, "barrier_amplitude_um");
      if (barrier_height_um >= channel_height_um)
        throw std::invalid_argument(
            "barrier_height_um must be < channel_height_um");
    }
  }
};

enum class CellKind : uint8_t { Fluid = 0, Solid = 1, InletA = 2, InletB = 3, Outlet = 4 };

inline bool is_open(CellKind k) { return k != CellKind::Solid; }

struct VoxelGrid {
  double h_um = 0.0;
  int nx = 0, ny = 0, nz = 0;
  Vec3 origin_um;  // corner of cell (0,0,0)
  std::vector<CellKind> cells;

  size_t size() const { return cells.size(); }
  size_t idx(int i, int j, int k) const {
    return (static_cast<size_t>(k) * ny + j) * nx + i;
  }
  CellKind at(int i, int j, int k) const { return cells[idx(i, j, k)]; }
  bool in_bounds(int i, int j, int k) const {
    return i >= 0 && i < nx && j >= 0 && j < ny && k >= 0 && k < nz;
  }
  Vec3 center_um(int i, int j, int k) const {
    return {origin_um.x + (i + 0.5) * h_um, origin_um.y + (j + 0.5) * h_um,
            origin_um.z + (k + 0.5) * h_um};
  }
  size_t count(CellKind kind) const {
    size_t n = 0;
    for (CellKind c : cells) n += (c == kind);
    return n;
  }
  size_t count_open() const {
    size_t n = 0;
    for (CellKind c : cells) n += is_open(c);
    return n;
  }
  // Estimated fluid volume of the staircase geometry, um^3.
  double fluid_volume_um3() const {
    return static_cast<double>(count_open()) * h_um * h_um * h_um;
  }
};

namespace detail {

// Lateral offset of the zigzag barrier centerline at phase t in [0,1):
// triangular wave, -1 at t=0, +1 at t=0.5.
inline double zigzag(double t) {
  t -= std::floor(t);
  return t < 0.5 ? 4.0 * t - 1.0 : 3.0 - 4.0 * t;
}

inline bool in_groove(const MixerConfig& c, const Vec3& p) {
  // Grooves run across the floor at groove_angle to the x-axis. Slot m is
  // centered (at mid-width) on y = entrance_offset + (m + 1/2) * pitch.
  const double a = c.groove_angle_deg * std::acos(-1.0) / 180.0;
  const double ca = std::cos(a), sa = std::sin(a);
  const double half_w = 0.5 * c.groove_width_um;
  const double xm = p.x - 0.5 * c.channel_width_um;
  // Perpendicular distance from p to centerline m is
  //   s_m = -xm * sin(a) + (p.y - y_m) * cos(a).
  const double y_on_axis = p.y - xm * (sa / ca);  // centerline y through p
  const int n_grooves = c.n_periods * c.grooves_per_period;
  const double m0 =
      (y_on_axis - c.entrance_offset_um) / c.groove_pitch_um - 0.5;
  for (int dm = -1; dm <= 1; ++dm) {
    const int m = static_cast<int>(std::lround(m0)) + dm;
    if (m < 0 || m >= n_grooves) continue;
    const double ym = c.entrance_offset_um + (m + 0.5) * c.groove_pitch_um;
    const double s = -xm * sa + (p.y - ym) * ca;
    if (std::abs(s) <= half_w) return true;
  }
  return false;
}

inline bool in_barrier(const MixerConfig& c, const Vec3& p) {
  if (p.z < c.channel_height_um - c.barrier_height_um) return false;
  if (p.y < c.pattern_begin_um() || p.y > c.pattern_end_um()) return false;
  const double t = (p.y - c.entrance_offset_um) / c.barrier_period_um;
  const double xc =
      0.5 * c.channel_width_um + c.barrier_amplitude_um * zigzag(t);
  return std::abs(p.x - xc) <= 0.5 * c.barrier_width_um;
}

}  // namespace detail

// Exact membership test. Throws when p lies outside the configured
// bounding box.
inline CellKind classify_point(const MixerConfig& c, const Vec3& p) {
  const double eps = 1e-9;
  if (p.x < -eps || p.x > c.channel_width_um + eps ||
      p.y < c.domain_y_min_um() - eps || p.y > c.channel_length_um + eps ||
      p.z < c.floor_z_um() - eps || p.z > c.channel_height_um + eps)
    throw std::invalid_argument("classify_point: outside domain");

  if (p.y < 0.0)  // inlet arm: plain duct cross-section
    return p.z >= 0.0 ? CellKind::Fluid : CellKind::Solid;

  if (p.z < 0.0)  // below the floor: fluid only inside a groove slot
    return (c.has_grooves() && detail::in_groove(c, p)) ? CellKind::Fluid
                                                        : CellKind::Solid;

  if (c.has_barrier() && detail::in_barrier(c, p)) return CellKind::Solid;
  return CellKind::Fluid;
}

// Cell-center voxelization onto a uniform grid covering the bounding box.
// Inlet-face fluid cells are split into species A (x < centerline) and
// species B; the outlet face is flagged. Throws "geometry disconnected"
// when the fluid cells do not form a single 6-connected component.
inline VoxelGrid voxelize(const MixerConfig& c, double h_um,
                          std::vector<std::string>* warnings = nullptr) {
  if (!(h_um > 0.0)) throw std::invalid_argument("voxelize: h must be > 0");
  auto divisible = [&](double extent) {
    const double r = extent / h_um;
    return std::abs(r - std::lround(r)) <= 0.01 * r;
  };
  if (warnings) {
    if (!divisible(c.channel_width_um))
      warnings->push_back("grid spacing does not divide channel_width within 1%");
    if (!divisible(c.channel_height_um))
      warnings->push_back("grid spacing does not divide channel_height within 1%");
  }

  VoxelGrid g;
  g.h_um = h_um;
  g.origin_um = {0.0, c.domain_y_min_um(), c.floor_z_um()};
  g.nx = static_cast<int>(std::lround(c.channel_width_um / h_um));
  g.ny = static_cast<int>(
      std::lround((c.channel_length_um - c.domain_y_min_um()) / h_um));
  g.nz = static_cast<int>(
      std::lround((c.channel_height_um - c.floor_z_um()) / h_um));
  if (g.nx < 1 || g.ny < 2 || g.nz < 1)
    throw std::invalid_argument("voxelize: grid too coarse for the domain");
  g.cells.assign(static_cast<size_t>(g.nx) * g.ny * g.nz, CellKind::Solid);

  parallel_for(0, static_cast<int64_t>(g.nz) * g.ny, [&](int64_t kj) {
    const int k = static_cast<int>(kj / g.ny);
    const int j = static_cast<int>(kj % g.ny);
    for (int i = 0; i < g.nx; ++i)
      g.cells[g.idx(i, j, k)] = classify_point(c, g.center_um(i, j, k));
  });

  // Flag boundary faces.
  const double mid_x = 0.5 * c.channel_width_um;
  for (int k = 0; k < g.nz; ++k)
    for (int i = 0; i < g.nx; ++i) {
      if (g.at(i, 0, k) == CellKind::Fluid)
        g.cells[g.idx(i, 0, k)] = g.center_um(i, 0, k).x < mid_x
                                      ? CellKind::InletA
                                      : CellKind::InletB;
      if (g.at(i, g.ny - 1, k) == CellKind::Fluid)
        g.cells[g.idx(i, g.ny - 1, k)] = CellKind::Outlet;
    }

  // Single-component check over open cells (BFS, 6-connectivity).
  const size_t n_open = g.count_open();
  if (n_open == 0) throw std::runtime_error("voxelize: geometry disconnected");
  std::vector<uint8_t> seen(g.size(), 0);
  size_t seed = 0;
  while (!is_open(g.cells[seed])) ++seed;
  std::queue<size_t> q;
  q.push(seed);
  seen[seed] = 1;
  size_t reached = 1;
  const int64_t sx = 1, sy = g.nx, sz = static_cast<int64_t>(g.nx) * g.ny;
  while (!q.empty()) {
    const size_t cur = q.front();
    q.pop();
    const int i = static_cast<int>(cur % g.nx);
    const int j = static_cast<int>((cur / g.nx) % g.ny);
    const int k = static_cast<int>(cur / (static_cast<size_t>(g.nx) * g.ny));
    const int64_t offs[6] = {-sx, sx, -sy, sy, -sz, sz};
    const bool ok[6] = {i > 0, i < g.nx - 1, j > 0, j < g.ny - 1, k > 0, k < g.nz - 1};
    for (int d = 0; d < 6; ++d) {
      if (!ok[d]) continue;
      const size_t nb = cur + offs[d];
      if (!seen[nb] && is_open(g.cells[nb])) {
        seen[nb] = 1;
        ++reached;
        q.push(nb);
      }
    }
  }
  if (reached != n_open)
    throw std::runtime_error("voxelize: geometry disconnected");
  return g;
}

// Exit plane of each mixer period: y_k = entrance_offset + k * period.
inline std::vector<double> period_planes(const MixerConfig& c) {
  std::vector<double> planes;
  planes.reserve(c.n_periods);
  for (int k = 1; k <= c.n_periods; ++k)
    planes.push_back(c.entrance_offset_um + k * c.barrier_period_um);
  return planes;
}

}  // namespace micromix

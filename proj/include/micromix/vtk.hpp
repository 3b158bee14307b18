// Legacy ASCII VTK writers: structured points for grids and fields (data
// at cell centers, exported as point data on the center lattice), polydata
// vertices for particle snapshots. Numbers carry 9 significant digits.
#pragma once

#include <fstream>

#include "micromix/flow.hpp"
#include "micromix/tracer.hpp"
#include "micromix/topology.hpp"
#include "micromix/transport.hpp"

namespace micromix {

namespace detail {

inline std::ofstream open_vtk(const std::string& path, const std::string& title,
                              const char* dataset) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_vtk: cannot open " + path);
  out << "# vtk DataFile Version 3.0\n"
      << title << "\nASCII\nDATASET " << dataset << "\n";
  return out;
}

inline void structured_header(std::ofstream& out, int nx, int ny, int nz,
                              const Vec3& origin_um, double h_um) {
  out << "DIMENSIONS " << nx << " " << ny << " " << nz << "\n"
      << "ORIGIN " << num9(origin_um.x + 0.5 * h_um) << " "
      << num9(origin_um.y + 0.5 * h_um) << " " << num9(origin_um.z + 0.5 * h_um)
      << "\n"
      << "SPACING " << num9(h_um) << " " << num9(h_um) << " " << num9(h_um)
      << "\n"
      << "POINT_DATA " << static_cast<size_t>(nx) * ny * nz << "\n";
}

inline void scalar_block(std::ofstream& out, const std::string& name,
                         const std::vector<double>& v) {
  out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
  for (double x : v) out << num9(x) << "\n";
}

}  // namespace detail

// Cell kinds as integer scalars on the center lattice.
inline void write_vtk_grid(const VoxelGrid& g, const std::string& path) {
  auto out = detail::open_vtk(path, "mixer voxel grid", "STRUCTURED_POINTS");
  detail::structured_header(out, g.nx, g.ny, g.nz, g.origin_um, g.h_um);
  out << "SCALARS kind int 1\nLOOKUP_TABLE default\n";
  for (CellKind c : g.cells) out << static_cast<int>(c) << "\n";
  if (!out) throw std::runtime_error("write_vtk: write failed for " + path);
}

// Velocity vectors (m/s, zeros at solid points) plus the pressure scalar.
inline void write_vtk_velocity(const VelocityField& f, const std::string& path) {
  auto out = detail::open_vtk(path, "steady velocity field", "STRUCTURED_POINTS");
  detail::structured_header(out, f.nx, f.ny, f.nz, f.origin_um, f.h_um);
  out << "VECTORS velocity double\n";
  for (size_t c = 0; c < f.u.size(); ++c)
    out << num9(f.u[c]) << " " << num9(f.v[c]) << " " << num9(f.w[c]) << "\n";
  detail::scalar_block(out, "pressure", f.p);
  if (!out) throw std::runtime_error("write_vtk: write failed for " + path);
}

// Concentration fields cA, cB, cP.
inline void write_vtk_species(const SpeciesFields& sf, const VoxelGrid& g,
                              const std::string& path) {
  auto out = detail::open_vtk(path, "species concentrations", "STRUCTURED_POINTS");
  detail::structured_header(out, g.nx, g.ny, g.nz, g.origin_um, g.h_um);
  detail::scalar_block(out, "cA", sf.ca);
  detail::scalar_block(out, "cB", sf.cb);
  detail::scalar_block(out, "cP", sf.cp);
  if (!out) throw std::runtime_error("write_vtk: write failed for " + path);
}

// Particle snapshot at a period plane: polydata vertices colored by species.
inline void write_vtk_particles(std::span<const SnapshotPoint> snapshot,
                                double y_um, const std::string& path) {
  auto out = detail::open_vtk(path, "particle snapshot", "POLYDATA");
  const size_t n = snapshot.size();
  out << "POINTS " << n << " double\n";
  for (const auto& s : snapshot)
    out << num9(s.x_um) << " " << num9(y_um) << " " << num9(s.z_um) << "\n";
  out << "VERTICES " << n << " " << 2 * n << "\n";
  for (size_t i = 0; i < n; ++i) out << "1 " << i << "\n";
  out << "POINT_DATA " << n << "\nSCALARS species int 1\nLOOKUP_TABLE default\n";
  for (const auto& s : snapshot) out << static_cast<int>(s.species) << "\n";
  if (!out) throw std::runtime_error("write_vtk: write failed for " + path);
}

// Annotated slice: in-plane velocity (as 3-component vectors in the
// projected frame), vorticity and the fluid mask.
inline void write_vtk_slice(const SliceField& s, const std::string& path) {
  auto out = detail::open_vtk(path, "in-plane slice field", "STRUCTURED_POINTS");
  out << "DIMENSIONS " << s.ns << " " << s.nz << " 1\n"
      << "ORIGIN " << num9(s.x0_um) << " " << num9(s.z0_um) << " "
      << num9(s.plane.y_um) << "\n"
      << "SPACING " << num9(s.spacing_um) << " " << num9(s.spacing_um) << " 1\n"
      << "POINT_DATA " << static_cast<size_t>(s.ns) * s.nz << "\n";
  out << "VECTORS inplane_velocity double\n";
  for (size_t c = 0; c < s.ux.size(); ++c)
    out << num9(s.ux[c]) << " " << num9(s.uz[c]) << " 0\n";
  detail::scalar_block(out, "vorticity_y", s.vort);
  out << "SCALARS mask int 1\nLOOKUP_TABLE default\n";
  for (uint8_t m : s.mask) out << static_cast<int>(m) << "\n";
  if (!out) throw std::runtime_error("write_vtk: write failed for " + path);
}

}  // namespace micromix

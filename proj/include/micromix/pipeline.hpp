// Config-driven pipeline: geometry -> flow -> {trace, topology, transport}
// -> report, with deterministic VTK/CSV artifacts, a JSON metadata sidecar
// recording every applied default and derived quantity, and a checksummed
// manifest of everything written. Partial artifacts are removed when a
// stage fails.
#pragma once

#include <filesystem>
#include <set>

#include "micromix/config.hpp"
#include "micromix/report.hpp"
#include "micromix/vtk.hpp"

namespace micromix {

enum class Stage { Geometry, Flow, Trace, Topology, Transport, Report };

inline const char* stage_name(Stage s) {
  switch (s) {
    case Stage::Geometry: return "geometry";
    case Stage::Flow: return "flow";
    case Stage::Trace: return "trace";
    case Stage::Topology: return "topology";
    case Stage::Transport: return "transport";
    case Stage::Report: return "report";
  }
  return "?";
}

// Expand stage names (CLI subcommands) to the dependency-closed stage set.
inline std::set<Stage> resolve_stages(const std::vector<std::string>& names) {
  std::set<Stage> out;
  auto add = [&](Stage s) {
    out.insert(s);
    switch (s) {
      case Stage::Flow: out.insert(Stage::Geometry); break;
      case Stage::Trace:
      case Stage::Topology:
      case Stage::Transport:
        out.insert(Stage::Geometry);
        out.insert(Stage::Flow);
        break;
      case Stage::Report:
        for (Stage d : {Stage::Geometry, Stage::Flow, Stage::Trace,
                        Stage::Transport})
          out.insert(d);
        break;
      default: break;
    }
  };
  for (const auto& n : names) {
    if (n == "all") {
      for (Stage s : {Stage::Geometry, Stage::Flow, Stage::Trace,
                      Stage::Topology, Stage::Transport, Stage::Report})
        out.insert(s);
    } else if (n == "geometry") add(Stage::Geometry);
    else if (n == "flow") add(Stage::Flow);
    else if (n == "trace") add(Stage::Trace);
    else if (n == "topology") add(Stage::Topology);
    else if (n == "transport") add(Stage::Transport);
    else if (n == "report") add(Stage::Report);
    else
      throw std::invalid_argument("unknown stage \"" + n + "\"");
  }
  return out;
}

struct Artifact {
  std::string path;  // relative to the output directory
  uint64_t bytes = 0;
  std::string checksum;  // fnv1a64, hex
};

struct PipelineResult {
  std::vector<Artifact> manifest;
  nlohmann::ordered_json meta;
};

namespace detail {

inline std::string file_checksum(const std::filesystem::path& p, uint64_t* size) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot reopen artifact " + p.string());
  std::vector<char> buf(1 << 16);
  uint64_t h = 0xcbf29ce484222325ULL;
  uint64_t total = 0;
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    const std::streamsize got = in.gcount();
    h = fnv1a64(buf.data(), static_cast<size_t>(got), h);
    total += static_cast<uint64_t>(got);
  }
  *size = total;
  return strfmt("%016llx", static_cast<unsigned long long>(h));
}

}  // namespace detail

// Runs the selected stages. Refuses to write into an existing non-empty
// output directory unless force is set.
inline PipelineResult run_pipeline(const RunConfig& rc, bool force = false) {
  namespace fs = std::filesystem;
  rc.validate();
  set_thread_count(rc.threads == 0 ? hardware_threads() : rc.threads);
  const std::set<Stage> stages = resolve_stages(rc.stages);

  const fs::path out_dir(rc.output.directory);
  if (fs::exists(out_dir) && !fs::is_empty(out_dir) && !force)
    throw std::runtime_error("output directory " + out_dir.string() +
                             " is not empty (use --force to overwrite)");
  fs::create_directories(out_dir);

  std::vector<std::string> written;  // for cleanup on failure
  auto emit = [&](const std::string& rel, auto&& writer) {
    const fs::path p = out_dir / rel;
    writer(p.string());
    written.push_back(rel);
  };

  PipelineResult result;
  nlohmann::ordered_json& meta = result.meta;
  meta["config_resolved"] = config_to_json(rc);
  meta["config_provided"] = rc.provided;
  auto& derived = meta["derived"];
  derived["q_total_m3_per_s"] = rc.flow.q_total_m3_s();
  derived["reynolds"] = reynolds(rc.flow, rc.mixer);
  {
    const double w = rc.mixer.channel_width_um * units::um_to_m;
    const double h = rc.mixer.channel_height_um * units::um_to_m;
    derived["u_mean_m_per_s"] = rc.flow.q_total_m3_s() / (w * h);
  }
  std::vector<std::string> warnings;

  Stage current = Stage::Geometry;
  try {
    // --- geometry ---
    VoxelGrid grid = voxelize(rc.mixer, rc.numerics.grid_spacing_um, &warnings);
    const auto planes = period_planes(rc.mixer);
    {
      auto& gj = meta["grid"];
      gj["nx"] = grid.nx;
      gj["ny"] = grid.ny;
      gj["nz"] = grid.nz;
      gj["cells"] = grid.size();
      gj["open_cells"] = grid.count_open();
      gj["fluid_volume_um3"] = grid.fluid_volume_um3();
      gj["period_planes_um"] = planes;
    }
    if (stages.count(Stage::Geometry))
      emit("grid.vtk", [&](const std::string& p) { write_vtk_grid(grid, p); });

    // --- flow ---
    VelocityField field;
    if (stages.count(Stage::Flow)) {
      current = Stage::Flow;
      FlowSolveOptions fo;
      fo.tol = rc.numerics.flow_tolerance;
      fo.max_iterations = rc.numerics.max_flow_iterations;
      fo.target_tau = rc.numerics.target_relaxation_time;
      fo.mach_limit = rc.numerics.mach_limit;
      fo.peak_velocity_factor = rc.numerics.peak_velocity_factor;
      field = solve_steady(grid, rc.flow, fo);
      emit("velocity.vtk",
           [&](const std::string& p) { write_vtk_velocity(field, p); });
      emit("convergence.csv", [&](const std::string& p) {
        CsvTable t;
        t.header = {"iteration", "residual"};
        for (const auto& [it, res] : field.residual_history)
          t.rows.push_back({std::to_string(it), num17(res)});
        write_csv(t, p);
      });
      auto& fj = meta["flow"];
      fj["iterations"] = field.scaling.outer_iterations;
      fj["residual"] = field.residual;
      fj["solver"] = {{"dx_m", field.scaling.dx_m},
                      {"alpha_u", field.scaling.alpha_u},
                      {"alpha_p", field.scaling.alpha_p},
                      {"stokes", field.scaling.stokes}};
      fj["max_speed_m_per_s"] = field.max_speed();
      const auto div = divergence_stats(field, grid);
      fj["divergence_max_central_per_s"] = div.max_central;
      fj["divergence_max_flux_form_per_s"] = div.max_flux_form;
    }

    // --- trace ---
    ParticleEnsemble ens;
    if (stages.count(Stage::Trace)) {
      current = Stage::Trace;
      AdvectOptions ao;
      ao.cfl = rc.numerics.tracer_cfl;
      ao.max_transit_factor = rc.numerics.max_transit_factor;
      ens = advect(field, grid, seed_inlet(grid, rc.numerics.n_particles),
                   planes, ao);
      for (size_t k = 0; k < planes.size(); ++k) {
        const auto& snap = ens.period_snapshots[k];
        emit(strfmt("particles_period_%zu.csv", k + 1),
             [&](const std::string& p) {
               CsvTable t;
               t.header = {"x_um", "z_um", "species", "period"};
               for (const auto& s : snap)
                 t.rows.push_back({num17(s.x_um), num17(s.z_um),
                                   s.species == 0 ? "A" : "B",
                                   std::to_string(k + 1)});
               write_csv(t, p);
             });
        emit(strfmt("particles_period_%zu.vtk", k + 1),
             [&](const std::string& p) {
               write_vtk_particles(snap, planes[k], p);
             });
      }
      auto& tj = meta["trace"];
      tj["n_particles"] = rc.numerics.n_particles;
      tj["n_active"] = ens.count(ParticleStatus::Active);
      tj["n_exited"] = ens.count(ParticleStatus::Exited);
      tj["n_stalled"] = ens.count(ParticleStatus::Stalled);
      std::vector<size_t> counts;
      for (const auto& s : ens.period_snapshots) counts.push_back(s.size());
      tj["crossings_per_period"] = counts;
    }

    // --- topology ---
    if (stages.count(Stage::Topology)) {
      current = Stage::Topology;
      const double slant =
          rc.mixer.has_grooves() ? rc.numerics.slice_angle_deg : 0.0;
      CsvTable t;
      t.header = {"y_um", "slant_deg", "x_um", "z_um", "kind", "sense",
                  "eig1_re", "eig1_im", "eig2_re", "eig2_im",
                  "vortex_size_um2", "peak_vorticity_per_s"};
      nlohmann::ordered_json saddle_track = nlohmann::ordered_json::array();
      int slice_index = 0;
      for (int period = 1; period <= rc.mixer.n_periods; ++period) {
        nlohmann::ordered_json nearest;
        double best_dist = std::numeric_limits<double>::infinity();
        for (int si = 0; si < rc.numerics.slices_per_period; ++si) {
          const double y = rc.mixer.entrance_offset_um +
                           (period - 1 + (si + 0.5) /
                                             rc.numerics.slices_per_period) *
                               rc.mixer.barrier_period_um;
          SliceField slice = slice_field(field, grid, {y, slant});
          const auto vortices = vortex_census(slice);
          const auto cps = find_critical_points(slice);
          auto eig = [](const Mat2& m, double out[4]) {
            const double tr = m.trace(), det = m.det();
            const double disc = tr * tr - 4 * det;
            if (disc >= 0) {
              const double root = std::sqrt(disc);
              out[0] = 0.5 * (tr + root);
              out[1] = 0;
              out[2] = 0.5 * (tr - root);
              out[3] = 0;
            } else {
              const double rim = 0.5 * std::sqrt(-disc);
              out[0] = 0.5 * tr;
              out[1] = rim;
              out[2] = 0.5 * tr;
              out[3] = -rim;
            }
          };
          auto sense_str = [](RotationSense s) {
            return s == RotationSense::Cw ? "CW"
                   : s == RotationSense::Ccw ? "CCW"
                                             : "-";
          };
          for (const auto& cp : cps) {
            double ev[4];
            eig(cp.jacobian, ev);
            double vsize = 0, vpeak = 0;
            for (const auto& vx : vortices)
              if (vx.center.x_um == cp.x_um && vx.center.z_um == cp.z_um) {
                vsize = vx.size_um2;
                vpeak = vx.peak_vorticity;
                break;
              }
            t.rows.push_back({num17(y), num17(slant), num17(cp.x_um),
                              num17(cp.z_um), to_string(cp.kind),
                              sense_str(cp.sense), num17(ev[0]), num17(ev[1]),
                              num17(ev[2]), num17(ev[3]), num17(vsize),
                              num17(vpeak)});
            if (cp.kind == CriticalPointKind::Saddle && rc.mixer.has_barrier()) {
              const double tphase =
                  (y - rc.mixer.entrance_offset_um) / rc.mixer.barrier_period_um;
              const double xc = 0.5 * rc.mixer.channel_width_um +
                                rc.mixer.barrier_amplitude_um *
                                    micromix::detail::zigzag(tphase);
              const double dist = std::abs(cp.x_um - xc);
              if (dist < best_dist) {
                best_dist = dist;
                nearest = {{"period", period},
                           {"y_um", y},
                           {"x_um", cp.x_um},
                           {"z_um", cp.z_um},
                           {"distance_to_centerline_um", dist}};
              }
            }
          }
          if (rc.output.write_slice_vtk)
            emit(strfmt("topology_slice_%03d.vtk", slice_index),
                 [&](const std::string& p) { write_vtk_slice(slice, p); });
          ++slice_index;
        }
        if (!nearest.is_null()) saddle_track.push_back(nearest);
      }
      emit("topology.csv", [&](const std::string& p) { write_csv(t, p); });
      auto& oj = meta["topology"];
      oj["slices"] = slice_index;
      oj["critical_points"] = t.rows.size();
      oj["saddle_nearest_barrier_centerline"] = saddle_track;
    }

    // --- transport ---
    SpeciesFields species;
    if (stages.count(Stage::Transport)) {
      current = Stage::Transport;
      TransportSolveOptions to;
      to.tol = rc.numerics.transport_tolerance;
      to.max_sweeps = rc.numerics.max_transport_sweeps;
      species = solve_transport(field, grid, rc.transport, to);
      emit("species.vtk", [&](const std::string& p) {
        write_vtk_species(species, grid, p);
      });
      auto& sj = meta["transport"];
      sj["sweeps"] = species.sweeps;
      sj["residual"] = species.residual;
      sj["max_cell_peclet"] = species.max_cell_peclet;
      for (const auto& w : species.warnings) warnings.push_back(w);
    }

    // --- report ---
    if (stages.count(Stage::Report)) {
      current = Stage::Report;
      RunConditions cond{2.0 * rc.flow.flow_rate_per_inlet_ul_min,
                         reynolds(rc.flow, rc.mixer),
                         rc.numerics.grid_spacing_um};
      MixingReport rep =
          build_report(rc.mixer, cond, ens, species, grid, rc.transport,
                       rc.numerics.mixing_bins_x, rc.numerics.mixing_bins_z);
      emit("report.csv",
           [&](const std::string& p) { write_csv(report_to_csv(rep), p); });
      auto& rj = meta["report"];
      rj["periods"] = rep.records.size();
      if (!rep.records.empty()) {
        rj["final_mixing_index"] = rep.records.back().mixing_index;
        rj["final_fret_factor"] = rep.records.back().fret_factor;
      }
    }

    meta["warnings"] = warnings;
    emit("meta.json", [&](const std::string& p) {
      std::ofstream out(p, std::ios::binary);
      if (!out) throw std::runtime_error("cannot open " + p);
      out << meta.dump(2) << "\n";
    });
  } catch (const std::exception& e) {
    for (const auto& rel : written) {
      std::error_code ec;
      fs::remove(out_dir / rel, ec);
    }
    throw std::runtime_error(std::string("stage ") + stage_name(current) +
                             ": " + e.what());
  }

  for (const auto& rel : written) {
    Artifact a;
    a.path = rel;
    a.checksum = detail::file_checksum(out_dir / rel, &a.bytes);
    result.manifest.push_back(std::move(a));
  }
  return result;
}

}  // namespace micromix

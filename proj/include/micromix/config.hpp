// Run configuration: strict JSON parsing with full defaulting. The defaults
// reproduce the reference mixer (8100 x 200 x 70 um channel, 800 um
// periods, 10 periods), so a config carrying nothing but the variant and a
// flow rate describes a complete run. Unit conventions are spelled out in
// the key names; conversions to SI happen in one place (units.hpp) when
// solvers consume the values.
#pragma once

#include <set>

#include <json.hpp>

#include "micromix/flow.hpp"
#include "micromix/geometry.hpp"
#include "micromix/transport.hpp"

namespace micromix {

struct NumericsConfig {
  double grid_spacing_um = 5.0;
  double flow_tolerance = 1e-7;
  double transport_tolerance = 1e-9;
  int64_t max_flow_iterations = 2'000'000;
  int64_t max_transport_sweeps = 40000;
  double target_relaxation_time = 0.933;
  double mach_limit = 0.05;
  double peak_velocity_factor = 3.0;
  double tracer_cfl = 0.5;
  int n_particles = 14000;
  int mixing_bins_x = 10;
  int mixing_bins_z = 7;
  int slices_per_period = 8;
  double slice_angle_deg = 45.0;
  double max_transit_factor = 50.0;

  void validate() const {
    if (!(grid_spacing_um > 0))
      throw std::invalid_argument("numerics.grid_spacing_um must be > 0");
    if (!(flow_tolerance > 0) || flow_tolerance > 1e-3)
      throw std::invalid_argument("numerics.flow_tolerance must be in (0, 1e-3]");
    if (!(transport_tolerance > 0))
      throw std::invalid_argument("numerics.transport_tolerance must be > 0");
    if (!(tracer_cfl > 0) || tracer_cfl > 1.0)
      throw std::invalid_argument("numerics.tracer_cfl must be in (0, 1]");
    if (n_particles < 2)
      throw std::invalid_argument("numerics.n_particles must be >= 2");
    if (mixing_bins_x < 1 || mixing_bins_z < 1)
      throw std::invalid_argument("numerics.mixing_bins must be >= 1");
    if (slices_per_period < 1)
      throw std::invalid_argument("numerics.slices_per_period must be >= 1");
  }
};

struct OutputConfig {
  std::string directory = "out";
  bool write_slice_vtk = false;
};

struct RunConfig {
  MixerConfig mixer;
  FlowConditions flow;
  TransportParams transport;
  NumericsConfig numerics;
  OutputConfig output;
  int threads = 1;
  std::vector<std::string> stages{"all"};  // set by the CLI subcommand
  nlohmann::ordered_json provided;         // keys the user actually supplied

  void validate() const {
    mixer.validate();
    flow.validate();
    transport.validate();
    numerics.validate();
    if (threads < 0) throw std::invalid_argument("threads must be >= 0");
  }
};

namespace detail {

// Section reader: typed lookups with defaults, unknown-key rejection with
// full key paths.
class Section {
 public:
  Section(const nlohmann::ordered_json& j, std::string path, bool strict)
      : obj_(j), path_(std::move(path)), strict_(strict) {
    if (!obj_.is_object())
      throw std::invalid_argument("config: " + path_ + " must be an object");
  }
  ~Section() = default;

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = obj_.find(key);
    if (it == obj_.end()) return;
    try {
      out = it->get<T>();
    } catch (const nlohmann::json::exception&) {
      throw std::invalid_argument("config: " + path_ + "." + key +
                                  " has the wrong type");
    }
  }
  bool has(const char* key) const { return obj_.contains(key); }
  void finish() const {
    if (!strict_) return;
    for (auto it = obj_.begin(); it != obj_.end(); ++it)
      if (!seen_.count(it.key()))
        throw std::invalid_argument("config: unknown key " + path_ + "." +
                                    it.key());
  }
  const nlohmann::ordered_json& raw() const { return obj_; }

 private:
  const nlohmann::ordered_json& obj_;
  std::string path_;
  bool strict_;
  std::set<std::string> seen_;
};

}  // namespace detail

inline RunConfig parse_config(const std::string& text, bool strict = true) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("config: malformed JSON: ") +
                                e.what());
  }
  if (!j.is_object())
    throw std::invalid_argument("config: top level must be an object");

  RunConfig rc;
  rc.provided = j;

  detail::Section top(j, "<top>", strict);
  std::string variant;
  top.get("variant", variant);
  if (variant.empty())
    throw std::invalid_argument("config: missing required key \"variant\"");
  rc.mixer.variant = variant_from_string(variant);

  top.get("threads", rc.threads);
  nlohmann::ordered_json section;
  for (const char* key : {"geometry", "flow", "transport", "numerics", "output"})
    top.get(key, section);  // mark section keys as known
  top.finish();

  if (top.has("geometry")) {
    detail::Section s(j.at("geometry"), "geometry", strict);
    s.get("channel_length_um", rc.mixer.channel_length_um);
    s.get("channel_width_um", rc.mixer.channel_width_um);
    s.get("channel_height_um", rc.mixer.channel_height_um);
    s.get("inlet_length_um", rc.mixer.inlet_length_um);
    s.get("groove_width_um", rc.mixer.groove_width_um);
    s.get("groove_depth_um", rc.mixer.groove_depth_um);
    s.get("groove_angle_deg", rc.mixer.groove_angle_deg);
    s.get("groove_pitch_um", rc.mixer.groove_pitch_um);
    s.get("grooves_per_period", rc.mixer.grooves_per_period);
    s.get("barrier_width_um", rc.mixer.barrier_width_um);
    s.get("barrier_height_um", rc.mixer.barrier_height_um);
    s.get("barrier_period_um", rc.mixer.barrier_period_um);
    s.get("barrier_amplitude_um", rc.mixer.barrier_amplitude_um);
    s.get("entrance_offset_um", rc.mixer.entrance_offset_um);
    s.get("n_periods", rc.mixer.n_periods);
    s.finish();
  }
  if (top.has("flow")) {
    detail::Section s(j.at("flow"), "flow", strict);
    s.get("flow_rate_per_inlet_ul_per_min", rc.flow.flow_rate_per_inlet_ul_min);
    s.get("density_kg_per_m3", rc.flow.density_kg_m3);
    s.get("dynamic_viscosity_pa_s", rc.flow.dynamic_viscosity_pa_s);
    s.get("stokes_mode", rc.flow.stokes_mode);
    s.finish();
  }
  if (top.has("transport")) {
    detail::Section s(j.at("transport"), "transport", strict);
    s.get("diffusivity_m2_per_s", rc.transport.diffusivity_m2_s);
    s.get("rate_constant_m3_per_mol_s", rc.transport.rate_constant_m3_mol_s);
    s.get("inlet_conc_a_mol_per_m3", rc.transport.inlet_conc_a_mol_m3);
    s.get("inlet_conc_b_mol_per_m3", rc.transport.inlet_conc_b_mol_m3);
    s.get("reaction_threshold", rc.transport.reaction_threshold);
    s.get("premixed_inlet", rc.transport.premixed_inlet);
    s.finish();
  }
  if (top.has("numerics")) {
    detail::Section s(j.at("numerics"), "numerics", strict);
    s.get("grid_spacing_um", rc.numerics.grid_spacing_um);
    s.get("flow_tolerance", rc.numerics.flow_tolerance);
    s.get("transport_tolerance", rc.numerics.transport_tolerance);
    s.get("max_flow_iterations", rc.numerics.max_flow_iterations);
    s.get("max_transport_sweeps", rc.numerics.max_transport_sweeps);
    s.get("target_relaxation_time", rc.numerics.target_relaxation_time);
    s.get("mach_limit", rc.numerics.mach_limit);
    s.get("peak_velocity_factor", rc.numerics.peak_velocity_factor);
    s.get("tracer_cfl", rc.numerics.tracer_cfl);
    s.get("n_particles", rc.numerics.n_particles);
    s.get("mixing_bins_x", rc.numerics.mixing_bins_x);
    s.get("mixing_bins_z", rc.numerics.mixing_bins_z);
    s.get("slices_per_period", rc.numerics.slices_per_period);
    s.get("slice_angle_deg", rc.numerics.slice_angle_deg);
    s.get("max_transit_factor", rc.numerics.max_transit_factor);
    s.finish();
  }
  if (top.has("output")) {
    detail::Section s(j.at("output"), "output", strict);
    s.get("directory", rc.output.directory);
    s.get("write_slice_vtk", rc.output.write_slice_vtk);
    s.finish();
  }

  rc.validate();
  return rc;
}

// Fully resolved configuration (every default filled in), used for run
// metadata and provenance.
inline nlohmann::ordered_json config_to_json(const RunConfig& rc) {
  nlohmann::ordered_json j;
  j["variant"] = to_string(rc.mixer.variant);
  j["threads"] = rc.threads;
  auto& ge = j["geometry"];
  ge["channel_length_um"] = rc.mixer.channel_length_um;
  ge["channel_width_um"] = rc.mixer.channel_width_um;
  ge["channel_height_um"] = rc.mixer.channel_height_um;
  ge["inlet_length_um"] = rc.mixer.inlet_length_um;
  ge["groove_width_um"] = rc.mixer.groove_width_um;
  ge["groove_depth_um"] = rc.mixer.groove_depth_um;
  ge["groove_angle_deg"] = rc.mixer.groove_angle_deg;
  ge["groove_pitch_um"] = rc.mixer.groove_pitch_um;
  ge["grooves_per_period"] = rc.mixer.grooves_per_period;
  ge["barrier_width_um"] = rc.mixer.barrier_width_um;
  ge["barrier_height_um"] = rc.mixer.barrier_height_um;
  ge["barrier_period_um"] = rc.mixer.barrier_period_um;
  ge["barrier_amplitude_um"] = rc.mixer.barrier_amplitude_um;
  ge["entrance_offset_um"] = rc.mixer.entrance_offset_um;
  ge["n_periods"] = rc.mixer.n_periods;
  auto& fl = j["flow"];
  fl["flow_rate_per_inlet_ul_per_min"] = rc.flow.flow_rate_per_inlet_ul_min;
  fl["density_kg_per_m3"] = rc.flow.density_kg_m3;
  fl["dynamic_viscosity_pa_s"] = rc.flow.dynamic_viscosity_pa_s;
  fl["stokes_mode"] = rc.flow.stokes_mode;
  auto& tr = j["transport"];
  tr["diffusivity_m2_per_s"] = rc.transport.diffusivity_m2_s;
  tr["rate_constant_m3_per_mol_s"] = rc.transport.rate_constant_m3_mol_s;
  tr["inlet_conc_a_mol_per_m3"] = rc.transport.inlet_conc_a_mol_m3;
  tr["inlet_conc_b_mol_per_m3"] = rc.transport.inlet_conc_b_mol_m3;
  tr["reaction_threshold"] = rc.transport.reaction_threshold;
  tr["premixed_inlet"] = rc.transport.premixed_inlet;
  auto& nu = j["numerics"];
  nu["grid_spacing_um"] = rc.numerics.grid_spacing_um;
  nu["flow_tolerance"] = rc.numerics.flow_tolerance;
  nu["transport_tolerance"] = rc.numerics.transport_tolerance;
  nu["max_flow_iterations"] = rc.numerics.max_flow_iterations;
  nu["max_transport_sweeps"] = rc.numerics.max_transport_sweeps;
  nu["target_relaxation_time"] = rc.numerics.target_relaxation_time;
  nu["mach_limit"] = rc.numerics.mach_limit;
  nu["peak_velocity_factor"] = rc.numerics.peak_velocity_factor;
  nu["tracer_cfl"] = rc.numerics.tracer_cfl;
  nu["n_particles"] = rc.numerics.n_particles;
  nu["mixing_bins_x"] = rc.numerics.mixing_bins_x;
  nu["mixing_bins_z"] = rc.numerics.mixing_bins_z;
  nu["slices_per_period"] = rc.numerics.slices_per_period;
  nu["slice_angle_deg"] = rc.numerics.slice_angle_deg;
  nu["max_transit_factor"] = rc.numerics.max_transit_factor;
  auto& ou = j["output"];
  ou["directory"] = rc.output.directory;
  ou["write_slice_vtk"] = rc.output.write_slice_vtk;
  return j;
}

}  // namespace micromix

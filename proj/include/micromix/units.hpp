// Unit conversions. Geometry is specified in micrometres and flow rates in
// microlitres per minute; solvers work in SI internally.
#pragma once

namespace micromix::units {

inline constexpr double um_to_m = 1e-6;
inline constexpr double m_to_um = 1e6;

// 1 ul/min = 1e-9 m^3 / 60 s
inline constexpr double ul_per_min_to_m3_per_s = 1e-9 / 60.0;

}  // namespace micromix::units

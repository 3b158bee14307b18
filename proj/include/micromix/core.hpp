// Shared basics: 3-vector, number formatting, hashing, parallel loop helper.
#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <stdexcept>
#include <string>
#include <vector>

#ifdef MICROMIX_OPENMP
#include <omp.h>
#endif

namespace micromix {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  double norm() const { return std::sqrt(dot(*this)); }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

// printf-style formatting into std::string (no std::format on GCC 11).
template <typename... Args>
std::string strfmt(const char* fmt, Args... args) {
  int n = std::snprintf(nullptr, 0, fmt, args...);
  std::string s(static_cast<size_t>(n), '\0');
  std::snprintf(s.data(), s.size() + 1, fmt, args...);
  return s;
}

// Fixed 9-significant-digit form used by the VTK writers.
inline std::string num9(double v) { return strfmt("%.9g", v); }
// Round-trip-exact form used by the CSV writers.
inline std::string num17(double v) { return strfmt("%.17g", v); }

// FNV-1a 64-bit, used for artifact checksums in run manifests.
inline uint64_t fnv1a64(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline int hardware_threads() {
#ifdef MICROMIX_OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

inline void set_thread_count(int n) {
#ifdef MICROMIX_OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

// Static-schedule parallel loop. Every site is written by exactly one
// iteration, so results are identical for any thread count. Exceptions are
// captured inside the region and rethrown afterwards (the first one wins).
template <typename F>
void parallel_for(int64_t begin, int64_t end, F&& f) {
#ifdef MICROMIX_OPENMP
  std::exception_ptr err = nullptr;
#pragma omp parallel for schedule(static)
  for (int64_t i = begin; i < end; ++i) {
    try {
      f(i);
    } catch (...) {
#pragma omp critical(micromix_parallel_for_err)
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
#else
  for (int64_t i = begin; i < end; ++i) f(i);
#endif
}

}  // namespace micromix

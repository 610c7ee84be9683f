#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>

namespace daibc {

// Process exit codes used by the CLI and tests.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 2,
  kExitInput = 3,
  kExitNumeric = 4,
};

// Bad user input: missing files, schema violations, out-of-range arguments.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Tensor/layer shape mismatch; message names the offending layer.
struct ShapeError : InputError {
  using InputError::InputError;
};

// NaN/Inf detected where finite values are required.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw InputError(msg);
}

inline void require_shape(bool cond, const std::string& msg) {
  if (!cond) throw ShapeError(msg);
}

template <class T>
inline void require_finite(std::span<const T> xs, const std::string& what) {
  for (const T& x : xs) {
    if (!std::isfinite(static_cast<double>(x)))
      throw NumericError("non-finite value in " + what);
  }
}

inline void require_finite(double x, const std::string& what) {
  if (!std::isfinite(x)) throw NumericError("non-finite value in " + what);
}

// 2D action: both components in [-1, 1]. Negative accel means braking.
struct Action {
  float steering = 0.0f;
  float accel = 0.0f;
};

inline constexpr float kActionMin = -1.0f;
inline constexpr float kActionMax = 1.0f;

inline bool action_in_bounds(const Action& a) {
  return a.steering >= kActionMin && a.steering <= kActionMax &&
         a.accel >= kActionMin && a.accel <= kActionMax;
}

inline Action clip_action(Action a) {
  a.steering = std::fmin(kActionMax, std::fmax(kActionMin, a.steering));
  a.accel = std::fmin(kActionMax, std::fmax(kActionMin, a.accel));
  return a;
}

struct Vec2 {
  double x = 0.0, y = 0.0;
  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double cross(const Vec2& o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }
  Vec2 normalized() const {
    double n = norm();
    return n > 0 ? Vec2{x / n, y / n} : Vec2{1, 0};
  }
  // Clockwise perpendicular: the right-hand side of a heading vector.
  Vec2 right() const { return {y, -x}; }
};

inline Vec2 rotate(const Vec2& v, double angle) {
  double c = std::cos(angle), s = std::sin(angle);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

// Normalize to (-pi, pi].
inline double normalize_angle(double a) {
  a = std::fmod(a, 2.0 * M_PI);
  if (a <= -M_PI) a += 2.0 * M_PI;
  if (a > M_PI) a -= 2.0 * M_PI;
  return a;
}

// Distance from point p to segment [a, b].
inline double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  Vec2 ab = b - a;
  double len2 = ab.dot(ab);
  if (len2 <= 0.0) return (p - a).norm();
  double t = (p - a).dot(ab) / len2;
  t = std::fmin(1.0, std::fmax(0.0, t));
  return (p - (a + ab * t)).norm();
}

// True if segments [p0,p1] and [q0,q1] properly intersect (shared endpoints count).
inline bool segments_intersect(const Vec2& p0, const Vec2& p1, const Vec2& q0, const Vec2& q1) {
  auto orient = [](const Vec2& a, const Vec2& b, const Vec2& c) {
    double v = (b - a).cross(c - a);
    if (v > 1e-12) return 1;
    if (v < -1e-12) return -1;
    return 0;
  };
  int o1 = orient(p0, p1, q0), o2 = orient(p0, p1, q1);
  int o3 = orient(q0, q1, p0), o4 = orient(q0, q1, p1);
  if (o1 != o2 && o3 != o4) return true;
  auto on = [](const Vec2& a, const Vec2& b, const Vec2& c) {
    return std::fmin(a.x, b.x) - 1e-12 <= c.x && c.x <= std::fmax(a.x, b.x) + 1e-12 &&
           std::fmin(a.y, b.y) - 1e-12 <= c.y && c.y <= std::fmax(a.y, b.y) + 1e-12;
  };
  if (o1 == 0 && on(p0, p1, q0)) return true;
  if (o2 == 0 && on(p0, p1, q1)) return true;
  if (o3 == 0 && on(q0, q1, p0)) return true;
  if (o4 == 0 && on(q0, q1, p1)) return true;
  return false;
}

// FNV-1a 64-bit, used for config and artifact hashes.
inline uint64_t fnv1a64(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

inline std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf);
}

}  // namespace daibc

#ifndef BREP_CORE_HPP
#define BREP_CORE_HPP

// Shared numerics: error types, checked vector helpers, a reproducible
// random stream and uniform sampling on the unit sphere.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace brep {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public InvalidArgument {
 public:
  DimensionMismatch(std::size_t expected, std::size_t got)
      : InvalidArgument("dimension mismatch: expected " + std::to_string(expected) +
                        ", got " + std::to_string(got)),
        expected_(expected),
        got_(got) {}
  std::size_t expected() const { return expected_; }
  std::size_t got() const { return got_; }

 private:
  std::size_t expected_;
  std::size_t got_;
};

// Raised when a quantity is mathematically undefined for the given input,
// e.g. the cosine against a zero vector.
class NumericalError : public Error {
 public:
  using Error::Error;
};

namespace vec {

inline void require_same_dim(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) {
    throw DimensionMismatch(static_cast<std::size_t>(a.size()),
                            static_cast<std::size_t>(b.size()));
  }
}

inline bool is_finite(const Vector& v) { return v.allFinite(); }

inline void require_finite(const Vector& v, const char* what = "vector") {
  if (!v.allFinite()) {
    throw InvalidArgument(std::string(what) + " contains a non-finite value");
  }
}

inline Vector from(const std::vector<double>& values) {
  Vector v = Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
  require_finite(v);
  return v;
}

inline std::vector<double> to_std(const Vector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

inline Vector add(const Vector& a, const Vector& b) {
  require_same_dim(a, b);
  return a + b;
}

inline Vector sub(const Vector& a, const Vector& b) {
  require_same_dim(a, b);
  return a - b;
}

inline Vector scale(const Vector& a, double s) { return a * s; }

inline double dot(const Vector& a, const Vector& b) {
  require_same_dim(a, b);
  return a.dot(b);
}

inline double norm(const Vector& a) { return a.norm(); }

inline double cosine(const Vector& a, const Vector& b) {
  require_same_dim(a, b);
  const double na = a.stableNorm();
  const double nb = b.stableNorm();
  if (na == 0.0 || nb == 0.0) throw NumericalError("cosine is undefined for a zero vector");
  return std::clamp((a / na).dot(b / nb), -1.0, 1.0);
}

}  // namespace vec

/// Reproducible random stream.
///
/// Wraps std::mt19937_64, whose output sequence is fixed by the standard, and
/// derives normal variates with Box-Muller on raw engine output, so the draw
/// sequence does not depend on the library's distribution implementations.
/// A stream is single-consumer; parallel callers take sub-streams via split().
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0)
      : seed_(seed), stream_(stream), engine_(mix(seed, stream)) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  /// Independent child stream keyed by (seed, stream, index).
  RngStream split(std::uint64_t index) const {
    return RngStream(seed_, mix(stream_ + 0x632be59bd9b4e019ULL, index));
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on the open interval (0, 1).
  double uniform() {
    // 53 random bits, shifted by half an ulp so 0 is never produced.
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal() {
    ++normal_draws_;
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  Vector normal_vector(std::size_t dim) {
    Vector v(static_cast<Eigen::Index>(dim));
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = normal();
    return v;
  }

  std::uint64_t normal_draws() const { return normal_draws_; }

 private:
  static std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }
  static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    return splitmix(splitmix(a) ^ (b * 0xd6e8feb86659fd93ULL + 0x5851f42d4c957f2dULL));
  }

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
  std::uint64_t normal_draws_ = 0;
};

/// A vector of unit L2 norm.
class UnitDirection {
 public:
  /// Normalizes `v`; throws on a zero or non-finite input.
  static UnitDirection normalize(const Vector& v) {
    vec::require_finite(v, "direction");
    const double n = v.norm();
    if (n == 0.0) throw NumericalError("cannot normalize a zero vector");
    return UnitDirection(v / n);
  }

  const Vector& vector() const { return direction_; }
  std::size_t dim() const { return static_cast<std::size_t>(direction_.size()); }

 private:
  explicit UnitDirection(Vector v) : direction_(std::move(v)) {}
  Vector direction_;
};

/// Directions u_1..u_N and the radius R; queried points are z + R * u_n.
struct SphereBatch {
  std::vector<UnitDirection> directions;
  double radius = 0.0;

  std::size_t size() const { return directions.size(); }
  Vector point(const Vector& center, std::size_t n) const {
    return center + radius * directions[n].vector();
  }
};

/// Uniform direction on the unit sphere in R^dim (normalized Gaussian draw).
inline UnitDirection sample_unit_sphere(std::size_t dim, RngStream& rng) {
  if (dim == 0) throw InvalidArgument("invalid dimension: 0");
  for (;;) {
    Vector g = rng.normal_vector(dim);
    if (g.squaredNorm() > 0.0) return UnitDirection::normalize(g);
  }
}

inline SphereBatch sample_sphere_batch(std::size_t dim, std::size_t n, double radius,
                                       RngStream& rng) {
  if (!(radius > 0.0) || !std::isfinite(radius)) {
    throw InvalidArgument("invalid radius: must be positive and finite");
  }
  if (n == 0) throw InvalidArgument("sphere batch needs at least one sample");
  if (dim == 0) throw InvalidArgument("invalid dimension: 0");
  SphereBatch batch;
  batch.radius = radius;
  batch.directions.reserve(n);
  for (std::size_t i = 0; i < n; ++i) batch.directions.push_back(sample_unit_sphere(dim, rng));
  return batch;
}

}  // namespace brep

#endif  // BREP_CORE_HPP

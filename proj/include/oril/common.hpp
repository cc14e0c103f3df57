#pragma once

#include <Eigen/Dense>

#include <bit>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace oril {

using Matrix = Eigen::MatrixXd;  // batches are row-major logically: one sample per row
using Vector = Eigen::VectorXd;

// Invalid or inconsistent run configuration (unknown key, bad method name,
// method/data mismatch). Cross-module by nature.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian and written via memcpy");

// Numerically safe sigmoid; result clamped to [kProbFloor, 1 - kProbFloor]
// so downstream -log terms stay finite.
inline constexpr double kProbFloor = 1e-12;

inline double sigmoid(double x) {
  double s = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  if (s < kProbFloor) return kProbFloor;
  if (s > 1.0 - kProbFloor) return 1.0 - kProbFloor;
  return s;
}

// log(1 + e^x) without overflow.
inline double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

// -log(sigmoid(x)) and -log(1 - sigmoid(x)), evaluated stably.
inline double neg_log_sigmoid(double x) { return softplus(-x); }
inline double neg_log_one_minus_sigmoid(double x) { return softplus(x); }

inline double log_sum_exp(const Vector& v) {
  double m = v.maxCoeff();
  return m + std::log((v.array() - m).exp().sum());
}

// Round through IEEE-754 binary32, the precision of on-disk trajectories.
inline double round_f32(double x) { return static_cast<double>(static_cast<float>(x)); }

inline double clamp_unit(double x) { return x < -1.0 ? -1.0 : (x > 1.0 ? 1.0 : x); }

}  // namespace oril

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace blimp {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kGravity = 9.81;

enum class ErrorKind {
  GimbalLock,
  NumericBlowup,
  NonPdMass,
  DegenerateGoal,
  ShapeMismatch,
  NoTape,
  EmptyTrajectory,
  InvalidConfig,
  UnknownController,
  CheckpointVersionMismatch,
  Io,
  TrainingDiverged,
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::GimbalLock: return "GimbalLock";
    case ErrorKind::NumericBlowup: return "NumericBlowup";
    case ErrorKind::NonPdMass: return "NonPdMass";
    case ErrorKind::DegenerateGoal: return "DegenerateGoal";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::NoTape: return "NoTape";
    case ErrorKind::EmptyTrajectory: return "EmptyTrajectory";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::UnknownController: return "UnknownController";
    case ErrorKind::CheckpointVersionMismatch: return "CheckpointVersionMismatch";
    case ErrorKind::Io: return "Io";
    case ErrorKind::TrainingDiverged: return "TrainingDiverged";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive independent stream seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index = 0) {
  return mix_seed(mix_seed(base ^ mix_seed(stream)) + index);
}

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double standard_normal(Rng& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

/// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a) {
  double w = std::remainder(a, 2.0 * kPi);
  if (w <= -kPi) w += 2.0 * kPi;
  return w;
}

}  // namespace blimp

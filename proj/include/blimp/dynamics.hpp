#pragma once

// Control-oriented 6-DoF blimp model with a longitudinally movable slider mass.
//
// Frames: inertial frame is north-east-down (z positive down), body frame is
// forward-right-down. Positive pitch is nose-up; a negative slider position
// moves the gondola toward the tail.

#include <array>
#include <cmath>
#include <string>

#include "blimp/common.hpp"
#include "blimp/json_util.hpp"

namespace blimp {

inline constexpr double kSliderLimit = 0.05;
inline constexpr double kGimbalMargin = 1e-3;
inline constexpr double kBlowupLimit = 1e6;

struct BlimpState {
  Vec3 p = Vec3::Zero();    // inertial position [m]
  Vec3 e = Vec3::Zero();    // roll, pitch, yaw [rad]; yaw unwrapped
  Vec3 v_b = Vec3::Zero();  // body linear velocity [m/s]
  Vec3 w_b = Vec3::Zero();  // body angular velocity [rad/s]

  using Packed = Eigen::Matrix<double, 12, 1>;

  Packed pack() const {
    Packed x;
    x << p, e, v_b, w_b;
    return x;
  }

  static BlimpState unpack(const Packed& x) {
    BlimpState s;
    s.p = x.segment<3>(0);
    s.e = x.segment<3>(3);
    s.v_b = x.segment<3>(6);
    s.w_b = x.segment<3>(9);
    return s;
  }

  Vec6 nu() const {
    Vec6 n;
    n << v_b, w_b;
    return n;
  }

  bool finite() const { return pack().allFinite(); }
};

/// Reflection about the body x-z plane: negates y, roll, yaw, v, p, r.
inline BlimpState mirror(const BlimpState& s) {
  BlimpState m = s;
  m.p.y() = -s.p.y();
  m.e.x() = -s.e.x();
  m.e.z() = -s.e.z();
  m.v_b.y() = -s.v_b.y();
  m.w_b.x() = -s.w_b.x();
  m.w_b.z() = -s.w_b.z();
  return m;
}

struct SliderConfig {
  double c = 0.0;  // [m], constant for an episode

  static SliderConfig checked(double c) {
    if (!std::isfinite(c) || c < -kSliderLimit - 1e-12 || c > kSliderLimit + 1e-12)
      throw Error(ErrorKind::InvalidConfig, "slider position " + std::to_string(c) + " outside [-0.05, 0.05] m");
    return SliderConfig{c};
  }
};

struct ControlInput {
  double f_l = 0.0;  // [N]
  double f_r = 0.0;  // [N]

  Vec2 vec() const { return Vec2(f_l, f_r); }
};

struct AeroCoefficients {
  Vec3 drag = Vec3(0.6, 1.2, 1.5);          // body-axis quadratic drag coefficients
  double lift_slope = 0.5;                   // per rad, linear in angle of attack
  double stall_angle = 0.35;                 // [rad], angle of attack saturation for lift
  Vec3 rate_damping = Vec3(0.02, 0.04, 0.02);  // [N m s / rad]
  double ref_area = 0.5;                     // [m^2]
  double air_density = 1.225;                // [kg/m^3]
};

/// Nominal values describe a ~0.3 kg indoor blimp with a 1.0 x 1.1 x 0.5 m envelope.
struct ModelParams {
  double m_body = 0.22;                      // [kg], rigid body without slider, CoM at body origin
  double m_slider = 0.08;                    // [kg], movable gondola
  double buoyancy = -0.001;                  // [N], net buoyant force: gross buoyancy minus total weight
  Vec3 inertia_diag = Vec3(0.020, 0.025, 0.030);  // [kg m^2], body without slider, about origin
  Vec6 added_mass_diag = (Vec6() << 0.04, 0.12, 0.15, 0.004, 0.008, 0.008).finished();
  Vec3 r_cb = Vec3(0.0, 0.0, -0.005);        // [m], center of buoyancy
  Vec2 slider_axis_offset = Vec2(0.0, 0.15);  // [m], (y_s, z_s) of the slider track
  AeroCoefficients aero;
  double thruster_arm = 0.15;                // [m], lateral arm of each thruster
  double thruster_pitch_arm = 0.10;          // [m], thrust line below body origin
  double f_max = 0.1;                        // [N], per thruster
  double rand_aero_frac = 0.10;
  double rand_mass_frac = 0.05;

  double total_mass() const { return m_body + m_slider; }
  double weight() const { return total_mass() * kGravity; }

  Vec3 slider_position(const SliderConfig& cfg) const {
    return Vec3(cfg.c, slider_axis_offset.x(), slider_axis_offset.y());
  }

  /// Composite center of mass as a function of slider position.
  Vec3 center_of_mass(const SliderConfig& cfg) const { return m_slider * slider_position(cfg) / total_mass(); }

  /// Throws InvalidConfig naming the offending field.
  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v)) throw Error(ErrorKind::InvalidConfig, std::string(name) + " must be > 0");
    };
    auto finite = [](double v, const char* name) {
      if (!std::isfinite(v)) throw Error(ErrorKind::InvalidConfig, std::string(name) + " must be finite");
    };
    positive(m_body, "m_body");
    positive(m_slider, "m_slider");
    finite(buoyancy, "buoyancy");
    for (int i = 0; i < 3; ++i) positive(inertia_diag[i], "inertia_diag");
    for (int i = 0; i < 6; ++i) {
      if (!(added_mass_diag[i] >= 0.0)) throw Error(ErrorKind::InvalidConfig, "added_mass_diag must be >= 0");
    }
    for (int i = 0; i < 3; ++i) {
      finite(r_cb[i], "r_cb");
      if (!(aero.drag[i] >= 0.0)) throw Error(ErrorKind::InvalidConfig, "aero.drag must be >= 0");
      if (!(aero.rate_damping[i] >= 0.0)) throw Error(ErrorKind::InvalidConfig, "aero.rate_damping must be >= 0");
    }
    finite(slider_axis_offset.x(), "slider_axis_offset");
    finite(slider_axis_offset.y(), "slider_axis_offset");
    if (!(aero.lift_slope >= 0.0)) throw Error(ErrorKind::InvalidConfig, "aero.lift_slope must be >= 0");
    positive(aero.stall_angle, "aero.stall_angle");
    positive(aero.ref_area, "aero.ref_area");
    positive(aero.air_density, "aero.air_density");
    positive(thruster_arm, "thruster_arm");
    finite(thruster_pitch_arm, "thruster_pitch_arm");
    positive(f_max, "f_max");
    if (!(rand_aero_frac >= 0.0 && rand_aero_frac < 1.0))
      throw Error(ErrorKind::InvalidConfig, "rand_aero_frac must be in [0, 1)");
    if (!(rand_mass_frac >= 0.0 && rand_mass_frac < 1.0))
      throw Error(ErrorKind::InvalidConfig, "rand_mass_frac must be in [0, 1)");
  }
};

inline Json to_json(const ModelParams& m) {
  Json aero = {
      {"drag", to_json_array(m.aero.drag)},
      {"lift_slope", m.aero.lift_slope},
      {"stall_angle", m.aero.stall_angle},
      {"rate_damping", to_json_array(m.aero.rate_damping)},
      {"ref_area", m.aero.ref_area},
      {"air_density", m.aero.air_density},
  };
  return Json{
      {"m_body", m.m_body},
      {"m_slider", m.m_slider},
      {"buoyancy", m.buoyancy},
      {"inertia_diag", to_json_array(m.inertia_diag)},
      {"added_mass_diag", to_json_array(m.added_mass_diag)},
      {"r_cb", to_json_array(m.r_cb)},
      {"slider_axis_offset", to_json_array(m.slider_axis_offset)},
      {"aero", aero},
      {"thruster_arm", m.thruster_arm},
      {"thruster_pitch_arm", m.thruster_pitch_arm},
      {"f_max", m.f_max},
      {"rand_aero_frac", m.rand_aero_frac},
      {"rand_mass_frac", m.rand_mass_frac},
  };
}

/// Missing keys keep their nominal values; unknown keys are rejected.
inline ModelParams model_params_from_json(const Json& j, const std::string& path = "model") {
  ModelParams m;
  ObjectReader r(j, path);
  r.read("m_body", m.m_body);
  r.read("m_slider", m.m_slider);
  r.read("buoyancy", m.buoyancy);
  r.read("inertia_diag", m.inertia_diag);
  r.read("added_mass_diag", m.added_mass_diag);
  r.read("r_cb", m.r_cb);
  r.read("slider_axis_offset", m.slider_axis_offset);
  if (r.has("aero")) {
    ObjectReader a(r.child("aero"), r.field("aero"));
    a.read("drag", m.aero.drag);
    a.read("lift_slope", m.aero.lift_slope);
    a.read("stall_angle", m.aero.stall_angle);
    a.read("rate_damping", m.aero.rate_damping);
    a.read("ref_area", m.aero.ref_area);
    a.read("air_density", m.aero.air_density);
    a.finish();
  }
  r.read("thruster_arm", m.thruster_arm);
  r.read("thruster_pitch_arm", m.thruster_pitch_arm);
  r.read("f_max", m.f_max);
  r.read("rand_aero_frac", m.rand_aero_frac);
  r.read("rand_mass_frac", m.rand_mass_frac);
  r.finish();
  m.validate();
  return m;
}

// ---------------------------------------------------------------------------
// Kinematics

inline Mat3 skew(const Vec3& a) {
  Mat3 s;
  s << 0.0, -a.z(), a.y(), a.z(), 0.0, -a.x(), -a.y(), a.x(), 0.0;
  return s;
}

/// Z-Y-X (yaw, pitch, roll) body-to-inertial rotation.
inline Mat3 rotation_matrix(const Vec3& e) {
  const double cphi = std::cos(e.x()), sphi = std::sin(e.x());
  const double cth = std::cos(e.y()), sth = std::sin(e.y());
  const double cpsi = std::cos(e.z()), spsi = std::sin(e.z());
  Mat3 r;
  r << cpsi * cth, cpsi * sth * sphi - spsi * cphi, cpsi * sth * cphi + spsi * sphi,
       spsi * cth, spsi * sth * sphi + cpsi * cphi, spsi * sth * cphi - cpsi * sphi,
       -sth, cth * sphi, cth * cphi;
  return r;
}

/// Maps body rates to Euler-angle rates. Throws GimbalLock near |pitch| = pi/2.
inline Mat3 euler_rate_matrix(const Vec3& e) {
  const double th = e.y();
  if (!std::isfinite(th) || std::abs(th) >= kPi / 2.0 - kGimbalMargin)
    throw Error(ErrorKind::GimbalLock, "pitch " + std::to_string(th) + " rad within 1e-3 of +-pi/2");
  const double cphi = std::cos(e.x()), sphi = std::sin(e.x());
  const double cth = std::cos(th), tth = std::tan(th);
  Mat3 j;
  j << 1.0, sphi * tth, cphi * tth,
       0.0, cphi, -sphi,
       0.0, sphi / cth, cphi / cth;
  return j;
}

// ---------------------------------------------------------------------------
// Dynamics: M(c) nu_dot = B F - C(nu, c) nu - g(e, c) - d_a(nu)

struct DynamicsTerms {
  Mat6 mass;                               // M(c)
  Vec6 coriolis;                           // C(nu, c) nu
  Vec6 restoring;                          // g(e, c)
  Vec6 aero;                               // d_a(nu)
  Eigen::Matrix<double, 6, 2> input;       // B(c)

  /// Generalized force residual B F - C nu - g - d_a.
  Vec6 residual(const ControlInput& u) const { return input * u.vec() - coriolis - restoring - aero; }
};

/// Rigid-body plus added-mass inertia about the body origin.
inline Mat6 mass_matrix(const SliderConfig& cfg, const ModelParams& prm) {
  const double m = prm.total_mass();
  const Vec3 rg = prm.center_of_mass(cfg);
  const Vec3 rs = prm.slider_position(cfg);

  Mat3 inertia = prm.inertia_diag.asDiagonal();
  inertia += prm.m_slider * (rs.squaredNorm() * Mat3::Identity() - rs * rs.transpose());

  Mat6 mm = Mat6::Zero();
  mm.topLeftCorner<3, 3>() = m * Mat3::Identity();
  mm.topRightCorner<3, 3>() = -m * skew(rg);
  mm.bottomLeftCorner<3, 3>() = m * skew(rg);
  mm.bottomRightCorner<3, 3>() = inertia;
  mm.diagonal() += prm.added_mass_diag;
  return mm;
}

/// Kirchhoff form of the Coriolis-centripetal term for a symmetric M.
inline Vec6 coriolis_term(const Mat6& mass, const Vec6& nu) {
  const Vec3 v = nu.head<3>();
  const Vec3 w = nu.tail<3>();
  const Vec6 momentum = mass * nu;
  const Vec3 lin = momentum.head<3>();
  const Vec3 ang = momentum.tail<3>();
  Vec6 out;
  out.head<3>() = w.cross(lin);
  out.tail<3>() = w.cross(ang) + v.cross(lin);
  return out;
}

/// Weight acts at the composite CoM, gross buoyancy (weight + net) at the CoB.
inline Vec6 restoring_term(const Vec3& e, const SliderConfig& cfg, const ModelParams& prm) {
  const Mat3 rt = rotation_matrix(e).transpose();
  const double w = prm.weight();
  const double b = w + prm.buoyancy;
  const Vec3 f_weight = rt * Vec3(0.0, 0.0, w);
  const Vec3 f_buoy = rt * Vec3(0.0, 0.0, -b);
  const Vec3 rg = prm.center_of_mass(cfg);
  Vec6 g;
  g.head<3>() = -(f_weight + f_buoy);
  g.tail<3>() = -(rg.cross(f_weight) + prm.r_cb.cross(f_buoy));
  return g;
}

/// Quadratic body-axis drag, lift linear in (saturated) angle of attack along
/// body z, and linear rate damping.
inline Vec6 aero_term(const Vec6& nu, const ModelParams& prm) {
  const AeroCoefficients& a = prm.aero;
  const double q = 0.5 * a.air_density * a.ref_area;
  const double u = nu[0], v = nu[1], w = nu[2];
  Vec6 d;
  d[0] = q * a.drag.x() * u * std::abs(u);
  d[1] = q * a.drag.y() * v * std::abs(v);
  d[2] = q * a.drag.z() * w * std::abs(w);
  const double speed_sq = u * u + w * w;
  if (speed_sq > 0.0) {
    const double alpha = std::clamp(std::atan2(w, std::abs(u)), -a.stall_angle, a.stall_angle);
    d[2] += q * a.lift_slope * alpha * speed_sq;
  }
  d.tail<3>() = a.rate_damping.cwiseProduct(nu.tail<3>());
  return d;
}

/// Thrusters push along body x from (., -+arm, pitch_arm). Constant in c.
inline Eigen::Matrix<double, 6, 2> input_matrix(const SliderConfig& /*cfg*/, const ModelParams& prm) {
  Eigen::Matrix<double, 6, 2> b = Eigen::Matrix<double, 6, 2>::Zero();
  b(0, 0) = 1.0;
  b(0, 1) = 1.0;
  b(4, 0) = prm.thruster_pitch_arm;
  b(4, 1) = prm.thruster_pitch_arm;
  b(5, 0) = prm.thruster_arm;
  b(5, 1) = -prm.thruster_arm;
  return b;
}

inline bool is_positive_definite(const Mat6& m) {
  if (!m.isApprox(m.transpose(), 1e-12)) return false;
  Eigen::LLT<Mat6> llt(m);
  return llt.info() == Eigen::Success;
}

inline DynamicsTerms assemble_dynamics(const BlimpState& s, const SliderConfig& cfg, const ModelParams& prm) {
  DynamicsTerms t;
  t.mass = mass_matrix(cfg, prm);
  if (!is_positive_definite(t.mass)) throw Error(ErrorKind::NonPdMass, "M(c) is not symmetric positive definite");
  const Vec6 nu = s.nu();
  t.coriolis = coriolis_term(t.mass, nu);
  t.restoring = restoring_term(s.e, cfg, prm);
  t.aero = aero_term(nu, prm);
  t.input = input_matrix(cfg, prm);
  return t;
}

/// Time derivative of the packed 12-state for a fixed slider and input.
inline BlimpState::Packed state_derivative(const BlimpState& s, const SliderConfig& cfg, const ControlInput& u,
                                           const ModelParams& prm) {
  const DynamicsTerms t = assemble_dynamics(s, cfg, prm);
  const Vec6 nu_dot = t.mass.llt().solve(t.residual(u));
  BlimpState::Packed dx;
  dx.segment<3>(0) = rotation_matrix(s.e) * s.v_b;
  dx.segment<3>(3) = euler_rate_matrix(s.e) * s.w_b;
  dx.segment<6>(6) = nu_dot;
  return dx;
}

inline void check_blowup(const BlimpState::Packed& x) {
  if (!x.allFinite() || x.cwiseAbs().maxCoeff() > kBlowupLimit)
    throw Error(ErrorKind::NumericBlowup, "state magnitude exceeded 1e6");
}

/// One classical RK4 step of the coupled kinematics and dynamics.
inline BlimpState step(const BlimpState& s, const SliderConfig& cfg, const ControlInput& u, const ModelParams& prm,
                       double dt) {
  if (!(dt > 0.0 && dt <= 0.05)) throw Error(ErrorKind::InvalidConfig, "dt must lie in (0, 0.05]");
  const BlimpState::Packed x = s.pack();
  auto f = [&](const BlimpState::Packed& xi) {
    check_blowup(xi);
    return state_derivative(BlimpState::unpack(xi), cfg, u, prm);
  };
  const BlimpState::Packed k1 = f(x);
  const BlimpState::Packed k2 = f(x + 0.5 * dt * k1);
  const BlimpState::Packed k3 = f(x + 0.5 * dt * k2);
  const BlimpState::Packed k4 = f(x + dt * k3);
  const BlimpState::Packed next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  check_blowup(next);
  BlimpState out = BlimpState::unpack(next);
  euler_rate_matrix(out.e);  // reject a step that lands in gimbal lock
  return out;
}

/// Kinetic energy 0.5 nu^T M nu.
inline double kinetic_energy(const BlimpState& s, const SliderConfig& cfg, const ModelParams& prm) {
  const Vec6 nu = s.nu();
  return 0.5 * nu.dot(mass_matrix(cfg, prm) * nu);
}

// ---------------------------------------------------------------------------
// Domain randomization

struct InitialStateBounds {
  double position = 0.05;                   // [m]
  double attitude = 2.0 * kPi / 180.0;      // [rad]
  double velocity = 0.02;                   // [m/s]
};

/// Aero coefficients scaled by U[1 - rand_aero_frac, 1 + rand_aero_frac], mass,
/// buoyancy and inertia terms by U[1 - rand_mass_frac, 1 + rand_mass_frac].
inline ModelParams randomize_params(const ModelParams& nominal, std::uint64_t seed, bool enabled = true) {
  if (!enabled) return nominal;
  Rng rng(seed);
  const double fa = nominal.rand_aero_frac;
  const double fm = nominal.rand_mass_frac;
  auto aero = [&] { return uniform(rng, 1.0 - fa, 1.0 + fa); };
  auto mass = [&] { return uniform(rng, 1.0 - fm, 1.0 + fm); };

  ModelParams p = nominal;
  for (int i = 0; i < 3; ++i) p.aero.drag[i] *= aero();
  p.aero.lift_slope *= aero();
  for (int i = 0; i < 3; ++i) p.aero.rate_damping[i] *= aero();

  p.m_body *= mass();
  p.m_slider *= mass();
  p.buoyancy *= mass();
  for (int i = 0; i < 3; ++i) p.inertia_diag[i] *= mass();
  for (int i = 0; i < 6; ++i) p.added_mass_diag[i] *= mass();
  return p;
}

inline BlimpState randomize_initial_state(const BlimpState& nominal, std::uint64_t seed,
                                          const InitialStateBounds& bounds = {}) {
  Rng rng(seed);
  auto offset = [&](double mag) { return mag > 0.0 ? uniform(rng, -mag, mag) : 0.0; };
  BlimpState s = nominal;
  for (int i = 0; i < 3; ++i) s.p[i] += offset(bounds.position);
  for (int i = 0; i < 3; ++i) s.e[i] += offset(bounds.attitude);
  for (int i = 0; i < 3; ++i) s.v_b[i] += offset(bounds.velocity);
  return s;
}

}  // namespace blimp

#include "seabed/nmla.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <string>

#include "seabed/error.hpp"

namespace seabed {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
const cplx kI(0.0, 1.0);

double bessel_j(int n, double x) {
  const double v = std::cyl_bessel_j(static_cast<double>(std::abs(n)), x);
  return (n < 0 && (n % 2 != 0)) ? -v : v;
}

// Cylindrical factor of the impedance quantity du/(ik) + u for the n-th
// Jacobi-Anger term: (-i)^n (J_n(kr) - i J_n'(kr)).
cplx impedance_factor(int n, double kr) {
  const double j = bessel_j(n, kr);
  const double jp = 0.5 * (bessel_j(n - 1, kr) - bessel_j(n + 1, kr));
  return std::pow(-kI, n) * cplx(j, -jp);
}

double wrap_angle(double a) {
  a = std::fmod(a, kTwoPi);
  return a < 0 ? a + kTwoPi : a;
}

}  // namespace

double CircleData::angle(std::size_t j) const { return kTwoPi * static_cast<double>(j) / static_cast<double>(size()); }

int CircleData::min_samples(double wavenumber, double radius) {
  return 4 * static_cast<int>(std::ceil(wavenumber * radius)) + 8;
}

void CircleData::validate() const {
  if (!(radius > 0) || !(wavenumber > 0)) throw ParameterError("circle radius and wavenumber must be positive");
  if (du.size() != u.size()) throw ParameterError("circle data: value and derivative counts differ");
  if (static_cast<int>(u.size()) < min_samples(wavenumber, radius)) {
    throw ParameterError("circle data: " + std::to_string(u.size()) + " samples, need at least " +
                         std::to_string(min_samples(wavenumber, radius)));
  }
}

AngularSpectrum angular_spectrum(const CircleData& data, int n_angles) {
  data.validate();
  const std::size_t S = data.size();
  const double kr = data.wavenumber * data.radius;
  AngularSpectrum out;
  out.center = data.center;
  out.bandlimit = std::max(1, static_cast<int>(std::lround(kr)));
  const int L = out.bandlimit;

  std::vector<cplx> U(S);
  for (std::size_t j = 0; j < S; ++j) U[j] = data.du[j] / (kI * data.wavenumber) + data.u[j];

  out.coefficients.assign(2 * L + 1, cplx(0.0, 0.0));
  for (int n = -L; n <= L; ++n) {
    cplx c = 0.0;
    for (std::size_t j = 0; j < S; ++j) c += U[j] * std::exp(-kI * (n * data.angle(j)));
    c /= static_cast<double>(S);
    const cplx D = impedance_factor(n, kr);
    if (std::abs(D) < 1e-12) {
      ++out.dropped;
      continue;
    }
    out.coefficients[n + L] = c / D;
  }

  const int M = n_angles > 0 ? n_angles : 720;
  out.angles.resize(M);
  out.amplitudes.resize(M);
  const double norm = 1.0 / (2 * L + 1);
  for (int m = 0; m < M; ++m) {
    const double beta = kTwoPi * m / M;
    cplx b = 0.0;
    for (int n = -L; n <= L; ++n) b += out.coefficients[n + L] * std::exp(kI * (n * beta));
    out.angles[m] = beta;
    out.amplitudes[m] = b * norm;
  }
  return out;
}

double directional_amplitude(const AngularSpectrum& s, double direction) {
  const std::size_t M = s.amplitudes.size();
  if (M == 0) return 0.0;
  const double pos = wrap_angle(direction) / kTwoPi * static_cast<double>(M);
  const std::size_t i0 = static_cast<std::size_t>(std::floor(pos)) % M;
  const std::size_t i1 = (i0 + 1) % M;
  const double w = pos - std::floor(pos);
  return (1.0 - w) * std::abs(s.amplitudes[i0]) + w * std::abs(s.amplitudes[i1]);
}

double observation_bearing(double incident_angle, ObservationDirection which) {
  // The incident wave travels along (sin t, -cos t), bearing t - pi/2.
  switch (which) {
    case ObservationDirection::kReversedIncident: return wrap_angle(std::numbers::pi / 2 + incident_angle);
    case ObservationDirection::kSpecular: return wrap_angle(std::numbers::pi / 2 - incident_angle);
  }
  return 0.0;
}

CircleData sample_plane_waves(const std::vector<PlaneWave>& waves, double k, Point2 center,
                              double radius, int samples) {
  CircleData d;
  d.center = center;
  d.radius = radius;
  d.wavenumber = k;
  d.u.assign(samples, cplx(0.0, 0.0));
  d.du.assign(samples, cplx(0.0, 0.0));
  for (int j = 0; j < samples; ++j) {
    const double t = kTwoPi * j / samples;
    const double x = center.x + radius * std::cos(t), z = center.z + radius * std::sin(t);
    for (const PlaneWave& w : waves) {
      const double dx = std::cos(w.bearing), dz = std::sin(w.bearing);
      const cplx v = w.amplitude * std::exp(-kI * k * (dx * x + dz * z));
      d.u[j] += v;
      d.du[j] += -kI * k * (dx * std::cos(t) + dz * std::sin(t)) * v;
    }
  }
  return d;
}

CircleData sample_circle(const FieldSolution& solution, Point2 center, double radius, int samples) {
  CircleData d;
  d.center = center;
  d.radius = radius;
  d.wavenumber = solution.scene().water_wavenumber();
  std::vector<Point2> pts(samples);
  for (int j = 0; j < samples; ++j) {
    const double t = kTwoPi * j / samples;
    pts[j] = {center.x + radius * std::cos(t), center.z + radius * std::sin(t)};
  }
  FieldSamples fs = sample_field(solution, pts, center);
  d.u = std::move(fs.values);
  d.du = std::move(fs.radial);
  return d;
}

BackscatterSignal backscatter_signal(const FieldSolution& solution, const LayeredDomain& domain,
                                     int n_points, double z0, double radius,
                                     ObservationDirection which) {
  const HighFreqTemplate& t = domain.scene;
  if (n_points < 1) throw GenerationError("backscatter signal needs at least one observation point");
  const double k = t.water_wavenumber();
  const int S = CircleData::min_samples(k, radius);
  const double f_max =
      domain.surface.f.empty() ? 0.0 : *std::max_element(domain.surface.f.begin(), domain.surface.f.end());
  const FieldGrid& g = solution.grid();

  BackscatterSignal out;
  out.z0 = z0;
  out.direction = observation_bearing(t.incident_angle, which);
  out.x.resize(n_points);
  out.y.resize(n_points);
  for (int k_pt = 0; k_pt < n_points; ++k_pt) {
    const double x = (k_pt + 0.5) * t.width / n_points;
    out.x[k_pt] = x;
    if (!(z0 - radius > f_max) || !(z0 + radius < g.phys_z_max) || !(radius > 0)) {
      throw GenerationError("observation circle at x_k = " + std::to_string(x) +
                            " leaves the water region between the interface and the top PML");
    }
    try {
      const AngularSpectrum spec = angular_spectrum(sample_circle(solution, {x, z0}, radius, S));
      out.y[k_pt] = directional_amplitude(spec, out.direction);
    } catch (const Error& e) {
      throw GenerationError("observation circle at x_k = " + std::to_string(x) + ": " + e.what());
    }
  }
  return out;
}

BackscatterSignal backscatter_signal(const FieldSolution& solution, const HighFreqTemplate& t,
                                     int n_points, double z0, double radius, int surface_points) {
  return backscatter_signal(solution, LayeredDomain::from_template(t, surface_points), n_points, z0,
                            radius);
}

void write_signal_csv(std::ostream& os, const BackscatterSignal& s) {
  os << "x,y\n";
  os.precision(17);
  for (std::size_t i = 0; i < s.x.size(); ++i) os << s.x[i] << ',' << s.y[i] << '\n';
}

}  // namespace seabed

#include "seabed/surface.hpp"

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <iomanip>
#include <mutex>
#include <numbers>
#include <ostream>
#include <random>

#include "seabed/error.hpp"

namespace seabed {
namespace {

// The FFTW planner is not thread-safe.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

// Real white noise -> filtered real profile through an r2c/c2r pair.
std::vector<double> filter_noise(const std::vector<double>& noise, double dx, double corr_length) {
  const int n = static_cast<int>(noise.size());
  std::vector<double> buf(noise);
  std::vector<std::complex<double>> spec(n / 2 + 1);
  fftw_plan forward, backward;
  {
    std::lock_guard lock(planner_mutex());
    forward = fftw_plan_dft_r2c_1d(n, buf.data(), reinterpret_cast<fftw_complex*>(spec.data()),
                                   FFTW_ESTIMATE);
    backward = fftw_plan_dft_c2r_1d(n, reinterpret_cast<fftw_complex*>(spec.data()), buf.data(),
                                    FFTW_ESTIMATE);
  }
  fftw_execute(forward);
  // Gaussian correlation exp(-x^2/l^2) has power spectrum ~ exp(-k^2 l^2 / 4);
  // the amplitude filter is its square root.
  const double dk = 2.0 * std::numbers::pi / (n * dx);
  for (int j = 0; j <= n / 2; ++j) {
    const double k = j * dk;
    spec[j] *= std::exp(-k * k * corr_length * corr_length / 8.0);
  }
  fftw_execute(backward);
  {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(forward);
    fftw_destroy_plan(backward);
  }
  return buf;
}

double taper_weight(double x, double width) {
  const double margin = 0.05 * width;
  const double d = std::min(x, width - x);
  if (d >= margin) return 1.0;
  const double s = std::sin(0.5 * std::numbers::pi * d / margin);
  return s * s;
}

}  // namespace

double SurfaceProfile::height_at(double xq) const {
  const std::size_t n = f.size();
  if (n == 0) return 0.0;
  const double dx = width / static_cast<double>(n);
  double t = std::fmod(xq, width);
  if (t < 0) t += width;
  const double pos = t / dx;
  std::size_t j = static_cast<std::size_t>(std::floor(pos));
  if (j >= n) j = n - 1;
  const double w = pos - static_cast<double>(j);
  return (1.0 - w) * f[j] + w * f[(j + 1) % n];
}

double SurfaceProfile::mean() const {
  double s = 0.0;
  for (double v : f) s += v;
  return f.empty() ? 0.0 : s / static_cast<double>(f.size());
}

double SurfaceProfile::sample_rms() const {
  double s = 0.0;
  for (double v : f) s += v * v;
  return f.empty() ? 0.0 : std::sqrt(s / static_cast<double>(f.size()));
}

SurfaceProfile SurfaceProfile::flat(double width, int n_points) {
  SurfaceProfile s;
  s.width = width;
  s.x.resize(n_points);
  for (int j = 0; j < n_points; ++j) s.x[j] = j * width / n_points;
  s.f.assign(n_points, 0.0);
  return s;
}

SurfaceProfile generate_surface(double width, int n_points, double rms_height, double corr_length,
                                std::uint64_t seed, CorrelationModel model) {
  if (!(width > 0)) throw ParameterError("surface width must be positive");
  if (n_points < 64) throw ParameterError("surface needs at least 64 points");
  if (!(rms_height >= 0)) throw ParameterError("rms height must be non-negative");
  if (!(corr_length > 0 && corr_length < width / 4)) {
    throw ParameterError("correlation length must lie in (0, width/4)");
  }
  (void)model;  // Gaussian is the only model so far.

  SurfaceProfile s = SurfaceProfile::flat(width, n_points);
  s.rms_target = rms_height;
  s.corr_target = corr_length;
  s.seed = seed;
  if (rms_height == 0.0) return s;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> noise(n_points);
  for (double& v : noise) v = normal(rng);
  std::vector<double> f = filter_noise(noise, width / n_points, corr_length);

  const double f0 = f[0];
  for (int j = 0; j < n_points; ++j) f[j] = f0 + (f[j] - f0) * taper_weight(s.x[j], width);

  double mean = 0.0;
  for (double v : f) mean += v;
  mean /= n_points;
  double power = 0.0;
  for (double& v : f) {
    v -= mean;
    power += v * v;
  }
  const double scale = rms_height / std::sqrt(power / n_points);
  for (double& v : f) v *= scale;
  s.f = std::move(f);
  return s;
}

void write_surface_csv(std::ostream& os, const SurfaceProfile& s) {
  os << "x,f\n" << std::setprecision(17);
  for (std::size_t j = 0; j < s.f.size(); ++j) os << s.x[j] << ',' << s.f[j] << '\n';
}

}  // namespace seabed

#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace seabed {

enum class CorrelationModel { kGaussian };

// Periodic interface profile on x_j = j * width / n, j = 0 .. n-1.
struct SurfaceProfile {
  double width = 0.0;
  std::vector<double> x;
  std::vector<double> f;
  double rms_target = 0.0;
  double corr_target = 0.0;
  std::uint64_t seed = 0;

  // Periodic linear interpolation.
  double height_at(double x) const;
  double sample_rms() const;
  double mean() const;

  static SurfaceProfile flat(double width, int n_points);
};

// Spectral synthesis of a stationary Gaussian profile with correlation
// exp(-x^2 / l^2), tapered to zero slope over 5% margins at both ends, then
// mean-removed and scaled to exactly `rms_height`. Throws ParameterError.
SurfaceProfile generate_surface(double width, int n_points, double rms_height, double corr_length,
                                std::uint64_t seed,
                                CorrelationModel model = CorrelationModel::kGaussian);

// Two columns: x,f.
void write_surface_csv(std::ostream& os, const SurfaceProfile& s);

}  // namespace seabed

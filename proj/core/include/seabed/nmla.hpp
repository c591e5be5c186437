#pragma once

#include <iosfwd>
#include <vector>

#include "seabed/catalog.hpp"
#include "seabed/helmholtz.hpp"

namespace seabed {

// Directions are propagation bearings measured counterclockwise from +x in
// the (x, z) plane: a plane wave travelling along (cos b, sin b) is
// exp(-i k (x cos b + z sin b)) under the exp(+i w t) convention.

// Samples of a field and its outward radial derivative on a circle, at
// angles t_j = 2 pi j / S.
struct CircleData {
  Point2 center;
  double radius = 0.0;
  double wavenumber = 0.0;
  std::vector<cplx> u;
  std::vector<cplx> du;

  std::size_t size() const { return u.size(); }
  double angle(std::size_t j) const;
  // Oversampling floor 4 ceil(k r) + 8.
  static int min_samples(double wavenumber, double radius);
  // Throws ParameterError.
  void validate() const;
};

struct AngularSpectrum {
  Point2 center;
  std::vector<double> angles;      // uniform on [0, 2 pi)
  std::vector<cplx> amplitudes;    // B(angle)
  std::vector<cplx> coefficients;  // filtered Fourier coefficients, n = -L..L
  int bandlimit = 0;               // L
  int dropped = 0;                 // coefficients skipped for a tiny cylindrical factor
};

// Impedance-filtered Jacobi-Anger decomposition. `n_angles` = 0 selects
// 720 output directions.
AngularSpectrum angular_spectrum(const CircleData& data, int n_angles = 0);

// |B| linearly interpolated in angle (periodic).
double directional_amplitude(const AngularSpectrum& spectrum, double direction);

// Which bearing the backscatter observable reads.
enum class ObservationDirection {
  kReversedIncident,  // pi/2 + theta: back along the incident wave
  kSpecular,          // pi/2 - theta: the mirror reflection
};

double observation_bearing(double incident_angle, ObservationDirection which);

// Analytic samples of a sum of plane waves, for tests and tools.
struct PlaneWave {
  cplx amplitude;
  double bearing;
};
CircleData sample_plane_waves(const std::vector<PlaneWave>& waves, double wavenumber,
                              Point2 center, double radius, int samples);

// Scattered-field samples on a circle of a solved template.
CircleData sample_circle(const FieldSolution& solution, Point2 center, double radius,
                         int samples);

struct BackscatterSignal {
  std::vector<double> x;
  std::vector<double> y;
  double z0 = 0.0;
  double direction = 0.0;
};

// n observation centers x_k = (k + 1/2) W / n at height z0, circles of
// radius r. Every circle must stay above the interface of `domain` and below
// the top PML; otherwise GenerationError names x_k.
BackscatterSignal backscatter_signal(const FieldSolution& solution, const LayeredDomain& domain,
                                     int n_points, double z0, double radius,
                                     ObservationDirection which = ObservationDirection::kReversedIncident);

// Regenerates the interface from the template's roughness spec with
// `surface_points` samples (as solve_template does) and calls the above.
BackscatterSignal backscatter_signal(const FieldSolution& solution, const HighFreqTemplate& t,
                                     int n_points, double z0, double radius,
                                     int surface_points = 1024);

// Two columns "x,y".
void write_signal_csv(std::ostream& os, const BackscatterSignal& s);

}  // namespace seabed

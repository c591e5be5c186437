#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "seabed/catalog.hpp"
#include "seabed/error.hpp"
#include "seabed/helmholtz.hpp"
#include "support/oracles.hpp"

using namespace seabed;

namespace {

constexpr double kPi = std::numbers::pi;
const cplx kI(0, 1);

HighFreqTemplate half_spaces(SedimentClass c, double attenuation = 0.5) {
  const auto env = backscatter_environment(EnvironmentSet::training(), c);
  HighFreqTemplate t = env.make_template(0.5, 0);
  t.c_bottom = t.c_top;
  t.rho_bottom = t.rho_top;
  t.roughness.rms_height = 0;
  t.attenuation_db_per_m_per_khz = attenuation;
  return t;
}

std::vector<Point2> water_probe_points(const HighFreqTemplate& t) {
  std::vector<Point2> pts;
  for (double x = 0.05; x < t.width; x += 0.1) {
    for (double z : {0.2, 0.5, 0.8, 1.1}) pts.push_back({x, z});
  }
  return pts;
}

}  // namespace

TEST(Incident, UnitModulusAndPhaseGradient) {
  HighFreqTemplate t;
  const IncidentSpec inc = IncidentSpec::from_template(t);
  EXPECT_EQ(inc.value(0, 0), cplx(1, 0));
  for (const cplx& v : incident_field(inc, {{0.3, -0.2}, {1.7, 0.9}, {-5, 3}})) {
    EXPECT_NEAR(std::abs(v), 1.0, 1e-14);
  }
  EXPECT_NEAR(std::hypot(inc.kx(), inc.kz()), t.water_wavenumber(), 1e-12);
  // Phase gradient along x by central difference on the unwrapped phase.
  const double h = 1e-6;
  const double dphi = std::arg(inc.value(0.4 + h, 0.1) / inc.value(0.4 - h, 0.1)) / (2 * h);
  EXPECT_NEAR(std::abs(dphi), 2 * kPi * 15000 / 1500 * std::sin(kPi / 12), 1e-6);
  EXPECT_NEAR(std::abs(dphi), 16.2622, 1e-3);
}

TEST(Helmholtz, HomogeneousWaterHasNoScatteredField) {
  HighFreqTemplate t;
  t.c_top = t.c_bottom = t.c_water;
  t.rho_top = t.rho_bottom = t.rho_water;
  t.attenuation_db_per_m_per_khz = 0;
  t.roughness.rms_height = 0.005;
  const DiscreteSystem sys = assemble(LayeredDomain::from_template(t));
  EXPECT_EQ(sys.rhs.norm(), 0.0);
  const FieldSolution s = solve_scattered(sys);
  for (const cplx& v : s.nodal()) EXPECT_EQ(v, cplx(0, 0));
}

TEST(Helmholtz, DeskScaleUnknownCount) {
  HighFreqTemplate t;
  const DiscreteSystem sys = assemble(LayeredDomain::from_template(t));
  EXPECT_GT(sys.rhs.size(), 10000);
  EXPECT_LT(sys.rhs.size(), 1000000);
  // 8 nodes per wavelength in the slowest medium.
  EXPECT_LE(sys.grid.hx, 1500.0 / 15000 / 8 + 1e-12);
  EXPECT_LE(sys.grid.hz, 1500.0 / 15000 / 8 + 1e-12);
}

TEST(Helmholtz, RoughInterfaceLeavingBandIsRejected) {
  HighFreqTemplate t;
  t.thickness = 0.01;
  t.roughness.rms_height = 0.02;
  t.roughness.corr_length = 0.05;
  EXPECT_THROW(assemble(LayeredDomain::from_template(t)), SolverError);
}

struct InterpolationError {
  double value = 0;
  double radial = 0;  // relative to k
  int order = 0;
};

InterpolationError plane_wave_interpolation(double nodes_per_wavelength) {
  HighFreqTemplate t;
  LayeredDomain d = LayeredDomain::from_template(t);
  d.options.nodes_per_wavelength = nodes_per_wavelength;
  const DiscreteSystem sys = assemble(d);
  const IncidentSpec inc = IncidentSpec::from_template(t);
  const FieldSolution s =
      FieldSolution::from_function(sys.grid, [&](double x, double z) { return inc.value(x, z); });
  const Point2 center{1.0, 1.0};
  std::vector<Point2> pts;
  for (int k = 0; k < 64; ++k) {
    const double a = 2 * kPi * k / 64;
    pts.push_back({center.x + 0.25 * std::cos(a), center.z + 0.25 * std::sin(a)});
  }
  // Beyond the lateral period.
  pts.push_back({2.31, 0.4});
  pts.push_back({-0.77, 0.3});
  const FieldSamples fs = sample_field(s, pts, center);
  InterpolationError e;
  e.order = sys.grid.order;
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const cplx exact = inc.value(pts[k].x, pts[k].z);
    e.value = std::max(e.value, std::abs(fs.values[k] - exact));
    const double rx = pts[k].x - center.x, rz = pts[k].z - center.z, r = std::hypot(rx, rz);
    const cplx dr = -kI * (inc.kx() * rx + inc.kz() * rz) / r * exact;
    e.radial = std::max(e.radial, std::abs(fs.radial[k] - dr) / t.water_wavenumber());
  }
  return e;
}

TEST(Sampling, NodalValuesAreExact) {
  HighFreqTemplate t;
  const DiscreteSystem sys = assemble(LayeredDomain::from_template(t));
  const FieldSolution s = FieldSolution::from_function(
      sys.grid, [](double x, double z) { return cplx(std::sin(3 * x + z), x * z); });
  const FieldGrid& g = s.grid();
  const int j_lo = static_cast<int>(std::ceil((g.phys_z_min - g.z_min) / g.hz - 1e-9));
  const int j_hi = static_cast<int>(std::floor((g.phys_z_max - g.z_min) / g.hz + 1e-9));
  for (int j : {j_lo, g.nz / 2, j_hi}) {
    for (int i : {0, 3, 7, g.nx - 1}) {
      EXPECT_LT(std::abs(s.value(g.x_at(i), g.z_at(j)) - s.node(i, j)), 1e-12) << i << "," << j;
    }
  }
}

TEST(Sampling, PlaneWaveInterpolationConvergesAtElementOrder) {
  const InterpolationError coarse = plane_wave_interpolation(8.0);
  const InterpolationError fine = plane_wave_interpolation(16.0);
  EXPECT_LT(coarse.value, 1e-2);
  EXPECT_LT(coarse.radial, 1e-1);
  // Halving h divides the value error by 2^(p+1) and the gradient error by
  // 2^p; allow a factor 0.6 for the pre-asymptotic regime.
  const double p = coarse.order;
  EXPECT_GT(coarse.value / fine.value, 0.6 * std::pow(2.0, p + 1));
  EXPECT_GT(coarse.radial / fine.radial, 0.6 * std::pow(2.0, p));
}

TEST(Sampling, PmlPointsAreRejected) {
  HighFreqTemplate t;
  const DiscreteSystem sys = assemble(LayeredDomain::from_template(t));
  const FieldSolution s = FieldSolution::from_function(sys.grid, [](double, double) { return cplx(1, 0); });
  EXPECT_THROW(s.value(0.5, s.grid().phys_z_max + 0.01), SamplingError);
  EXPECT_THROW(s.value(0.5, s.grid().phys_z_min - 0.01), SamplingError);
  EXPECT_THROW(s.value(0.5, 100.0), SamplingError);
}

TEST(Helmholtz, FlatInterfaceMatchesFresnel) {
  const HighFreqTemplate t = half_spaces(SedimentClass::kSand);
  const FieldSolution s = solve_template(t);
  EXPECT_LT(s.stats().residual, 1e-8);
  const double omega = 2 * kPi * t.frequency;
  const double alpha = attenuation_to_nepers(0.5, AttenuationUnit::kDbPerMeterPerKhz, t.frequency, 1);
  const double R = std::abs(oracle::fresnel(omega, t.incident_angle, t.c_water, t.rho_water, t.c_top, t.rho_top, alpha));
  for (const cplx& v : sample_field(s, water_probe_points(t)).values) {
    EXPECT_NEAR(std::abs(v) / R, 1.0, 0.02);
  }
}

TEST(Helmholtz, LosslessFlatInterfaceConservesEnergy) {
  const HighFreqTemplate t = half_spaces(SedimentClass::kSilt, 0.0);
  const FieldSolution s = solve_template(t);
  const IncidentSpec inc = IncidentSpec::from_template(t);
  const double omega = 2 * kPi * t.frequency;
  const double kz1 = omega / t.c_water * std::cos(t.incident_angle);
  const double kx = inc.kx();
  const double kz2 = std::sqrt(std::pow(omega / t.c_top, 2) - kx * kx);
  double r_sum = 0, t_sum = 0;
  int n = 0;
  for (double x = 0.1; x < 2; x += 0.2) {
    r_sum += std::abs(s.value(x, 0.6));
    t_sum += std::abs(s.value(x, -0.4) + inc.value(x, -0.4));
    ++n;
  }
  const double R = r_sum / n, T = t_sum / n;
  const double flux = R * R + (t.rho_water * kz2) / (t.rho_top * kz1) * T * T;
  EXPECT_NEAR(flux, 1.0, 0.02);
}

TEST(Helmholtz, PmlReflectionBelowOnePercent) {
  // Homogeneous water, sheet source at the center launching plane waves up
  // and down. A reflected wave shows up as a standing-wave ripple in |u|.
  HighFreqTemplate t;
  t.c_top = t.c_bottom = t.c_water;
  t.rho_top = t.rho_bottom = t.rho_water;
  t.attenuation_db_per_m_per_khz = 0;
  const LayeredDomain d = LayeredDomain::from_template(t);
  const IncidentSpec inc = IncidentSpec::from_template(t);
  const double zc = 0.2, w = 0.05;
  const FieldSolution s = solve_scattered(assemble_with_source(d, [&](double x, double z) {
    return std::exp(-kI * inc.kx() * x) * std::exp(-(z - zc) * (z - zc) / (w * w));
  }));
  for (auto [lo, hi] : {std::pair{zc + 0.2, 1.3}, std::pair{-0.95, zc - 0.2}}) {
    double mx = 0, mn = 1e300;
    for (double z = lo; z <= hi; z += 0.002) {
      const double a = std::abs(s.value(1.0, z));
      mx = std::max(mx, a);
      mn = std::min(mn, a);
    }
    EXPECT_LT((mx - mn) / (mx + mn), 0.01) << lo << ".." << hi;
  }
}

TEST(Helmholtz, TopLayerAttenuationReducesTransmission) {
  HighFreqTemplate t = half_spaces(SedimentClass::kSand, 0.0);
  t.c_bottom = 5250;
  t.rho_bottom = 2700;
  t.thickness = 0.5;
  double previous = 1e300;
  for (double alpha : {0.0, 0.5, 1.0, 2.0, 4.0}) {
    LayeredDomain d = LayeredDomain::from_template(t);
    d.top_attenuation = alpha;
    const FieldSolution s = solve_scattered(assemble(d));
    const IncidentSpec inc = IncidentSpec::from_template(t);
    double sum = 0;
    for (double x = 0.05; x < 2; x += 0.1) sum += std::abs(s.value(x, -0.7) + inc.value(x, -0.7));
    EXPECT_LE(sum, previous * (1 + 1e-9)) << alpha;
    previous = sum;
  }
}

TEST(Helmholtz, RefinementChangesFieldByLessThanOnePercent) {
  HighFreqTemplate t = backscatter_environment(EnvironmentSet::training(), SedimentClass::kClay)
                           .make_template(0.5, 11);
  const FieldSolution a = solve_template(t, 1024, {8.0});
  const FieldSolution b = solve_template(t, 1024, {12.0});
  double num = 0, den = 0;
  for (const Point2& p : water_probe_points(t)) {
    const cplx va = a.value(p.x, p.z), vb = b.value(p.x, p.z);
    num += std::norm(va - vb);
    den += std::norm(vb);
  }
  EXPECT_LT(std::sqrt(num / den), 0.01);
}

TEST(Helmholtz, FieldRoundTrip) {
  HighFreqTemplate t;
  const DiscreteSystem sys = assemble(LayeredDomain::from_template(t));
  const FieldSolution s = FieldSolution::from_function(sys.grid, [](double x, double z) { return cplx(x, z); });
  std::stringstream ss;
  write_field(ss, s);
  const FieldSolution r = read_field(ss);
  EXPECT_EQ(r.nodal(), s.nodal());
  EXPECT_EQ(r.grid().nx, s.grid().nx);
  EXPECT_EQ(r.grid().bloch, s.grid().bloch);
  EXPECT_EQ(r.grid().order, s.grid().order);
  EXPECT_EQ(r.scene().c_top, t.c_top);
}

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "seabed/error.hpp"
#include "seabed/surface.hpp"

using namespace seabed;

namespace {

// Ensemble-averaged normalized circular autocorrelation, direct sums.
std::vector<double> ensemble_autocorrelation(int seeds, int n, double width, double rms,
                                             double corr, int max_lag) {
  std::vector<double> acc(max_lag + 1, 0.0);
  for (int s = 0; s < seeds; ++s) {
    const SurfaceProfile p = generate_surface(width, n, rms, corr, 1000 + s);
    for (int lag = 0; lag <= max_lag; ++lag) {
      double sum = 0.0;
      for (int j = 0; j < n; ++j) sum += p.f[j] * p.f[(j + lag) % n];
      acc[lag] += sum / n / (rms * rms);
    }
  }
  for (double& a : acc) a /= seeds;
  return acc;
}

}  // namespace

TEST(Surface, ZeroRmsIsFlat) {
  const SurfaceProfile p = generate_surface(2, 256, 0.0, 0.02, 5);
  for (double v : p.f) EXPECT_EQ(v, 0.0);
}

TEST(Surface, ExactRmsAndZeroMean) {
  for (std::uint64_t seed : {1u, 2u, 99u}) {
    const SurfaceProfile p = generate_surface(2, 1024, 0.005, 0.02, seed);
    EXPECT_NEAR(p.sample_rms(), 0.005, 1e-15);
    EXPECT_LE(std::abs(p.mean()), 1e-12 * 0.005);
  }
}

TEST(Surface, DeterministicAndSeedSensitive) {
  const SurfaceProfile a = generate_surface(2, 512, 0.0046, 0.015, 42);
  const SurfaceProfile b = generate_surface(2, 512, 0.0046, 0.015, 42);
  const SurfaceProfile c = generate_surface(2, 512, 0.0046, 0.015, 43);
  EXPECT_EQ(a.f, b.f);
  EXPECT_NE(a.f, c.f);
}

TEST(Surface, CorrelationLengthWithinFifteenPercent) {
  const int n = 1024;
  const double width = 2, corr = 0.02, dx = width / n;
  const auto acf = ensemble_autocorrelation(100, n, width, 0.005, corr, 40);
  double crossing = -1;
  for (int lag = 1; lag < static_cast<int>(acf.size()); ++lag) {
    const double target = std::exp(-1.0);
    if (acf[lag] < target) {
      const double t = (acf[lag - 1] - target) / (acf[lag - 1] - acf[lag]);
      crossing = (lag - 1 + t) * dx;
      break;
    }
  }
  ASSERT_GT(crossing, 0);
  EXPECT_NEAR(crossing / corr, 1.0, 0.15) << crossing;
}

TEST(Surface, AutocorrelationMatchesGaussianTarget) {
  const int n = 1024;
  const double width = 2, corr = 0.02, dx = width / n;
  const int max_lag = static_cast<int>(3 * corr / dx);
  const auto acf = ensemble_autocorrelation(200, n, width, 0.005, corr, max_lag);
  double worst = 0;
  for (int lag = 0; lag <= max_lag; ++lag) {
    const double tau = lag * dx;
    worst = std::max(worst, std::abs(acf[lag] - std::exp(-tau * tau / (corr * corr))));
  }
  EXPECT_LT(worst, 0.1);
}

TEST(Surface, TaperFlattensEdges) {
  const SurfaceProfile p = generate_surface(2, 1024, 0.005, 0.02, 7);
  // Zero slope at the seam: first differences on both sides are tiny.
  const double slope_left = (p.f[1] - p.f[0]) / (p.x[1] - p.x[0]);
  const double slope_right = (p.f[0] - p.f[1023]) / (p.x[1] - p.x[0]);
  EXPECT_LT(std::abs(slope_left), 0.01);
  EXPECT_LT(std::abs(slope_right), 0.01);
}

TEST(Surface, PeriodicInterpolation) {
  const SurfaceProfile p = generate_surface(2, 256, 0.005, 0.02, 3);
  EXPECT_EQ(p.height_at(p.x[10]), p.f[10]);
  EXPECT_NEAR(p.height_at(p.x[10] + 2.0), p.f[10], 1e-15);
  EXPECT_NEAR(p.height_at(-2.0 + p.x[17]), p.f[17], 1e-15);
  EXPECT_NEAR(p.height_at(0.5 * (p.x[3] + p.x[4])), 0.5 * (p.f[3] + p.f[4]), 1e-15);
}

TEST(Surface, Preconditions) {
  EXPECT_THROW(generate_surface(2, 32, 0.005, 0.02, 1), ParameterError);
  EXPECT_THROW(generate_surface(2, 256, -1, 0.02, 1), ParameterError);
  EXPECT_THROW(generate_surface(2, 256, 0.005, 0.6, 1), ParameterError);
}

TEST(Surface, CsvExport) {
  std::ostringstream os;
  write_surface_csv(os, generate_surface(2, 64, 0.005, 0.02, 1));
  std::istringstream is(os.str());
  std::string line;
  int rows = -1;
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, 64);
}

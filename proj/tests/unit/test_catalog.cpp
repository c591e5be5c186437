#include <gtest/gtest.h>

#include <sstream>

#include "seabed/catalog.hpp"
#include "seabed/error.hpp"

using namespace seabed;

namespace {

// Golden literals, row = class, column = set.
constexpr double kSpeed[4][11] = {
    {1500, 1517, 1521, 1517, 1546, 1517, 1529, 1526, 1518, 1527, 1518},
    {1575, 1577, 1592, 1582, 1574, 1591, 1586, 1596, 1581, 1584, 1580},
    {1650, 1658, 1632, 1663, 1647, 1652, 1644, 1642, 1672, 1648, 1655},
    {1800, 1794, 1795, 1799, 1796, 1792, 1802, 1809, 1791, 1801, 1784}};
constexpr double kAtten[4][11] = {
    {0.2, 0.271, 0.077, 0.296, 0.175, 0.224, 0.160, 0.066, 0.256, 0.215, 0.166},
    {1.0, 1.050, 1.064, 0.954, 0.892, 0.982, 1.039, 1.188, 1.046, 0.922, 1.189},
    {0.8, 1.042, 0.843, 0.914, 0.708, 0.839, 0.681, 0.970, 0.881, 0.595, 0.797},
    {0.6, 0.495, 0.683, 0.547, 0.458, 0.666, 0.616, 0.740, 0.651, 0.680, 0.775}};

struct BackscatterRow {
  double c_top, c_bottom, rho_top, rho_bottom;
};
// Sets training, 1, 2, 3, 4.
constexpr BackscatterRow kBack[4][5] = {
    {{1500, 5250, 1500, 2700}, {1500, 5250, 1500, 2700}, {1501.57, 5250, 1500.66, 2700},
     {1500, 5250, 1500, 2700}, {1501.57, 5254.58, 1500.66, 2704.57}},
    {{1575, 5250, 1700, 2700}, {1575, 5250, 1700, 2700}, {1577.03, 5250, 1697.99, 2700},
     {1575, 5250, 1700, 2700}, {1577.03, 5254.65, 1697.99, 2699.85}},
    {{1650, 5250, 1900, 2700}, {1650, 5250, 1900, 2700}, {1648.13, 5250, 1898.89, 2700},
     {1650, 5250, 1900, 2700}, {1648.13, 5246.58, 1898.89, 2703.00}},
    {{1800, 5250, 2000, 2700}, {1800, 5250, 2000, 2700}, {1802.07, 5250, 1802.07, 2700},
     {1800, 5250, 2000, 2700}, {1802.07, 5254.71, 1802.07, 2696.42}}};

}  // namespace

TEST(Catalog, ClassCodesAreABijection) {
  for (int i = 0; i < kNumClasses; ++i) {
    const SedimentClass c = class_from_code(i);
    EXPECT_EQ(code(c), i);
    EXPECT_EQ(parse_sediment_class(to_string(c)), c);
  }
  EXPECT_EQ(parse_sediment_class("GRAVEL"), SedimentClass::kGravel);
  EXPECT_THROW(parse_sediment_class("mud"), CatalogError);
  EXPECT_THROW(class_from_code(4), CatalogError);
}

TEST(Catalog, LowFreqTableGolden) {
  for (int c = 0; c < 4; ++c) {
    for (int s = 0; s <= 10; ++s) {
      const auto env = lowfreq_environment({s}, class_from_code(c));
      EXPECT_EQ(env.sediment.sound_speed, kSpeed[c][s]) << c << "," << s;
      EXPECT_EQ(env.sediment.attenuation, kAtten[c][s]) << c << "," << s;
      EXPECT_EQ(env.sediment_thickness, 5.0);
      EXPECT_EQ(env.water_depth, 111.0);
      EXPECT_NO_THROW(env.validate());
    }
  }
  EXPECT_THROW(lowfreq_environment({11}, SedimentClass::kClay), CatalogError);
  EXPECT_THROW(lowfreq_environment({-1}, SedimentClass::kClay), CatalogError);
}

TEST(Catalog, NominalLowFreqMatchesTrainingColumn) {
  const auto envs = nominal_lowfreq_environments();
  ASSERT_EQ(envs.size(), 4u);
  EXPECT_EQ(envs[0].first, SedimentClass::kClay);
  EXPECT_EQ(envs[0].second.sediment.sound_speed, 1500.0);
  EXPECT_EQ(envs[0].second.sediment.attenuation, 0.2);
  for (const auto& [c, env] : envs) {
    EXPECT_EQ(env.ssp, envs[0].second.ssp);
    EXPECT_EQ(env.sediment_thickness, 5.0);
  }
}

TEST(Catalog, BackscatterTableGolden) {
  for (int c = 0; c < 4; ++c) {
    for (int s = 0; s <= 4; ++s) {
      const auto env = backscatter_environment({s}, class_from_code(c));
      EXPECT_EQ(env.c_top, kBack[c][s].c_top) << c << "," << s;
      EXPECT_EQ(env.c_bottom, kBack[c][s].c_bottom) << c << "," << s;
      EXPECT_EQ(env.rho_top, kBack[c][s].rho_top) << c << "," << s;
      EXPECT_EQ(env.rho_bottom, kBack[c][s].rho_bottom) << c << "," << s;
      EXPECT_DOUBLE_EQ(env.rms_height, s == 0 ? 0.005 : 0.0046);
      EXPECT_DOUBLE_EQ(env.corr_length, s == 0 ? 0.02 : 0.015);
      const std::vector<double> tau =
          s == 3 ? std::vector<double>{0.253, 0.504, 0.725, 1.004} : std::vector<double>{0.25, 0.5, 0.75, 1.0};
      EXPECT_EQ(env.thickness_choices, tau);
    }
  }
  EXPECT_THROW(backscatter_environment({5}, SedimentClass::kClay), CatalogError);
}

TEST(Catalog, CorrectedGravelDensityIsOptIn) {
  const auto verbatim = backscatter_environment({2}, SedimentClass::kGravel);
  const auto fixed = backscatter_environment({2}, SedimentClass::kGravel, {true});
  EXPECT_EQ(verbatim.rho_top, 1802.07);
  EXPECT_NEAR(fixed.rho_top, 2000.0 * 1802.07 / 1800.0, 1e-9);
  // Other classes are untouched by the flag.
  EXPECT_EQ(backscatter_environment({2}, SedimentClass::kSand, {true}).rho_top, 1898.89);
}

TEST(Catalog, AttenuationConversion) {
  EXPECT_EQ(attenuation_to_nepers(0.0, AttenuationUnit::kDbPerWavelength, 400, 1500), 0.0);
  EXPECT_NEAR(attenuation_to_nepers(0.2, AttenuationUnit::kDbPerWavelength, 400, 1500),
              0.2 / (8.6858896 * 3.75), 1e-9);
  EXPECT_NEAR(attenuation_to_nepers(0.5, AttenuationUnit::kDbPerMeterPerKhz, 15000, 1500), 0.8635, 1e-4);
  // Linearity in value and, for dB/m/kHz, in frequency.
  const double a = attenuation_to_nepers(0.3, AttenuationUnit::kDbPerMeterPerKhz, 7000, 1500);
  EXPECT_NEAR(attenuation_to_nepers(0.6, AttenuationUnit::kDbPerMeterPerKhz, 7000, 1500), 2 * a, 1e-15);
  EXPECT_NEAR(attenuation_to_nepers(0.3, AttenuationUnit::kDbPerMeterPerKhz, 21000, 1500), 3 * a, 1e-14);
  EXPECT_THROW(attenuation_to_nepers(-1, AttenuationUnit::kDbPerWavelength, 400, 1500), ParameterError);
}

TEST(Catalog, TemplateKeepsBottomLayerInsideDomain) {
  const auto env = backscatter_environment({3}, SedimentClass::kSand);
  for (double tau : env.thickness_choices) {
    const auto t = env.make_template(tau, 7);
    EXPECT_NO_THROW(t.validate());
    EXPECT_LT(tau, t.height / 2);
    EXPECT_EQ(t.roughness.seed, 7u);
  }
  HighFreqTemplate bad;
  bad.incident_angle = 0.0;
  EXPECT_THROW(bad.validate(), ParameterError);
}

TEST(Catalog, CsvDumpHasOneRowPerParameter) {
  std::ostringstream os;
  dump_catalog_csv(os);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "pipeline,set,class,parameter,value");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  // lowfreq: 11 sets x 4 classes x 4 parameters; backscatter: 5 x 4 x (6 + 4 thicknesses).
  EXPECT_EQ(rows, 11 * 4 * 4 + 5 * 4 * 10);
}

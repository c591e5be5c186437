#include "seabed/catalog.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <iomanip>

#include "seabed/error.hpp"

namespace seabed {
namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return out;
}

// Low-frequency table: rows are classes, column 0 is training, 1..10 tests.
constexpr double kLowFreqSpeed[4][11] = {
    {1500, 1517, 1521, 1517, 1546, 1517, 1529, 1526, 1518, 1527, 1518},
    {1575, 1577, 1592, 1582, 1574, 1591, 1586, 1596, 1581, 1584, 1580},
    {1650, 1658, 1632, 1663, 1647, 1652, 1644, 1642, 1672, 1648, 1655},
    {1800, 1794, 1795, 1799, 1796, 1792, 1802, 1809, 1791, 1801, 1784},
};
constexpr double kLowFreqAttenuation[4][11] = {
    {0.2, 0.271, 0.077, 0.296, 0.175, 0.224, 0.160, 0.066, 0.256, 0.215, 0.166},
    {1.0, 1.050, 1.064, 0.954, 0.892, 0.982, 1.039, 1.188, 1.046, 0.922, 1.189},
    {0.8, 1.042, 0.843, 0.914, 0.708, 0.839, 0.681, 0.970, 0.881, 0.595, 0.797},
    {0.6, 0.495, 0.683, 0.547, 0.458, 0.666, 0.616, 0.740, 0.651, 0.680, 0.775},
};
// Low-frequency sediment densities reuse the backscatter top-layer values.
constexpr double kSedimentDensity[4] = {1500, 1700, 1900, 2000};

// Backscatter table, columns training and tests 1..4.
constexpr double kRmsHeightCm[5] = {0.5, 0.46, 0.46, 0.46, 0.46};
constexpr double kCorrLengthCm[5] = {2.0, 1.5, 1.5, 1.5, 1.5};
constexpr double kTopSpeed[4][5] = {
    {1500, 1500, 1501.57, 1500, 1501.57},
    {1575, 1575, 1577.03, 1575, 1577.03},
    {1650, 1650, 1648.13, 1650, 1648.13},
    {1800, 1800, 1802.07, 1800, 1802.07},
};
constexpr double kBottomSpeed[4][5] = {
    {5250, 5250, 5250, 5250, 5254.58},
    {5250, 5250, 5250, 5250, 5254.65},
    {5250, 5250, 5250, 5250, 5246.58},
    {5250, 5250, 5250, 5250, 5254.71},
};
constexpr double kTopDensity[4][5] = {
    {1500, 1500, 1500.66, 1500, 1500.66},
    {1700, 1700, 1697.99, 1700, 1697.99},
    {1900, 1900, 1898.89, 1900, 1898.89},
    {2000, 2000, 1802.07, 2000, 1802.07},
};
constexpr double kBottomDensity[4][5] = {
    {2700, 2700, 2700, 2700, 2704.57},
    {2700, 2700, 2700, 2700, 2699.85},
    {2700, 2700, 2700, 2700, 2703.00},
    {2700, 2700, 2700, 2700, 2696.42},
};
constexpr double kTrainingThickness[4] = {0.25, 0.5, 0.75, 1.0};
constexpr double kTest3Thickness[4] = {0.253, 0.504, 0.725, 1.004};

void check_set(Pipeline p, EnvironmentSet set) {
  if (set.id < 0 || set.id > num_test_sets(p)) {
    throw CatalogError("unknown " + std::string(to_string(p)) + " environment set id " +
                       std::to_string(set.id));
  }
}

void row(std::ostream& os, std::string_view pipeline, EnvironmentSet set, SedimentClass c,
         std::string_view parameter, double value) {
  os << pipeline << ',' << set.name() << ',' << to_string(c) << ',' << parameter << ','
     << std::setprecision(10) << value << '\n';
}

}  // namespace

std::string_view to_string(SedimentClass c) {
  switch (c) {
    case SedimentClass::kClay: return "Clay";
    case SedimentClass::kSilt: return "Silt";
    case SedimentClass::kSand: return "Sand";
    case SedimentClass::kGravel: return "Gravel";
  }
  return "?";
}

SedimentClass parse_sediment_class(std::string_view name) {
  const std::string n = lower(name);
  for (SedimentClass c : kAllClasses) {
    if (lower(to_string(c)) == n) return c;
  }
  throw CatalogError("unknown sediment class '" + std::string(name) + "'");
}

SedimentClass class_from_code(int value) {
  if (value < 0 || value >= kNumClasses) {
    throw CatalogError("sediment class code out of range: " + std::to_string(value));
  }
  return static_cast<SedimentClass>(value);
}

std::string_view to_string(Pipeline p) {
  return p == Pipeline::kLowFreq ? "lowfreq" : "backscatter";
}

Pipeline parse_pipeline(std::string_view name) {
  const std::string n = lower(name);
  if (n == "lowfreq") return Pipeline::kLowFreq;
  if (n == "backscatter") return Pipeline::kBackscatter;
  throw CatalogError("unknown pipeline '" + std::string(name) + "'");
}

EnvironmentSet parse_environment_set(std::string_view text) {
  std::string t = lower(text);
  if (t == "training" || t == "train" || t == "nominal") return EnvironmentSet::training();
  if (t.starts_with("test")) t = t.substr(4);
  int id = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), id);
  if (ec != std::errc() || ptr != t.data() + t.size() || id < 1) {
    throw CatalogError("cannot parse environment set '" + std::string(text) + "'");
  }
  return EnvironmentSet::test(id);
}

int num_test_sets(Pipeline p) { return p == Pipeline::kLowFreq ? 10 : 4; }

double attenuation_to_nepers(double value, AttenuationUnit unit, double frequency_hz,
                             double sound_speed) {
  if (!(frequency_hz > 0.0) || !(sound_speed > 0.0) || !(value >= 0.0)) {
    throw ParameterError("attenuation_to_nepers: need frequency > 0, sound speed > 0, value >= 0");
  }
  switch (unit) {
    case AttenuationUnit::kDbPerWavelength: {
      const double wavelength = sound_speed / frequency_hz;
      return value / (kDbPerNeper * wavelength);
    }
    case AttenuationUnit::kDbPerMeterPerKhz:
      return value * (frequency_hz / 1000.0) / kDbPerNeper;
  }
  return 0.0;
}

double LowFreqEnvironment::water_sound_speed(double depth) const {
  if (ssp.empty()) return 0.0;
  if (depth <= ssp.front().depth) return ssp.front().speed;
  for (std::size_t i = 1; i < ssp.size(); ++i) {
    if (depth <= ssp[i].depth) {
      const double t = (depth - ssp[i - 1].depth) / (ssp[i].depth - ssp[i - 1].depth);
      return ssp[i - 1].speed + t * (ssp[i].speed - ssp[i - 1].speed);
    }
  }
  return ssp.back().speed;
}

std::vector<double> LowFreqEnvironment::phone_depths() const {
  std::vector<double> z(static_cast<std::size_t>(n_phones));
  for (int i = 0; i < n_phones; ++i) z[i] = first_phone_depth + i * phone_spacing;
  return z;
}

void LowFreqEnvironment::validate() const {
  auto fail = [](const std::string& what) { throw ParameterError("LowFreqEnvironment: " + what); };
  if (!(water_depth > 0)) fail("water depth must be positive");
  if (ssp.size() < 2) fail("sound speed profile needs at least two samples");
  for (std::size_t i = 1; i < ssp.size(); ++i) {
    if (!(ssp[i].depth > ssp[i - 1].depth)) fail("ssp depths must be strictly increasing");
  }
  if (std::abs(ssp.front().depth) > 1e-9 || std::abs(ssp.back().depth - water_depth) > 1e-9) {
    fail("ssp must span [0, water_depth]");
  }
  for (const auto& p : ssp) {
    if (!(p.speed > 0)) fail("sound speeds must be positive");
  }
  for (const FluidLayer* layer : {&sediment, &halfspace}) {
    if (!(layer->sound_speed > 0)) fail("sound speeds must be positive");
    if (!(layer->attenuation >= 0)) fail("attenuation must be non-negative");
    if (!(layer->density > 0)) fail("densities must be positive");
  }
  if (!(water_density > 0)) fail("densities must be positive");
  if (!(sediment_thickness > 0)) fail("sediment thickness must be positive");
  if (!(frequency > 0)) fail("frequency must be positive");
  if (!(source_range > 0)) fail("source range must be positive");
  if (!(source_depth > 0 && source_depth < water_depth)) fail("source must be in the water column");
  if (n_phones < 1) fail("array needs at least one phone");
  for (double z : phone_depths()) {
    if (!(z > 0 && z < water_depth)) fail("array depths must lie inside the water column");
  }
}

double HighFreqTemplate::water_wavenumber() const {
  return 2.0 * std::numbers::pi * frequency / c_water;
}

void HighFreqTemplate::validate() const {
  auto fail = [](const std::string& what) { throw ParameterError("HighFreqTemplate: " + what); };
  if (!(width > 0 && height > 0 && water_height > 0)) fail("domain extents must be positive");
  if (!(frequency > 0)) fail("frequency must be positive");
  if (!(incident_angle > 0 && incident_angle < std::numbers::pi / 2)) {
    fail("incident angle must lie in (0, pi/2)");
  }
  if (!(c_water > 0 && c_top > 0 && c_bottom > 0)) fail("sound speeds must be positive");
  if (!(rho_water > 0 && rho_top > 0 && rho_bottom > 0)) fail("densities must be positive");
  if (!(thickness > 0 && thickness < height / 2)) fail("thickness must lie in (0, height/2)");
  if (!(attenuation_db_per_m_per_khz >= 0)) fail("attenuation must be non-negative");
  if (!(roughness.rms_height >= 0)) fail("rms height must be non-negative");
  if (!(roughness.corr_length > 0)) fail("correlation length must be positive");
}

HighFreqTemplate BackscatterEnvironment::make_template(double thickness,
                                                       std::uint64_t surface_seed) const {
  HighFreqTemplate t;
  t.c_top = c_top;
  t.c_bottom = c_bottom;
  t.rho_top = rho_top;
  t.rho_bottom = rho_bottom;
  t.thickness = thickness;
  t.roughness = {rms_height, corr_length, surface_seed};
  // The thickest layers (1 m and above) would reach the bottom of a 2 m
  // template; keep a quarter metre of bottom sediment inside the domain.
  t.height = std::max(t.height, 2.0 * (thickness + 0.25));
  return t;
}

LowFreqEnvironment lowfreq_environment(EnvironmentSet set, SedimentClass c) {
  check_set(Pipeline::kLowFreq, set);
  const int i = code(c);
  LowFreqEnvironment env;
  env.sediment = {kLowFreqSpeed[i][set.id], kLowFreqAttenuation[i][set.id], kSedimentDensity[i]};
  return env;
}

BackscatterEnvironment backscatter_environment(EnvironmentSet set, SedimentClass c,
                                               CatalogOptions options) {
  check_set(Pipeline::kBackscatter, set);
  const int i = code(c);
  const int j = set.id;
  BackscatterEnvironment env;
  env.c_top = kTopSpeed[i][j];
  env.c_bottom = kBottomSpeed[i][j];
  env.rho_top = kTopDensity[i][j];
  env.rho_bottom = kBottomDensity[i][j];
  if (options.corrected_gravel_density && c == SedimentClass::kGravel && (j == 2 || j == 4)) {
    env.rho_top = kTopDensity[i][0] * kTopSpeed[i][j] / kTopSpeed[i][0];
  }
  env.rms_height = kRmsHeightCm[j] / 100.0;
  env.corr_length = kCorrLengthCm[j] / 100.0;
  const double* tau = (j == 3) ? kTest3Thickness : kTrainingThickness;
  env.thickness_choices.assign(tau, tau + 4);
  return env;
}

std::vector<std::pair<SedimentClass, LowFreqEnvironment>> nominal_lowfreq_environments() {
  std::vector<std::pair<SedimentClass, LowFreqEnvironment>> out;
  for (SedimentClass c : kAllClasses) {
    out.emplace_back(c, lowfreq_environment(EnvironmentSet::training(), c));
  }
  return out;
}

std::vector<std::pair<SedimentClass, BackscatterEnvironment>> nominal_backscatter_environments(
    CatalogOptions options) {
  std::vector<std::pair<SedimentClass, BackscatterEnvironment>> out;
  for (SedimentClass c : kAllClasses) {
    out.emplace_back(c, backscatter_environment(EnvironmentSet::training(), c, options));
  }
  return out;
}

void dump_catalog_csv(std::ostream& os, CatalogOptions options) {
  os << "pipeline,set,class,parameter,value\n";
  for (int s = 0; s <= num_test_sets(Pipeline::kLowFreq); ++s) {
    const EnvironmentSet set{s};
    for (SedimentClass c : kAllClasses) {
      const LowFreqEnvironment env = lowfreq_environment(set, c);
      row(os, "lowfreq", set, c, "c", env.sediment.sound_speed);
      row(os, "lowfreq", set, c, "alpha_db_per_wavelength", env.sediment.attenuation);
      row(os, "lowfreq", set, c, "rho", env.sediment.density);
      row(os, "lowfreq", set, c, "tau", env.sediment_thickness);
    }
  }
  for (int s = 0; s <= num_test_sets(Pipeline::kBackscatter); ++s) {
    const EnvironmentSet set{s};
    for (SedimentClass c : kAllClasses) {
      const BackscatterEnvironment env = backscatter_environment(set, c, options);
      row(os, "backscatter", set, c, "rms_height", env.rms_height);
      row(os, "backscatter", set, c, "corr_length", env.corr_length);
      row(os, "backscatter", set, c, "c_top", env.c_top);
      row(os, "backscatter", set, c, "c_bottom", env.c_bottom);
      row(os, "backscatter", set, c, "rho_top", env.rho_top);
      row(os, "backscatter", set, c, "rho_bottom", env.rho_bottom);
      for (std::size_t k = 0; k < env.thickness_choices.size(); ++k) {
        row(os, "backscatter", set, c, "tau_" + std::to_string(k), env.thickness_choices[k]);
      }
    }
  }
}

}  // namespace seabed

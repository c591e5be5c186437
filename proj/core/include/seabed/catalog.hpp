#pragma once

#include <array>
#include <cstdint>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace seabed {

// Sediment classes in code order. The integer values are the label codes
// stored in datasets and models.
enum class SedimentClass : std::uint8_t { kClay = 0, kSilt = 1, kSand = 2, kGravel = 3 };

inline constexpr int kNumClasses = 4;
inline constexpr std::array<SedimentClass, kNumClasses> kAllClasses = {
    SedimentClass::kClay, SedimentClass::kSilt, SedimentClass::kSand, SedimentClass::kGravel};

std::string_view to_string(SedimentClass c);
// Case-insensitive; throws CatalogError on unknown names.
SedimentClass parse_sediment_class(std::string_view name);
SedimentClass class_from_code(int code);
inline int code(SedimentClass c) { return static_cast<int>(c); }

enum class Pipeline { kLowFreq, kBackscatter };
std::string_view to_string(Pipeline p);
Pipeline parse_pipeline(std::string_view name);

// Environment set selector: the training column (0) or a numbered test column.
struct EnvironmentSet {
  int id = 0;
  bool is_training() const { return id == 0; }
  static EnvironmentSet training() { return {0}; }
  static EnvironmentSet test(int i) { return {i}; }
  std::string name() const { return id == 0 ? "training" : "test" + std::to_string(id); }
  friend bool operator==(EnvironmentSet, EnvironmentSet) = default;
};

EnvironmentSet parse_environment_set(std::string_view text);
int num_test_sets(Pipeline p);

// ---------------------------------------------------------------------------
// Attenuation units

enum class AttenuationUnit { kDbPerWavelength, kDbPerMeterPerKhz };

// dB -> nepers factor, 20 / ln(10).
inline constexpr double kDbPerNeper = 8.6858896380650365;

// Converts an attenuation into an amplitude absorption coefficient in
// nepers per metre.
double attenuation_to_nepers(double value, AttenuationUnit unit, double frequency_hz,
                             double sound_speed);

// ---------------------------------------------------------------------------
// Low-frequency waveguide

struct SspPoint {
  double depth;  // m
  double speed;  // m/s

  friend bool operator==(const SspPoint&, const SspPoint&) = default;
};

struct FluidLayer {
  double sound_speed = 0.0;   // m/s
  double attenuation = 0.0;   // dB per wavelength
  double density = 0.0;       // kg/m^3

  friend bool operator==(const FluidLayer&, const FluidLayer&) = default;
};

struct LowFreqEnvironment {
  double water_depth = 111.0;
  double water_density = 1000.0;
  std::vector<SspPoint> ssp = {{0.0, 1520.0}, {111.0, 1480.0}};
  FluidLayer sediment;
  double sediment_thickness = 5.0;
  FluidLayer halfspace = {2400.0, 0.2, 2000.0};
  double source_depth = 50.0;
  double source_range = 10000.0;
  double frequency = 400.0;
  int n_phones = 20;
  double first_phone_depth = 5.0;
  double phone_spacing = 5.0;

  // Linear interpolation in the sound speed profile (clamped at the ends).
  double water_sound_speed(double depth) const;
  std::vector<double> phone_depths() const;
  // Throws ParameterError naming the violated invariant.
  void validate() const;
};

// ---------------------------------------------------------------------------
// High-frequency backscatter templates

struct RoughnessSpec {
  double rms_height = 0.0;   // m
  double corr_length = 0.02; // m
  std::uint64_t seed = 0;
};

struct HighFreqTemplate {
  double width = 2.0;        // m
  double height = 2.0;       // m; the sediment occupies [-height/2, 0]
  double water_height = 1.4; // m of water kept above the mean interface
  double frequency = 15000.0;
  double incident_angle = std::numbers::pi / 12.0;
  double c_water = 1500.0;
  double rho_water = 1000.0;
  double c_top = 1650.0;
  double rho_top = 1900.0;
  double thickness = 0.5;
  double c_bottom = 5250.0;
  double rho_bottom = 2700.0;
  double attenuation_db_per_m_per_khz = 0.5;  // both sediment layers
  RoughnessSpec roughness;

  double water_wavenumber() const;
  void validate() const;
};

// One class's entry of a backscatter environment column. The thickness is
// drawn per sample from `thickness_choices`.
struct BackscatterEnvironment {
  double c_top = 0.0;
  double c_bottom = 0.0;
  double rho_top = 0.0;
  double rho_bottom = 0.0;
  double rms_height = 0.0;   // m
  double corr_length = 0.0;  // m
  std::vector<double> thickness_choices;  // m

  HighFreqTemplate make_template(double thickness, std::uint64_t surface_seed) const;
};

struct CatalogOptions {
  // The stock gravel top-layer density of backscatter tests 2 and 4 is
  // 1802.07, the same number as the gravel sound speed. When set, the value is
  // replaced with 2000 scaled by the gravel sound-speed perturbation.
  bool corrected_gravel_density = false;
};

std::vector<std::pair<SedimentClass, LowFreqEnvironment>> nominal_lowfreq_environments();
std::vector<std::pair<SedimentClass, BackscatterEnvironment>> nominal_backscatter_environments(
    CatalogOptions options = {});

// Throws CatalogError for unknown ids.
LowFreqEnvironment lowfreq_environment(EnvironmentSet set, SedimentClass c);
BackscatterEnvironment backscatter_environment(EnvironmentSet set, SedimentClass c,
                                               CatalogOptions options = {});

// One CSV row per (pipeline, set, class, parameter).
void dump_catalog_csv(std::ostream& os, CatalogOptions options = {});

// The four nominal top-layer sound speeds used for labelling.
inline constexpr std::array<double, kNumClasses> kClassSoundSpeeds = {1500.0, 1575.0, 1650.0,
                                                                      1800.0};

}  // namespace seabed

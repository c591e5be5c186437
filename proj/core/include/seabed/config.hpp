#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "seabed/catalog.hpp"
#include "seabed/train_options.hpp"

namespace seabed {

// ---------------------------------------------------------------------------
// Line-oriented `key = value` files with `[section]` headers. `#` and `;`
// start comments. Every entry remembers its line for diagnostics.

struct IniEntry {
  std::string key;
  std::string value;
  int line = 0;
};

struct IniSection {
  std::string name;
  int line = 0;
  std::vector<IniEntry> entries;

  const IniEntry* find(std::string_view key) const;
};

struct IniDocument {
  std::vector<IniSection> sections;

  const IniSection* find(std::string_view name) const;
};

// Throws ConfigError with the offending line.
IniDocument parse_ini(std::istream& is);

// ---------------------------------------------------------------------------

// A signal-to-noise ratio in dB; nullopt means "no noise".
using Snr = std::optional<double>;

std::string format_snr(const Snr& snr);

struct ClassifierSpec {
  std::string variant;
  // Hyperparameter name -> candidate values.
  std::map<std::string, std::vector<double>> grid;

  friend bool operator==(const ClassifierSpec&, const ClassifierSpec&) = default;
};

struct LowFreqSettings {
  double halfspace_extension = 150.0;  // m below the sediment
  double points_per_wavelength = 20.0;
  std::vector<SspPoint> ssp = {{0.0, 1520.0}, {111.0, 1480.0}};
  FluidLayer halfspace = {2400.0, 0.2, 2000.0};

  friend bool operator==(const LowFreqSettings&, const LowFreqSettings&) = default;
};

struct BackscatterSettings {
  int n_points = 128;
  double z0 = 1.0;                   // observation height above the mean interface
  double radius_wavelengths = 2.5;   // observation circle radius
  double nodes_per_wavelength = 8.0;
  double pml_wavelengths = 1.5;
  int surface_points = 1024;
  bool corrected_gravel_density = false;
  int max_redraws = 3;

  friend bool operator==(const BackscatterSettings&, const BackscatterSettings&) = default;
};

struct ExperimentConfig {
  Pipeline pipeline = Pipeline::kLowFreq;
  EnvironmentSet train_set = EnvironmentSet::training();
  std::vector<EnvironmentSet> test_sets;
  int train_samples_per_class = 10;
  int test_samples_per_class = 10;
  Snr train_snr_db;
  std::vector<Snr> test_snr_db;
  int noise_realizations = 4;
  std::uint64_t master_seed = 1;
  std::vector<ClassifierSpec> classifiers;
  int search_budget = 1;
  int cv_folds = 5;
  double validation_fraction = 0.2;
  int workers = 1;
  std::string output_dir = "out";
  TrainOptions train;
  LowFreqSettings lowfreq;
  BackscatterSettings backscatter;

  // Throws ConfigError for semantic violations.
  void validate() const;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

// Parses and validates. Throws ConfigError (syntax or semantics) and never
// returns a partially populated object.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(std::istream& is);
// Writes a config that parses back to an equal object.
void write_config(std::ostream& os, const ExperimentConfig& config);

// ---------------------------------------------------------------------------
// Scattering template files (same format) for `scatter solve`.

struct SolverSettings {
  double nodes_per_wavelength = 8.0;
  double pml_wavelengths = 1.5;
  int surface_points = 1024;
};

struct TemplateFile {
  HighFreqTemplate scene;
  SolverSettings solver;
};

// [template] either lists the scene directly (c_top, rho_top, ...) or names a
// catalog entry via `set`, `class` and `thickness`; explicit keys override.
TemplateFile load_template(const std::filesystem::path& path);
TemplateFile parse_template(std::istream& is);

}  // namespace seabed

#pragma once

#include <complex>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "seabed/catalog.hpp"
#include "seabed/config.hpp"

namespace seabed {

enum class FeatureKind : std::uint8_t {
  kComplex20 = 0,  // array pressure fields, stored as interleaved re/im
  kReal = 1,       // backscatter magnitudes
};

std::string_view to_string(FeatureKind k);

struct NoiseSpec {
  Snr snr_db;  // nullopt: no noise
  FeatureKind kind = FeatureKind::kReal;
  std::uint64_t seed = 0;
};

// signal + nu with E|nu|^2 = |signal|^2 / 10^(snr/10): i.i.d. circular
// complex or real Gaussian entries. Throws ParameterError for a zero signal
// with a finite SNR or a kind mismatch.
std::vector<std::complex<double>> add_noise(const std::vector<std::complex<double>>& signal,
                                            const NoiseSpec& spec);
std::vector<double> add_noise(const std::vector<double>& signal, const NoiseSpec& spec);

// Nearest nominal top-layer sound speed; ties go to the slower class.
SedimentClass label_by_soundspeed(double c_top);

struct SampleProvenance {
  EnvironmentSet set;
  std::uint64_t seed = 0;  // per-sample generator seed
  Snr snr_db;
  double c_top = 0.0;
  double thickness = 0.0;
};

struct LabeledDataset {
  FeatureKind kind = FeatureKind::kReal;
  Pipeline pipeline = Pipeline::kBackscatter;
  Eigen::MatrixXd features;  // samples x stored dims (40 for complex20)
  std::vector<std::uint8_t> labels;
  std::vector<SampleProvenance> provenance;

  std::size_t size() const { return labels.size(); }
  // Complex entries of one complex20 row.
  std::vector<std::complex<double>> complex_row(std::size_t i) const;
  // Learner encoding: complex20 rows scaled to unit norm, then all real
  // parts followed by all imaginary parts; real rows unchanged.
  Eigen::MatrixXd learner_features() const;
  std::vector<int> class_counts() const;
  // Throws ParameterError naming the first violated invariant.
  void validate() const;
  // Rows in `indices`, in that order.
  LabeledDataset subset(const std::vector<std::size_t>& indices) const;
  // Appends `other` (same kind and dims).
  void append(const LabeledDataset& other);
};

// Clean low-frequency array fields for the four classes of one set.
struct LowFreqFields {
  std::vector<std::pair<SedimentClass, std::vector<std::complex<double>>>> fields;
  std::vector<LowFreqEnvironment> environments;
};
LowFreqFields lowfreq_fields(EnvironmentSet set, const LowFreqSettings& settings);

// count_per_class noisy copies of each class's field, class-major. The
// per-sample seed is derive_seed(master, pipeline, set, class, index).
LabeledDataset generate_lowfreq_dataset(EnvironmentSet set, int count_per_class, Snr snr_db,
                                        std::uint64_t master_seed,
                                        const LowFreqSettings& settings = {});

// Noise-free backscatter sample of one class: fresh surface, thickness drawn
// from the set's list, scattering solve, NMLA readout.
struct BackscatterSample {
  std::vector<double> signal;
  double c_top = 0.0;
  double thickness = 0.0;
  std::uint64_t surface_seed = 0;
  int redraws = 0;
};
BackscatterSample backscatter_sample(EnvironmentSet set, SedimentClass c, std::uint64_t seed,
                                     const BackscatterSettings& settings);

LabeledDataset generate_backscatter_dataset(EnvironmentSet set, int count_per_class, Snr snr_db,
                                            std::uint64_t master_seed,
                                            const BackscatterSettings& settings = {},
                                            int workers = 1);

// Fresh noise on every row of `clean` at `snr_db`; row i uses
// derive_seed(provenance seed, realization, ...). nullopt returns a copy.
LabeledDataset with_noise(const LabeledDataset& clean, Snr snr_db, std::uint64_t realization);

// Stratified split; fraction goes to the holdout. Throws ParameterError for a
// class with fewer than 2 samples.
std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& d, double fraction,
                                                std::uint64_t seed);

// Binary format: "SBDATA01", u64 version, u8 kind, u8 pipeline, u64 dims,
// u64 count, then per sample: u8 label, u64 set id, u64 seed, f64 snr (NaN
// when noise-free), f64 c_top, f64 thickness, dims f64 features; trailing
// u64 CRC-32 of everything before it. Little-endian.
void write_dataset(std::ostream& os, const LabeledDataset& d);
LabeledDataset read_dataset(std::istream& is, std::optional<FeatureKind> expected = std::nullopt);
void save_dataset(const std::filesystem::path& path, const LabeledDataset& d);
LabeledDataset load_dataset(const std::filesystem::path& path,
                            std::optional<FeatureKind> expected = std::nullopt);

// Header "label,set,seed,snr,c_top,thickness,f0,f1,...".
void write_dataset_csv(std::ostream& os, const LabeledDataset& d);

}  // namespace seabed

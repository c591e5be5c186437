#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "seabed/catalog.hpp"
#include "seabed/classifiers.hpp"
#include "seabed/config.hpp"

namespace seabed {

// Rows are true classes, columns predictions.
struct ConfusionMatrix {
  std::array<std::array<std::int64_t, 4>, 4> counts{};

  std::int64_t total() const;
  std::int64_t correct() const;
  double accuracy() const;  // trace / total; 0 when empty
  std::array<std::int64_t, 4> row_sums() const;
  // Row-normalized rates; empty rows stay zero.
  std::array<std::array<double, 4>, 4> rates() const;
  ConfusionMatrix& operator+=(const ConfusionMatrix& other);

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

// Throws ParameterError for a length mismatch or a label outside 0..3.
ConfusionMatrix confusion(const std::vector<std::uint8_t>& truth, const std::vector<SedimentClass>& predicted);

// One (test set, SNR) evaluation, pooled over the noise realizations.
struct EvaluationCell {
  std::string test_set;
  Snr snr_db;
  std::vector<double> realization_accuracy;
  ConfusionMatrix confusion;
  double accuracy = 0.0;
};

struct ClassifierResult {
  std::string variant;
  Hyper hyper;                      // chosen overrides (empty without a grid)
  std::optional<double> search_score;
  std::vector<double> loss_history;
  std::vector<double> validation_history;
  ConfusionMatrix validation;       // held-out split of the training data
  std::vector<EvaluationCell> cells;
  // Wall clock; hardware dependent and kept out of the report payload.
  double train_seconds = 0.0;
  bool from_cache = false;
};

// Mean accuracy over the test sets for one classifier at one SNR.
struct SweepRow {
  std::string variant;
  Snr snr_db;
  double accuracy = 0.0;
  std::int64_t evaluated = 0;
  // Accuracy dropped below the previous (lower) SNR by more than two
  // binomial standard errors.
  bool trend_violation = false;
};

struct Report {
  bool complete = true;
  std::string error;
  std::string config;  // experiment definition (execution settings omitted)
  Pipeline pipeline = Pipeline::kLowFreq;
  std::uint64_t master_seed = 0;
  std::string train_set;
  std::vector<std::string> test_sets;
  std::size_t train_samples = 0;
  std::size_t validation_samples = 0;
  std::vector<ClassifierResult> classifiers;
  std::vector<SweepRow> sweep;
};

struct RunOptions {
  // Dataset and model cache; nullopt disables caching.
  std::optional<std::filesystem::path> cache_dir;
  // Filled with whatever finished when a stage throws (complete = false).
  Report* partial = nullptr;
  std::function<void(std::string_view)> log;
};

// Cache directory from SEABED_CACHE_DIR, if set and non-empty.
std::optional<std::filesystem::path> default_cache_dir();

// Generates (or loads) the training data, trains every configured classifier
// on a stratified split, and evaluates each test set at each SNR over the
// configured noise realizations. Errors carry the failing stage in their
// message and keep their type.
Report run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

// run_experiment with the test SNRs replaced by `snr_list`.
Report snr_sweep(const ExperimentConfig& config, const std::vector<Snr>& snr_list, const RunOptions& options = {});

// Per (classifier, SNR) rows ordered by SNR, noise-free last.
std::vector<SweepRow> sweep_table(const std::vector<ClassifierResult>& classifiers);

// JSON payload without timing. Byte-identical for identical inputs.
std::string report_json(const Report& report);
// Accuracies are recomputed from the stored confusion matrices.
Report parse_report(std::string_view json);
Report load_report(const std::filesystem::path& path);

struct ReportFormats {
  bool json = true;
  bool csv = true;
  bool svg = true;
};

// Writes report.json, timing.json, confusion_<variant>.csv, sweep.csv,
// accuracy_vs_snr.svg and confusion_<variant>.svg as requested. Returns the
// paths written.
std::vector<std::filesystem::path> emit_report(const Report& report, const std::filesystem::path& dir,
                                               ReportFormats formats = {});

// Rows of a confusion CSV: (test set, SNR, matrix).
struct ConfusionRecord {
  std::string test_set;
  Snr snr_db;
  ConfusionMatrix matrix;
};
std::vector<ConfusionRecord> read_confusion_csv(const std::filesystem::path& path);

}  // namespace seabed

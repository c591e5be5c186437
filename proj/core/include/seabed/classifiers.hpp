#pragma once

#include <array>
#include <complex>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "seabed/catalog.hpp"
#include "seabed/dataset.hpp"
#include "seabed/error.hpp"
#include "seabed/train_options.hpp"

namespace seabed {

enum class Variant : std::uint8_t { kMfp, kNc, kKnn, kLr, kSvmLinear, kSvmRbf, kMlp, kCnn3 };

std::string_view to_string(Variant v);
// Throws ParameterError for an unknown name.
Variant parse_variant(std::string_view name);

// Hyperparameter name -> value. Integer-valued entries (k, epochs, hidden,
// layers) must hold whole numbers.
using Hyper = std::map<std::string, double>;

// Defaults for every hyperparameter a variant accepts:
//   knn: k=5; lr: lambda=1e-3, max_iter=2000; svm-linear: lambda=1e-3,
//   epochs=200; svm-rbf: lambda=1e-3, gamma=1/dims, epochs=20;
//   mlp: hidden=64, layers=1, learning_rate, weight_decay (from TrainOptions);
//   cnn3: learning_rate, weight_decay.
// Overrides are merged over the defaults; unknown names throw ParameterError.
Hyper resolve_hyper(Variant v, const Hyper& overrides, int dims, const TrainOptions& options);

// ---------------------------------------------------------------------------
// Matched-field processing

struct ReplicaBank {
  std::array<std::vector<std::complex<double>>, 4> replicas;  // unit norm, class order
  std::array<double, 4> c_top{};
  std::array<double, 4> alpha_top{};

  // Normalizes the clean fields of the four classes of one set.
  static ReplicaBank from_fields(const LowFreqFields& fields);
  void validate() const;
};

// |w(m)^H d| for each class.
std::array<double, 4> mfp_power(const std::vector<std::complex<double>>& field, const ReplicaBank& bank);
// argmax of mfp_power, ties to the lower class code. Zero field: ParameterError.
SedimentClass mfp_classify(const std::vector<std::complex<double>>& field, const ReplicaBank& bank);

// ---------------------------------------------------------------------------

namespace detail {
class ModelImpl;
}

// A trained classifier. Inputs are learner encodings
// (LabeledDataset::learner_features) with dims() columns.
class ClassifierModel {
 public:
  ClassifierModel(Variant v, FeatureKind kind, int dims, std::shared_ptr<const detail::ModelImpl> impl);

  static ClassifierModel from_replicas(const ReplicaBank& bank);

  Variant variant() const { return variant_; }
  FeatureKind kind() const { return kind_; }
  int dims() const { return dims_; }

  // samples x 4 class scores; absent classes score -inf. Prediction is the
  // row argmax with ties to the lower class code.
  Eigen::MatrixXd scores(const Eigen::MatrixXd& encoded) const;
  std::vector<SedimentClass> predict(const Eigen::MatrixXd& encoded) const;
  // Checks the feature kind, then encodes.
  std::vector<SedimentClass> predict(const LabeledDataset& d) const;
  // Class probabilities for lr, mlp and cnn3; ParameterError otherwise.
  Eigen::MatrixXd probabilities(const Eigen::MatrixXd& encoded) const;

  // "SBMODEL1", u64 version, variant name, u8 kind, u64 dims, payload.
  void write(std::ostream& os) const;
  static ClassifierModel read(std::istream& is);
  void save(const std::filesystem::path& path) const;
  static ClassifierModel load(const std::filesystem::path& path);

 private:
  Variant variant_;
  FeatureKind kind_;
  int dims_;
  std::shared_ptr<const detail::ModelImpl> impl_;

  void check_input(const Eigen::MatrixXd& encoded) const;
};

struct FitResult {
  ClassifierModel model;
  std::vector<double> loss_history;        // per epoch or iteration
  std::vector<double> validation_history;  // per epoch; empty without validation data
};

// Thrown when the training loss stops being finite.
class DivergenceError : public TrainingError {
 public:
  DivergenceError(const std::string& message, std::vector<double> history)
      : TrainingError(message), history_(std::move(history)) {}
  const std::vector<double>& history() const { return history_; }

 private:
  std::vector<double> history_;
};

// Rows are put in a canonical order first, so the result does not depend on
// the order of `train`. Stochastic learners shuffle with options.seed.
// `val` may be empty; mlp and cnn3 then early-stop on the training loss.
// mfp is not trainable here (see ClassifierModel::from_replicas).
FitResult fit(Variant v, const LabeledDataset& train, const LabeledDataset& val, const Hyper& hyper,
              const TrainOptions& options);

// Random search over the cartesian grid: `budget` distinct combinations drawn
// uniformly, each scored by stratified `folds`-fold cross-validation accuracy
// on `train`. Returns the best (ties to the first drawn). An empty grid
// returns an empty map.
struct SearchResult {
  Hyper best;
  double best_score = 0.0;
  std::vector<std::pair<Hyper, double>> evaluated;  // in draw order
};
SearchResult hyper_search(Variant v, const LabeledDataset& train,
                          const std::map<std::string, std::vector<double>>& grid, int budget, int folds,
                          const TrainOptions& options, std::uint64_t seed, int workers = 1);

// Stratified fold assignment: fold index per row.
std::vector<int> stratified_folds(const std::vector<std::uint8_t>& labels, int folds, std::uint64_t seed);

}  // namespace seabed

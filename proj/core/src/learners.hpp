#pragma once

// Internal model representations shared by the classifier sources.

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "binio.hpp"
#include "seabed/classifiers.hpp"

namespace seabed::detail {

class ModelImpl {
 public:
  virtual ~ModelImpl() = default;
  // x: samples x dims (learner encoding). Returns samples x 4.
  virtual Eigen::MatrixXd scores(const Eigen::MatrixXd& x) const = 0;
  virtual Eigen::MatrixXd probabilities(const Eigen::MatrixXd& x) const;
  virtual void write(std::ostream& os) const = 0;
};

// Affine feature map (x - mean) / scale, per feature or one scalar for all.
struct Standardizer {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd scale;

  static Standardizer per_feature(const Eigen::MatrixXd& x);
  static Standardizer global(const Eigen::MatrixXd& x);
  static Standardizer identity(Eigen::Index dims);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
  void write(std::ostream& os) const;
  static Standardizer read(std::istream& is, Eigen::Index dims);
};

// Training rows sorted by (features, label).
struct TrainingSet {
  Eigen::MatrixXd x;
  std::vector<int> y;
  std::array<bool, 4> present{};
};
TrainingSet canonical(const Eigen::MatrixXd& x, const std::vector<std::uint8_t>& labels);

void put_matrix(std::ostream& os, const Eigen::MatrixXd& m);
Eigen::MatrixXd get_matrix(std::istream& is);

// Linear and instance-based learners.
std::shared_ptr<const ModelImpl> fit_nc(const TrainingSet& t);
std::shared_ptr<const ModelImpl> fit_knn(const TrainingSet& t, int k);
std::shared_ptr<const ModelImpl> fit_lr(const TrainingSet& t, double lambda, int max_iter,
                                        std::vector<double>& history);
std::shared_ptr<const ModelImpl> fit_svm_linear(const TrainingSet& t, double lambda, int epochs,
                                                std::vector<double>& history);
std::shared_ptr<const ModelImpl> fit_svm_rbf(const TrainingSet& t, double lambda, double gamma, int epochs,
                                             std::uint64_t seed, std::vector<double>& history);

std::shared_ptr<const ModelImpl> read_nc(std::istream& is, Eigen::Index dims);
std::shared_ptr<const ModelImpl> read_knn(std::istream& is, Eigen::Index dims);
std::shared_ptr<const ModelImpl> read_lr(std::istream& is, Eigen::Index dims);
std::shared_ptr<const ModelImpl> read_svm_linear(std::istream& is, Eigen::Index dims);
std::shared_ptr<const ModelImpl> read_svm_rbf(std::istream& is, Eigen::Index dims);

}  // namespace seabed::detail

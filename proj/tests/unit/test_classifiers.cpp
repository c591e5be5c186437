#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "seabed/classifiers.hpp"
#include "seabed/dataset.hpp"
#include "seabed/error.hpp"

using namespace seabed;

namespace {

constexpr double kPi = 3.14159265358979323846;

LabeledDataset from_rows(const Eigen::MatrixXd& x, const std::vector<std::uint8_t>& labels) {
  LabeledDataset d;
  d.kind = FeatureKind::kReal;
  d.features = x;
  d.labels = labels;
  d.provenance.resize(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) d.provenance[i].seed = i;
  return d;
}

// Gaussian clouds around class patterns sin((c+1) pi j / dims).
LabeledDataset blobs(int per_class, int dims, double separation, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  Eigen::MatrixXd x(4 * per_class, dims);
  std::vector<std::uint8_t> y;
  for (int c = 0; c < 4; ++c) {
    for (int i = 0; i < per_class; ++i) {
      const int r = c * per_class + i;
      for (int j = 0; j < dims; ++j) x(r, j) = separation * std::sin((c + 1) * kPi * (j + 0.5) / dims) + n(rng);
      y.push_back(static_cast<std::uint8_t>(c));
    }
  }
  return from_rows(x, y);
}

double accuracy(const ClassifierModel& m, const LabeledDataset& d) {
  const auto p = m.predict(d);
  int ok = 0;
  for (std::size_t i = 0; i < p.size(); ++i) ok += static_cast<int>(p[i]) == d.labels[i];
  return static_cast<double>(ok) / static_cast<double>(p.size());
}

LabeledDataset permuted(const LabeledDataset& d, std::uint64_t seed) {
  std::vector<std::size_t> idx(d.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  return d.subset(idx);
}

TrainOptions quick_options() {
  TrainOptions o;
  o.minibatch = 16;
  o.max_epochs = 40;
  o.learning_rate = 3e-3;
  o.seed = 5;
  return o;
}

std::vector<std::complex<double>> random_field(std::uint64_t seed, int n = 20) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<std::complex<double>> f(n);
  for (auto& z : f) z = {g(rng), g(rng)};
  return f;
}

ReplicaBank random_bank() {
  LowFreqFields fields;
  for (int c = 0; c < 4; ++c) {
    fields.fields.emplace_back(static_cast<SedimentClass>(c), random_field(100 + c));
    LowFreqEnvironment env;
    env.sediment = {kClassSoundSpeeds[c], 0.1 * c, 1500.0};
    fields.environments.push_back(env);
  }
  return ReplicaBank::from_fields(fields);
}

const ReplicaBank& nominal_bank() {
  static const ReplicaBank bank = ReplicaBank::from_fields(lowfreq_fields(EnvironmentSet::training(), {}));
  return bank;
}

}  // namespace

// ---------------------------------------------------------------------------
// Matched-field processing

TEST(Mfp, ReplicaBankIsUnitNorm) {
  const ReplicaBank& bank = nominal_bank();
  for (const auto& w : bank.replicas) {
    double norm = 0;
    for (const auto& z : w) norm += std::norm(z);
    EXPECT_NEAR(std::sqrt(norm), 1.0, 1e-12);
  }
  EXPECT_EQ(bank.c_top[0], 1500.0);
  EXPECT_EQ(bank.c_top[3], 1800.0);
}

TEST(Mfp, CauchySchwarzEqualityCase) {
  const ReplicaBank bank = random_bank();
  std::vector<std::complex<double>> d = bank.replicas[1];
  const std::complex<double> scale(2.0, -1.5);
  for (auto& z : d) z *= scale;
  EXPECT_EQ(mfp_classify(d, bank), SedimentClass::kSilt);
  EXPECT_NEAR(mfp_power(d, bank)[1], std::abs(scale), 1e-12);
}

TEST(Mfp, OrthogonalFieldScoresZero) {
  const ReplicaBank bank = random_bank();
  auto d = random_field(7);
  std::complex<double> proj = 0;
  for (std::size_t k = 0; k < d.size(); ++k) proj += std::conj(bank.replicas[0][k]) * d[k];
  for (std::size_t k = 0; k < d.size(); ++k) d[k] -= proj * bank.replicas[0][k];
  EXPECT_NEAR(mfp_power(d, bank)[0], 0.0, 1e-12);
}

TEST(Mfp, NominalFieldsClassifyThemselves) {
  const ReplicaBank& bank = nominal_bank();
  const LowFreqFields fields = lowfreq_fields(EnvironmentSet::training(), {});
  for (const auto& [c, field] : fields.fields) EXPECT_EQ(mfp_classify(field, bank), c);
}

TEST(Mfp, DecisionIsScaleInvariant) {
  const ReplicaBank bank = random_bank();
  for (std::uint64_t s = 0; s < 20; ++s) {
    auto d = random_field(s);
    const SedimentClass base = mfp_classify(d, bank);
    for (double lambda : {1e-6, 0.3, 7.0, 1e8}) {
      auto scaled = d;
      for (auto& z : scaled) z *= lambda;
      EXPECT_EQ(mfp_classify(scaled, bank), base);
    }
  }
}

TEST(Mfp, ZeroFieldThrows) {
  EXPECT_THROW(mfp_classify(std::vector<std::complex<double>>(20), random_bank()), ParameterError);
}

TEST(Mfp, ModelMatchesDirectClassification) {
  const ReplicaBank bank = random_bank();
  const ClassifierModel model = ClassifierModel::from_replicas(bank);
  LabeledDataset d;
  d.kind = FeatureKind::kComplex20;
  d.features.resize(10, 40);
  for (int i = 0; i < 10; ++i) {
    const auto f = random_field(50 + i);
    for (int k = 0; k < 20; ++k) {
      d.features(i, 2 * k) = f[k].real();
      d.features(i, 2 * k + 1) = f[k].imag();
    }
    d.labels.push_back(0);
  }
  d.provenance.resize(10);
  const auto pred = model.predict(d);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(pred[i], mfp_classify(d.complex_row(i), bank));
  EXPECT_THROW(fit(Variant::kMfp, d, {}, {}, {}), ParameterError);
}

// ---------------------------------------------------------------------------
// Learners

TEST(Classifiers, VariantNamesRoundTrip) {
  for (Variant v : {Variant::kMfp, Variant::kNc, Variant::kKnn, Variant::kLr, Variant::kSvmLinear,
                    Variant::kSvmRbf, Variant::kMlp, Variant::kCnn3}) {
    EXPECT_EQ(parse_variant(to_string(v)), v);
  }
  EXPECT_THROW(parse_variant("forest"), ParameterError);
}

TEST(Classifiers, UnknownHyperparameterThrows) {
  const LabeledDataset d = blobs(5, 3, 3.0, 1);
  EXPECT_THROW(fit(Variant::kKnn, d, {}, {{"depth", 3}}, {}), ParameterError);
  EXPECT_THROW(fit(Variant::kKnn, d, {}, {{"k", 0}}, {}), ParameterError);
  EXPECT_THROW(fit(Variant::kKnn, d, {}, {{"k", 2.5}}, {}), ParameterError);
}

TEST(Classifiers, NearestCentroidStoresClassMeans) {
  LabeledDataset d = blobs(10, 3, 5.0, 2);
  d.labels.assign(d.labels.size(), 0);
  for (std::size_t i = 20; i < 40; ++i) d.labels[i] = 2;  // two clouds: classes 0 and 2
  const ClassifierModel m = fit(Variant::kNc, d, {}, {}, {}).model;
  for (int c : {0, 2}) {
    Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(3);
    int n = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (d.labels[i] == c) {
        mean += d.features.row(static_cast<Eigen::Index>(i));
        ++n;
      }
    }
    mean /= n;
    const Eigen::MatrixXd s = m.scores(mean);
    EXPECT_NEAR(s(0, c), 0.0, 1e-24);  // -|x - centroid|^2
  }
  const Eigen::MatrixXd s = m.scores(Eigen::RowVectorXd::Zero(3));
  EXPECT_TRUE(std::isinf(s(0, 1)) && s(0, 1) < 0);
}

TEST(Classifiers, NearestCentroidTieGoesToLowerClass) {
  Eigen::MatrixXd x(4, 1);
  x << -1, -1, 1, 1;
  const LabeledDataset d = from_rows(x, {3, 3, 1, 1});
  const ClassifierModel m = fit(Variant::kNc, d, {}, {}, {}).model;
  EXPECT_EQ(m.predict(Eigen::MatrixXd::Zero(1, 1))[0], SedimentClass::kSilt);
}

TEST(Classifiers, OneNearestNeighbourRecallsTrainingLabels) {
  const LabeledDataset d = blobs(8, 4, 0.5, 3);  // overlapping clouds
  const ClassifierModel m = fit(Variant::kKnn, d, {}, {{"k", 1}}, {}).model;
  EXPECT_EQ(accuracy(m, d), 1.0);
}

TEST(Classifiers, LogisticRegressionMatchesBruteForceOracle) {
  const std::vector<double> raw = {-2.0, -1.2, -0.5, 0.3, 0.9, 2.6};
  Eigen::MatrixXd x(6, 1);
  for (int i = 0; i < 6; ++i) x(i, 0) = raw[i];
  const LabeledDataset d = from_rows(x, {0, 0, 0, 1, 1, 1});
  const double lambda = 1e-2;
  const ClassifierModel m = fit(Variant::kLr, d, {}, {{"lambda", lambda}}, {}).model;

  // Binary logistic regression on standardized x; two softmax rows with
  // penalty lambda/2 (w0^2 + w1^2) reduce to w = w1 - w0 with penalty lambda/4 w^2.
  double mean = 0, var = 0;
  for (double v : raw) mean += v / 6;
  for (double v : raw) var += (v - mean) * (v - mean) / 6;
  const double sd = std::sqrt(var);
  auto objective = [&](double w, double b) {
    double f = 0;
    for (int i = 0; i < 6; ++i) {
      const double s = i < 3 ? -1.0 : 1.0;
      f += std::log1p(std::exp(-s * (w * (raw[i] - mean) / sd + b))) / 6;
    }
    return f + 0.25 * lambda * w * w;
  };
  double bw = 0, bb = 0, step = 1.0, best = objective(0, 0);
  double cw = 10, cb = 0;
  for (int level = 0; level < 12; ++level) {
    for (int i = -20; i <= 20; ++i) {
      for (int j = -20; j <= 20; ++j) {
        const double w = cw + i * step, b = cb + j * step;
        const double f = objective(w, b);
        if (f < best) {
          best = f;
          bw = w;
          bb = b;
        }
      }
    }
    cw = bw;
    cb = bb;
    step /= 8;
  }
  ASSERT_GT(bw, 0);
  const double boundary = mean - bb / bw * sd;
  for (double q : {-3.0, -0.4, -0.05, 0.05, 0.2, 1.5}) {
    Eigen::MatrixXd probe(1, 1);
    probe << q;
    const Eigen::MatrixXd p = m.probabilities(probe);
    const double oracle = 1.0 / (1.0 + std::exp(-(bw * (q - mean) / sd + bb)));
    EXPECT_NEAR(p(0, 1), oracle, 1e-4) << "x = " << q;
    EXPECT_EQ(m.predict(probe)[0] == SedimentClass::kSilt, q > boundary) << "x = " << q;
    EXPECT_EQ(p(0, 2), 0.0);
  }
}

TEST(Classifiers, LogisticRegressionIsAffineInFeatureSpace) {
  const LabeledDataset d = blobs(15, 5, 1.0, 4);
  const ClassifierModel m = fit(Variant::kLr, d, {}, {}, {}).model;
  const Eigen::RowVectorXd a = d.features.row(0), b = d.features.row(7);
  Eigen::MatrixXd pts(3, 5);
  pts << a, b, 0.3 * a + 0.7 * b;
  const Eigen::MatrixXd s = m.scores(pts);
  EXPECT_NEAR((s.row(2) - (0.3 * s.row(0) + 0.7 * s.row(1))).norm(), 0.0, 1e-9);
}

class LearnerAccuracy : public ::testing::TestWithParam<Variant> {};

TEST_P(LearnerAccuracy, SeparatesGaussianClouds) {
  const LabeledDataset train = blobs(30, 16, 1.2, 10);
  const LabeledDataset test = blobs(30, 16, 1.2, 11);
  const FitResult r = fit(GetParam(), train, {}, {}, quick_options());
  EXPECT_GE(accuracy(r.model, test), 0.9);
  if (GetParam() == Variant::kMlp || GetParam() == Variant::kCnn3 || GetParam() == Variant::kLr) {
    ASSERT_GE(r.loss_history.size(), 2u);
    EXPECT_LT(r.loss_history.back(), r.loss_history.front());
  }
}

TEST_P(LearnerAccuracy, FitIgnoresRowOrder) {
  const LabeledDataset train = blobs(6, 8, 1.0, 12);
  const LabeledDataset probe = blobs(3, 8, 1.0, 13);
  TrainOptions o = quick_options();
  o.max_epochs = 5;
  const ClassifierModel a = fit(GetParam(), train, {}, {}, o).model;
  const ClassifierModel b = fit(GetParam(), permuted(train, 99), {}, {}, o).model;
  EXPECT_EQ(a.scores(probe.features), b.scores(probe.features));
}

TEST_P(LearnerAccuracy, BatchPredictEqualsPerRow) {
  const LabeledDataset train = blobs(6, 8, 1.0, 14);
  const LabeledDataset probe = blobs(3, 8, 1.0, 15);
  TrainOptions o = quick_options();
  o.max_epochs = 5;
  const ClassifierModel m = fit(GetParam(), train, {}, {}, o).model;
  const auto batch = m.predict(probe.features);
  for (Eigen::Index i = 0; i < probe.features.rows(); ++i) {
    EXPECT_EQ(m.predict(Eigen::MatrixXd(probe.features.row(i)))[0], batch[static_cast<std::size_t>(i)]);
  }
  EXPECT_EQ(m.scores(probe.features), m.scores(probe.features));
}

TEST_P(LearnerAccuracy, ModelFileRoundTrip) {
  const LabeledDataset train = blobs(6, 8, 1.0, 16);
  const LabeledDataset probe = blobs(3, 8, 1.0, 17);
  TrainOptions o = quick_options();
  o.max_epochs = 5;
  const ClassifierModel m = fit(GetParam(), train, {}, {}, o).model;
  std::stringstream ss;
  m.write(ss);
  const ClassifierModel back = ClassifierModel::read(ss);
  EXPECT_EQ(back.variant(), GetParam());
  EXPECT_EQ(back.kind(), FeatureKind::kReal);
  EXPECT_EQ(back.dims(), 8);
  EXPECT_EQ(back.scores(probe.features), m.scores(probe.features));

  const std::string bytes = ss.str();
  std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW(ClassifierModel::read(truncated), FormatError);
}

INSTANTIATE_TEST_SUITE_P(AllLearners, LearnerAccuracy,
                         ::testing::Values(Variant::kNc, Variant::kKnn, Variant::kLr, Variant::kSvmLinear,
                                           Variant::kSvmRbf, Variant::kMlp, Variant::kCnn3),
                         [](const auto& info) {
                           std::string s(to_string(info.param));
                           for (char& c : s) {
                             if (c == '-') c = '_';
                           }
                           return s;
                         });

TEST(Classifiers, ModelFileRejectsBadMagic) {
  std::stringstream ss("NOTAMODEL-----------------");
  EXPECT_THROW(ClassifierModel::read(ss), FormatError);
}

TEST(Classifiers, PredictChecksFeatureContract) {
  const LabeledDataset d = blobs(5, 4, 3.0, 1);
  const ClassifierModel m = fit(Variant::kNc, d, {}, {}, {}).model;
  EXPECT_THROW(m.predict(Eigen::MatrixXd::Zero(2, 5)), ParameterError);
  LabeledDataset complex = d;
  complex.kind = FeatureKind::kComplex20;
  EXPECT_THROW(m.predict(complex), ParameterError);
}

TEST(Classifiers, ValidationSetMustMatchTraining) {
  const LabeledDataset d = blobs(5, 4, 3.0, 1);
  const LabeledDataset other = blobs(5, 6, 3.0, 1);
  EXPECT_THROW(fit(Variant::kMlp, d, other, {}, quick_options()), ParameterError);
  EXPECT_THROW(fit(Variant::kNc, LabeledDataset{}, {}, {}, {}), ParameterError);
}

TEST(Classifiers, EarlyStoppingUsesValidationLoss) {
  const LabeledDataset train = blobs(20, 8, 1.0, 20);
  const LabeledDataset val = blobs(10, 8, 1.0, 21);
  TrainOptions o = quick_options();
  o.max_epochs = 30;
  o.patience = 3;
  const FitResult r = fit(Variant::kMlp, train, val, {}, o);
  ASSERT_EQ(r.validation_history.size(), r.loss_history.size());
  EXPECT_LE(r.loss_history.size(), 30u);
}

TEST(Classifiers, DivergenceReportsHistory) {
  const LabeledDataset d = blobs(10, 4, 1.0, 22);
  TrainOptions o = quick_options();
  o.gradient_clip = 1e300;
  try {
    fit(Variant::kMlp, d, {}, {{"learning_rate", 1e200}}, o);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_FALSE(e.history().empty());
  }
}

TEST(Classifiers, CnnTrainsOnRealSignals) {
  const LabeledDataset train = blobs(20, 32, 1.0, 30);
  const LabeledDataset test = blobs(20, 32, 1.0, 31);
  const FitResult r = fit(Variant::kCnn3, train, test, {}, quick_options());
  EXPECT_GE(accuracy(r.model, test), 0.9);
  EXPECT_EQ(r.model.predict(test), r.model.predict(test));
}

// ---------------------------------------------------------------------------
// Hyperparameter search

TEST(HyperSearch, BudgetOneReturnsTheDrawnCombination) {
  const LabeledDataset d = blobs(10, 4, 2.0, 40);
  const SearchResult r = hyper_search(Variant::kKnn, d, {{"k", {1, 3, 5, 7}}}, 1, 5, {}, 8);
  ASSERT_EQ(r.evaluated.size(), 1u);
  EXPECT_EQ(r.best, r.evaluated[0].first);
}

TEST(HyperSearch, SingleEntryGrid) {
  const LabeledDataset d = blobs(10, 4, 2.0, 41);
  const SearchResult r = hyper_search(Variant::kLr, d, {{"lambda", {0.1}}}, 5, 5, {}, 8);
  ASSERT_EQ(r.evaluated.size(), 1u);
  EXPECT_EQ(r.best.at("lambda"), 0.1);
}

TEST(HyperSearch, DeterministicAndWorkerIndependent) {
  const LabeledDataset d = blobs(10, 4, 1.0, 42);
  const std::map<std::string, std::vector<double>> grid = {{"lambda", {1e-3, 1e-2, 1e-1}},
                                                           {"epochs", {50, 100}}};
  const SearchResult a = hyper_search(Variant::kSvmLinear, d, grid, 4, 5, {}, 3, 1);
  const SearchResult b = hyper_search(Variant::kSvmLinear, d, grid, 4, 5, {}, 3, 2);
  ASSERT_EQ(a.evaluated.size(), 4u);
  EXPECT_EQ(a.evaluated, b.evaluated);
  std::set<Hyper> distinct;
  for (const auto& [h, s] : a.evaluated) distinct.insert(h);
  EXPECT_EQ(distinct.size(), 4u);
}

TEST(HyperSearch, StratifiedFoldsBalanceClasses) {
  std::vector<std::uint8_t> labels;
  for (int c = 0; c < 4; ++c) labels.insert(labels.end(), 10, static_cast<std::uint8_t>(c));
  const auto fold = stratified_folds(labels, 5, 1);
  for (int c = 0; c < 4; ++c) {
    std::vector<int> per(5, 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == c) ++per[fold[i]];
    }
    for (int f = 0; f < 5; ++f) EXPECT_EQ(per[f], 2);
  }
}

TEST(HyperSearch, CrossValidationPrefersSmoothingUnderLabelNoise) {
  LabeledDataset d = blobs(40, 2, 3.0, 43);
  std::mt19937_64 rng(44);
  std::uniform_real_distribution<double> u;
  for (auto& l : d.labels) {
    if (u(rng) < 0.2) l = static_cast<std::uint8_t>((l + 1 + static_cast<int>(u(rng) * 3)) % 4);
  }
  const SearchResult r = hyper_search(Variant::kKnn, d, {{"k", {1, 3, 5}}}, 3, 5, {}, 9);
  ASSERT_EQ(r.evaluated.size(), 3u);

  // Brute-force CV with a direct k-NN on the same folds.
  const auto fold = stratified_folds(d.labels, 5, 9);
  auto cv = [&](int k) {
    int ok = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      std::vector<std::pair<double, std::size_t>> nb;
      for (std::size_t j = 0; j < d.size(); ++j) {
        if (fold[j] == fold[i]) continue;
        nb.emplace_back((d.features.row(static_cast<Eigen::Index>(i)) - d.features.row(static_cast<Eigen::Index>(j)))
                            .squaredNorm(),
                        j);
      }
      std::sort(nb.begin(), nb.end());
      std::array<int, 4> votes{};
      for (int m = 0; m < k; ++m) ++votes[d.labels[nb[m].second]];
      int best = 0;
      for (int c = 1; c < 4; ++c) {
        if (votes[c] > votes[best]) best = c;
      }
      ok += best == d.labels[i];
    }
    return static_cast<double>(ok) / static_cast<double>(d.size());
  };
  for (const auto& [h, score] : r.evaluated) {
    EXPECT_NEAR(score, cv(static_cast<int>(h.at("k"))), 1e-12) << "k = " << h.at("k");
  }
  EXPECT_GT(r.best.at("k"), 1.0);
  EXPECT_GT(r.best_score, cv(1));
}

TEST(HyperSearch, RejectsZeroBudget) {
  const LabeledDataset d = blobs(5, 2, 2.0, 45);
  EXPECT_THROW(hyper_search(Variant::kKnn, d, {{"k", {1}}}, 0, 5, {}, 1), ParameterError);
}

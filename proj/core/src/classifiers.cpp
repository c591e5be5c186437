#include "seabed/classifiers.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include "learners.hpp"
#include "parallel.hpp"
#include "seabed/neural.hpp"
#include "seabed/seed.hpp"

namespace seabed {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr std::array<std::pair<Variant, std::string_view>, 8> kVariantNames = {{
    {Variant::kMfp, "mfp"},
    {Variant::kNc, "nc"},
    {Variant::kKnn, "knn"},
    {Variant::kLr, "lr"},
    {Variant::kSvmLinear, "svm-linear"},
    {Variant::kSvmRbf, "svm-rbf"},
    {Variant::kMlp, "mlp"},
    {Variant::kCnn3, "cnn3"},
}};

constexpr std::string_view kModelMagic = "SBMODEL1";
constexpr std::uint64_t kModelVersion = 1;

int whole(const Hyper& h, const std::string& key, int lo) {
  const double v = h.at(key);
  if (!(v >= lo) || v != std::floor(v) || v > 1e7) {
    throw ParameterError("hyperparameter '" + key + "' must be a whole number >= " + std::to_string(lo));
  }
  return static_cast<int>(v);
}

double positive(const Hyper& h, const std::string& key) {
  const double v = h.at(key);
  if (!(v > 0) || !std::isfinite(v)) throw ParameterError("hyperparameter '" + key + "' must be positive");
  return v;
}

double non_negative(const Hyper& h, const std::string& key) {
  const double v = h.at(key);
  if (!(v >= 0) || !std::isfinite(v)) throw ParameterError("hyperparameter '" + key + "' must be >= 0");
  return v;
}

// ---------------------------------------------------------------------------

class MfpModel final : public detail::ModelImpl {
 public:
  explicit MfpModel(ReplicaBank bank) : bank_(std::move(bank)) {}
  MatrixXd scores(const MatrixXd& x) const override {
    const Index m = x.cols() / 2;
    MatrixXd s(x.rows(), 4);
    std::vector<std::complex<double>> d(static_cast<std::size_t>(m));
    for (Index i = 0; i < x.rows(); ++i) {
      for (Index k = 0; k < m; ++k) d[k] = {x(i, k), x(i, m + k)};
      const auto p = mfp_power(d, bank_);
      for (int c = 0; c < 4; ++c) s(i, c) = p[c];
    }
    return s;
  }
  void write(std::ostream& os) const override {
    for (int c = 0; c < 4; ++c) {
      binio::put_f64(os, bank_.c_top[c]);
      binio::put_f64(os, bank_.alpha_top[c]);
      binio::put_u64(os, bank_.replicas[c].size());
      for (const auto& z : bank_.replicas[c]) {
        binio::put_f64(os, z.real());
        binio::put_f64(os, z.imag());
      }
    }
  }
  static std::shared_ptr<const detail::ModelImpl> read(std::istream& is, Index dims) {
    ReplicaBank bank;
    for (int c = 0; c < 4; ++c) {
      bank.c_top[c] = binio::get_f64(is, "replica bank");
      bank.alpha_top[c] = binio::get_f64(is, "replica bank");
      const std::uint64_t n = binio::get_u64(is, "replica bank");
      if (static_cast<Index>(2 * n) != dims) throw FormatError("replica length does not match the model dims");
      bank.replicas[c].resize(n);
      for (auto& z : bank.replicas[c]) {
        const double re = binio::get_f64(is, "replica bank");
        z = {re, binio::get_f64(is, "replica bank")};
      }
    }
    try {
      bank.validate();
    } catch (const ParameterError& e) {
      throw FormatError(std::string("replica bank: ") + e.what());
    }
    return std::make_shared<MfpModel>(std::move(bank));
  }

 private:
  ReplicaBank bank_;
};

class NetworkModel final : public detail::ModelImpl {
 public:
  NetworkModel(detail::Standardizer st, Network net, int hidden, int layers)
      : st_(std::move(st)), net_(std::move(net)), hidden_(hidden), layers_(layers) {}
  MatrixXd scores(const MatrixXd& x) const override {
    Network net = net_;
    return net.forward(st_.apply(x).transpose(), false).transpose();
  }
  MatrixXd probabilities(const MatrixXd& x) const override {
    Network net = net_;
    return net.probabilities(st_.apply(x).transpose()).transpose();
  }
  void write(std::ostream& os) const override {
    binio::put_u64(os, static_cast<std::uint64_t>(hidden_));
    binio::put_u64(os, static_cast<std::uint64_t>(layers_));
    st_.write(os);
    net_.write(os);
  }
  static std::shared_ptr<const detail::ModelImpl> read(std::istream& is, Variant v, Index dims) {
    const std::uint64_t hidden = binio::get_u64(is, "network shape");
    const std::uint64_t layers = binio::get_u64(is, "network shape");
    if (hidden > 100000 || layers > 100) throw FormatError("implausible network shape");
    detail::Standardizer st = detail::Standardizer::read(is, dims);
    Network net = v == Variant::kCnn3
                      ? Network::cnn3(static_cast<int>(dims), 0)
                      : Network::mlp(static_cast<int>(dims), static_cast<int>(hidden), static_cast<int>(layers), 0);
    net.read(is);
    return std::make_shared<NetworkModel>(std::move(st), std::move(net), static_cast<int>(hidden),
                                          static_cast<int>(layers));
  }

 private:
  detail::Standardizer st_;
  Network net_;
  int hidden_;
  int layers_;
};

double eval_cross_entropy(Network& net, const MatrixXd& x, const std::vector<int>& y) {
  const MatrixXd p = net.probabilities(x);
  double loss = 0.0;
  for (Index j = 0; j < x.cols(); ++j) loss -= std::log(std::max(p(y[j], j), 1e-300));
  return loss / static_cast<double>(x.cols());
}

// Minibatch training with early stopping; x holds one sample per column.
void train_network(Network& net, const MatrixXd& x, const std::vector<int>& y, const MatrixXd& xv,
                   const std::vector<int>& yv, TrainOptions o, double weight_decay,
                   std::vector<double>& history, std::vector<double>& val_history) {
  const Index n = x.cols();
  const VectorXd decay = net.decay_mask();
  VectorXd params = net.parameters();
  AdamState state;
  AdamHyper adam;
  adam.clip = o.gradient_clip;
  std::vector<Index> order(static_cast<std::size_t>(n));
  double best = std::numeric_limits<double>::infinity();
  Network best_net = net;
  int stale = 0;
  const Index batch = std::min<Index>(o.minibatch, n);
  for (int epoch = 0; epoch < o.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), Index{0});
    std::mt19937_64 rng(derive_seed({o.seed, static_cast<std::uint64_t>(epoch), 0x65706fULL}));
    std::shuffle(order.begin(), order.end(), rng);
    adam.learning_rate = o.learning_rate_at(epoch);
    double total = 0.0;
    for (Index start = 0; start < n; start += batch) {
      const Index b = std::min(batch, n - start);
      MatrixXd xb(x.rows(), b);
      std::vector<int> yb(static_cast<std::size_t>(b));
      for (Index j = 0; j < b; ++j) {
        xb.col(j) = x.col(order[start + j]);
        yb[j] = y[order[start + j]];
      }
      VectorXd grad;
      const double loss = net.loss(xb, yb, &grad);
      if (!std::isfinite(loss) || !grad.allFinite()) {
        history.push_back(loss);
        throw DivergenceError("training loss diverged at epoch " + std::to_string(epoch), history);
      }
      total += loss * static_cast<double>(b);
      grad += weight_decay * decay.cwiseProduct(params);
      if (o.optimizer == Optimizer::kAdam) {
        adam_step(params, std::move(grad), state, adam);
      } else {
        clip_gradient(grad, adam.clip);
        params -= adam.learning_rate * grad;
      }
      net.set_parameters(params);
    }
    history.push_back(total / static_cast<double>(n));
    double monitored = history.back();
    if (xv.cols() > 0) {
      val_history.push_back(eval_cross_entropy(net, xv, yv));
      monitored = val_history.back();
    }
    if (!std::isfinite(monitored)) throw DivergenceError("validation loss is not finite", history);
    if (monitored < best) {
      best = monitored;
      best_net = net;
      stale = 0;
    } else if (++stale >= o.patience) {
      break;
    }
  }
  net = std::move(best_net);
}

std::vector<std::vector<double>> grid_values(const std::map<std::string, std::vector<double>>& grid) {
  std::vector<std::vector<double>> out;
  for (const auto& [key, values] : grid) out.push_back(values);
  return out;
}

}  // namespace

std::string_view to_string(Variant v) {
  for (const auto& [var, name] : kVariantNames) {
    if (var == v) return name;
  }
  return "unknown";
}

Variant parse_variant(std::string_view name) {
  for (const auto& [var, n] : kVariantNames) {
    if (n == name) return var;
  }
  throw ParameterError("unknown classifier '" + std::string(name) + "'");
}

Hyper resolve_hyper(Variant v, const Hyper& overrides, int dims, const TrainOptions& options) {
  Hyper h;
  switch (v) {
    case Variant::kMfp:
    case Variant::kNc:
      break;
    case Variant::kKnn:
      h = {{"k", 5}};
      break;
    case Variant::kLr:
      h = {{"lambda", 1e-3}, {"max_iter", 2000}};
      break;
    case Variant::kSvmLinear:
      h = {{"lambda", 1e-3}, {"epochs", 200}};
      break;
    case Variant::kSvmRbf:
      h = {{"lambda", 1e-3}, {"gamma", 1.0 / std::max(dims, 1)}, {"epochs", 20}};
      break;
    case Variant::kMlp:
      h = {{"hidden", 64}, {"layers", 1}, {"learning_rate", options.learning_rate},
           {"weight_decay", options.weight_decay}};
      break;
    case Variant::kCnn3:
      h = {{"learning_rate", options.learning_rate}, {"weight_decay", options.weight_decay}};
      break;
  }
  for (const auto& [key, value] : overrides) {
    auto it = h.find(key);
    if (it == h.end()) {
      throw ParameterError("classifier '" + std::string(to_string(v)) + "' has no hyperparameter '" + key + "'");
    }
    it->second = value;
  }
  return h;
}

// ---------------------------------------------------------------------------

ReplicaBank ReplicaBank::from_fields(const LowFreqFields& fields) {
  if (fields.fields.size() != 4 || fields.environments.size() != 4) {
    throw ParameterError("replica bank needs the fields of all four classes");
  }
  ReplicaBank bank;
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& [c, field] = fields.fields[i];
    const auto slot = static_cast<std::size_t>(c);
    double norm = 0.0;
    for (const auto& z : field) norm += std::norm(z);
    norm = std::sqrt(norm);
    if (!(norm > 0)) throw ParameterError("replica field is zero");
    bank.replicas[slot].resize(field.size());
    for (std::size_t k = 0; k < field.size(); ++k) bank.replicas[slot][k] = field[k] / norm;
    bank.c_top[slot] = fields.environments[i].sediment.sound_speed;
    bank.alpha_top[slot] = fields.environments[i].sediment.attenuation;
  }
  bank.validate();
  return bank;
}

void ReplicaBank::validate() const {
  for (const auto& w : replicas) {
    if (w.empty() || w.size() != replicas[0].size()) throw ParameterError("replica fields differ in length");
    double norm = 0.0;
    for (const auto& z : w) norm += std::norm(z);
    if (!(std::abs(std::sqrt(norm) - 1.0) <= 1e-12)) throw ParameterError("replica field is not unit norm");
  }
}

std::array<double, 4> mfp_power(const std::vector<std::complex<double>>& field, const ReplicaBank& bank) {
  std::array<double, 4> p{};
  for (int c = 0; c < 4; ++c) {
    const auto& w = bank.replicas[c];
    if (w.size() != field.size()) throw ParameterError("field and replica lengths differ");
    std::complex<double> acc = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) acc += std::conj(w[k]) * field[k];
    p[c] = std::abs(acc);
  }
  return p;
}

SedimentClass mfp_classify(const std::vector<std::complex<double>>& field, const ReplicaBank& bank) {
  double norm = 0.0;
  for (const auto& z : field) norm += std::norm(z);
  if (!(norm > 0)) throw ParameterError("mfp_classify: field is zero");
  const auto p = mfp_power(field, bank);
  int best = 0;
  for (int c = 1; c < 4; ++c) {
    if (p[c] > p[best]) best = c;
  }
  return static_cast<SedimentClass>(best);
}

// ---------------------------------------------------------------------------

ClassifierModel::ClassifierModel(Variant v, FeatureKind kind, int dims,
                                 std::shared_ptr<const detail::ModelImpl> impl)
    : variant_(v), kind_(kind), dims_(dims), impl_(std::move(impl)) {}

ClassifierModel ClassifierModel::from_replicas(const ReplicaBank& bank) {
  bank.validate();
  return {Variant::kMfp, FeatureKind::kComplex20, static_cast<int>(2 * bank.replicas[0].size()),
          std::make_shared<MfpModel>(bank)};
}

void ClassifierModel::check_input(const MatrixXd& encoded) const {
  if (encoded.cols() != dims_) {
    throw ParameterError("feature dimension " + std::to_string(encoded.cols()) + " does not match the model's " +
                         std::to_string(dims_));
  }
}

MatrixXd ClassifierModel::scores(const MatrixXd& encoded) const {
  check_input(encoded);
  if (encoded.rows() == 0) return MatrixXd(0, 4);
  return impl_->scores(encoded);
}

std::vector<SedimentClass> ClassifierModel::predict(const MatrixXd& encoded) const {
  const MatrixXd s = scores(encoded);
  std::vector<SedimentClass> out(static_cast<std::size_t>(s.rows()));
  for (Index i = 0; i < s.rows(); ++i) {
    int best = 0;
    for (int c = 1; c < 4; ++c) {
      if (s(i, c) > s(i, best)) best = c;
    }
    out[static_cast<std::size_t>(i)] = static_cast<SedimentClass>(best);
  }
  return out;
}

std::vector<SedimentClass> ClassifierModel::predict(const LabeledDataset& d) const {
  if (d.kind != kind_) {
    throw ParameterError("dataset holds " + std::string(to_string(d.kind)) + " features; the model expects " +
                         std::string(to_string(kind_)));
  }
  return predict(d.learner_features());
}

MatrixXd ClassifierModel::probabilities(const MatrixXd& encoded) const {
  check_input(encoded);
  return impl_->probabilities(encoded);
}

void ClassifierModel::write(std::ostream& os) const {
  binio::put_bytes(os, kModelMagic);
  binio::put_u64(os, kModelVersion);
  binio::put_string(os, to_string(variant_));
  binio::put_u8(os, static_cast<std::uint8_t>(kind_));
  binio::put_u64(os, static_cast<std::uint64_t>(dims_));
  impl_->write(os);
}

ClassifierModel ClassifierModel::read(std::istream& is) {
  binio::expect_magic(is, kModelMagic);
  const std::uint64_t version = binio::get_u64(is, "version");
  if (version != kModelVersion) throw FormatError("unsupported model version " + std::to_string(version));
  const std::string name = binio::get_string(is, "variant");
  Variant v;
  try {
    v = parse_variant(name);
  } catch (const ParameterError&) {
    throw FormatError("unknown model variant '" + name + "'");
  }
  const std::uint8_t kind = binio::get_u8(is, "feature kind");
  if (kind > 1) throw FormatError("unknown feature kind");
  const std::uint64_t dims = binio::get_u64(is, "dims");
  if (dims < 1 || dims > (1u << 20)) throw FormatError("implausible model dims");
  const auto d = static_cast<Index>(dims);
  std::shared_ptr<const detail::ModelImpl> impl;
  switch (v) {
    case Variant::kMfp: impl = MfpModel::read(is, d); break;
    case Variant::kNc: impl = detail::read_nc(is, d); break;
    case Variant::kKnn: impl = detail::read_knn(is, d); break;
    case Variant::kLr: impl = detail::read_lr(is, d); break;
    case Variant::kSvmLinear: impl = detail::read_svm_linear(is, d); break;
    case Variant::kSvmRbf: impl = detail::read_svm_rbf(is, d); break;
    case Variant::kMlp:
    case Variant::kCnn3: impl = NetworkModel::read(is, v, d); break;
  }
  return {v, static_cast<FeatureKind>(kind), static_cast<int>(dims), std::move(impl)};
}

void ClassifierModel::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path.string() + " for writing");
  write(os);
  if (!os) throw FormatError("write failed: " + path.string());
}

ClassifierModel ClassifierModel::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path.string());
  return read(is);
}

// ---------------------------------------------------------------------------

FitResult fit(Variant v, const LabeledDataset& train, const LabeledDataset& val, const Hyper& hyper,
              const TrainOptions& options) {
  if (v == Variant::kMfp) throw ParameterError("mfp is built from a replica bank, not trained");
  options.validate();
  if (train.size() == 0) throw ParameterError("training set is empty");
  train.validate();
  if (val.size() > 0) {
    val.validate();
    if (val.kind != train.kind || val.features.cols() != train.features.cols()) {
      throw ParameterError("training and validation sets differ in feature kind or dims");
    }
  }
  const MatrixXd x = train.learner_features();
  const int dims = static_cast<int>(x.cols());
  const Hyper h = resolve_hyper(v, hyper, dims, options);
  const detail::TrainingSet t = detail::canonical(x, train.labels);
  std::vector<double> history, val_history;
  std::shared_ptr<const detail::ModelImpl> impl;
  switch (v) {
    case Variant::kMfp:
      break;
    case Variant::kNc:
      impl = detail::fit_nc(t);
      break;
    case Variant::kKnn:
      impl = detail::fit_knn(t, whole(h, "k", 1));
      break;
    case Variant::kLr:
      impl = detail::fit_lr(t, non_negative(h, "lambda"), whole(h, "max_iter", 1), history);
      break;
    case Variant::kSvmLinear:
      impl = detail::fit_svm_linear(t, positive(h, "lambda"), whole(h, "epochs", 1), history);
      break;
    case Variant::kSvmRbf:
      impl = detail::fit_svm_rbf(t, positive(h, "lambda"), positive(h, "gamma"), whole(h, "epochs", 1),
                                 options.seed, history);
      break;
    case Variant::kMlp:
    case Variant::kCnn3: {
      const bool cnn = v == Variant::kCnn3;
      detail::Standardizer st = cnn ? detail::Standardizer::global(t.x) : detail::Standardizer::per_feature(t.x);
      const int hidden = cnn ? 0 : whole(h, "hidden", 1);
      const int layers = cnn ? 0 : whole(h, "layers", 0);
      const std::uint64_t init_seed = derive_seed({options.seed, 0x696e6974ULL});
      Network net = cnn ? Network::cnn3(dims, init_seed) : Network::mlp(dims, hidden, layers, init_seed);
      TrainOptions o = options;
      o.learning_rate = positive(h, "learning_rate");
      const MatrixXd xt = st.apply(t.x).transpose();
      MatrixXd xv(dims, 0);
      std::vector<int> yv;
      if (val.size() > 0) {
        xv = st.apply(val.learner_features()).transpose();
        yv.assign(val.labels.begin(), val.labels.end());
      }
      train_network(net, xt, t.y, xv, yv, o, non_negative(h, "weight_decay"), history, val_history);
      impl = std::make_shared<NetworkModel>(std::move(st), std::move(net), hidden, layers);
      break;
    }
  }
  return {ClassifierModel(v, train.kind, dims, std::move(impl)), std::move(history), std::move(val_history)};
}

std::vector<int> stratified_folds(const std::vector<std::uint8_t>& labels, int folds, std::uint64_t seed) {
  if (folds < 2) throw ParameterError("cross-validation needs at least 2 folds");
  std::vector<int> out(labels.size(), 0);
  int next = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == c) idx.push_back(i);
    }
    std::mt19937_64 rng(derive_seed({seed, static_cast<std::uint64_t>(c), 0x666f6c64ULL}));
    std::shuffle(idx.begin(), idx.end(), rng);
    // Continue the round-robin across classes so small classes do not all
    // land in the first folds.
    for (std::size_t i : idx) {
      out[i] = next;
      next = (next + 1) % folds;
    }
  }
  return out;
}

SearchResult hyper_search(Variant v, const LabeledDataset& train,
                          const std::map<std::string, std::vector<double>>& grid, int budget, int folds,
                          const TrainOptions& options, std::uint64_t seed, int workers) {
  if (budget < 1) throw ParameterError("search budget must be at least 1");
  SearchResult result;
  if (grid.empty()) return result;
  if (train.size() < static_cast<std::size_t>(folds)) throw ParameterError("fewer samples than folds");
  const auto values = grid_values(grid);
  std::uint64_t total = 1;
  for (const auto& vals : values) {
    if (vals.empty()) throw ParameterError("empty hyperparameter range");
    total = total > (1ULL << 40) / vals.size() ? (1ULL << 40) : total * vals.size();
  }
  const auto draws = static_cast<std::size_t>(std::min<std::uint64_t>(total, static_cast<std::uint64_t>(budget)));
  std::mt19937_64 rng(derive_seed({seed, 0x6870ULL}));
  std::uniform_int_distribution<std::uint64_t> pick(0, total - 1);
  std::set<std::uint64_t> seen;
  std::vector<Hyper> combos;
  while (combos.size() < draws) {
    std::uint64_t code = pick(rng);
    if (!seen.insert(code).second) continue;
    Hyper h;
    for (const auto& [key, vals] : grid) {
      h[key] = vals[code % vals.size()];
      code /= vals.size();
    }
    resolve_hyper(v, h, static_cast<int>(train.features.cols()), options);
    combos.push_back(std::move(h));
  }

  const std::vector<int> fold = stratified_folds(train.labels, folds, seed);
  std::vector<int> correct(combos.size() * static_cast<std::size_t>(folds), 0);
  detail::parallel_for(correct.size(), workers, [&](std::size_t job) {
    const std::size_t ci = job / static_cast<std::size_t>(folds);
    const int f = static_cast<int>(job % static_cast<std::size_t>(folds));
    std::vector<std::size_t> tr, te;
    for (std::size_t i = 0; i < fold.size(); ++i) (fold[i] == f ? te : tr).push_back(i);
    if (te.empty() || tr.empty()) return;
    const LabeledDataset dtest = train.subset(te);
    const FitResult r = fit(v, train.subset(tr), LabeledDataset{}, combos[ci], options);
    const auto pred = r.model.predict(dtest);
    int ok = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) ok += static_cast<int>(pred[i]) == dtest.labels[i];
    correct[job] = ok;
  });
  result.best_score = -1.0;
  for (std::size_t ci = 0; ci < combos.size(); ++ci) {
    int ok = 0;
    for (int f = 0; f < folds; ++f) ok += correct[ci * static_cast<std::size_t>(folds) + f];
    const double score = static_cast<double>(ok) / static_cast<double>(train.size());
    result.evaluated.emplace_back(combos[ci], score);
    if (score > result.best_score) {
      result.best_score = score;
      result.best = combos[ci];
    }
  }
  return result;
}

}  // namespace seabed

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "learners.hpp"
#include "seabed/error.hpp"
#include "seabed/seed.hpp"

namespace seabed::detail {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void put_present(std::ostream& os, const std::array<bool, 4>& present) {
  for (bool p : present) binio::put_u8(os, p ? 1 : 0);
}

std::array<bool, 4> get_present(std::istream& is) {
  std::array<bool, 4> present{};
  for (bool& p : present) p = binio::get_u8(is, "class mask") != 0;
  return present;
}

void mask_absent(MatrixXd& s, const std::array<bool, 4>& present) {
  for (int c = 0; c < 4; ++c) {
    if (!present[c]) s.col(c).setConstant(kNegInf);
  }
}

void check_dims(const MatrixXd& m, Index rows, Index cols, const char* what) {
  if ((rows >= 0 && m.rows() != rows) || (cols >= 0 && m.cols() != cols)) {
    throw FormatError(std::string("model payload has the wrong shape: ") + what);
  }
}

MatrixXd squared_distances(const MatrixXd& a, const MatrixXd& b) {
  MatrixXd d = (-2.0 * a * b.transpose()).eval();
  d.colwise() += a.rowwise().squaredNorm();
  d.rowwise() += b.rowwise().squaredNorm().transpose();
  return d.cwiseMax(0.0);
}

// ---------------------------------------------------------------------------

class NearestCentroid final : public ModelImpl {
 public:
  NearestCentroid(MatrixXd centroids, std::array<bool, 4> present)
      : centroids_(std::move(centroids)), present_(present) {}
  MatrixXd scores(const MatrixXd& x) const override {
    MatrixXd s(x.rows(), 4);
    for (Index i = 0; i < x.rows(); ++i) {
      for (int c = 0; c < 4; ++c) s(i, c) = -(x.row(i) - centroids_.row(c)).squaredNorm();
    }
    mask_absent(s, present_);
    return s;
  }
  void write(std::ostream& os) const override {
    put_present(os, present_);
    put_matrix(os, centroids_);
  }

 private:
  MatrixXd centroids_;  // 4 x dims
  std::array<bool, 4> present_;
};

class NearestNeighbors final : public ModelImpl {
 public:
  NearestNeighbors(MatrixXd x, std::vector<int> y, int k, std::array<bool, 4> present)
      : x_(std::move(x)), y_(std::move(y)), k_(k), present_(present) {}
  MatrixXd scores(const MatrixXd& q) const override {
    const Index n = x_.rows();
    const int k = static_cast<int>(std::min<Index>(k_, n));
    MatrixXd s = MatrixXd::Zero(q.rows(), 4);
    std::vector<Index> order(static_cast<std::size_t>(n));
    for (Index i = 0; i < q.rows(); ++i) {
      VectorXd d(n);
      for (Index j = 0; j < n; ++j) d[j] = (x_.row(j) - q.row(i)).squaredNorm();
      std::iota(order.begin(), order.end(), Index{0});
      std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](Index a, Index b) {
        return d[a] < d[b] || (d[a] == d[b] && a < b);
      });
      for (int j = 0; j < k; ++j) s(i, y_[static_cast<std::size_t>(order[j])]) += 1.0;
    }
    mask_absent(s, present_);
    return s;
  }
  void write(std::ostream& os) const override {
    put_present(os, present_);
    binio::put_u64(os, static_cast<std::uint64_t>(k_));
    put_matrix(os, x_);
    for (int l : y_) binio::put_u8(os, static_cast<std::uint8_t>(l));
  }

 private:
  MatrixXd x_;
  std::vector<int> y_;
  int k_;
  std::array<bool, 4> present_;
};

class Softmax final : public ModelImpl {
 public:
  Softmax(Standardizer st, MatrixXd w, VectorXd b, std::array<bool, 4> present)
      : st_(std::move(st)), w_(std::move(w)), b_(std::move(b)), present_(present) {}
  MatrixXd scores(const MatrixXd& x) const override {
    MatrixXd s = st_.apply(x) * w_.transpose();
    s.rowwise() += b_.transpose();
    mask_absent(s, present_);
    return s;
  }
  MatrixXd probabilities(const MatrixXd& x) const override {
    MatrixXd s = scores(x);
    for (Index i = 0; i < s.rows(); ++i) {
      double mx = kNegInf;
      for (int c = 0; c < 4; ++c) mx = std::max(mx, s(i, c));
      for (int c = 0; c < 4; ++c) s(i, c) = present_[c] ? std::exp(s(i, c) - mx) : 0.0;
      s.row(i) /= s.row(i).sum();
    }
    return s;
  }
  void write(std::ostream& os) const override {
    put_present(os, present_);
    st_.write(os);
    put_matrix(os, w_);
    put_matrix(os, b_);
  }

 private:
  Standardizer st_;
  MatrixXd w_;  // 4 x dims
  VectorXd b_;
  std::array<bool, 4> present_;
};

// Linear one-vs-rest scores on [standardized x, 1].
class LinearOvr final : public ModelImpl {
 public:
  LinearOvr(Standardizer st, MatrixXd w, std::array<bool, 4> present)
      : st_(std::move(st)), w_(std::move(w)), present_(present) {}
  MatrixXd scores(const MatrixXd& x) const override {
    const Index d = x.cols();
    MatrixXd s = st_.apply(x) * w_.leftCols(d).transpose();
    s.rowwise() += w_.col(d).transpose();
    mask_absent(s, present_);
    return s;
  }
  void write(std::ostream& os) const override {
    put_present(os, present_);
    st_.write(os);
    put_matrix(os, w_);
  }

 private:
  Standardizer st_;
  MatrixXd w_;  // 4 x (dims + 1)
  std::array<bool, 4> present_;
};

class KernelOvr final : public ModelImpl {
 public:
  KernelOvr(Standardizer st, double gamma, MatrixXd support, MatrixXd coef, std::array<bool, 4> present)
      : st_(std::move(st)), gamma_(gamma), support_(std::move(support)), coef_(std::move(coef)),
        present_(present) {}
  MatrixXd scores(const MatrixXd& x) const override {
    MatrixXd s = MatrixXd::Zero(x.rows(), 4);
    if (support_.rows() > 0) {
      const MatrixXd k = (-gamma_ * squared_distances(st_.apply(x), support_)).array().exp().matrix();
      s = k * coef_;
    }
    mask_absent(s, present_);
    return s;
  }
  void write(std::ostream& os) const override {
    put_present(os, present_);
    st_.write(os);
    binio::put_f64(os, gamma_);
    put_matrix(os, support_);
    put_matrix(os, coef_);
  }

 private:
  Standardizer st_;
  double gamma_;
  MatrixXd support_;  // m x dims, standardized
  MatrixXd coef_;     // m x 4
  std::array<bool, 4> present_;
};

std::vector<int> present_classes(const std::array<bool, 4>& present) {
  std::vector<int> out;
  for (int c = 0; c < 4; ++c) {
    if (present[c]) out.push_back(c);
  }
  return out;
}

}  // namespace

MatrixXd ModelImpl::probabilities(const MatrixXd&) const {
  throw ParameterError("this classifier does not produce probabilities");
}

// ---------------------------------------------------------------------------

Standardizer Standardizer::per_feature(const MatrixXd& x) {
  Standardizer s;
  s.mean = x.colwise().mean();
  s.scale = ((x.rowwise() - s.mean).array().square().colwise().mean()).sqrt().matrix();
  for (Index j = 0; j < s.scale.size(); ++j) {
    if (!(s.scale[j] > 1e-12)) s.scale[j] = 1.0;
  }
  return s;
}

Standardizer Standardizer::global(const MatrixXd& x) {
  const double mean = x.mean();
  double sd = std::sqrt((x.array() - mean).square().mean());
  if (!(sd > 1e-12)) sd = 1.0;
  Standardizer s;
  s.mean = RowVectorXd::Constant(x.cols(), mean);
  s.scale = RowVectorXd::Constant(x.cols(), sd);
  return s;
}

Standardizer Standardizer::identity(Index dims) {
  return {RowVectorXd::Zero(dims), RowVectorXd::Ones(dims)};
}

MatrixXd Standardizer::apply(const MatrixXd& x) const {
  return (x.rowwise() - mean).array().rowwise() / scale.array();
}

void Standardizer::write(std::ostream& os) const {
  for (Index j = 0; j < mean.size(); ++j) binio::put_f64(os, mean[j]);
  for (Index j = 0; j < scale.size(); ++j) binio::put_f64(os, scale[j]);
}

Standardizer Standardizer::read(std::istream& is, Index dims) {
  Standardizer s{RowVectorXd(dims), RowVectorXd(dims)};
  for (Index j = 0; j < dims; ++j) s.mean[j] = binio::get_f64(is, "standardizer");
  for (Index j = 0; j < dims; ++j) s.scale[j] = binio::get_f64(is, "standardizer");
  return s;
}

TrainingSet canonical(const MatrixXd& x, const std::vector<std::uint8_t>& labels) {
  std::vector<Index> order(labels.size());
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    for (Index j = 0; j < x.cols(); ++j) {
      if (x(a, j) != x(b, j)) return x(a, j) < x(b, j);
    }
    return labels[static_cast<std::size_t>(a)] < labels[static_cast<std::size_t>(b)];
  });
  TrainingSet t;
  t.x.resize(x.rows(), x.cols());
  t.y.resize(labels.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    t.x.row(static_cast<Index>(i)) = x.row(order[i]);
    t.y[i] = labels[static_cast<std::size_t>(order[i])];
    t.present.at(static_cast<std::size_t>(t.y[i])) = true;
  }
  return t;
}

void put_matrix(std::ostream& os, const MatrixXd& m) {
  binio::put_u64(os, static_cast<std::uint64_t>(m.rows()));
  binio::put_u64(os, static_cast<std::uint64_t>(m.cols()));
  for (Index i = 0; i < m.size(); ++i) binio::put_f64(os, m.data()[i]);
}

MatrixXd get_matrix(std::istream& is) {
  const std::uint64_t r = binio::get_u64(is, "matrix shape");
  const std::uint64_t c = binio::get_u64(is, "matrix shape");
  if (r > (1u << 24) || c > (1u << 24) || r * c > (1u << 26)) throw FormatError("implausible matrix shape");
  MatrixXd m(static_cast<Index>(r), static_cast<Index>(c));
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = binio::get_f64(is, "matrix");
  return m;
}

// ---------------------------------------------------------------------------

std::shared_ptr<const ModelImpl> fit_nc(const TrainingSet& t) {
  MatrixXd centroids = MatrixXd::Zero(4, t.x.cols());
  std::array<int, 4> counts{};
  for (Index i = 0; i < t.x.rows(); ++i) {
    centroids.row(t.y[i]) += t.x.row(i);
    ++counts[t.y[i]];
  }
  for (int c = 0; c < 4; ++c) {
    if (counts[c] > 0) centroids.row(c) /= counts[c];
  }
  return std::make_shared<NearestCentroid>(std::move(centroids), t.present);
}

std::shared_ptr<const ModelImpl> fit_knn(const TrainingSet& t, int k) {
  if (k < 1) throw ParameterError("knn: k must be positive");
  return std::make_shared<NearestNeighbors>(t.x, t.y, k, t.present);
}

namespace {

// Mean cross-entropy plus lambda/2 |W|^2 over the present classes.
// theta = [W (classes x d, column-major), b].
struct SoftmaxObjective {
  const MatrixXd& x;
  const std::vector<int>& y;  // index into the present classes
  int classes;
  double lambda;

  double operator()(const VectorXd& theta, VectorXd& grad) const {
    const Index n = x.rows(), d = x.cols();
    Eigen::Map<const MatrixXd> w(theta.data(), classes, d);
    const auto b = theta.tail(classes);
    MatrixXd z = x * w.transpose();
    z.rowwise() += b.transpose();
    double loss = 0.0;
    for (Index i = 0; i < n; ++i) {
      const double mx = z.row(i).maxCoeff();
      z.row(i) = (z.row(i).array() - mx).exp().matrix();
      const double sum = z.row(i).sum();
      z.row(i) /= sum;
      loss -= std::log(std::max(z(i, y[i]), 1e-300));
      z(i, y[i]) -= 1.0;
    }
    loss = loss / static_cast<double>(n) + 0.5 * lambda * w.squaredNorm();
    grad.resize(theta.size());
    Eigen::Map<MatrixXd> gw(grad.data(), classes, d);
    gw = z.transpose() * x / static_cast<double>(n) + lambda * w;
    grad.tail(classes) = z.colwise().mean().transpose();
    return loss;
  }
};

// Limited-memory BFGS with Armijo backtracking; records the objective.
template <class F>
VectorXd minimize(const F& f, VectorXd theta, int max_iter, std::vector<double>& history) {
  constexpr int kMemory = 10;
  std::vector<VectorXd> ss, ys;
  VectorXd g;
  double fx = f(theta, g);
  history.push_back(fx);
  for (int it = 0; it < max_iter; ++it) {
    if (!std::isfinite(fx)) throw DivergenceError("logistic regression objective is not finite", history);
    if (g.lpNorm<Eigen::Infinity>() < 1e-10) break;
    VectorXd q = g;
    std::vector<double> alpha(ss.size());
    for (int k = static_cast<int>(ss.size()) - 1; k >= 0; --k) {
      alpha[k] = ss[k].dot(q) / ys[k].dot(ss[k]);
      q -= alpha[k] * ys[k];
    }
    if (!ss.empty()) q *= ss.back().dot(ys.back()) / ys.back().squaredNorm();
    for (std::size_t k = 0; k < ss.size(); ++k) {
      const double beta = ys[k].dot(q) / ys[k].dot(ss[k]);
      q += (alpha[k] - beta) * ss[k];
    }
    VectorXd dir = -q;
    if (dir.dot(g) >= 0) {
      ss.clear();
      ys.clear();
      dir = -g;
    }
    double step = ss.empty() ? std::min(1.0, 1.0 / g.norm()) : 1.0;
    const double slope = dir.dot(g);
    VectorXd next, gn;
    double fn = 0.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      next = theta + step * dir;
      fn = f(next, gn);
      if (std::isfinite(fn) && fn <= fx + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    VectorXd s = next - theta, yv = gn - g;
    if (s.dot(yv) > 1e-12 * s.norm() * yv.norm()) {
      ss.push_back(std::move(s));
      ys.push_back(std::move(yv));
      if (static_cast<int>(ss.size()) > kMemory) {
        ss.erase(ss.begin());
        ys.erase(ys.begin());
      }
    }
    const double prev = fx;
    theta = std::move(next);
    g = std::move(gn);
    fx = fn;
    history.push_back(fx);
    if (prev - fx <= 1e-15 * std::max(1.0, std::abs(fx))) break;
  }
  return theta;
}

}  // namespace

std::shared_ptr<const ModelImpl> fit_lr(const TrainingSet& t, double lambda, int max_iter,
                                        std::vector<double>& history) {
  if (!(lambda >= 0)) throw ParameterError("lr: lambda must be non-negative");
  Standardizer st = Standardizer::per_feature(t.x);
  const MatrixXd xs = st.apply(t.x);
  const std::vector<int> cls = present_classes(t.present);
  std::array<int, 4> slot{};
  for (std::size_t k = 0; k < cls.size(); ++k) slot[cls[k]] = static_cast<int>(k);
  std::vector<int> y(t.y.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = slot[t.y[i]];
  const int nc = static_cast<int>(cls.size());
  const Index d = xs.cols();
  SoftmaxObjective f{xs, y, nc, lambda};
  const VectorXd theta = minimize(f, VectorXd::Zero(nc * d + nc), max_iter, history);
  MatrixXd w = MatrixXd::Zero(4, d);
  VectorXd b = VectorXd::Zero(4);
  Eigen::Map<const MatrixXd> wp(theta.data(), nc, d);
  for (int k = 0; k < nc; ++k) {
    w.row(cls[k]) = wp.row(k);
    b[cls[k]] = theta[nc * d + k];
  }
  return std::make_shared<Softmax>(std::move(st), std::move(w), std::move(b), t.present);
}

std::shared_ptr<const ModelImpl> fit_svm_linear(const TrainingSet& t, double lambda, int epochs,
                                                std::vector<double>& history) {
  if (!(lambda > 0)) throw ParameterError("svm-linear: lambda must be positive");
  if (epochs < 1) throw ParameterError("svm-linear: epochs must be positive");
  Standardizer st = Standardizer::per_feature(t.x);
  const Index n = t.x.rows(), d = t.x.cols();
  MatrixXd xa(n, d + 1);
  xa.leftCols(d) = st.apply(t.x);
  xa.col(d).setOnes();
  MatrixXd w = MatrixXd::Zero(4, d + 1);
  const double radius = 1.0 / std::sqrt(lambda);
  const int burn_in = epochs / 2;
  const std::vector<int> cls = present_classes(t.present);
  history.assign(static_cast<std::size_t>(epochs), 0.0);
  for (int c : cls) {
    VectorXd yc(n);
    for (Index i = 0; i < n; ++i) yc[i] = t.y[i] == c ? 1.0 : -1.0;
    VectorXd wc = VectorXd::Zero(d + 1), acc = VectorXd::Zero(d + 1);
    int averaged = 0;
    for (int e = 1; e <= epochs; ++e) {
      const VectorXd margin = yc.cwiseProduct(xa * wc);
      VectorXd sub = VectorXd::Zero(d + 1);
      double hinge = 0.0;
      for (Index i = 0; i < n; ++i) {
        if (margin[i] < 1.0) {
          sub -= yc[i] * xa.row(i).transpose();
          hinge += 1.0 - margin[i];
        }
      }
      history[e - 1] += (0.5 * lambda * wc.squaredNorm() + hinge / n) / static_cast<double>(cls.size());
      const double eta = 1.0 / (lambda * e);
      wc = (1.0 - eta * lambda) * wc - eta * sub / static_cast<double>(n);
      const double norm = wc.norm();
      if (norm > radius) wc *= radius / norm;
      if (e > burn_in) {
        acc += wc;
        ++averaged;
      }
    }
    w.row(c) = (acc / averaged).transpose();
  }
  return std::make_shared<LinearOvr>(std::move(st), std::move(w), t.present);
}

std::shared_ptr<const ModelImpl> fit_svm_rbf(const TrainingSet& t, double lambda, double gamma, int epochs,
                                             std::uint64_t seed, std::vector<double>& history) {
  if (!(lambda > 0)) throw ParameterError("svm-rbf: lambda must be positive");
  if (!(gamma > 0)) throw ParameterError("svm-rbf: gamma must be positive");
  if (epochs < 1) throw ParameterError("svm-rbf: epochs must be positive");
  Standardizer st = Standardizer::per_feature(t.x);
  const MatrixXd xs = st.apply(t.x);
  const Index n = xs.rows();
  const MatrixXd k = (-gamma * squared_distances(xs, xs)).array().exp().matrix();
  const std::vector<int> cls = present_classes(t.present);
  MatrixXd coef = MatrixXd::Zero(n, 4);
  history.assign(static_cast<std::size_t>(epochs), 0.0);
  const long total = static_cast<long>(epochs) * n;
  for (int c : cls) {
    VectorXd yc(n);
    for (Index i = 0; i < n; ++i) yc[i] = t.y[i] == c ? 1.0 : -1.0;
    VectorXd alpha = VectorXd::Zero(n);
    VectorXd s = VectorXd::Zero(n);  // K (alpha .* y)
    std::mt19937_64 rng(derive_seed({seed, static_cast<std::uint64_t>(c), 0x73766dULL}));
    std::uniform_int_distribution<Index> pick(0, n - 1);
    long step = 0;
    for (int e = 0; e < epochs; ++e) {
      for (Index it = 0; it < n; ++it) {
        ++step;
        const Index i = pick(rng);
        if (yc[i] * s[i] / (lambda * static_cast<double>(step)) < 1.0) {
          alpha[i] += 1.0;
          s += yc[i] * k.col(i);
        }
      }
      const double scale = 1.0 / (lambda * static_cast<double>(step));
      const double wnorm2 = scale * scale * alpha.cwiseProduct(yc).dot(s);
      const double hinge = (1.0 - (scale * yc.cwiseProduct(s)).array()).max(0.0).mean();
      history[e] += (0.5 * lambda * wnorm2 + hinge) / static_cast<double>(cls.size());
    }
    coef.col(c) = alpha.cwiseProduct(yc) / (lambda * static_cast<double>(total));
  }
  std::vector<Index> keep;
  for (Index i = 0; i < n; ++i) {
    if (coef.row(i).squaredNorm() > 0) keep.push_back(i);
  }
  MatrixXd support(static_cast<Index>(keep.size()), xs.cols());
  MatrixXd kept(static_cast<Index>(keep.size()), 4);
  for (std::size_t j = 0; j < keep.size(); ++j) {
    support.row(static_cast<Index>(j)) = xs.row(keep[j]);
    kept.row(static_cast<Index>(j)) = coef.row(keep[j]);
  }
  return std::make_shared<KernelOvr>(std::move(st), gamma, std::move(support), std::move(kept), t.present);
}

// ---------------------------------------------------------------------------

std::shared_ptr<const ModelImpl> read_nc(std::istream& is, Index dims) {
  const auto present = get_present(is);
  MatrixXd c = get_matrix(is);
  check_dims(c, 4, dims, "centroids");
  return std::make_shared<NearestCentroid>(std::move(c), present);
}

std::shared_ptr<const ModelImpl> read_knn(std::istream& is, Index dims) {
  const auto present = get_present(is);
  const auto k = binio::get_u64(is, "k");
  if (k < 1 || k > (1u << 24)) throw FormatError("knn: implausible k");
  MatrixXd x = get_matrix(is);
  check_dims(x, -1, dims, "reference set");
  std::vector<int> y(static_cast<std::size_t>(x.rows()));
  for (int& l : y) {
    l = binio::get_u8(is, "labels");
    if (l > 3) throw FormatError("knn: label out of range");
  }
  return std::make_shared<NearestNeighbors>(std::move(x), std::move(y), static_cast<int>(k), present);
}

std::shared_ptr<const ModelImpl> read_lr(std::istream& is, Index dims) {
  const auto present = get_present(is);
  Standardizer st = Standardizer::read(is, dims);
  MatrixXd w = get_matrix(is);
  check_dims(w, 4, dims, "weights");
  MatrixXd b = get_matrix(is);
  check_dims(b, 4, 1, "biases");
  return std::make_shared<Softmax>(std::move(st), std::move(w), VectorXd(b.col(0)), present);
}

std::shared_ptr<const ModelImpl> read_svm_linear(std::istream& is, Index dims) {
  const auto present = get_present(is);
  Standardizer st = Standardizer::read(is, dims);
  MatrixXd w = get_matrix(is);
  check_dims(w, 4, dims + 1, "weights");
  return std::make_shared<LinearOvr>(std::move(st), std::move(w), present);
}

std::shared_ptr<const ModelImpl> read_svm_rbf(std::istream& is, Index dims) {
  const auto present = get_present(is);
  Standardizer st = Standardizer::read(is, dims);
  const double gamma = binio::get_f64(is, "gamma");
  MatrixXd support = get_matrix(is);
  check_dims(support, -1, dims, "support set");
  MatrixXd coef = get_matrix(is);
  check_dims(coef, support.rows(), 4, "coefficients");
  return std::make_shared<KernelOvr>(std::move(st), gamma, std::move(support), std::move(coef), present);
}

}  // namespace seabed::detail

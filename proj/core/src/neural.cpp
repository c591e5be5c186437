#include "seabed/neural.hpp"

#include <cmath>
#include <random>

#include "binio.hpp"
#include "seabed/error.hpp"
#include "seabed/seed.hpp"

namespace seabed {

void clip_gradient(Eigen::VectorXd& grad, double clip) {
  const double norm = grad.norm();
  if (norm > clip && norm > 0) grad *= clip / norm;
}

void adam_step(Eigen::VectorXd& params, Eigen::VectorXd grad, AdamState& s, const AdamHyper& h) {
  if (grad.size() != params.size()) throw ParameterError("adam: gradient and parameter sizes differ");
  if (s.m.size() != params.size()) {
    s.m = Eigen::VectorXd::Zero(params.size());
    s.v = Eigen::VectorXd::Zero(params.size());
    s.t = 0;
  }
  clip_gradient(grad, h.clip);
  ++s.t;
  s.m = h.beta1 * s.m + (1.0 - h.beta1) * grad;
  s.v = h.beta2 * s.v + (1.0 - h.beta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(s.t));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(s.t));
  params.array() -= h.learning_rate * (s.m.array() / c1) / ((s.v.array() / c2).sqrt() + h.epsilon);
}

Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd p(logits.rows(), logits.cols());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const double mx = logits.col(j).maxCoeff();
    p.col(j) = (logits.col(j).array() - mx).exp();
    p.col(j) /= p.col(j).sum();
  }
  return p;
}

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

class Dense final : public NetworkLayer {
 public:
  Dense(int in, int out, std::mt19937_64& rng) : W_(out, in), b_(VectorXd::Zero(out)) {
    std::normal_distribution<double> n(0.0, std::sqrt(2.0 / in));
    for (Eigen::Index i = 0; i < W_.size(); ++i) W_.data()[i] = n(rng);
    dW_ = MatrixXd::Zero(out, in);
    db_ = VectorXd::Zero(out);
  }
  Shape output_shape() const override { return {static_cast<int>(W_.rows()), 1}; }
  void forward(const MatrixXd& x, MatrixXd& y, bool) override {
    x_ = x;
    y.noalias() = W_ * x;
    y.colwise() += b_;
  }
  void backward(const MatrixXd& dy, MatrixXd& dx) override {
    dW_.noalias() += dy * x_.transpose();
    db_ += dy.rowwise().sum();
    dx.noalias() = W_.transpose() * dy;
  }
  std::vector<ParamBlock> params() override {
    return {{W_.data(), dW_.data(), W_.size(), true}, {b_.data(), db_.data(), b_.size(), false}};
  }
  std::unique_ptr<NetworkLayer> clone() const override { return std::make_unique<Dense>(*this); }

 private:
  MatrixXd W_, dW_;
  VectorXd b_, db_;
  MatrixXd x_;
};

class Relu final : public NetworkLayer {
 public:
  explicit Relu(Shape s) : shape_(s) {}
  Shape output_shape() const override { return shape_; }
  void forward(const MatrixXd& x, MatrixXd& y, bool) override {
    mask_ = (x.array() > 0.0).cast<double>();
    y = x.cwiseProduct(mask_);
  }
  void backward(const MatrixXd& dy, MatrixXd& dx) override { dx = dy.cwiseProduct(mask_); }
  std::unique_ptr<NetworkLayer> clone() const override { return std::make_unique<Relu>(*this); }

 private:
  Shape shape_;
  MatrixXd mask_;
};

// 'Same' zero padding: output length equals input length.
class Conv1d final : public NetworkLayer {
 public:
  Conv1d(Shape in, int out_channels, int width, std::mt19937_64& rng)
      : in_(in), out_(out_channels), k_(width), W_(out_channels, in.channels * width),
        b_(VectorXd::Zero(out_channels)) {
    std::normal_distribution<double> n(0.0, std::sqrt(2.0 / (in.channels * width)));
    for (Eigen::Index i = 0; i < W_.size(); ++i) W_.data()[i] = n(rng);
    dW_ = MatrixXd::Zero(W_.rows(), W_.cols());
    db_ = VectorXd::Zero(out_channels);
  }
  Shape output_shape() const override { return {out_, in_.length}; }

  void forward(const MatrixXd& x, MatrixXd& y, bool) override {
    const int C = in_.channels, L = in_.length, pad = (k_ - 1) / 2;
    const Eigen::Index B = x.cols();
    cols_.resize(B);
    y.resize(static_cast<Eigen::Index>(out_) * L, B);
    for (Eigen::Index b = 0; b < B; ++b) {
      Eigen::Map<const MatrixXd> xb(x.col(b).data(), C, L);
      MatrixXd& cols = cols_[b];
      cols.setZero(static_cast<Eigen::Index>(C) * k_, L);
      for (int c = 0; c < C; ++c) {
        for (int k = 0; k < k_; ++k) {
          for (int l = 0; l < L; ++l) {
            const int src = l + k - pad;
            if (src >= 0 && src < L) cols(c * k_ + k, l) = xb(c, src);
          }
        }
      }
      Eigen::Map<MatrixXd> yb(y.col(b).data(), out_, L);
      yb.noalias() = W_ * cols;
      yb.colwise() += b_;
    }
  }

  void backward(const MatrixXd& dy, MatrixXd& dx) override {
    const int C = in_.channels, L = in_.length, pad = (k_ - 1) / 2;
    const Eigen::Index B = dy.cols();
    dx.setZero(static_cast<Eigen::Index>(C) * L, B);
    MatrixXd dcols;
    for (Eigen::Index b = 0; b < B; ++b) {
      Eigen::Map<const MatrixXd> dyb(dy.col(b).data(), out_, L);
      dW_.noalias() += dyb * cols_[b].transpose();
      db_ += dyb.rowwise().sum();
      dcols.noalias() = W_.transpose() * dyb;
      Eigen::Map<MatrixXd> dxb(dx.col(b).data(), C, L);
      for (int c = 0; c < C; ++c) {
        for (int k = 0; k < k_; ++k) {
          for (int l = 0; l < L; ++l) {
            const int src = l + k - pad;
            if (src >= 0 && src < L) dxb(c, src) += dcols(c * k_ + k, l);
          }
        }
      }
    }
  }

  std::vector<ParamBlock> params() override {
    return {{W_.data(), dW_.data(), W_.size(), true}, {b_.data(), db_.data(), b_.size(), false}};
  }
  std::unique_ptr<NetworkLayer> clone() const override { return std::make_unique<Conv1d>(*this); }

 private:
  Shape in_;
  int out_;
  int k_;
  MatrixXd W_, dW_;
  VectorXd b_, db_;
  std::vector<MatrixXd> cols_;
};

// Per-channel normalization over batch and length.
class BatchNorm final : public NetworkLayer {
 public:
  explicit BatchNorm(Shape s)
      : shape_(s), gamma_(VectorXd::Ones(s.channels)), beta_(VectorXd::Zero(s.channels)),
        dgamma_(VectorXd::Zero(s.channels)), dbeta_(VectorXd::Zero(s.channels)),
        running_mean_(VectorXd::Zero(s.channels)), running_var_(VectorXd::Ones(s.channels)) {}
  Shape output_shape() const override { return shape_; }

  void forward(const MatrixXd& x, MatrixXd& y, bool training) override {
    const int C = shape_.channels, L = shape_.length;
    const Eigen::Index B = x.cols();
    VectorXd mean, var;
    if (training) {
      const double N = static_cast<double>(B) * L;
      mean = VectorXd::Zero(C);
      var = VectorXd::Zero(C);
      for (Eigen::Index b = 0; b < B; ++b) {
        Eigen::Map<const MatrixXd> xb(x.col(b).data(), C, L);
        mean += xb.rowwise().sum();
      }
      mean /= N;
      for (Eigen::Index b = 0; b < B; ++b) {
        Eigen::Map<const MatrixXd> xb(x.col(b).data(), C, L);
        var += (xb.colwise() - mean).array().square().matrix().rowwise().sum();
      }
      var /= N;
      const double unbiased = N > 1 ? N / (N - 1) : 1.0;
      running_mean_ = (1 - kMomentum) * running_mean_ + kMomentum * mean;
      running_var_ = (1 - kMomentum) * running_var_ + kMomentum * unbiased * var;
    } else {
      mean = running_mean_;
      var = running_var_;
    }
    inv_std_ = (var.array() + kEps).rsqrt().matrix();
    xhat_.resize(x.rows(), B);
    y.resize(x.rows(), B);
    for (Eigen::Index b = 0; b < B; ++b) {
      Eigen::Map<const MatrixXd> xb(x.col(b).data(), C, L);
      Eigen::Map<MatrixXd> hb(xhat_.col(b).data(), C, L);
      Eigen::Map<MatrixXd> yb(y.col(b).data(), C, L);
      hb = inv_std_.asDiagonal() * (xb.colwise() - mean);
      yb = (gamma_.asDiagonal() * hb).colwise() + beta_;
    }
  }

  void backward(const MatrixXd& dy, MatrixXd& dx) override {
    const int C = shape_.channels, L = shape_.length;
    const Eigen::Index B = dy.cols();
    const double N = static_cast<double>(B) * L;
    VectorXd sum_dy = VectorXd::Zero(C), sum_dy_xhat = VectorXd::Zero(C);
    for (Eigen::Index b = 0; b < B; ++b) {
      Eigen::Map<const MatrixXd> dyb(dy.col(b).data(), C, L);
      Eigen::Map<const MatrixXd> hb(xhat_.col(b).data(), C, L);
      sum_dy += dyb.rowwise().sum();
      sum_dy_xhat += dyb.cwiseProduct(hb).rowwise().sum();
    }
    dgamma_ += sum_dy_xhat;
    dbeta_ += sum_dy;
    dx.resize(dy.rows(), B);
    const VectorXd scale = gamma_.cwiseProduct(inv_std_) / N;
    for (Eigen::Index b = 0; b < B; ++b) {
      Eigen::Map<const MatrixXd> dyb(dy.col(b).data(), C, L);
      Eigen::Map<const MatrixXd> hb(xhat_.col(b).data(), C, L);
      Eigen::Map<MatrixXd> dxb(dx.col(b).data(), C, L);
      dxb = scale.asDiagonal() *
            ((N * dyb).colwise() - sum_dy - sum_dy_xhat.asDiagonal() * hb);
    }
  }

  std::vector<ParamBlock> params() override {
    return {{gamma_.data(), dgamma_.data(), gamma_.size(), false},
            {beta_.data(), dbeta_.data(), beta_.size(), false}};
  }
  std::vector<VectorXd*> buffers() override { return {&running_mean_, &running_var_}; }
  std::unique_ptr<NetworkLayer> clone() const override { return std::make_unique<BatchNorm>(*this); }

 private:
  static constexpr double kMomentum = 0.1;
  static constexpr double kEps = 1e-5;
  Shape shape_;
  VectorXd gamma_, beta_, dgamma_, dbeta_;
  VectorXd running_mean_, running_var_;
  VectorXd inv_std_;
  MatrixXd xhat_;
};

// Width 2, stride 2; a trailing odd sample is dropped.
class MaxPool final : public NetworkLayer {
 public:
  explicit MaxPool(Shape in) : in_(in) {}
  Shape output_shape() const override { return {in_.channels, in_.length / 2}; }
  void forward(const MatrixXd& x, MatrixXd& y, bool) override {
    const int C = in_.channels, L = in_.length, Lo = L / 2;
    const Eigen::Index B = x.cols();
    y.resize(static_cast<Eigen::Index>(C) * Lo, B);
    arg_.resize(static_cast<std::size_t>(C) * Lo * B);
    for (Eigen::Index b = 0; b < B; ++b) {
      Eigen::Map<const MatrixXd> xb(x.col(b).data(), C, L);
      Eigen::Map<MatrixXd> yb(y.col(b).data(), C, Lo);
      for (int l = 0; l < Lo; ++l) {
        for (int c = 0; c < C; ++c) {
          const bool first = xb(c, 2 * l) >= xb(c, 2 * l + 1);
          yb(c, l) = first ? xb(c, 2 * l) : xb(c, 2 * l + 1);
          arg_[(static_cast<std::size_t>(b) * Lo + l) * C + c] = first ? 2 * l : 2 * l + 1;
        }
      }
    }
  }
  void backward(const MatrixXd& dy, MatrixXd& dx) override {
    const int C = in_.channels, L = in_.length, Lo = L / 2;
    const Eigen::Index B = dy.cols();
    dx.setZero(static_cast<Eigen::Index>(C) * L, B);
    for (Eigen::Index b = 0; b < B; ++b) {
      Eigen::Map<const MatrixXd> dyb(dy.col(b).data(), C, Lo);
      Eigen::Map<MatrixXd> dxb(dx.col(b).data(), C, L);
      for (int l = 0; l < Lo; ++l) {
        for (int c = 0; c < C; ++c) {
          dxb(c, arg_[(static_cast<std::size_t>(b) * Lo + l) * C + c]) += dyb(c, l);
        }
      }
    }
  }
  std::unique_ptr<NetworkLayer> clone() const override { return std::make_unique<MaxPool>(*this); }

 private:
  Shape in_;
  std::vector<int> arg_;
};

}  // namespace

Network::Network(const Network& other) : input_(other.input_) {
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

Network& Network::operator=(const Network& other) {
  if (this != &other) {
    Network copy(other);
    *this = std::move(copy);
  }
  return *this;
}

Network Network::cnn3(int input_length, std::uint64_t seed) {
  if (input_length < cnn3_min_length()) {
    throw ParameterError("cnn3 needs inputs of length >= " + std::to_string(cnn3_min_length()));
  }
  std::mt19937_64 rng(derive_seed({seed, 0x636e6e33ULL}));
  Network net;
  net.input_ = {1, input_length};
  Shape s = net.input_;
  const int channels[3] = {16, 64, 256};
  const int widths[3] = {16, 8, 4};
  for (int i = 0; i < 3; ++i) {
    net.layers_.push_back(std::make_unique<Conv1d>(s, channels[i], widths[i], rng));
    s = net.layers_.back()->output_shape();
    net.layers_.push_back(std::make_unique<BatchNorm>(s));
    net.layers_.push_back(std::make_unique<Relu>(s));
    net.layers_.push_back(std::make_unique<MaxPool>(s));
    s = net.layers_.back()->output_shape();
  }
  net.layers_.push_back(std::make_unique<Dense>(s.size(), 64, rng));
  net.layers_.push_back(std::make_unique<Relu>(Shape{64, 1}));
  net.layers_.push_back(std::make_unique<Dense>(64, 4, rng));
  return net;
}

Network Network::mlp(int input_dim, int hidden, int layers, std::uint64_t seed) {
  if (input_dim < 1 || hidden < 1 || layers < 0) throw ParameterError("mlp: invalid layer sizes");
  std::mt19937_64 rng(derive_seed({seed, 0x6d6c70ULL}));
  Network net;
  net.input_ = {input_dim, 1};
  int in = input_dim;
  for (int i = 0; i < layers; ++i) {
    net.layers_.push_back(std::make_unique<Dense>(in, hidden, rng));
    net.layers_.push_back(std::make_unique<Relu>(Shape{hidden, 1}));
    in = hidden;
  }
  net.layers_.push_back(std::make_unique<Dense>(in, 4, rng));
  return net;
}

int Network::n_outputs() const { return layers_.empty() ? 0 : layers_.back()->output_shape().size(); }

Eigen::MatrixXd Network::forward(const Eigen::MatrixXd& x, bool training) {
  if (x.rows() != input_.size()) throw ParameterError("network input has the wrong dimension");
  Eigen::MatrixXd a = x, b;
  for (auto& l : layers_) {
    l->forward(a, b, training);
    std::swap(a, b);
  }
  return a;
}

void Network::backward(const Eigen::MatrixXd& dlogits) {
  Eigen::MatrixXd d = dlogits, dx;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
    (*it)->backward(d, dx);
    std::swap(d, dx);
  }
}

std::vector<ParamBlock> Network::all_params() const {
  std::vector<ParamBlock> out;
  for (const auto& l : layers_) {
    for (const ParamBlock& p : l->params()) out.push_back(p);
  }
  return out;
}

void Network::zero_grad() {
  for (const ParamBlock& p : all_params()) Eigen::Map<Eigen::VectorXd>(p.grad, p.size).setZero();
}

double Network::loss(const Eigen::MatrixXd& x, const std::vector<int>& labels, Eigen::VectorXd* grad) {
  if (static_cast<Eigen::Index>(labels.size()) != x.cols()) throw ParameterError("label count mismatch");
  const Eigen::MatrixXd logits = forward(x, true);
  const Eigen::MatrixXd p = softmax_columns(logits);
  const double B = static_cast<double>(x.cols());
  double loss = 0.0;
  for (Eigen::Index j = 0; j < x.cols(); ++j) loss -= std::log(std::max(p(labels[j], j), 1e-300));
  loss /= B;
  if (grad) {
    Eigen::MatrixXd d = p;
    for (Eigen::Index j = 0; j < x.cols(); ++j) d(labels[j], j) -= 1.0;
    d /= B;
    zero_grad();
    backward(d);
    grad->resize(n_params());
    Eigen::Index off = 0;
    for (const ParamBlock& pb : all_params()) {
      grad->segment(off, pb.size) = Eigen::Map<const Eigen::VectorXd>(pb.grad, pb.size);
      off += pb.size;
    }
  }
  return loss;
}

Eigen::MatrixXd Network::probabilities(const Eigen::MatrixXd& x) { return softmax_columns(forward(x, false)); }

Eigen::Index Network::n_params() const {
  Eigen::Index n = 0;
  for (const ParamBlock& p : all_params()) n += p.size;
  return n;
}

Eigen::VectorXd Network::parameters() const {
  Eigen::VectorXd v(n_params());
  Eigen::Index off = 0;
  for (const ParamBlock& p : all_params()) {
    v.segment(off, p.size) = Eigen::Map<const Eigen::VectorXd>(p.value, p.size);
    off += p.size;
  }
  return v;
}

void Network::set_parameters(const Eigen::VectorXd& v) {
  if (v.size() != n_params()) throw ParameterError("parameter vector has the wrong size");
  Eigen::Index off = 0;
  for (const ParamBlock& p : all_params()) {
    Eigen::Map<Eigen::VectorXd>(p.value, p.size) = v.segment(off, p.size);
    off += p.size;
  }
}

Eigen::VectorXd Network::decay_mask() const {
  Eigen::VectorXd m(n_params());
  Eigen::Index off = 0;
  for (const ParamBlock& p : all_params()) {
    m.segment(off, p.size).setConstant(p.decay ? 1.0 : 0.0);
    off += p.size;
  }
  return m;
}

void Network::write(std::ostream& os) const {
  const Eigen::VectorXd p = parameters();
  binio::put_u64(os, static_cast<std::uint64_t>(p.size()));
  for (Eigen::Index i = 0; i < p.size(); ++i) binio::put_f64(os, p[i]);
  for (const auto& l : layers_) {
    for (Eigen::VectorXd* b : l->buffers()) {
      for (Eigen::Index i = 0; i < b->size(); ++i) binio::put_f64(os, (*b)[i]);
    }
  }
}

void Network::read(std::istream& is) {
  const std::uint64_t n = binio::get_u64(is, "network");
  if (n != static_cast<std::uint64_t>(n_params())) throw FormatError("network parameter count mismatch");
  Eigen::VectorXd p(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < p.size(); ++i) p[i] = binio::get_f64(is, "network");
  set_parameters(p);
  for (const auto& l : layers_) {
    for (Eigen::VectorXd* b : l->buffers()) {
      for (Eigen::Index i = 0; i < b->size(); ++i) (*b)[i] = binio::get_f64(is, "network");
    }
  }
}

}  // namespace seabed

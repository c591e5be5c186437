#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <memory>
#include <vector>

#include <Eigen/Dense>

namespace seabed {

// ---------------------------------------------------------------------------
// Adam

struct AdamHyper {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip = std::numeric_limits<double>::infinity();  // global L2 norm
};

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long t = 0;
};

// Scales `grad` down to norm `clip` when it is longer.
void clip_gradient(Eigen::VectorXd& grad, double clip);

// One bias-corrected Adam update of `params`; the gradient is clipped first.
void adam_step(Eigen::VectorXd& params, Eigen::VectorXd grad, AdamState& state, const AdamHyper& hyper);

// ---------------------------------------------------------------------------
// Layers. Activations are (channels * length) x batch matrices; each column
// is one sample, read as a channels x length column-major map.

struct Shape {
  int channels = 1;
  int length = 1;
  int size() const { return channels * length; }
};

struct ParamBlock {
  double* value;
  double* grad;
  Eigen::Index size;
  bool decay;  // weight decay applies
};

class NetworkLayer {
 public:
  virtual ~NetworkLayer() = default;
  virtual Shape output_shape() const = 0;
  virtual void forward(const Eigen::MatrixXd& x, Eigen::MatrixXd& y, bool training) = 0;
  // Accumulates parameter gradients and writes the input gradient.
  virtual void backward(const Eigen::MatrixXd& dy, Eigen::MatrixXd& dx) = 0;
  virtual std::vector<ParamBlock> params() { return {}; }
  // Non-trained state that must be saved (batch-norm running statistics).
  virtual std::vector<Eigen::VectorXd*> buffers() { return {}; }
  virtual std::unique_ptr<NetworkLayer> clone() const = 0;
};

// Network of layers ending in 4 logits, with softmax cross-entropy.
class Network {
 public:
  Network() = default;
  Network(const Network& other);
  Network& operator=(const Network& other);
  Network(Network&&) = default;
  Network& operator=(Network&&) = default;

  // conv(16, w16) / conv(64, w8) / conv(256, w4), each followed by batch-norm,
  // ReLU and max-pool 2; dense 64 with ReLU; dense 4. Needs length >= 8.
  static Network cnn3(int input_length, std::uint64_t seed);
  // `layers` hidden dense layers of `hidden` units with ReLU, then dense 4.
  static Network mlp(int input_dim, int hidden, int layers, std::uint64_t seed);
  static int cnn3_min_length() { return 8; }

  Shape input_shape() const { return input_; }
  int n_outputs() const;

  // x: input_shape().size() x batch. Returns logits (outputs x batch).
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, bool training);
  // Mean softmax cross-entropy over the batch; when `grad` is non-null the
  // parameter gradient (same layout as parameters()) is written there.
  // Runs in training mode.
  double loss(const Eigen::MatrixXd& x, const std::vector<int>& labels, Eigen::VectorXd* grad);
  Eigen::MatrixXd probabilities(const Eigen::MatrixXd& x);

  Eigen::Index n_params() const;
  Eigen::VectorXd parameters() const;
  void set_parameters(const Eigen::VectorXd& p);
  // 1 for entries subject to weight decay.
  Eigen::VectorXd decay_mask() const;

  void write(std::ostream& os) const;  // parameters and buffers only
  void read(std::istream& is);

 private:
  Shape input_;
  std::vector<std::unique_ptr<NetworkLayer>> layers_;

  void backward(const Eigen::MatrixXd& dlogits);
  void zero_grad();
  std::vector<ParamBlock> all_params() const;
};

// Softmax of each column.
Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& logits);

}  // namespace seabed

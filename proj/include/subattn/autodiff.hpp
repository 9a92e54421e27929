#pragma once

#include <Eigen/Core>
#include <functional>
#include <memory>
#include <vector>

namespace subattn::ad {

class Tape;

// Handle to a node on a recording tape. Values are dense 2-D arrays
// (vectors are 1 x n); all storage lives in the tape.
class Tensor {
 public:
  Tensor() = default;

  const Eigen::MatrixXd& value() const;
  const Eigen::MatrixXd& grad() const;
  bool requires_grad() const;
  bool defined() const { return tape_ != nullptr; }
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Tape* tape() const { return tape_; }

 private:
  friend class Tape;
  Tensor(Tape* tape, int id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

// Reverse-mode tape: topologically ordered nodes with backward closures.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Tensor input(Eigen::MatrixXd value, bool requires_grad = false);
  Tensor scalar(double value, bool requires_grad = false);

  // Propagates d(loss)/d(node) into every recorded node; loss must be 1x1.
  // A second call without reset() is an error.
  void backward(const Tensor& loss);
  void reset();  // clears recorded nodes (inputs included)

  size_t size() const { return nodes_.size(); }

  // -- internals used by the op free functions --
  struct Node {
    Eigen::MatrixXd value;
    Eigen::MatrixXd grad;
    bool requires_grad = false;
    std::function<void(Tape&)> backprop;  // empty for leaves/constants
  };
  Node& node(int id) { return nodes_[id]; }
  const Node& node(int id) const { return nodes_[id]; }
  Tensor record(Eigen::MatrixXd value, bool requires_grad,
                std::function<void(Tape&)> backprop);
  void accumulate(int id, const Eigen::MatrixXd& g);
  static int id_of(const Tensor& t) { return t.id_; }
  static Tensor make(Tape* tape, int id) { return Tensor(tape, id); }

 private:
  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

// Elementwise arithmetic (shapes must match).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_const(const Tensor& a, double c);
Tensor mul_const(const Tensor& a, double c);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor transpose(const Tensor& a);

// Adds the 1 x n row vector to every row of the matrix.
Tensor add_rowwise(const Tensor& matrix, const Tensor& row);

Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);   // elementwise ln, inputs must be > 0
Tensor sqrt(const Tensor& a);  // inputs must be >= 0
Tensor pow_const(const Tensor& a, double p);  // inputs must be > 0

// Row-wise softmax; each output row sums to 1.
Tensor softmax_rows(const Tensor& a);

Tensor sum_all(const Tensor& a);   // 1x1
Tensor sum_rows(const Tensor& a);  // column sums, result 1 x cols
Tensor cumsum_rows(const Tensor& a);  // running sum down each column

// Column-wise running max down each column. Detached by default (the
// result does not propagate gradient); with detach = false the gradient
// routes to the first attaining element of each prefix (argmax routing).
Tensor running_max_rows(const Tensor& a, bool detach = true);

// Elementwise max; gradient routes to the larger operand (ties to a).
Tensor cwise_max(const Tensor& a, const Tensor& b);

// Scales every element of a by the 1x1 tensor s.
Tensor scale_by(const Tensor& a, const Tensor& s);

// Stops gradient flow.
Tensor detach(const Tensor& a);

// Rows of `table` selected by ids; backward scatter-adds into the table.
Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids);

// Mean token-level negative log-likelihood of `targets` under row-wise
// softmax of `logits` (one row per position). Returns 1x1.
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& targets);

// Max relative error between the analytic gradient of f at x and central
// finite differences with step eps. f must return a scalar (1x1) tensor.
double grad_check(
    const std::function<Tensor(Tape&, const Tensor&)>& f,
    const Eigen::MatrixXd& x, double eps = 1e-5);

}  // namespace subattn::ad

#include "subattn/autodiff.hpp"

#include <cmath>
#include <stdexcept>

namespace subattn::ad {

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

void check_same_tape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.tape() != b.tape())
    throw std::invalid_argument(std::string(op) +
                                ": operands live on different tapes");
}

}  // namespace

const Eigen::MatrixXd& Tensor::value() const {
  if (!defined()) throw std::logic_error("undefined tensor");
  return tape_->node(id_).value;
}

const Eigen::MatrixXd& Tensor::grad() const {
  if (!defined()) throw std::logic_error("undefined tensor");
  return tape_->node(id_).grad;
}

bool Tensor::requires_grad() const {
  return defined() && tape_->node(id_).requires_grad;
}

Tensor Tape::input(Eigen::MatrixXd value, bool requires_grad) {
  return record(std::move(value), requires_grad, nullptr);
}

Tensor Tape::scalar(double value, bool requires_grad) {
  Eigen::MatrixXd m(1, 1);
  m(0, 0) = value;
  return input(std::move(m), requires_grad);
}

Tensor Tape::record(Eigen::MatrixXd value, bool requires_grad,
                    std::function<void(Tape&)> backprop) {
  Node node;
  node.grad = Eigen::MatrixXd::Zero(value.rows(), value.cols());
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  node.backprop = std::move(backprop);
  nodes_.push_back(std::move(node));
  return Tensor(this, static_cast<int>(nodes_.size()) - 1);
}

void Tape::accumulate(int id, const Eigen::MatrixXd& g) {
  nodes_[id].grad += g;
}

void Tape::backward(const Tensor& loss) {
  if (loss.tape() != this)
    throw std::invalid_argument("loss lives on a different tape");
  if (loss.rows() != 1 || loss.cols() != 1)
    throw std::invalid_argument("backward requires a scalar loss");
  if (backward_done_)
    throw std::logic_error("backward already ran on this tape; reset first");
  backward_done_ = true;

  nodes_[id_of(loss)].grad(0, 0) = 1.0;
  for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
    if (nodes_[i].backprop && nodes_[i].requires_grad) nodes_[i].backprop(*this);
  }
}

void Tape::reset() {
  nodes_.clear();
  backward_done_ = false;
}

Tensor add(const Tensor& a, const Tensor& b) {
  Tape* tape = a.tape();
  check_same_tape(a, b, "add");
  check_same_shape(a, b, "add");
  int ia = Tape::id_of(a), ib = Tape::id_of(b);
  bool rg = a.requires_grad() || b.requires_grad();
  Eigen::MatrixXd value = a.value() + b.value();
  Tensor out;
  out = tape->record(std::move(value), rg, nullptr);
  int io = Tape::id_of(out);
  tape->node(io).backprop = [=](Tape& t) {
    const Eigen::MatrixXd& g = t.node(io).grad;
    if (t.node(ia).requires_grad) t.accumulate(ia, g);
    if (t.node(ib).requires_grad) t.accumulate(ib, g);
  };
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_tape(a, b, "sub");
  check_same_shape(a, b, "sub");
  Tape* tape = a.tape();
  int ia = Tape::id_of(a), ib = Tape::id_of(b);
  Tensor out = tape->record(a.value() - b.value(),
                            a.requires_grad() || b.requires_grad(), nullptr);
  int io = Tape::id_of(out);
  tape->node(io).backprop = [=](Tape& t) {
    const Eigen::MatrixXd& g = t.node(io).grad;
    if (t.node(ia).requires_grad) t.accumulate(ia, g);
    if (t.node(ib).requires_grad) t.accumulate(ib, -g);
  };
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_tape(a, b, "mul");
  check_same_shape(a, b, "mul");
  Tape* tape = a.tape();
  int ia = Tape::id_of(a), ib = Tape::id_of(b);
  Tensor out =
      tape->record(a.value().cwiseProduct(b.value()),
                   a.requires_grad() || b.requires_grad(), nullptr);
  int io = Tape::id_of(out);
  tape->node(io).backprop = [=](Tape& t) {
    const Eigen::MatrixXd& g = t.node(io).grad;
    if (t.node(ia).requires_grad)
      t.accumulate(ia, g.cwiseProduct(t.node(ib).value));
    if (t.node(ib).requires_grad)
      t.accumulate(ib, g.cwiseProduct(t.node(ia).value));
  };
  return out;
}

Tensor add_const(const Tensor& a, double c) {
  Tape* tape = a.tape();
  int ia = Tape::id_of(a);
  Tensor out =
      tape->record(a.value().array() + c, a.requires_grad(), nullptr);
  int io = Tape::id_of(out);
  tape->node(io).backprop = [=](Tape& t) {
    if (t.node(ia).requires_grad) t.accumulate(ia, t.node(io).grad);
  };
  return out;
}

Tensor mul_const(const Tensor& a, double c) {
  Tape* tape = a.tape();
  int ia = Tape::id_of(a);
  Tensor out = tape->record(a.value() * c, a.requires_grad(), nullptr);
  int io = Tape::id_of(out);
  tape->node(io).backprop = [=](Tape& t) {
    if (t.node(ia).requires_grad) t.accumulate(ia, t.node(io).grad * c);
  };
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_same_tape(a, b, "matmul");
  if (a.cols() != b.rows())
    throw std::invalid_argument("matmul: inner dimensions differ");
  Tape* tape = a.tape();
  int ia = Tape::id_of(a), ib = Tape::id_of(b);
  Tensor out = tape->record(a.value() * b.value(),
                            a.requires_grad() || b.requires_grad(), nullptr);
  int io = Tape::id_of(out);
  tape->node(io).backprop = [=](Tape& t) {
    const Eigen::MatrixXd& g = t.node(io).grad;
    if (t.node(ia).requires_grad)
      t.accumulate(ia, g * t.node(ib).value.transpose());
    if (t.node(ib).requires_grad)
      t.accumulate(ib, t.node(ia).value.transpose() * g);
  };
  return out;
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  check_same_tape(a, b, "concat_cols");
  if (a.rows() != b.rows())
    throw std::invalid_argument("concat_cols: row counts differ");
  Tape* tape = a.tape();
  int ia = Tape::id_of(a), ib = Tape::id_of(b);
  Eigen::MatrixXd value(a.rows(), a.cols() + b.cols());
  value << a.value(), b.value();
  Tensor out = tape->record(std::move(value),
                            a.requires_grad() || b.requires_grad(), nullptr);
  int io = Tape::id_of(out);
  Eigen::Index ca = a.cols(), cb = b.cols();
  tape->node(io).backprop = [=](Tape& t) {
    const Eigen::MatrixXd& g = t.node(io).grad;
    if (t.node(ia).requires_grad) t.accumulate(ia, g.leftCols(ca));
    if (t.node(ib).requires_grad) t.accumulate(ib, g.rightCols(cb));
  };
  return out;
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty())
    throw std::invalid_argument("concat_rows: nothing to concatenate");
  Tape* tape = parts[0].tape();
  Eigen::Index cols = parts[0].cols(), rows = 0;
  bool rg = false;
  for (const Tensor& p : parts) {
    if (p.tape() != tape)
      throw std::invalid_argument("concat_rows: mixed tapes");
    if (p.cols() != cols)
      throw std::invalid_argument("concat_rows: column counts differ");
    rows += p.rows();
    rg = rg || p.requires_grad();
  }
  Eigen::MatrixXd value(rows, cols);
  std::vector<int> ids;
  std::vector<Eigen::Index> offsets;
  Eigen::Index at = 0;
  for (const Tensor& p : parts) {
    value.middleRows(at, p.rows()) = p.value();
    ids.push_back(Tape::id_of(p));
    offsets.push_back(at);
    at += p.rows();
  }
  Tensor out = tape->record(std::move(value), rg, nullptr);
  int io = Tape::id_of(out);
  tape->node(io).backprop = [=](Tape& t) {
    const Eigen::MatrixXd& g = t.node(io).grad;
    for (size_t k = 0; k < ids.size(); ++k) {
      if (!t.node(ids[k]).requires_grad) continue;
      t.accumulate(ids[k],
                   g.middleRows(offsets[k], t.node(ids[k]).value.rows()));
    }
  };
  return out;
}

Tensor transpose(const Tensor& a) {
  Tape* tape = a.tape();
  int ia = Tape::id_of(a);
  Tensor out = tape->record(a.value().transpose(), a.requires_grad(), nullptr);
  int io = Tape::id_of(out);
  tape->node(io).backprop = [=](Tape& t) {
    if (t.node(ia).requires_grad)
      t.accumulate(ia, t.node(io).grad.transpose());
  };
  return out;
}

Tensor add_rowwise(const Tensor& matrix, const Tensor& row) {
  check_same_tape(matrix, row, "add_rowwise");
  if (row.rows() != 1 || row.cols() != matrix.cols())
    throw std::invalid_argument("add_rowwise: row must be 1 x cols");
  Tape* tape = matrix.tape();
  int im = Tape::id_of(matrix), ir = Tape::id_of(row);
  Eigen::MatrixXd value = matrix.value();
  value.rowwise() += row.value().row(0);
  Tensor out = tape->record(std::move(value),
                            matrix.requires_grad() || row.requires_grad(),
                            nullptr);
  int io = Tape::id_of(out);
  tape->node(io).backprop = [=](Tape& t) {
    const Eigen::MatrixXd& g = t.node(io).grad;
    if (t.node(im).requires_grad) t.accumulate(im, g);
    if (t.node(ir).requires_grad) t.accumulate(ir, g.colwise().sum());
  };
  return out;
}

namespace {

// Elementwise unary op with derivative expressed from the output value.
Tensor unary_from_output(
    const Tensor& a, Eigen::MatrixXd value,
    std::function<Eigen::MatrixXd(const Eigen::MatrixXd& out_value,
                                  const Eigen::MatrixXd& in_value)>
        dydx) {
  Tape* tape = a.tape();
  int ia = Tape::id_of(a);
  Tensor out = tape->record(std::move(value), a.requires_grad(), nullptr);
  int io = Tape::id_of(out);
  tape->node(io).backprop = [=](Tape& t) {
    if (!t.node(ia).requires_grad) return;
    Eigen::MatrixXd d = dydx(t.node(io).value, t.node(ia).value);
    t.accumulate(ia, t.node(io).grad.cwiseProduct(d));
  };
  return out;
}

}  // namespace

Tensor tanh(const Tensor& a) {
  return unary_from_output(
      a, a.value().array().tanh(),
      [](const Eigen::MatrixXd& y, const Eigen::MatrixXd&) -> Eigen::MatrixXd {
        return 1.0 - y.array().square();
      });
}

Tensor sigmoid(const Tensor& a) {
  Eigen::MatrixXd y = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
  return unary_from_output(
      a, std::move(y),
      [](const Eigen::MatrixXd& y, const Eigen::MatrixXd&) -> Eigen::MatrixXd {
        return (y.array() * (1.0 - y.array())).matrix();
      });
}

Tensor exp(const Tensor& a) {
  return unary_from_output(
      a, a.value().array().exp(),
      [](const Eigen::MatrixXd& y, const Eigen::MatrixXd&) { return y; });
}

Tensor log(const Tensor& a) {
  if ((a.value().array() <= 0.0).any())
    throw std::domain_error("log: inputs must be positive");
  return unary_from_output(
      a, a.value().array().log(),
      [](const Eigen::MatrixXd&, const Eigen::MatrixXd& x) -> Eigen::MatrixXd {
        return x.array().inverse();
      });
}

Tensor sqrt(const Tensor& a) {
  if ((a.value().array() < 0.0).any())
    throw std::domain_error("sqrt: inputs must be non-negative");
  return unary_from_output(
      a, a.value().array().sqrt(),
      [](const Eigen::MatrixXd& y, const Eigen::MatrixXd&) -> Eigen::MatrixXd {
        return 0.5 * y.array().inverse();
      });
}

Tensor pow_const(const Tensor& a, double p) {
  if ((a.value().array() <= 0.0).any())
    throw std::domain_error("pow_const: inputs must be positive");
  return unary_from_output(
      a, a.value().array().pow(p),
      [p](const Eigen::MatrixXd&, const Eigen::MatrixXd& x) -> Eigen::MatrixXd {
        return p * x.array().pow(p - 1.0);
      });
}

Tensor softmax_rows(const Tensor& a) {
  Tape* tape = a.tape();
  int ia = Tape::id_of(a);
  Eigen::MatrixXd y = a.value();
  for (Eigen::Index r = 0; r < y.rows(); ++r) {
    Eigen::ArrayXd row = y.row(r).array();
    row -= row.maxCoeff();
    row = row.exp();
    y.row(r) = row / row.sum();
  }
  Tensor out = tape->record(std::move(y), a.requires_grad(), nullptr);
  int io = Tape::id_of(out);
  tape->node(io).backprop = [=](Tape& t) {
    if (!t.node(ia).requires_grad) return;
    const Eigen::MatrixXd& yv = t.node(io).value;
    const Eigen::MatrixXd& g = t.node(io).grad;
    Eigen::MatrixXd gin(g.rows(), g.cols());
    for (Eigen::Index r = 0; r < g.rows(); ++r) {
      double dot = g.row(r).dot(yv.row(r));
      gin.row(r) = yv.row(r).cwiseProduct(g.row(r).array().matrix() -
                                          Eigen::RowVectorXd::Constant(
                                              g.cols(), dot));
    }
    t.accumulate(ia, gin);
  };
  return out;
}

Tensor sum_all(const Tensor& a) {
  Tape* tape = a.tape();
  int ia = Tape::id_of(a);
  Eigen::MatrixXd v(1, 1);
  v(0, 0) = a.value().sum();
  Tensor out = tape->record(std::move(v), a.requires_grad(), nullptr);
  int io = Tape::id_of(out);
  tape->node(io).backprop = [=](Tape& t) {
    if (!t.node(ia).requires_grad) return;
    const auto& x = t.node(ia).value;
    t.accumulate(ia, Eigen::MatrixXd::Constant(x.rows(), x.cols(),
                                               t.node(io).grad(0, 0)));
  };
  return out;
}

Tensor sum_rows(const Tensor& a) {
  Tape* tape = a.tape();
  int ia = Tape::id_of(a);
  Eigen::MatrixXd v = a.value().colwise().sum();
  Tensor out = tape->record(std::move(v), a.requires_grad(), nullptr);
  int io = Tape::id_of(out);
  tape->node(io).backprop = [=](Tape& t) {
    if (!t.node(ia).requires_grad) return;
    const auto& x = t.node(ia).value;
    t.accumulate(ia, t.node(io).grad.colwise().replicate(x.rows()));
  };
  return out;
}

Tensor cumsum_rows(const Tensor& a) {
  Tape* tape = a.tape();
  int ia = Tape::id_of(a);
  Eigen::MatrixXd v = a.value();
  for (Eigen::Index r = 1; r < v.rows(); ++r) v.row(r) += v.row(r - 1);
  Tensor out = tape->record(std::move(v), a.requires_grad(), nullptr);
  int io = Tape::id_of(out);
  tape->node(io).backprop = [=](Tape& t) {
    if (!t.node(ia).requires_grad) return;
    Eigen::MatrixXd g = t.node(io).grad;
    for (Eigen::Index r = g.rows() - 2; r >= 0; --r) g.row(r) += g.row(r + 1);
    t.accumulate(ia, g);
  };
  return out;
}

Tensor running_max_rows(const Tensor& a, bool detach) {
  Tape* tape = a.tape();
  int ia = Tape::id_of(a);
  Eigen::MatrixXd v = a.value();
  Eigen::MatrixXi argmax(v.rows(), v.cols());
  for (Eigen::Index c = 0; c < v.cols(); ++c) {
    int arg = 0;
    for (Eigen::Index r = 0; r < v.rows(); ++r) {
      if (v(r, c) > v(arg, c)) arg = static_cast<int>(r);
      argmax(r, c) = arg;
      v(r, c) = v(arg, c);
    }
  }
  bool rg = !detach && a.requires_grad();
  Tensor out = tape->record(std::move(v), rg, nullptr);
  int io = Tape::id_of(out);
  if (rg) {
    tape->node(io).backprop = [=](Tape& t) {
      const Eigen::MatrixXd& g = t.node(io).grad;
      Eigen::MatrixXd gin =
          Eigen::MatrixXd::Zero(g.rows(), g.cols());
      for (Eigen::Index c = 0; c < g.cols(); ++c)
        for (Eigen::Index r = 0; r < g.rows(); ++r)
          gin(argmax(r, c), c) += g(r, c);
      t.accumulate(ia, gin);
    };
  }
  return out;
}

Tensor cwise_max(const Tensor& a, const Tensor& b) {
  check_same_tape(a, b, "cwise_max");
  check_same_shape(a, b, "cwise_max");
  Tape* tape = a.tape();
  int ia = Tape::id_of(a), ib = Tape::id_of(b);
  Tensor out = tape->record(a.value().cwiseMax(b.value()),
                            a.requires_grad() || b.requires_grad(), nullptr);
  int io = Tape::id_of(out);
  tape->node(io).backprop = [=](Tape& t) {
    const Eigen::MatrixXd& g = t.node(io).grad;
    const Eigen::MatrixXd& av = t.node(ia).value;
    const Eigen::MatrixXd& bv = t.node(ib).value;
    Eigen::ArrayXXd a_wins = (av.array() >= bv.array()).cast<double>();
    if (t.node(ia).requires_grad)
      t.accumulate(ia, (g.array() * a_wins).matrix());
    if (t.node(ib).requires_grad)
      t.accumulate(ib, (g.array() * (1.0 - a_wins)).matrix());
  };
  return out;
}

Tensor scale_by(const Tensor& a, const Tensor& s) {
  check_same_tape(a, s, "scale_by");
  if (s.rows() != 1 || s.cols() != 1)
    throw std::invalid_argument("scale_by: scale must be 1x1");
  Tape* tape = a.tape();
  int ia = Tape::id_of(a), is = Tape::id_of(s);
  Tensor out = tape->record(a.value() * s.value()(0, 0),
                            a.requires_grad() || s.requires_grad(), nullptr);
  int io = Tape::id_of(out);
  tape->node(io).backprop = [=](Tape& t) {
    const Eigen::MatrixXd& g = t.node(io).grad;
    if (t.node(ia).requires_grad)
      t.accumulate(ia, g * t.node(is).value(0, 0));
    if (t.node(is).requires_grad) {
      Eigen::MatrixXd gs(1, 1);
      gs(0, 0) = g.cwiseProduct(t.node(ia).value).sum();
      t.accumulate(is, gs);
    }
  };
  return out;
}

Tensor detach(const Tensor& a) {
  return a.tape()->record(a.value(), false, nullptr);
}

Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids) {
  Tape* tape = table.tape();
  int it = Tape::id_of(table);
  Eigen::MatrixXd v(static_cast<Eigen::Index>(ids.size()), table.cols());
  for (size_t k = 0; k < ids.size(); ++k) {
    if (ids[k] < 0 || ids[k] >= table.rows())
      throw std::out_of_range("embedding_lookup: id out of range");
    v.row(static_cast<Eigen::Index>(k)) = table.value().row(ids[k]);
  }
  Tensor out = tape->record(std::move(v), table.requires_grad(), nullptr);
  int io = Tape::id_of(out);
  std::vector<int> ids_copy = ids;
  tape->node(io).backprop = [=](Tape& t) {
    if (!t.node(it).requires_grad) return;
    const Eigen::MatrixXd& g = t.node(io).grad;
    Eigen::MatrixXd gin = Eigen::MatrixXd::Zero(t.node(it).value.rows(),
                                                t.node(it).value.cols());
    for (size_t k = 0; k < ids_copy.size(); ++k)
      gin.row(ids_copy[k]) += g.row(static_cast<Eigen::Index>(k));
    t.accumulate(it, gin);
  };
  return out;
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& targets) {
  if (static_cast<Eigen::Index>(targets.size()) != logits.rows())
    throw std::invalid_argument("cross_entropy: one target per logit row");
  Tape* tape = logits.tape();
  int il = Tape::id_of(logits);

  // Stable log-softmax and the softmax probabilities for the backward pass.
  Eigen::MatrixXd probs = logits.value();
  double nll = 0.0;
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    if (targets[r] < 0 || targets[r] >= probs.cols())
      throw std::out_of_range("cross_entropy: target id out of range");
    Eigen::ArrayXd row = probs.row(r).array();
    double mx = row.maxCoeff();
    Eigen::ArrayXd ex = (row - mx).exp();
    double z = ex.sum();
    nll -= (row(targets[r]) - mx) - std::log(z);
    probs.row(r) = ex / z;
  }
  Eigen::MatrixXd v(1, 1);
  const double inv_n = 1.0 / static_cast<double>(targets.size());
  v(0, 0) = nll * inv_n;
  Tensor out = tape->record(std::move(v), logits.requires_grad(), nullptr);
  int io = Tape::id_of(out);
  std::vector<int> tgt = targets;
  tape->node(io).backprop = [=, probs = std::move(probs)](Tape& t) {
    if (!t.node(il).requires_grad) return;
    Eigen::MatrixXd g = probs;
    for (Eigen::Index r = 0; r < g.rows(); ++r) g(r, tgt[r]) -= 1.0;
    t.accumulate(il, g * (t.node(io).grad(0, 0) * inv_n));
  };
  return out;
}

double grad_check(const std::function<Tensor(Tape&, const Tensor&)>& f,
                  const Eigen::MatrixXd& x, double eps) {
  Tape tape;
  Tensor xt = tape.input(x, true);
  Tensor loss = f(tape, xt);
  tape.backward(loss);
  Eigen::MatrixXd analytic = xt.grad();

  double worst = 0.0;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      Eigen::MatrixXd xp = x, xm = x;
      xp(r, c) += eps;
      xm(r, c) -= eps;
      Tape tp, tm;
      double fp = f(tp, tp.input(xp, false)).value()(0, 0);
      double fm = f(tm, tm.input(xm, false)).value()(0, 0);
      double numeric = (fp - fm) / (2.0 * eps);
      double denom = std::max({std::abs(numeric), std::abs(analytic(r, c)),
                               1e-8});
      worst = std::max(worst, std::abs(numeric - analytic(r, c)) / denom);
    }
  }
  return worst;
}

}  // namespace subattn::ad

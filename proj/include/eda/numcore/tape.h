#ifndef EDA_NUMCORE_TAPE_H_
#define EDA_NUMCORE_TAPE_H_

#include <functional>
#include <vector>

#include "eda/numcore/matrix.h"

namespace eda::numcore {

class Tape;

// Handle to a node on a Tape. Copyable; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  // Adjoint after Tape::backward; zero-sized for constants.
  const Matrix& grad() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  // Scalar value of a 1x1 node.
  double item() const;

  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

// Reverse-mode autodiff tape. Nodes are appended in evaluation order, which
// is a topological order, so backward() is a single reverse sweep.
// Single-threaded: one tape per training step.
class Tape {
 public:
  // Receives out_grad (the node's adjoint) and accumulates into parents.
  using Backward = std::function<void(Tape&, const Matrix& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Differentiable input (parameter or checked variable).
  Var leaf(Matrix value);
  Var constant(Matrix value);

  // Appends an op node. requires_grad is inherited from the parents.
  Var push(Matrix value, std::initializer_list<Var> parents, Backward backward);

  // Seeds d(loss)/d(loss) = 1 and sweeps the tape once in reverse.
  // Throws ShapeError unless loss is 1x1.
  void backward(const Var& loss);

  const Matrix& value(int id) const { return nodes_[id].value; }
  const Matrix& grad(int id) const { return nodes_[id].grad; }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  // Adds g into the adjoint of node id if it participates in backprop.
  void accumulate(int id, const Matrix& g);
  // Adds g(r, c) into adjoint entry (r, c); used by sparse ops.
  Matrix* grad_buffer(int id);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    Backward backward;
  };
  std::vector<Node> nodes_;
};

// Differentiable ops. All operands must live on the same tape.
Var matmul(const Var& a, const Var& b);
// a * b^T.
Var matmul_nt(const Var& a, const Var& b);
Var transpose(const Var& a);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
// Adds a 1xC row to every row of a RxC matrix.
Var add_row(const Var& a, const Var& row);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var hadamard(const Var& a, const Var& b);
Var divide(const Var& a, const Var& b);
// Elementwise product with a constant coefficient matrix.
Var mul_const(const Var& a, const Matrix& c);
Var tanh(const Var& a);
Var relu(const Var& a);
Var abs(const Var& a);
Var log(const Var& a);
Var exp(const Var& a);
Var minimum(const Var& a, const Var& b);
Var maximum(const Var& a, const Var& b);
Var softmax_rows(const Var& a);
Var log_softmax_rows(const Var& a);
// Rx1 column of per-row log-sum-exp.
Var logsumexp_rows(const Var& a);
// Divides each row by its Euclidean norm.
Var l2_normalize_rows(const Var& a);
// 1x1 sum of all entries.
Var sum(const Var& a);
Var mean(const Var& a);
// 1x1 sum of c .* a for a constant c of the same shape.
Var weighted_sum(const Var& a, const Matrix& c);
// Rows of table selected by index (repeats allowed).
Var gather_rows(const Var& table, const std::vector<int>& index);
Var concat_rows(const Var& top, const Var& bottom);
Var slice_cols(const Var& a, std::size_t begin, std::size_t count);
// Rx1 product of the columns of a.
Var prod_cols(const Var& a);

}  // namespace eda::numcore

#endif  // EDA_NUMCORE_TAPE_H_

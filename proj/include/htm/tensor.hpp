#pragma once

#include <deque>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace htm {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace ad {

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; only valid while the
/// owning tape is alive.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const;
  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Records a computation over dense matrices for one reverse pass. Nodes are
/// appended in evaluation order, which is a topological order.
class Tape {
 public:
  using Backward = std::function<void(Tape&, const Matrix& grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var parameter(const Matrix& value);

  /// Appends a node. `backward` receives the node's accumulated gradient and
  /// must call accumulate() for each input that needs a gradient.
  Var record(Matrix value, std::initializer_list<Var> inputs, Backward backward);

  /// Reverse sweep from a 1x1 loss node. Throws UsageError otherwise.
  void backward(Var loss);

  const Matrix& value(Var v) const;
  /// Gradient of the last backward() loss with respect to `v`; zeros when
  /// `v` did not influence the loss.
  Matrix grad(Var v) const;
  bool needs_grad(Var v) const;
  void accumulate(Var v, const Matrix& g);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backward backward;
    bool needs_grad = false;
  };
  Node& node(Var v);
  const Node& node(Var v) const;

  std::deque<Node> nodes_;
};

// Elementwise and linear-algebra ops. Binary elementwise ops require equal
// shapes; shape mismatches throw ShapeError.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var matmul(Var a, Var b);
/// a * b^T
Var matmul_nt(Var a, Var b);
/// Adds a 1 x n row vector to every row of a.
Var add_row(Var a, Var row);
Var relu(Var a);
Var tanh(Var a);
Var sigmoid(Var a);
Var exp(Var a);
Var log(Var a);
Var square(Var a);
/// log(1 + exp(a)), computed stably.
Var softplus(Var a);
Var sum(Var a);
Var mean(Var a);
/// Column vector of per-row sums.
Var row_sum(Var a);
/// Column vector of per-row log-sum-exp.
Var log_sum_exp_rows(Var a);
Var column(Var a, Eigen::Index j);
Var concat_cols(Var a, Var b);
/// Slice of columns [begin, begin + count).
Var slice_cols(Var a, Eigen::Index begin, Eigen::Index count);
/// Each row repeated `times` times consecutively.
Var repeat_rows(Var a, Eigen::Index times);
Var reshape(Var a, Eigen::Index rows, Eigen::Index cols);

}  // namespace ad

/// Stable log(sum(exp(x))) over a row.
double log_sum_exp(std::span<const double> x);
bool all_finite(const Matrix& m);

}  // namespace htm

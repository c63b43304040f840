#include "htm/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "htm/errors.hpp"

namespace htm {
namespace ad {

namespace {

std::string shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_same_shape(Var a, Var b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape(a.value()) + " vs " +
                     shape(b.value()));
  }
}

void require_same_tape(Var a, Var b) {
  if (a.tape() != b.tape()) throw UsageError("operands recorded on different tapes");
}

}  // namespace

const Matrix& Var::value() const { return tape_->value(*this); }

double Var::scalar() const {
  const Matrix& v = value();
  if (v.size() != 1) throw ShapeError("scalar() on a " + shape(v) + " node");
  return v(0, 0);
}

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), Matrix(), nullptr, false});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::parameter(const Matrix& value) {
  nodes_.push_back(Node{value, Matrix(), nullptr, true});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::record(Matrix value, std::initializer_list<Var> inputs, Backward backward) {
  bool needs = false;
  for (Var in : inputs) {
    if (in.tape() != this) throw UsageError("input recorded on a different tape");
    needs = needs || node(in).needs_grad;
  }
  nodes_.push_back(Node{std::move(value), Matrix(), needs ? std::move(backward) : nullptr, needs});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Tape::Node& Tape::node(Var v) {
  if (v.tape() != this || v.id() < 0 || static_cast<std::size_t>(v.id()) >= nodes_.size()) {
    throw UsageError("variable does not belong to this tape");
  }
  return nodes_[static_cast<std::size_t>(v.id())];
}

const Tape::Node& Tape::node(Var v) const {
  if (v.tape() != this || v.id() < 0 || static_cast<std::size_t>(v.id()) >= nodes_.size()) {
    throw UsageError("variable does not belong to this tape");
  }
  return nodes_[static_cast<std::size_t>(v.id())];
}

const Matrix& Tape::value(Var v) const { return node(v).value; }

bool Tape::needs_grad(Var v) const { return node(v).needs_grad; }

Matrix Tape::grad(Var v) const {
  const Node& n = node(v);
  if (n.grad.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::accumulate(Var v, const Matrix& g) {
  Node& n = node(v);
  if (!n.needs_grad) return;
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

void Tape::backward(Var loss) {
  const Node& l = node(loss);
  if (l.value.size() != 1) {
    throw UsageError("backward() needs a scalar loss, got " + shape(l.value));
  }
  for (Node& n : nodes_) n.grad.resize(0, 0);
  if (!l.needs_grad) return;
  node(loss).grad = Matrix::Ones(1, 1);
  for (int i = loss.id(); i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.backward || n.grad.size() == 0) continue;
    // Copy: the callback may append to other nodes' gradients only.
    const Matrix g = n.grad;
    n.backward(*this, g);
  }
}

Var add(Var a, Var b) {
  require_same_tape(a, b);
  require_same_shape(a, b, "add");
  return a.tape()->record(a.value() + b.value(), {a, b}, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var sub(Var a, Var b) {
  require_same_tape(a, b);
  require_same_shape(a, b, "sub");
  return a.tape()->record(a.value() - b.value(), {a, b}, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, -g);
  });
}

Var mul(Var a, Var b) {
  require_same_tape(a, b);
  require_same_shape(a, b, "mul");
  return a.tape()->record(a.value().cwiseProduct(b.value()), {a, b},
                          [a, b](Tape& t, const Matrix& g) {
                            if (t.needs_grad(a)) t.accumulate(a, g.cwiseProduct(b.value()));
                            if (t.needs_grad(b)) t.accumulate(b, g.cwiseProduct(a.value()));
                          });
}

Var scale(Var a, double s) {
  return a.tape()->record(a.value() * s, {a}, [a, s](Tape& t, const Matrix& g) {
    t.accumulate(a, g * s);
  });
}

Var add_scalar(Var a, double s) {
  return a.tape()->record(a.value().array() + s, {a},
                          [a](Tape& t, const Matrix& g) { t.accumulate(a, g); });
}

Var matmul(Var a, Var b) {
  require_same_tape(a, b);
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + shape(a.value()) + " * " + shape(b.value()));
  }
  return a.tape()->record(a.value() * b.value(), {a, b}, [a, b](Tape& t, const Matrix& g) {
    if (t.needs_grad(a)) t.accumulate(a, g * b.value().transpose());
    if (t.needs_grad(b)) t.accumulate(b, a.value().transpose() * g);
  });
}

Var matmul_nt(Var a, Var b) {
  require_same_tape(a, b);
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_nt: " + shape(a.value()) + " * (" + shape(b.value()) + ")^T");
  }
  return a.tape()->record(a.value() * b.value().transpose(), {a, b},
                          [a, b](Tape& t, const Matrix& g) {
                            if (t.needs_grad(a)) t.accumulate(a, g * b.value());
                            if (t.needs_grad(b)) t.accumulate(b, g.transpose() * a.value());
                          });
}

Var add_row(Var a, Var row) {
  require_same_tape(a, row);
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw ShapeError("add_row: " + shape(a.value()) + " + row " + shape(row.value()));
  }
  Matrix out = a.value().rowwise() + row.value().row(0);
  return a.tape()->record(std::move(out), {a, row}, [a, row](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    if (t.needs_grad(row)) t.accumulate(row, g.colwise().sum());
  });
}

Var relu(Var a) {
  Matrix out = a.value().cwiseMax(0.0);
  return a.tape()->record(std::move(out), {a}, [a](Tape& t, const Matrix& g) {
    t.accumulate(a, (a.value().array() > 0.0).select(g, 0.0));
  });
}

Var tanh(Var a) {
  Matrix out = a.value().array().tanh().matrix();
  Matrix keep = out;
  return a.tape()->record(std::move(out), {a}, [a, keep = std::move(keep)](Tape& t, const Matrix& g) {
    t.accumulate(a, g.cwiseProduct((1.0 - keep.array().square()).matrix()));
  });
}

Var sigmoid(Var a) {
  Matrix out = a.value().unaryExpr([](double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
  Matrix keep = out;
  return a.tape()->record(std::move(out), {a}, [a, keep = std::move(keep)](Tape& t, const Matrix& g) {
    t.accumulate(a, g.cwiseProduct((keep.array() * (1.0 - keep.array())).matrix()));
  });
}

Var exp(Var a) {
  Matrix out = a.value().array().exp().matrix();
  Matrix keep = out;
  return a.tape()->record(std::move(out), {a}, [a, keep = std::move(keep)](Tape& t, const Matrix& g) {
    t.accumulate(a, g.cwiseProduct(keep));
  });
}

Var log(Var a) {
  return a.tape()->record(a.value().array().log().matrix(), {a}, [a](Tape& t, const Matrix& g) {
    t.accumulate(a, g.cwiseQuotient(a.value()));
  });
}

Var square(Var a) {
  return a.tape()->record(a.value().array().square().matrix(), {a},
                          [a](Tape& t, const Matrix& g) {
                            t.accumulate(a, 2.0 * g.cwiseProduct(a.value()));
                          });
}

Var softplus(Var a) {
  Matrix out = a.value().unaryExpr([](double x) {
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
  });
  return a.tape()->record(std::move(out), {a}, [a](Tape& t, const Matrix& g) {
    const Matrix s = a.value().unaryExpr([](double x) {
      if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
      const double e = std::exp(x);
      return e / (1.0 + e);
    });
    t.accumulate(a, g.cwiseProduct(s));
  });
}

Var sum(Var a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return a.tape()->record(std::move(out), {a}, [a](Tape& t, const Matrix& g) {
    t.accumulate(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0)));
  });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  if (n == 0) throw ShapeError("mean of an empty matrix");
  return scale(sum(a), 1.0 / n);
}

Var row_sum(Var a) {
  Matrix out = a.value().rowwise().sum();
  return a.tape()->record(std::move(out), {a}, [a](Tape& t, const Matrix& g) {
    Matrix full(a.rows(), a.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) full.row(i).setConstant(g(i, 0));
    t.accumulate(a, full);
  });
}

Var log_sum_exp_rows(Var a) {
  const Matrix& x = a.value();
  if (x.cols() == 0) throw ShapeError("log_sum_exp_rows of an empty row");
  Matrix out(x.rows(), 1);
  Matrix softmax(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double m = x.row(i).maxCoeff();
    const auto shifted = (x.row(i).array() - m).exp();
    const double s = shifted.sum();
    out(i, 0) = m + std::log(s);
    softmax.row(i) = shifted / s;
  }
  return a.tape()->record(std::move(out), {a},
                          [a, softmax = std::move(softmax)](Tape& t, const Matrix& g) {
                            Matrix d = softmax;
                            for (Eigen::Index i = 0; i < d.rows(); ++i) d.row(i) *= g(i, 0);
                            t.accumulate(a, d);
                          });
}

Var column(Var a, Eigen::Index j) {
  if (j < 0 || j >= a.cols()) throw ShapeError("column index out of range");
  return a.tape()->record(a.value().col(j), {a}, [a, j](Tape& t, const Matrix& g) {
    Matrix full = Matrix::Zero(a.rows(), a.cols());
    full.col(j) = g.col(0);
    t.accumulate(a, full);
  });
}

Var concat_cols(Var a, Var b) {
  require_same_tape(a, b);
  if (a.rows() != b.rows()) {
    throw ShapeError("concat_cols: " + shape(a.value()) + " | " + shape(b.value()));
  }
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a.value(), b.value();
  const Eigen::Index ca = a.cols();
  const Eigen::Index cb = b.cols();
  return a.tape()->record(std::move(out), {a, b}, [a, b, ca, cb](Tape& t, const Matrix& g) {
    if (t.needs_grad(a)) t.accumulate(a, g.leftCols(ca));
    if (t.needs_grad(b)) t.accumulate(b, g.rightCols(cb));
  });
}

Var slice_cols(Var a, Eigen::Index begin, Eigen::Index count) {
  if (begin < 0 || count < 0 || begin + count > a.cols()) {
    throw ShapeError("slice_cols out of range");
  }
  return a.tape()->record(a.value().middleCols(begin, count), {a},
                          [a, begin, count](Tape& t, const Matrix& g) {
                            Matrix full = Matrix::Zero(a.rows(), a.cols());
                            full.middleCols(begin, count) = g;
                            t.accumulate(a, full);
                          });
}

Var repeat_rows(Var a, Eigen::Index times) {
  if (times <= 0) throw ShapeError("repeat_rows needs a positive count");
  const Matrix& x = a.value();
  Matrix out(x.rows() * times, x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index k = 0; k < times; ++k) out.row(i * times + k) = x.row(i);
  }
  return a.tape()->record(std::move(out), {a}, [a, times](Tape& t, const Matrix& g) {
    Matrix d = Matrix::Zero(a.rows(), a.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      for (Eigen::Index k = 0; k < times; ++k) d.row(i) += g.row(i * times + k);
    }
    t.accumulate(a, d);
  });
}

Var reshape(Var a, Eigen::Index rows, Eigen::Index cols) {
  if (rows * cols != a.value().size()) throw ShapeError("reshape changes element count");
  // Row-major storage makes this a reinterpretation of the same buffer order.
  Matrix out = Eigen::Map<const Matrix>(a.value().data(), rows, cols);
  const Eigen::Index r0 = a.rows();
  const Eigen::Index c0 = a.cols();
  return a.tape()->record(std::move(out), {a}, [a, r0, c0](Tape& t, const Matrix& g) {
    t.accumulate(a, Eigen::Map<const Matrix>(g.data(), r0, c0));
  });
}

}  // namespace ad

double log_sum_exp(std::span<const double> x) {
  if (x.empty()) return -std::numeric_limits<double>::infinity();
  const double m = *std::max_element(x.begin(), x.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double v : x) s += std::exp(v - m);
  return m + std::log(s);
}

bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace htm

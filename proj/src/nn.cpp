#include "htm/nn.hpp"

#include <cmath>

#include "htm/errors.hpp"

namespace htm {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::Relu: return "relu";
    case Activation::Tanh: return "tanh";
    case Activation::Identity: return "identity";
  }
  return "identity";
}

Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::Relu;
  if (s == "tanh") return Activation::Tanh;
  if (s == "identity") return Activation::Identity;
  throw ConfigError("unknown activation '" + s + "'");
}

Eigen::Index MlpParams::input_dim() const {
  return layers.empty() ? 0 : layers.front().weight.cols();
}

Eigen::Index MlpParams::output_dim() const {
  return layers.empty() ? 0 : layers.back().weight.rows();
}

std::vector<int> MlpParams::sizes() const {
  std::vector<int> s;
  if (layers.empty()) return s;
  s.push_back(static_cast<int>(layers.front().weight.cols()));
  for (const auto& l : layers) s.push_back(static_cast<int>(l.weight.rows()));
  return s;
}

std::vector<Matrix*> MlpParams::parameters() {
  std::vector<Matrix*> out;
  for (auto& l : layers) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

std::vector<const Matrix*> MlpParams::parameters() const {
  std::vector<const Matrix*> out;
  for (const auto& l : layers) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

std::vector<int> mlp_sizes(int input, int width, int depth, int output) {
  std::vector<int> s{input};
  for (int i = 0; i < depth; ++i) s.push_back(width);
  s.push_back(output);
  return s;
}

MlpParams make_mlp(std::span<const int> sizes, Activation hidden, Activation output, Rng& rng) {
  if (sizes.size() < 2) throw ShapeError("an MLP needs at least input and output sizes");
  MlpParams p;
  p.hidden = hidden;
  p.output = output;
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    const int in = sizes[i];
    const int out = sizes[i + 1];
    if (in <= 0 || out <= 0) throw ShapeError("MLP layer sizes must be positive");
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    DenseLayer layer;
    layer.weight.resize(out, in);
    for (Eigen::Index r = 0; r < out; ++r) {
      for (Eigen::Index c = 0; c < in; ++c) layer.weight(r, c) = dist(rng);
    }
    layer.bias = Matrix::Zero(1, out);
    p.layers.push_back(std::move(layer));
  }
  return p;
}

Matrix activate(const Matrix& x, Activation a) {
  switch (a) {
    case Activation::Relu: return x.cwiseMax(0.0);
    case Activation::Tanh: return x.array().tanh().matrix();
    case Activation::Identity: return x;
  }
  return x;
}

ad::Var activate(ad::Var x, Activation a) {
  switch (a) {
    case Activation::Relu: return ad::relu(x);
    case Activation::Tanh: return ad::tanh(x);
    case Activation::Identity: return x;
  }
  return x;
}

Matrix mlp_apply(const MlpParams& params, const Matrix& input) {
  if (input.cols() != params.input_dim()) {
    throw ShapeError("mlp input has " + std::to_string(input.cols()) + " columns, expected " +
                     std::to_string(params.input_dim()));
  }
  Matrix x = input;
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const auto& l = params.layers[i];
    Matrix z = x * l.weight.transpose();
    z.rowwise() += l.bias.row(0);
    x = activate(z, i + 1 == params.layers.size() ? params.output : params.hidden);
  }
  return x;
}

MlpVars bind(ad::Tape& tape, const MlpParams& params) {
  MlpVars v;
  v.hidden = params.hidden;
  v.output = params.output;
  for (const auto& l : params.layers) {
    v.weights.push_back(tape.parameter(l.weight));
    v.biases.push_back(tape.parameter(l.bias));
  }
  return v;
}

MlpVars bind(std::span<const ad::Var> vars, const MlpParams& shape) {
  if (vars.size() != 2 * shape.layers.size()) {
    throw ShapeError("bind: expected " + std::to_string(2 * shape.layers.size()) + " variables");
  }
  MlpVars v;
  v.hidden = shape.hidden;
  v.output = shape.output;
  for (std::size_t i = 0; i < shape.layers.size(); ++i) {
    v.weights.push_back(vars[2 * i]);
    v.biases.push_back(vars[2 * i + 1]);
  }
  return v;
}

ad::Var mlp_apply(const MlpVars& vars, ad::Var input) {
  if (vars.weights.empty()) throw ShapeError("empty MLP");
  if (input.cols() != vars.weights.front().cols()) {
    throw ShapeError("mlp input has " + std::to_string(input.cols()) + " columns, expected " +
                     std::to_string(vars.weights.front().cols()));
  }
  ad::Var x = input;
  for (std::size_t i = 0; i < vars.weights.size(); ++i) {
    ad::Var z = ad::add_row(ad::matmul_nt(x, vars.weights[i]), vars.biases[i]);
    x = activate(z, i + 1 == vars.weights.size() ? vars.output : vars.hidden);
  }
  return x;
}

Matrix stack_rows(std::span<const std::vector<double>> rows) {
  if (rows.empty()) return Matrix(0, 0);
  const auto cols = static_cast<Eigen::Index>(rows.front().size());
  Matrix m(static_cast<Eigen::Index>(rows.size()), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (static_cast<Eigen::Index>(rows[i].size()) != cols) throw ShapeError("ragged rows");
    for (Eigen::Index j = 0; j < cols; ++j) m(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
  }
  return m;
}

Matrix row_vector(std::span<const double> v) {
  Matrix m(1, static_cast<Eigen::Index>(v.size()));
  for (std::size_t j = 0; j < v.size(); ++j) m(0, static_cast<Eigen::Index>(j)) = v[j];
  return m;
}

}  // namespace htm

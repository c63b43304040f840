#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "htm/random.hpp"
#include "htm/tensor.hpp"

namespace htm {

enum class Activation { Relu, Tanh, Identity };

std::string to_string(Activation a);
Activation parse_activation(const std::string& s);

struct DenseLayer {
  Matrix weight;  // out x in
  Matrix bias;    // 1 x out
};

/// Fully connected network. Hidden layers use `hidden`, the last layer uses
/// `output`.
struct MlpParams {
  std::vector<DenseLayer> layers;
  Activation hidden = Activation::Relu;
  Activation output = Activation::Identity;

  Eigen::Index input_dim() const;
  Eigen::Index output_dim() const;
  std::vector<int> sizes() const;
  std::vector<Matrix*> parameters();
  std::vector<const Matrix*> parameters() const;
};

/// Uniform fan-in initialization (+-1/sqrt(fan_in)) for weights, zero biases.
MlpParams make_mlp(std::span<const int> sizes, Activation hidden, Activation output, Rng& rng);

/// Layer sizes: input, `depth` hidden layers of `width`, output.
std::vector<int> mlp_sizes(int input, int width, int depth, int output);

/// Row-batched forward pass without recording.
Matrix mlp_apply(const MlpParams& params, const Matrix& input);

/// Tape variables bound to an MlpParams, one weight and bias per layer.
struct MlpVars {
  std::vector<ad::Var> weights;
  std::vector<ad::Var> biases;
  Activation hidden = Activation::Relu;
  Activation output = Activation::Identity;
};

MlpVars bind(ad::Tape& tape, const MlpParams& params);
/// Binds from an explicit list of parameter variables (weights and biases
/// interleaved, as returned by MlpParams::parameters()).
MlpVars bind(std::span<const ad::Var> vars, const MlpParams& shape);
ad::Var mlp_apply(const MlpVars& vars, ad::Var input);

ad::Var activate(ad::Var x, Activation a);
Matrix activate(const Matrix& x, Activation a);

/// Stacks equally sized rows into a matrix.
Matrix stack_rows(std::span<const std::vector<double>> rows);
Matrix row_vector(std::span<const double> v);

}  // namespace htm

#pragma once

// Dense ReLU network with a linear output layer, trained on mean squared
// error. Rows of every input matrix are samples.

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "reluspline/core.hpp"

namespace reluspline {

struct DenseLayer {
  Matrix weight;              // fan_out x fan_in
  std::vector<double> bias;   // fan_out

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

/// A named view of one parameter array, used by the optimizer and by
/// gradient checks to walk every trainable value in a fixed order.
struct ParameterBlock {
  std::string name;
  std::span<double> values;
};

class MlpNetwork {
 public:
  MlpNetwork() = default;
  /// Zero-filled network for `layer_sizes` = {d_in, n_1, ..., n_K, d_out}.
  explicit MlpNetwork(std::vector<std::size_t> layer_sizes);

  const std::vector<std::size_t>& layer_sizes() const { return layer_sizes_; }
  std::size_t input_dim() const { return layer_sizes_.front(); }
  std::size_t output_dim() const { return layer_sizes_.back(); }
  std::size_t hidden_layer_count() const { return layers_.size() - 1; }
  std::size_t parameter_count() const;

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  /// Blocks in the order W1, b1, W2, b2, ...
  std::vector<ParameterBlock> parameter_blocks();

  /// Throws unless shapes match layer_sizes and every value is finite.
  void validate() const;

  friend bool operator==(const MlpNetwork&, const MlpNetwork&) = default;

 private:
  std::vector<std::size_t> layer_sizes_;
  std::vector<DenseLayer> layers_;
};

/// Per-layer activations for a batch. Index l holds layer l+1 (the input is
/// not stored). The last entry is the linear output, where post == pre.
struct ForwardTrace {
  std::vector<Matrix> preactivations;
  std::vector<Matrix> postactivations;

  const Matrix& output() const { return postactivations.back(); }
};

/// Gradients shaped like the network's parameters.
struct MlpGradients {
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;
  double loss = 0.0;

  std::vector<ParameterBlock> parameter_blocks();
};

/// Weights uniform on [-L, L] with L = sqrt(6 / (fan_in + fan_out)); biases
/// exactly zero.
MlpNetwork glorot_uniform_init(const std::vector<std::size_t>& layer_sizes, RngStream& rng);

ForwardTrace forward(const MlpNetwork& net, const Matrix& x);

/// Output only; same arithmetic as forward() without keeping the trace.
Matrix predict(const MlpNetwork& net, const Matrix& x);

/// Mean over samples and output dimensions of the squared difference.
double mse(const Matrix& pred, const Matrix& target);

/// Exact gradient of mse(forward(net, x), target). The ReLU derivative at a
/// preactivation of exactly zero is taken as zero.
MlpGradients backprop(const MlpNetwork& net, const Matrix& x, const Matrix& target);

inline MlpNetwork clone_network(const MlpNetwork& net) { return net; }

// Plain-text format:
//   reluspline-mlp 1
//   layer_sizes d_in n_1 ... d_out
//   one line per parameter block (W1, b1, W2, ...), row-major, %.17g
void save_network(const MlpNetwork& net, std::ostream& os);
MlpNetwork load_network(std::istream& is);
void save_network(const MlpNetwork& net, const std::string& path);
MlpNetwork load_network(const std::string& path);

}  // namespace reluspline

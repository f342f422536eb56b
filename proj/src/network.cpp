#include "reluspline/network.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "reluspline/format.hpp"

namespace reluspline {

namespace {

void require_sizes(const std::vector<std::size_t>& sizes) {
  if (sizes.size() < 2) {
    throw std::invalid_argument("network needs at least an input and an output size");
  }
  for (std::size_t s : sizes) {
    if (s == 0) throw std::invalid_argument("network layer sizes must be >= 1");
  }
}

// out = in * W^T + b, optionally clamped.
void affine(const Matrix& in, const DenseLayer& layer, Matrix& out) {
  const std::size_t fan_out = layer.weight.rows();
  for (std::size_t i = 0; i < in.rows(); ++i) {
    const auto x = in.row(i);
    auto z = out.row(i);
    for (std::size_t j = 0; j < fan_out; ++j) {
      const auto w = layer.weight.row(j);
      double acc = layer.bias[j];
      for (std::size_t k = 0; k < w.size(); ++k) acc += w[k] * x[k];
      z[j] = acc;
    }
  }
}

void require_input(const MlpNetwork& net, const Matrix& x) {
  if (x.cols() != net.input_dim()) {
    throw ShapeError("forward: input is " + x.shape_string() + " but network expects " +
                     std::to_string(net.input_dim()) + " columns");
  }
}

}  // namespace

MlpNetwork::MlpNetwork(std::vector<std::size_t> layer_sizes)
    : layer_sizes_(std::move(layer_sizes)) {
  require_sizes(layer_sizes_);
  layers_.reserve(layer_sizes_.size() - 1);
  for (std::size_t l = 1; l < layer_sizes_.size(); ++l) {
    layers_.push_back({Matrix(layer_sizes_[l], layer_sizes_[l - 1]),
                       std::vector<double>(layer_sizes_[l], 0.0)});
  }
}

std::size_t MlpNetwork::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) n += layer.weight.size() + layer.bias.size();
  return n;
}

std::vector<ParameterBlock> MlpNetwork::parameter_blocks() {
  std::vector<ParameterBlock> blocks;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    blocks.push_back({"W" + std::to_string(l + 1), layers_[l].weight.values()});
    blocks.push_back({"b" + std::to_string(l + 1), layers_[l].bias});
  }
  return blocks;
}

void MlpNetwork::validate() const {
  require_sizes(layer_sizes_);
  if (layers_.size() != layer_sizes_.size() - 1) {
    throw ShapeError("network: layer count does not match layer_sizes");
  }
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (layer.weight.rows() != layer_sizes_[l + 1] || layer.weight.cols() != layer_sizes_[l] ||
        layer.bias.size() != layer_sizes_[l + 1]) {
      throw ShapeError("network: layer " + std::to_string(l + 1) + " has inconsistent shape");
    }
    require_finite(layer.weight.values(), "W" + std::to_string(l + 1));
    require_finite(layer.bias, "b" + std::to_string(l + 1));
  }
}

std::vector<ParameterBlock> MlpGradients::parameter_blocks() {
  std::vector<ParameterBlock> blocks;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    blocks.push_back({"W" + std::to_string(l + 1), weights[l].values()});
    blocks.push_back({"b" + std::to_string(l + 1), biases[l]});
  }
  return blocks;
}

MlpNetwork glorot_uniform_init(const std::vector<std::size_t>& layer_sizes, RngStream& rng) {
  MlpNetwork net(layer_sizes);
  for (auto& layer : net.layers()) {
    const double fan_in = static_cast<double>(layer.weight.cols());
    const double fan_out = static_cast<double>(layer.weight.rows());
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    layer.weight = uniform(rng, -limit, limit, layer.weight.rows(), layer.weight.cols());
  }
  return net;
}

ForwardTrace forward(const MlpNetwork& net, const Matrix& x) {
  require_input(net, x);
  const auto& layers = net.layers();
  ForwardTrace trace;
  trace.preactivations.reserve(layers.size());
  trace.postactivations.reserve(layers.size());
  const Matrix* in = &x;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Matrix z(x.rows(), layers[l].weight.rows());
    affine(*in, layers[l], z);
    trace.preactivations.push_back(z);
    if (l + 1 < layers.size()) {
      for (double& v : z.values()) v = v > 0.0 ? v : 0.0;
    }
    trace.postactivations.push_back(std::move(z));
    in = &trace.postactivations.back();
  }
  return trace;
}

Matrix predict(const MlpNetwork& net, const Matrix& x) {
  require_input(net, x);
  const auto& layers = net.layers();
  Matrix current = x;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Matrix z(x.rows(), layers[l].weight.rows());
    affine(current, layers[l], z);
    if (l + 1 < layers.size()) {
      for (double& v : z.values()) v = v > 0.0 ? v : 0.0;
    }
    current = std::move(z);
  }
  return current;
}

double mse(const Matrix& pred, const Matrix& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw ShapeError("mse: prediction is " + pred.shape_string() + " but target is " +
                     target.shape_string());
  }
  if (pred.empty()) throw ShapeError("mse: empty matrices");
  const auto p = pred.values();
  const auto t = target.values();
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = p[i] - t[i];
    acc += d * d;
  }
  return acc / static_cast<double>(p.size());
}

MlpGradients backprop(const MlpNetwork& net, const Matrix& x, const Matrix& target) {
  const ForwardTrace trace = forward(net, x);
  const Matrix& out = trace.output();
  if (target.rows() != out.rows() || target.cols() != out.cols()) {
    throw ShapeError("backprop: target is " + target.shape_string() + " but output is " +
                     out.shape_string());
  }
  const auto& layers = net.layers();
  MlpGradients grads;
  grads.loss = mse(out, target);
  grads.weights.resize(layers.size());
  grads.biases.resize(layers.size());

  // dL/dz for the output layer.
  const double scale = 2.0 / static_cast<double>(out.size());
  Matrix delta(out.rows(), out.cols());
  {
    const auto o = out.values();
    const auto t = target.values();
    auto d = delta.values();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = scale * (o[i] - t[i]);
  }

  for (std::size_t l = layers.size(); l-- > 0;) {
    const Matrix& in = l == 0 ? x : trace.postactivations[l - 1];
    const auto& layer = layers[l];
    Matrix gw(layer.weight.rows(), layer.weight.cols());
    std::vector<double> gb(layer.bias.size(), 0.0);
    for (std::size_t i = 0; i < delta.rows(); ++i) {
      const auto d = delta.row(i);
      const auto a = in.row(i);
      for (std::size_t j = 0; j < d.size(); ++j) {
        if (d[j] == 0.0) continue;
        gb[j] += d[j];
        auto g = gw.row(j);
        for (std::size_t k = 0; k < a.size(); ++k) g[k] += d[j] * a[k];
      }
    }
    grads.weights[l] = std::move(gw);
    grads.biases[l] = std::move(gb);

    if (l == 0) break;
    const Matrix& pre = trace.preactivations[l - 1];
    Matrix prev(delta.rows(), layer.weight.cols());
    for (std::size_t i = 0; i < delta.rows(); ++i) {
      const auto d = delta.row(i);
      auto p = prev.row(i);
      for (std::size_t j = 0; j < d.size(); ++j) {
        if (d[j] == 0.0) continue;
        const auto w = layer.weight.row(j);
        for (std::size_t k = 0; k < p.size(); ++k) p[k] += d[j] * w[k];
      }
      const auto z = pre.row(i);
      for (std::size_t k = 0; k < p.size(); ++k) {
        if (!(z[k] > 0.0)) p[k] = 0.0;
      }
    }
    delta = std::move(prev);
  }
  return grads;
}

void save_network(const MlpNetwork& net, std::ostream& os) {
  os << "reluspline-mlp 1\n";
  os << "layer_sizes";
  for (std::size_t s : net.layer_sizes()) os << ' ' << s;
  os << '\n';
  auto write_line = [&os](std::span<const double> values) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i > 0) os << ' ';
      os << format_double(values[i]);
    }
    os << '\n';
  };
  for (const auto& layer : net.layers()) {
    write_line(layer.weight.values());
    write_line(layer.bias);
  }
}

MlpNetwork load_network(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "reluspline-mlp 1") {
    throw std::runtime_error("network file: expected header 'reluspline-mlp 1'");
  }
  if (!std::getline(is, line)) throw std::runtime_error("network file: missing layer_sizes");
  std::istringstream sizes_in(line);
  std::string key;
  sizes_in >> key;
  if (key != "layer_sizes") throw std::runtime_error("network file: expected 'layer_sizes'");
  std::vector<std::size_t> sizes;
  long long s = 0;
  while (sizes_in >> s) {
    if (s <= 0) throw std::runtime_error("network file: layer sizes must be positive");
    sizes.push_back(static_cast<std::size_t>(s));
  }
  if (!sizes_in.eof()) throw std::runtime_error("network file: malformed layer_sizes line");
  MlpNetwork net(sizes);
  for (auto& block : net.parameter_blocks()) {
    if (!std::getline(is, line)) {
      throw std::runtime_error("network file: missing values for " + block.name);
    }
    std::istringstream values_in(line);
    std::size_t count = 0;
    std::string token;
    while (values_in >> token) {
      if (count == block.values.size()) {
        throw std::runtime_error("network file: too many values for " + block.name);
      }
      block.values[count++] = parse_double(token);
    }
    if (count != block.values.size()) {
      throw std::runtime_error("network file: too few values for " + block.name);
    }
  }
  net.validate();
  return net;
}

void save_network(const MlpNetwork& net, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write network file " + path);
  save_network(net, os);
}

MlpNetwork load_network(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read network file " + path);
  return load_network(is);
}

}  // namespace reluspline

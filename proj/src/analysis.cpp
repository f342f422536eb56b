#include "reluspline/analysis.hpp"

#include <stdexcept>

namespace reluspline {

std::vector<double> CensusReport::dead_fractions() const {
  std::vector<double> out;
  out.reserve(layers.size());
  for (const auto& layer : layers) out.push_back(layer.dead_fraction);
  return out;
}

CensusReport dead_neuron_census(const MlpNetwork& net, const Matrix& x) {
  if (x.rows() == 0) throw std::invalid_argument("dead_neuron_census: empty dataset");
  return dead_neuron_census(forward(net, x));
}

CensusReport dead_neuron_census(const ForwardTrace& trace) {
  CensusReport report;
  const std::size_t hidden = trace.postactivations.size() - 1;
  for (std::size_t l = 0; l < hidden; ++l) {
    const Matrix& post = trace.postactivations[l];
    if (post.rows() == 0) throw std::invalid_argument("dead_neuron_census: empty dataset");
    std::vector<bool> alive(post.cols(), false);
    for (std::size_t i = 0; i < post.rows(); ++i) {
      const auto row = post.row(i);
      for (std::size_t j = 0; j < row.size(); ++j) {
        if (row[j] != 0.0) alive[j] = true;
      }
    }
    LayerCensus entry;
    entry.layer = l + 1;
    entry.neurons = post.cols();
    for (bool a : alive) entry.dead += a ? 0 : 1;
    entry.dead_fraction = static_cast<double>(entry.dead) / static_cast<double>(entry.neurons);
    report.layers.push_back(entry);
  }
  return report;
}

CsvTable census_csv(const CensusReport& report) {
  CsvTable table({"layer", "neurons", "dead", "frac"});
  for (const auto& l : report.layers) {
    table.add_row({std::to_string(l.layer), std::to_string(l.neurons), std::to_string(l.dead),
                   format_double(l.dead_fraction)});
  }
  return table;
}

double size_metric(const MlpNetwork& net, const Matrix& x) {
  return perfect_fit_reference(predict(net, x));
}

double perfect_fit_reference(const Matrix& y) {
  double acc = 0.0;
  for (double v : y.values()) acc += v * v;
  return acc;
}

std::vector<double> ensemble_mean_function(std::span<const MlpNetwork> nets, const Matrix& grid) {
  if (nets.empty()) throw std::invalid_argument("ensemble_mean_function: empty ensemble");
  if (grid.cols() != 1) throw ShapeError("ensemble_mean_function: grid must be a column");
  std::vector<double> mean(grid.rows(), 0.0);
  for (const auto& net : nets) {
    if (net.input_dim() != 1 || net.output_dim() != 1) {
      throw ShapeError("ensemble_mean_function: every network must be 1-input, 1-output");
    }
    const Matrix out = predict(net, grid);
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += out(i, 0);
  }
  for (double& v : mean) v /= static_cast<double>(nets.size());
  return mean;
}

}  // namespace reluspline

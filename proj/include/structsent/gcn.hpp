#pragma once

// Graph convolution over the dependency tree. The tree is viewed as an
// undirected graph with self-loops; each layer applies the symmetrically
// normalized adjacency D^(-1/2) (A + I) D^(-1/2), a linear map, an optional
// bias, and ReLU.

#include <cmath>
#include <string>
#include <vector>

#include "structsent/corpus.hpp"
#include "structsent/error.hpp"
#include "structsent/tensor.hpp"

namespace structsent {

struct DependencyGraph {
  std::size_t n = 0;
  std::vector<double> adjacency;  // n x n, undirected arcs without self-loops
  std::vector<double> normalized;  // n x n, D^(-1/2) (A + I) D^(-1/2)
};

inline DependencyGraph build_graph(const std::vector<int>& heads) {
  validate_heads(heads, "build_graph");
  const std::size_t n = heads.size();
  DependencyGraph g;
  g.n = n;
  g.adjacency.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (heads[i] < 0) continue;
    const std::size_t h = static_cast<std::size_t>(heads[i]);
    g.adjacency[i * n + h] = 1.0;
    g.adjacency[h * n + i] = 1.0;
  }
  std::vector<double> degree(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double deg = 1.0;  // self-loop
    for (std::size_t j = 0; j < n; ++j) deg += g.adjacency[i * n + j];
    degree[i] = deg;
  }
  g.normalized.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double a = g.adjacency[i * n + j] + (i == j ? 1.0 : 0.0);
      if (a != 0.0) {
        g.normalized[i * n + j] = a / std::sqrt(degree[i] * degree[j]);
      }
    }
  }
  return g;
}

struct GcnStack {
  std::vector<Tensor> weights;  // layer l: d_{l-1} x d_l
  std::vector<Tensor> biases;   // empty when the stack runs without biases
  std::size_t layers() const { return weights.size(); }
};

inline Tensor gcn_forward(const Tensor& h0, const DependencyGraph& graph,
                          const GcnStack& stack) {
  detail::require_defined(h0, "gcn_forward");
  if (h0.rank() != 2 || h0.rows() != graph.n) {
    throw dimension_error("gcn_forward: input shape " + shape_str(h0.shape()) +
                          " does not match graph with " +
                          std::to_string(graph.n) + " nodes");
  }
  if (!stack.biases.empty() && stack.biases.size() != stack.weights.size()) {
    throw dimension_error("gcn_forward: " +
                          std::to_string(stack.biases.size()) + " biases for " +
                          std::to_string(stack.weights.size()) + " layers");
  }
  Tensor norm = Tensor::constant({graph.n, graph.n}, graph.normalized);
  Tensor h = h0;
  for (std::size_t l = 0; l < stack.layers(); ++l) {
    if (h.cols() != stack.weights[l].rows()) {
      throw dimension_error("gcn_forward: layer " + std::to_string(l) +
                            " expects input dim " +
                            std::to_string(stack.weights[l].rows()) + ", got " +
                            std::to_string(h.cols()));
    }
    Tensor mixed = matmul(matmul(norm, h), stack.weights[l]);
    if (!stack.biases.empty()) {
      mixed = add_row_bias(mixed, stack.biases[l]);
    }
    h = activation(mixed, Activation::Relu);
  }
  return h;
}

}  // namespace structsent

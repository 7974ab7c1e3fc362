#pragma once

// Reverse-mode automatic differentiation over dense row-major tensors of
// doubles, plus the Adam optimizer. Every operation appends a record holding
// the input references and a backward rule; backward() replays the records in
// reverse topological order and accumulates gradients.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "structsent/error.hpp"

namespace structsent {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream out;
  out << "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out << ",";
    out << s[i];
  }
  out << ")";
  return out.str();
}

enum class Activation { Tanh, Relu, Sigmoid };

// Probabilities entering a cross-entropy are clamped to
// [kProbClamp, 1 - kProbClamp] so the loss stays finite at 0 and 1.
inline constexpr double kProbClamp = 1e-7;

class Tensor {
 public:
  // One record of the computation graph: the operation identifier, the input
  // references, the cached forward values, and the accumulated gradient.
  struct Node {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;  // accumulated across backward() calls
    bool requires_grad = false;
    const char* op = "constant";
    std::vector<std::shared_ptr<Node>> inputs;
    // Adds d(loss)/d(input) into the per-call buffers handed out by sink,
    // given d(loss)/d(output) in out_grad.
    std::function<void(
        const std::vector<double>& out_grad,
        const std::function<std::vector<double>&(Node*)>& sink)>
        backward;
  };

  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}

  static Tensor constant(Shape shape, std::vector<double> values) {
    return make(std::move(shape), std::move(values), false);
  }

  static Tensor constant(Shape shape, double fill) {
    std::vector<double> v(shape_size(shape), fill);
    return make(std::move(shape), std::move(v), false);
  }

  static Tensor scalar(double v) { return constant(Shape{1}, {v}); }

  // Gradient-carrying leaf; the unit the optimizer updates in place.
  static Tensor parameter(Shape shape, std::vector<double> values) {
    return make(std::move(shape), std::move(values), true);
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t size() const { return node_->values.size(); }
  std::size_t rank() const { return node_->shape.size(); }

  std::size_t rows() const {
    require_rank2("rows");
    return node_->shape[0];
  }

  std::size_t cols() const {
    require_rank2("cols");
    return node_->shape[1];
  }

  const std::vector<double>& values() const { return node_->values; }

  // In-place update of leaf storage (optimizer steps, finite differencing).
  std::vector<double>& values_mut() { return node_->values; }

  double value() const {
    if (size() != 1) {
      throw contract_error("value: tensor of shape " + shape_str(shape()) +
                           " is not a scalar");
    }
    return node_->values[0];
  }

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return !node_->grad.empty(); }

  const std::vector<double>& grad() const {
    if (!has_grad()) {
      throw contract_error("grad: no gradient accumulated for this tensor");
    }
    return node_->grad;
  }

  void zero_grad() { node_->grad.clear(); }

  const char* op() const { return node_->op; }
  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  static Tensor make(Shape shape, std::vector<double> values, bool needs_grad) {
    if (shape_size(shape) != values.size()) {
      throw dimension_error("tensor: shape " + shape_str(shape) + " expects " +
                            std::to_string(shape_size(shape)) +
                            " values, got " + std::to_string(values.size()));
    }
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->values = std::move(values);
    n->requires_grad = needs_grad;
    n->op = needs_grad ? "parameter" : "constant";
    return Tensor(std::move(n));
  }

  void require_rank2(const char* who) const {
    if (rank() != 2) {
      throw dimension_error(std::string(who) + ": tensor of shape " +
                            shape_str(shape()) + " is not rank 2");
    }
  }

  std::shared_ptr<Node> node_;
};

using GradSink = std::function<std::vector<double>&(Tensor::Node*)>;

namespace detail {

inline Tensor record(Shape shape, std::vector<double> values, const char* op,
                     std::vector<Tensor> inputs,
                     std::function<void(const std::vector<double>&,
                                        const GradSink&)>
                         backward) {
  auto n = std::make_shared<Tensor::Node>();
  n->shape = std::move(shape);
  n->values = std::move(values);
  n->op = op;
  bool needs_grad = false;
  n->inputs.reserve(inputs.size());
  for (const Tensor& t : inputs) {
    needs_grad = needs_grad || t.requires_grad();
    n->inputs.push_back(t.node());
  }
  n->requires_grad = needs_grad;
  if (needs_grad) n->backward = std::move(backward);
  return Tensor(std::move(n));
}

inline void require_defined(const Tensor& t, const char* who) {
  if (!t.defined()) {
    throw contract_error(std::string(who) + ": undefined tensor");
  }
}

inline void require_same_shape(const Tensor& a, const Tensor& b,
                               const char* who) {
  if (a.shape() != b.shape()) {
    throw dimension_error(std::string(who) + ": shape mismatch " +
                          shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) {
  detail::require_defined(a, "add");
  detail::require_defined(b, "add");
  detail::require_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = a.values()[i] + b.values()[i];
  }
  auto an = a.node();
  auto bn = b.node();
  return detail::record(
      a.shape(), std::move(out), "add", {a, b},
      [an, bn](const std::vector<double>& g, const GradSink& sink) {
        if (an->requires_grad) {
          auto& ga = sink(an.get());
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (bn->requires_grad) {
          auto& gb = sink(bn.get());
          for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
        }
      });
}

// Elementwise (Hadamard) product.
inline Tensor mul(const Tensor& a, const Tensor& b) {
  detail::require_defined(a, "mul");
  detail::require_defined(b, "mul");
  detail::require_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = a.values()[i] * b.values()[i];
  }
  auto an = a.node();
  auto bn = b.node();
  return detail::record(
      a.shape(), std::move(out), "mul", {a, b},
      [an, bn](const std::vector<double>& g, const GradSink& sink) {
        if (an->requires_grad) {
          auto& ga = sink(an.get());
          for (std::size_t i = 0; i < g.size(); ++i) {
            ga[i] += g[i] * bn->values[i];
          }
        }
        if (bn->requires_grad) {
          auto& gb = sink(bn.get());
          for (std::size_t i = 0; i < g.size(); ++i) {
            gb[i] += g[i] * an->values[i];
          }
        }
      });
}

inline Tensor scale(const Tensor& a, double c) {
  detail::require_defined(a, "scale");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = c * a.values()[i];
  auto an = a.node();
  return detail::record(
      a.shape(), std::move(out), "scale", {a},
      [an, c](const std::vector<double>& g, const GradSink& sink) {
        auto& ga = sink(an.get());
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += c * g[i];
      });
}

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  detail::require_defined(a, "matmul");
  detail::require_defined(b, "matmul");
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) {
    throw dimension_error("matmul: incompatible shapes " +
                          shape_str(a.shape()) + " vs " +
                          shape_str(b.shape()));
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a.values()[i * k + p];
      for (std::size_t j = 0; j < n; ++j) {
        out[i * n + j] += av * b.values()[p * n + j];
      }
    }
  }
  auto an = a.node();
  auto bn = b.node();
  return detail::record(
      Shape{m, n}, std::move(out), "matmul", {a, b},
      [an, bn, m, k, n](const std::vector<double>& g, const GradSink& sink) {
        if (an->requires_grad) {
          // a.grad += g . b^T
          auto& ga = sink(an.get());
          for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t p = 0; p < k; ++p) {
              double acc = 0.0;
              for (std::size_t j = 0; j < n; ++j) {
                acc += g[i * n + j] * bn->values[p * n + j];
              }
              ga[i * k + p] += acc;
            }
          }
        }
        if (bn->requires_grad) {
          // b.grad += a^T . g
          auto& gb = sink(bn.get());
          for (std::size_t p = 0; p < k; ++p) {
            for (std::size_t j = 0; j < n; ++j) {
              double acc = 0.0;
              for (std::size_t i = 0; i < m; ++i) {
                acc += an->values[i * k + p] * g[i * n + j];
              }
              gb[p * n + j] += acc;
            }
          }
        }
      });
}

inline Tensor activation(const Tensor& x, Activation kind) {
  detail::require_defined(x, "activation");
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = x.values()[i];
    switch (kind) {
      case Activation::Tanh:
        out[i] = std::tanh(v);
        break;
      case Activation::Relu:
        out[i] = v > 0.0 ? v : 0.0;
        break;
      case Activation::Sigmoid:
        out[i] = 1.0 / (1.0 + std::exp(-v));
        break;
    }
  }
  auto xn = x.node();
  std::vector<double> y = out;
  return detail::record(
      x.shape(), std::move(out), "activation", {x},
      [xn, kind, y = std::move(y)](const std::vector<double>& g,
                                   const GradSink& sink) {
        auto& gx = sink(xn.get());
        for (std::size_t i = 0; i < g.size(); ++i) {
          double d = 0.0;
          switch (kind) {
            case Activation::Tanh:
              d = 1.0 - y[i] * y[i];
              break;
            case Activation::Relu:
              d = xn->values[i] > 0.0 ? 1.0 : 0.0;
              break;
            case Activation::Sigmoid:
              d = y[i] * (1.0 - y[i]);
              break;
          }
          gx[i] += d * g[i];
        }
      });
}

// Softmax along one axis, stabilized by subtracting the slice maximum.
inline Tensor softmax(const Tensor& x, std::size_t axis) {
  detail::require_defined(x, "softmax");
  if (axis >= x.rank()) {
    throw dimension_error("softmax: axis " + std::to_string(axis) +
                          " out of range for shape " + shape_str(x.shape()));
  }
  const Shape& s = x.shape();
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t len = s[axis];
  std::vector<double> out(x.size());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * len * inner + in;
      double mx = x.values()[base];
      for (std::size_t t = 1; t < len; ++t) {
        mx = std::max(mx, x.values()[base + t * inner]);
      }
      double total = 0.0;
      for (std::size_t t = 0; t < len; ++t) {
        const double e = std::exp(x.values()[base + t * inner] - mx);
        out[base + t * inner] = e;
        total += e;
      }
      for (std::size_t t = 0; t < len; ++t) out[base + t * inner] /= total;
    }
  }
  auto xn = x.node();
  std::vector<double> y = out;
  return detail::record(
      x.shape(), std::move(out), "softmax", {x},
      [xn, outer, inner, len, y = std::move(y)](const std::vector<double>& g,
                                                const GradSink& sink) {
        auto& gx = sink(xn.get());
        for (std::size_t o = 0; o < outer; ++o) {
          for (std::size_t in = 0; in < inner; ++in) {
            const std::size_t base = o * len * inner + in;
            double dot = 0.0;
            for (std::size_t t = 0; t < len; ++t) {
              const std::size_t idx = base + t * inner;
              dot += g[idx] * y[idx];
            }
            for (std::size_t t = 0; t < len; ++t) {
              const std::size_t idx = base + t * inner;
              gx[idx] += y[idx] * (g[idx] - dot);
            }
          }
        }
      });
}

// Column-wise max over the token axis: [n x d] -> [d]. Ties route the
// gradient to the first (lowest-index) maximizing row.
inline Tensor max_pool_tokens(const Tensor& h) {
  detail::require_defined(h, "max_pool_tokens");
  if (h.rank() != 2) {
    throw dimension_error("max_pool_tokens: expected rank 2, got shape " +
                          shape_str(h.shape()));
  }
  const std::size_t n = h.rows(), d = h.cols();
  if (n == 0) {
    throw empty_input_error("max_pool_tokens: empty token axis");
  }
  std::vector<double> out(d);
  std::vector<std::size_t> argmax(d, 0);
  for (std::size_t j = 0; j < d; ++j) {
    double best = h.values()[j];
    std::size_t at = 0;
    for (std::size_t i = 1; i < n; ++i) {
      const double v = h.values()[i * d + j];
      if (v > best) {
        best = v;
        at = i;
      }
    }
    out[j] = best;
    argmax[j] = at;
  }
  auto hn = h.node();
  return detail::record(
      Shape{d}, std::move(out), "max_pool_tokens", {h},
      [hn, d, argmax = std::move(argmax)](const std::vector<double>& g,
                                          const GradSink& sink) {
        auto& gh = sink(hn.get());
        for (std::size_t j = 0; j < d; ++j) {
          gh[argmax[j] * d + j] += g[j];
        }
      });
}

inline Tensor sum(const Tensor& x) {
  detail::require_defined(x, "sum");
  double total = 0.0;
  for (double v : x.values()) total += v;
  auto xn = x.node();
  return detail::record(
      Shape{1}, {total}, "sum", {x},
      [xn](const std::vector<double>& g, const GradSink& sink) {
        auto& gx = sink(xn.get());
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[0];
      });
}

inline Tensor reshape(const Tensor& x, Shape shape) {
  detail::require_defined(x, "reshape");
  if (shape_size(shape) != x.size()) {
    throw dimension_error("reshape: cannot view shape " +
                          shape_str(x.shape()) + " as " + shape_str(shape));
  }
  auto xn = x.node();
  return detail::record(
      std::move(shape), x.values(), "reshape", {x},
      [xn](const std::vector<double>& g, const GradSink& sink) {
        auto& gx = sink(xn.get());
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
      });
}

// Row i of a rank-2 tensor as a [d] vector.
inline Tensor row(const Tensor& h, std::size_t i) {
  detail::require_defined(h, "row");
  if (h.rank() != 2 || i >= h.rows()) {
    throw dimension_error("row: index " + std::to_string(i) +
                          " out of range for shape " + shape_str(h.shape()));
  }
  const std::size_t d = h.cols();
  std::vector<double> out(h.values().begin() + i * d,
                          h.values().begin() + (i + 1) * d);
  auto hn = h.node();
  return detail::record(
      Shape{d}, std::move(out), "row", {h},
      [hn, i, d](const std::vector<double>& g, const GradSink& sink) {
        auto& gh = sink(hn.get());
        for (std::size_t j = 0; j < d; ++j) gh[i * d + j] += g[j];
      });
}

// Column j of a rank-2 tensor as an [n x 1] matrix.
inline Tensor col(const Tensor& h, std::size_t j) {
  detail::require_defined(h, "col");
  if (h.rank() != 2 || j >= h.cols()) {
    throw dimension_error("col: index " + std::to_string(j) +
                          " out of range for shape " + shape_str(h.shape()));
  }
  const std::size_t n = h.rows(), d = h.cols();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = h.values()[i * d + j];
  auto hn = h.node();
  return detail::record(
      Shape{n, 1}, std::move(out), "col", {h},
      [hn, j, n, d](const std::vector<double>& g, const GradSink& sink) {
        auto& gh = sink(hn.get());
        for (std::size_t i = 0; i < n; ++i) gh[i * d + j] += g[i];
      });
}

// Repeats a [d] vector as every row of an [n x d] matrix.
inline Tensor tile_rows(const Tensor& v, std::size_t n) {
  detail::require_defined(v, "tile_rows");
  if (v.rank() != 1) {
    throw dimension_error("tile_rows: expected rank 1, got shape " +
                          shape_str(v.shape()));
  }
  const std::size_t d = v.size();
  std::vector<double> out(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(v.values().begin(), v.values().end(), out.begin() + i * d);
  }
  auto vn = v.node();
  return detail::record(
      Shape{n, d}, std::move(out), "tile_rows", {v},
      [vn, n, d](const std::vector<double>& g, const GradSink& sink) {
        auto& gv = sink(vn.get());
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < d; ++j) gv[j] += g[i * d + j];
        }
      });
}

// Concatenates rank-2 tensors with equal row counts along the column axis.
inline Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) {
    throw empty_input_error("concat_cols: no tensors given");
  }
  for (const Tensor& t : parts) detail::require_defined(t, "concat_cols");
  const std::size_t n = parts.front().rows();
  std::size_t total = 0;
  for (const Tensor& t : parts) {
    if (t.rank() != 2 || t.rows() != n) {
      throw dimension_error("concat_cols: shape " + shape_str(t.shape()) +
                            " does not match " +
                            shape_str(parts.front().shape()) + " on rows");
    }
    total += t.cols();
  }
  std::vector<double> out(n * total);
  std::size_t offset = 0;
  std::vector<std::size_t> offsets;
  std::vector<std::size_t> widths;
  for (const Tensor& t : parts) {
    const std::size_t d = t.cols();
    offsets.push_back(offset);
    widths.push_back(d);
    for (std::size_t i = 0; i < n; ++i) {
      std::copy(t.values().begin() + i * d, t.values().begin() + (i + 1) * d,
                out.begin() + i * total + offset);
    }
    offset += d;
  }
  std::vector<std::shared_ptr<Tensor::Node>> nodes;
  for (const Tensor& t : parts) nodes.push_back(t.node());
  return detail::record(
      Shape{n, total}, std::move(out), "concat_cols", parts,
      [nodes, offsets, widths, n, total](const std::vector<double>& g,
                                         const GradSink& sink) {
        for (std::size_t p = 0; p < nodes.size(); ++p) {
          if (!nodes[p]->requires_grad) continue;
          auto& gp = sink(nodes[p].get());
          const std::size_t d = widths[p], off = offsets[p];
          for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < d; ++j) {
              gp[i * d + j] += g[i * total + off + j];
            }
          }
        }
      });
}

// Adds a [d] bias vector to every row of an [n x d] matrix.
inline Tensor add_row_bias(const Tensor& m, const Tensor& b) {
  detail::require_defined(m, "add_row_bias");
  detail::require_defined(b, "add_row_bias");
  if (m.rank() != 2 || b.rank() != 1 || b.size() != m.cols()) {
    throw dimension_error("add_row_bias: shape " + shape_str(m.shape()) +
                          " with bias " + shape_str(b.shape()));
  }
  const std::size_t n = m.rows(), d = m.cols();
  std::vector<double> out(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      out[i * d + j] = m.values()[i * d + j] + b.values()[j];
    }
  }
  auto mn = m.node();
  auto bn = b.node();
  return detail::record(
      m.shape(), std::move(out), "add_row_bias", {m, b},
      [mn, bn, n, d](const std::vector<double>& g, const GradSink& sink) {
        if (mn->requires_grad) {
          auto& gm = sink(mn.get());
          for (std::size_t i = 0; i < g.size(); ++i) gm[i] += g[i];
        }
        if (bn->requires_grad) {
          auto& gb = sink(bn.get());
          for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < d; ++j) gb[j] += g[i * d + j];
          }
        }
      });
}

// Multiplies row i of an [n x d] matrix by entry i of an [n x 1] column.
inline Tensor scale_rows(const Tensor& m, const Tensor& c) {
  detail::require_defined(m, "scale_rows");
  detail::require_defined(c, "scale_rows");
  if (m.rank() != 2 || c.rank() != 2 || c.cols() != 1 ||
      c.rows() != m.rows()) {
    throw dimension_error("scale_rows: shape " + shape_str(m.shape()) +
                          " with scale " + shape_str(c.shape()));
  }
  const std::size_t n = m.rows(), d = m.cols();
  std::vector<double> out(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      out[i * d + j] = m.values()[i * d + j] * c.values()[i];
    }
  }
  auto mn = m.node();
  auto cn = c.node();
  return detail::record(
      m.shape(), std::move(out), "scale_rows", {m, c},
      [mn, cn, n, d](const std::vector<double>& g, const GradSink& sink) {
        if (mn->requires_grad) {
          auto& gm = sink(mn.get());
          for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < d; ++j) {
              gm[i * d + j] += g[i * d + j] * cn->values[i];
            }
          }
        }
        if (cn->requires_grad) {
          auto& gc = sink(cn.get());
          for (std::size_t i = 0; i < n; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
              acc += g[i * d + j] * mn->values[i * d + j];
            }
            gc[i] += acc;
          }
        }
      });
}

inline double clamp_prob(double p) {
  return std::min(1.0 - kProbClamp, std::max(kProbClamp, p));
}

// Sum of elementwise binary cross-entropies -[y ln p + (1-y) ln(1-p)], with
// predictions clamped away from 0 and 1. Labels must be exactly 0 or 1.
inline Tensor binary_cross_entropy(const Tensor& pred,
                                   const std::vector<double>& labels) {
  detail::require_defined(pred, "binary_cross_entropy");
  if (labels.size() != pred.size()) {
    throw dimension_error("binary_cross_entropy: " +
                          std::to_string(labels.size()) + " labels for shape " +
                          shape_str(pred.shape()));
  }
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double y = labels[i];
    if (y != 0.0 && y != 1.0) {
      throw label_error("binary_cross_entropy: label " + std::to_string(y) +
                        " at index " + std::to_string(i) + " is not 0 or 1");
    }
    const double p = clamp_prob(pred.values()[i]);
    total -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
  }
  auto pn = pred.node();
  return detail::record(
      Shape{1}, {total}, "binary_cross_entropy", {pred},
      [pn, labels](const std::vector<double>& g, const GradSink& sink) {
        auto& gp = sink(pn.get());
        for (std::size_t i = 0; i < labels.size(); ++i) {
          const double p = pn->values[i];
          // The clamp has zero slope outside [kProbClamp, 1 - kProbClamp].
          if (p < kProbClamp || p > 1.0 - kProbClamp) continue;
          gp[i] += g[0] * (p - labels[i]) / (p * (1.0 - p));
        }
      });
}

// -ln p[label] on an already-normalized distribution (rank 1, or rank 2 with
// a single row), clamped like the binary form.
inline Tensor categorical_cross_entropy(const Tensor& probs,
                                        std::size_t label) {
  detail::require_defined(probs, "categorical_cross_entropy");
  std::size_t classes = 0;
  if (probs.rank() == 1) {
    classes = probs.size();
  } else if (probs.rank() == 2 && probs.rows() == 1) {
    classes = probs.cols();
  } else {
    throw dimension_error(
        "categorical_cross_entropy: expected a distribution, got shape " +
        shape_str(probs.shape()));
  }
  if (label >= classes) {
    throw label_error("categorical_cross_entropy: label " +
                      std::to_string(label) + " out of range for " +
                      std::to_string(classes) + " classes");
  }
  const double p = clamp_prob(probs.values()[label]);
  auto pn = probs.node();
  return detail::record(
      Shape{1}, {-std::log(p)}, "categorical_cross_entropy", {probs},
      [pn, label](const std::vector<double>& g, const GradSink& sink) {
        auto& gp = sink(pn.get());
        const double p = pn->values[label];
        if (p < kProbClamp || p > 1.0 - kProbClamp) return;
        gp[label] += -g[0] / p;
      });
}

// Reverse pass from a scalar loss. Gradients accumulate into every reachable
// requires_grad node; repeated calls without zero_grad() keep accumulating.
inline void backward(const Tensor& loss) {
  detail::require_defined(loss, "backward");
  if (loss.size() != 1) {
    throw contract_error("backward: loss must be a scalar, got shape " +
                         shape_str(loss.shape()));
  }
  Tensor::Node* root = loss.node().get();
  if (!root->requires_grad) return;

  // Depth-first post-order over the requires_grad subgraph; reversed, it is a
  // valid topological order with every consumer ahead of its inputs.
  std::vector<Tensor::Node*> order;
  std::unordered_set<Tensor::Node*> visited{root};
  std::vector<std::pair<Tensor::Node*, std::size_t>> stack{{root, 0}};
  while (!stack.empty()) {
    auto& top = stack.back();
    if (top.second < top.first->inputs.size()) {
      Tensor::Node* in = top.first->inputs[top.second++].get();
      if (in->requires_grad && visited.insert(in).second) {
        stack.emplace_back(in, 0);
      }
    } else {
      order.push_back(top.first);
      stack.pop_back();
    }
  }

  std::unordered_map<Tensor::Node*, std::vector<double>> flowing;
  flowing[root] = {1.0};
  GradSink sink = [&flowing](Tensor::Node* n) -> std::vector<double>& {
    auto& buf = flowing[n];
    if (buf.empty()) buf.assign(shape_size(n->shape), 0.0);
    return buf;
  };
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Tensor::Node* n = *it;
    auto found = flowing.find(n);
    if (found == flowing.end() || !n->backward) continue;
    n->backward(found->second, sink);
  }
  for (auto& [n, g] : flowing) {
    if (n->grad.empty()) {
      n->grad = std::move(g);
    } else {
      for (std::size_t i = 0; i < g.size(); ++i) n->grad[i] += g[i];
    }
  }
}

// Adam with bias correction over a fixed set of named parameters. step()
// consumes and clears the accumulated gradients.
class Adam {
 public:
  explicit Adam(std::vector<std::pair<std::string, Tensor>> params,
                double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                double epsilon = 1e-8)
      : params_(std::move(params)),
        lr_(learning_rate),
        beta1_(beta1),
        beta2_(beta2),
        eps_(epsilon) {
    m_.resize(params_.size());
    v_.resize(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i) {
      m_[i].assign(params_[i].second.size(), 0.0);
      v_[i].assign(params_[i].second.size(), 0.0);
    }
  }

  void step() {
    for (const auto& [name, p] : params_) {
      if (!p.has_grad()) {
        throw optimizer_error("adam: parameter '" + name +
                              "' has no accumulated gradient");
      }
    }
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Tensor p = params_[i].second;
      const std::vector<double>& g = p.grad();
      std::vector<double>& vals = p.values_mut();
      for (std::size_t j = 0; j < vals.size(); ++j) {
        m_[i][j] = beta1_ * m_[i][j] + (1.0 - beta1_) * g[j];
        v_[i][j] = beta2_ * v_[i][j] + (1.0 - beta2_) * g[j] * g[j];
        const double mhat = m_[i][j] / c1;
        const double vhat = v_[i][j] / c2;
        vals[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
      }
    }
    for (auto& [name, p] : params_) p.zero_grad();
  }

  std::size_t step_count() const { return t_; }
  double learning_rate() const { return lr_; }

 private:
  std::vector<std::pair<std::string, Tensor>> params_;
  std::vector<std::vector<double>> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
};

}  // namespace structsent

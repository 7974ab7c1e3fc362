// Walks the reverse-mode engine through a small graph, compares one analytic
// gradient against central differences, and shows the adversarial direction
// derived from a gradient.

#include <cstdio>

#include "structsent/structsent.hpp"

using namespace structsent;

int main() {
  // y = sum(relu(x W + b)); every node records into the graph of x, W, b.
  Tensor x = Tensor::parameter({2, 3}, {0.5, -1.0, 2.0, 1.5, 0.25, -0.75});
  Tensor W = Tensor::parameter({3, 3}, {0.1, 0.2, -0.3, 0.4, -0.5, 0.6,
                                        0.7, 0.8, -0.9});
  Tensor b = Tensor::parameter({3}, {0.05, -0.05, 0.1});

  Tensor y = sum(activation(add_row_bias(matmul(x, W), b), Activation::Relu));
  backward(y);

  std::printf("loss %.6f\n", y.value());
  std::printf("dL/dW[0] analytic  %.10f\n", W.grad()[0]);

  // central difference on the same entry
  const double step = 1e-6;
  const double saved = W.values()[0];
  auto eval = [&]() {
    return sum(activation(add_row_bias(matmul(x, W), b), Activation::Relu)).value();
  };
  W.values_mut()[0] = saved + step;
  const double up = eval();
  W.values_mut()[0] = saved - step;
  const double down = eval();
  W.values_mut()[0] = saved;
  std::printf("dL/dW[0] numeric   %.10f\n", (up - down) / (2.0 * step));

  // the input gradient, rescaled onto an epsilon sphere, is the direction
  // adversarial training perturbs the fused embeddings along
  Tensor g = Tensor::constant({2, 3}, x.grad());
  Tensor r = adversarial_perturbation(g, 0.05);
  double norm2 = 0.0;
  for (double v : r.values()) norm2 += v * v;
  std::printf("perturbation norm  %.10f (epsilon 0.05)\n", std::sqrt(norm2));
  return 0;
}

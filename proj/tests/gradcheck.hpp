#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "berrystack/nnkernel.hpp"
#include "oracles.hpp"

namespace gradcheck {

using berrystack::Tensor;
using namespace berrystack::nn;

struct Case {
  Network net;
  std::vector<std::vector<double>> xs;
  std::vector<double> ys;
};

// Random small head: 1-3 hidden layers, sigmoid output, occasionally a frozen
// first layer. Redrawn while any ReLU pre-activation sits within 1e-3 of the
// kink, where a finite difference of step 1e-5 would straddle it.
inline Case random_case(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> width(1, 6), depth(1, 3), batch(1, 5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::bernoulli_distribution coin(0.3);
  while (true) {
    Case c;
    std::size_t in = static_cast<std::size_t>(width(rng)) + 1;
    const std::size_t input_width = in;
    const int hidden = depth(rng);
    for (int l = 0; l < hidden; ++l) {
      const auto out = static_cast<std::size_t>(width(rng));
      Activation act = coin(rng) ? Activation::none : Activation::relu;
      if (l > 0 && coin(rng)) act = Activation::sigmoid;
      DenseLayer layer = DenseLayer::zeros(in, out, act);
      for (double& w : layer.weights.values()) w = u(rng);
      for (double& b : layer.bias.values()) b = 0.5 * u(rng);
      layer.frozen = l == 0 && hidden > 1 && coin(rng);
      c.net.layers.push_back(std::move(layer));
      in = out;
    }
    DenseLayer head = DenseLayer::zeros(in, 1, Activation::sigmoid);
    for (double& w : head.weights.values()) w = u(rng);
    head.bias[0] = 0.5 * u(rng);
    c.net.layers.push_back(std::move(head));

    const int n = batch(rng);
    std::bernoulli_distribution label(0.5);
    for (int s = 0; s < n; ++s) {
      std::vector<double> x(input_width);
      for (double& v : x) v = u(rng);
      c.xs.push_back(std::move(x));
      c.ys.push_back(label(rng) ? 1.0 : 0.0);
    }

    bool near_kink = false;
    for (const auto& x : c.xs) {
      ForwardCache cache;
      forward(c.net, Tensor({x.size()}, x), &cache);
      for (std::size_t l = 0; l < c.net.layers.size(); ++l) {
        if (c.net.layers[l].activation != Activation::relu) continue;
        for (double z : cache.layers[l].pre_activation.values()) {
          if (std::abs(z) < 1e-3) near_kink = true;
        }
      }
    }
    if (!near_kink) return c;
  }
}

inline Tensor stack(const std::vector<std::vector<double>>& xs) {
  std::vector<double> flat;
  for (const auto& x : xs) flat.insert(flat.end(), x.begin(), x.end());
  return Tensor({xs.size(), xs.front().size()}, flat);
}

// Largest relative error between analytic and finite-difference gradients.
inline double max_relative_error(const Case& c) {
  ForwardCache cache;
  forward(c.net, stack(c.xs), &cache);
  const Gradients g = backward(c.net, cache, c.ys);
  std::vector<double> analytic;
  for (std::size_t l = 0; l < c.net.layers.size(); ++l) {
    if (!g.layers[l]) continue;
    for (double v : g.layers[l]->weights.values()) analytic.push_back(v);
    for (double v : g.layers[l]->bias.values()) analytic.push_back(v);
  }
  const auto numeric = oracle::finite_difference_gradient(c.net, c.xs, c.ys, 1e-5);
  if (numeric.size() != analytic.size()) return INFINITY;
  double worst = 0.0;
  for (std::size_t i = 0; i < numeric.size(); ++i) {
    worst = std::max(worst, oracle::relative_error(analytic[i], numeric[i]));
  }
  return worst;
}

}  // namespace gradcheck

#pragma once

// Shared scaffolding for layer and model tests: random parameter
// perturbation and Jacobians of layers as maps on a single example.

#include <cmath>
#include <random>

#include "flowforge/flows.hpp"
#include "flowforge/model.hpp"
#include "oracles.hpp"

namespace testing {

using namespace flowforge;

/// Adds N(0, scale²) noise to every trainable parameter and marks actnorm
/// layers initialized so later forwards do not overwrite the noise.
inline void perturb(std::vector<Parameter*> params, std::mt19937_64& rng, double scale = 0.1) {
  std::normal_distribution<double> nd(0.0, scale);
  for (Parameter* p : params) {
    if (p->name.ends_with(".initialized")) {
      p->value[0] = 1.0;
      continue;
    }
    if (!p->trainable) continue;
    for (auto& v : p->value.data()) v += nd(rng);
    p->bump();
  }
}

/// Forward map of a layer on one (c, h, w) example in raster order.
inline std::function<std::vector<double>(const std::vector<double>&)> raster_map(Layer& layer, std::size_t c,
                                                                                 std::size_t h, std::size_t w) {
  return [&layer, c, h, w](const std::vector<double>& v) {
    return vectorize(layer.apply(unvectorize(v, c, h, w), Direction::Forward).y);
  };
}

/// log|det| of the Jacobian of a linear layer, from its action on basis vectors.
inline double linear_logdet(Layer& layer, std::size_t c, std::size_t h, std::size_t w) {
  return lu_slogdet(oracle::basis_matrix(raster_map(layer, c, h, w), c * h * w)).logabsdet;
}

/// log|det| of a central-difference Jacobian at x.
inline double fd_logdet(Layer& layer, const Tensor4& x) {
  return lu_slogdet(oracle::fd_jacobian(raster_map(layer, x.c(), x.h(), x.w()), vectorize(x))).logabsdet;
}

inline RMatrix matrix_of(const Tensor4& t) {
  return RMatrix(t.h(), t.w(), std::vector<double>(t.data().begin(), t.data().end()));
}

}  // namespace testing

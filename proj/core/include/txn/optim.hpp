#pragma once

#include <cstdint>
#include <vector>

#include "txn/tensor.hpp"

namespace txn {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moment estimates mirroring a parameter list.
template <typename T>
struct AdamState {
  AdamConfig config;
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;
  std::int64_t step = 0;

  static AdamState for_params(const std::vector<Tensor<T>>& params, AdamConfig config = {});
};

/// One bias-corrected Adam update using each parameter's accumulated grad:
///   m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2,
///   theta <- theta - lr * m_hat / (sqrt(v_hat) + eps).
template <typename T>
void adam_step(std::vector<Tensor<T>>& params, AdamState<T>& state, double lr);

/// Same update with explicit gradients (one span per parameter).
template <typename T>
void adam_step(std::vector<Tensor<T>>& params, const std::vector<std::vector<T>>& grads,
               AdamState<T>& state, double lr);

/// Step schedule: lr0 until `first_decay`, then multiplied by `factor` at
/// `first_decay` and every `every` iterations after it.
struct LrSchedule {
  double lr0 = 0.1;
  double factor = 0.7;
  std::int64_t first_decay = 1000;
  std::int64_t every = 200;

  double at(std::int64_t iteration) const;
};

}  // namespace txn

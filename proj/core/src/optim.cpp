#include "txn/optim.hpp"

#include <cmath>

#include "txn/error.hpp"

namespace txn {
namespace {

template <typename T>
void update(Tensor<T>& p, std::span<const T> g, std::vector<T>& m, std::vector<T>& v,
            const AdamConfig& cfg, double lr, double c1, double c2) {
  auto theta = p.mutable_data();
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double gi = static_cast<double>(g[i]);
    const double mi = cfg.beta1 * static_cast<double>(m[i]) + (1.0 - cfg.beta1) * gi;
    const double vi = cfg.beta2 * static_cast<double>(v[i]) + (1.0 - cfg.beta2) * gi * gi;
    m[i] = static_cast<T>(mi);
    v[i] = static_cast<T>(vi);
    const double m_hat = mi / c1;
    const double v_hat = vi / c2;
    theta[i] = static_cast<T>(static_cast<double>(theta[i]) - lr * m_hat / (std::sqrt(v_hat) + cfg.eps));
  }
}

template <typename T>
void check_layout(const std::vector<Tensor<T>>& params, const AdamState<T>& state) {
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ShapeError("adam: state tracks " + std::to_string(state.m.size()) + " tensors, got " +
                     std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto n = static_cast<std::size_t>(params[i].numel());
    if (state.m[i].size() != n || state.v[i].size() != n) {
      throw ShapeError("adam: moment size mismatch for parameter " + std::to_string(i) + " of shape " +
                       shape_string(params[i].shape()));
    }
  }
}

}  // namespace

template <typename T>
AdamState<T> AdamState<T>::for_params(const std::vector<Tensor<T>>& params, AdamConfig config) {
  AdamState s;
  s.config = config;
  for (const auto& p : params) {
    s.m.emplace_back(static_cast<std::size_t>(p.numel()), T{0});
    s.v.emplace_back(static_cast<std::size_t>(p.numel()), T{0});
  }
  return s;
}

template <typename T>
void adam_step(std::vector<Tensor<T>>& params, AdamState<T>& state, double lr) {
  check_layout(params, state);
  ++state.step;
  const double c1 = 1.0 - std::pow(state.config.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.config.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].requires_grad()) throw Error("adam: parameter without gradient slot");
    update(params[i], params[i].grad(), state.m[i], state.v[i], state.config, lr, c1, c2);
  }
}

template <typename T>
void adam_step(std::vector<Tensor<T>>& params, const std::vector<std::vector<T>>& grads,
               AdamState<T>& state, double lr) {
  check_layout(params, state);
  if (grads.size() != params.size()) {
    throw ShapeError("adam: " + std::to_string(grads.size()) + " gradients for " +
                     std::to_string(params.size()) + " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].size() != static_cast<std::size_t>(params[i].numel())) {
      throw ShapeError("adam: gradient size mismatch for parameter of shape " +
                       shape_string(params[i].shape()));
    }
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(state.config.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.config.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    update(params[i], std::span<const T>(grads[i]), state.m[i], state.v[i], state.config, lr, c1, c2);
  }
}

double LrSchedule::at(std::int64_t iteration) const {
  if (iteration < first_decay) return lr0;
  const std::int64_t drops = 1 + (iteration - first_decay) / every;
  return lr0 * std::pow(factor, static_cast<double>(drops));
}

template struct AdamState<float>;
template struct AdamState<double>;
template void adam_step<float>(std::vector<Tensor<float>>&, AdamState<float>&, double);
template void adam_step<double>(std::vector<Tensor<double>>&, AdamState<double>&, double);
template void adam_step<float>(std::vector<Tensor<float>>&, const std::vector<std::vector<float>>&,
                               AdamState<float>&, double);
template void adam_step<double>(std::vector<Tensor<double>>&,
                                const std::vector<std::vector<double>>&, AdamState<double>&, double);

}  // namespace txn

#include "txn/preimage.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <nlohmann/json.hpp>

#include "txn/error.hpp"
#include "txn/ops.hpp"
#include "txn/random.hpp"

namespace txn {
namespace {

using Clock = std::chrono::steady_clock;

double millis_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

template <typename T>
Tensor<T> objective(const Tensor<T>& x, const GramSet<T>& target, const DescriptorNet<T>& net,
                    const LossSpec& spec, const FeatureMaps<T>* content_features) {
  const FeatureMaps<T> fx = net.forward(x);
  Tensor<T> loss = texture_loss(fx, target, spec);
  if (content_features != nullptr) {
    loss = add(loss, scale(content_loss(fx, *content_features, spec), static_cast<T>(spec.alpha)));
  }
  return loss;
}

}  // namespace

void PreimageConfig::validate() const {
  if (max_iters < 0) throw ConfigError("max_iters must be >= 0");
  if (!(lr > 0.0)) throw ConfigError("pixel learning rate must be > 0");
  if (init_sigma < 0.0) throw ConfigError("init sigma must be >= 0");
}

template <typename T>
PreimageResult<T> synthesize_iterative(const Tensor<T>& prototype, const DescriptorNet<T>& net,
                                       const LossSpec& spec, const PreimageConfig& cfg,
                                       const Tensor<T>* content, const Tensor<T>* init) {
  cfg.validate();
  spec.validate(net);
  if (prototype.rank() != 4 || prototype.dim(0) != 1 || prototype.dim(1) != 3) {
    throw ShapeError("prototype must be [1,3,H,W], got " + shape_string(prototype.shape()));
  }
  const Shape shape = content != nullptr ? content->shape() : prototype.shape();
  if (content != nullptr && (content->rank() != 4 || content->dim(0) != 1 || content->dim(1) != 3)) {
    throw ShapeError("content must be [1,3,H,W], got " + shape_string(content->shape()));
  }
  const auto start = Clock::now();
  const GramSet<T> target = compute_grams(net, prototype, spec);
  FeatureMaps<T> content_features;
  if (content != nullptr) {
    NoGradGuard no_grad;
    content_features = net.forward(*content);
  }

  Tensor<T> x;
  if (init != nullptr) {
    if (init->shape() != shape) {
      throw ShapeError("init image " + shape_string(init->shape()) + " vs expected " + shape_string(shape));
    }
    x = Tensor<T>::from_data(shape, std::vector<T>(init->data().begin(), init->data().end()), true);
  } else {
    Rng rng(cfg.seed);
    std::vector<T> values(static_cast<std::size_t>(shape_numel(shape)));
    for (auto& v : values) v = static_cast<T>(cfg.init_mean + cfg.init_sigma * rng.normal());
    x = Tensor<T>::from_data(shape, std::move(values), true);
  }
  std::vector<Tensor<T>> pixels{x};
  AdamState<T> adam = AdamState<T>::for_params(pixels, cfg.adam);

  PreimageResult<T> result;
  result.best_loss = std::numeric_limits<double>::infinity();
  for (std::int64_t it = 0;; ++it) {
    const Tensor<T> loss = objective(x, target, net, spec, content != nullptr ? &content_features : nullptr);
    const double value = static_cast<double>(loss.item());
    if (!std::isfinite(value)) {
      throw NumericError("iterative synthesis diverged at iteration " + std::to_string(it));
    }
    if (value < result.best_loss) {
      result.best_loss = value;
      result.image = x.detach();
    }
    const double now = millis_since(start);
    result.trace.push_back({it, value, result.best_loss, now});
    if (cfg.target_loss && value <= *cfg.target_loss) {
      result.reached_target = true;
      result.millis_to_target = now;
      break;
    }
    if (it >= cfg.max_iters) {
      result.millis_to_target = now;
      break;
    }
    zero_grad(pixels);
    backward(loss);
    adam_step(pixels, adam, cfg.lr);
  }
  if (!cfg.trace_path.empty()) write_preimage_csv(result.trace, cfg.trace_path);
  return result;
}

void write_preimage_csv(const std::vector<PreimageStep>& trace, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open trace file '" + path + "'");
  out << "iteration,loss,millis\n" << std::setprecision(9);
  for (const auto& s : trace) out << s.iteration << ',' << s.loss << ',' << s.millis << '\n';
  if (!out) throw IoError("write to '" + path + "' failed");
}

std::string SpeedReport::to_json() const {
  nlohmann::json j;
  j["feedforward_loss"] = feedforward_loss;
  j["feedforward_millis"] = feedforward_millis;
  j["feedforward_samples"] = feedforward_samples;
  j["iterative_initial_loss"] = iterative_initial_loss;
  j["iterative_best_loss"] = iterative_best_loss;
  j["iterative_millis_to_match"] = iterative_millis_to_match;
  j["iterative_iterations"] = iterative_iterations;
  j["matched"] = matched;
  j["ratio"] = ratio;
  j["ratio_is_lower_bound"] = !matched;
  return j.dump(2);
}

template <typename T>
SpeedReport match_loss_time(GeneratorParams<T>& params, const Tensor<T>& prototype,
                            const DescriptorNet<T>& net, const LossSpec& spec,
                            PreimageConfig iterative, std::int64_t samples, std::uint64_t seed,
                            const Tensor<T>* content) {
  if (samples < 8) throw ConfigError("speed comparison needs at least 8 feed-forward samples");
  const bool style = params.arch.mode == GeneratorMode::kStyle;
  if (style != (content != nullptr)) {
    throw ModeError("content image must be given exactly for style generators");
  }
  const bool was_training = params.training();
  params.set_training(false);
  const GramSet<T> target = compute_grams(net, prototype, spec);
  FeatureMaps<T> content_features;
  if (content != nullptr) {
    NoGradGuard no_grad;
    content_features = net.forward(*content);
  }

  SpeedReport report;
  report.feedforward_samples = samples;
  Rng rng(seed);
  double loss_sum = 0.0;
  double ff_millis = 0.0;
  {
    NoGradGuard no_grad;
    for (std::int64_t s = 0; s < samples; ++s) {
      const NoiseStack<T> z = sample_noise<T>(prototype.dim(2), prototype.dim(3), params.arch.scales(),
                                              1, T{1}, rng.next());
      const auto t0 = Clock::now();
      const Tensor<T> x = params.forward(z, content);
      ff_millis += millis_since(t0);
      loss_sum += static_cast<double>(
          objective(x, target, net, spec, content != nullptr ? &content_features : nullptr).item());
    }
  }
  params.set_training(was_training);
  report.feedforward_loss = loss_sum / static_cast<double>(samples);
  report.feedforward_millis = ff_millis / static_cast<double>(samples);

  iterative.target_loss = report.feedforward_loss;
  const PreimageResult<T> run = synthesize_iterative(prototype, net, spec, iterative, content);
  report.iterative_initial_loss = run.trace.front().loss;
  report.iterative_best_loss = run.best_loss;
  report.iterative_iterations = run.trace.back().iteration;
  report.iterative_millis_to_match = run.millis_to_target;
  report.matched = run.reached_target;
  report.ratio = report.iterative_millis_to_match / std::max(report.feedforward_millis, 1e-9);
  return report;
}

#define TXN_INSTANTIATE_PREIMAGE(T)                                                             \
  template PreimageResult<T> synthesize_iterative<T>(const Tensor<T>&, const DescriptorNet<T>&, \
                                                     const LossSpec&, const PreimageConfig&,    \
                                                     const Tensor<T>*, const Tensor<T>*);       \
  template SpeedReport match_loss_time<T>(GeneratorParams<T>&, const Tensor<T>&,                \
                                          const DescriptorNet<T>&, const LossSpec&,             \
                                          PreimageConfig, std::int64_t, std::uint64_t,          \
                                          const Tensor<T>*);

TXN_INSTANTIATE_PREIMAGE(float)
TXN_INSTANTIATE_PREIMAGE(double)

#undef TXN_INSTANTIATE_PREIMAGE

}  // namespace txn

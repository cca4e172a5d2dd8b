#include "txn/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "txn/error.hpp"
#include "txn/ops.hpp"
#include "txn/random.hpp"

namespace txn {
namespace {

template <typename T>
void check_image(const char* what, const Tensor<T>& img, const GeneratorArch& arch) {
  if (img.rank() != 4 || img.dim(0) != 1 || img.dim(1) != 3) {
    throw ShapeError(std::string(what) + " must be [1,3,H,W], got " + shape_string(img.shape()));
  }
  if (img.dim(2) % arch.divisor() != 0 || img.dim(3) % arch.divisor() != 0) {
    throw ShapeError(std::string(what) + " extent " + shape_string(img.shape()) +
                     " not divisible by 2^" + std::to_string(arch.scales() - 1));
  }
}

class CsvSink {
 public:
  explicit CsvSink(const std::string& path) {
    if (path.empty()) return;
    out_.open(path, std::ios::trunc);
    if (!out_) throw IoError("cannot open loss log '" + path + "'");
    out_ << "iteration,lr,texture_loss,content_loss,diversity\n";
  }
  void row(const TrainRecord& r) {
    if (!out_.is_open()) return;
    out_ << std::setprecision(9) << r.iteration << ',' << r.lr << ',' << r.texture_loss << ','
         << r.content_loss << ',';
    if (r.diversity) out_ << *r.diversity;
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

template <typename T>
TrainResult<T> run_training(const Tensor<T>& prototype, const std::vector<Tensor<T>>* pool,
                            GeneratorParams<T> params, const DescriptorNet<T>& net,
                            const LossSpec& spec, const TrainConfig& cfg) {
  cfg.validate();
  net.validate();
  spec.validate(net);
  const GeneratorArch arch = params.arch;
  const bool style = arch.mode == GeneratorMode::kStyle;
  check_image("prototype", prototype, arch);
  if (style) {
    if (pool == nullptr || pool->empty()) throw ConfigError("style training needs a content pool");
    for (const auto& y : *pool) {
      check_image("content image", y, arch);
      if (y.shape() != prototype.shape()) {
        throw ShapeError("content image " + shape_string(y.shape()) + " does not match prototype " +
                         shape_string(prototype.shape()));
      }
    }
  } else if (pool != nullptr) {
    throw ModeError("texture training does not take a content pool");
  }
  const Index height = prototype.dim(2);
  const Index width = prototype.dim(3);
  const GramSet<T> target = compute_grams(net, prototype, spec);

  TrainResult<T> result{std::move(params), {}, {}};
  GeneratorParams<T>& gen = result.params;
  gen.set_training(true);
  std::vector<Tensor<T>> theta = gen.parameters();
  AdamState<T> adam = AdamState<T>::for_params(theta, cfg.adam);
  CsvSink csv(cfg.loss_log_path);
  Rng master(cfg.seed);
  std::optional<double> diversity_ref;
  bool warned = false;

  for (std::int64_t it = 0; it < cfg.iterations; ++it) {
    TrainRecord rec;
    rec.iteration = it;
    rec.lr = cfg.schedule.at(it);
    const NoiseStack<T> z = sample_noise<T>(height, width, arch.scales(), cfg.batch,
                                            static_cast<T>(cfg.noise_scale), master.next());
    Tensor<T> y;
    if (style) {
      std::vector<Tensor<T>> picks;
      for (std::int64_t b = 0; b < cfg.batch; ++b) {
        picks.push_back((*pool)[static_cast<std::size_t>(master.below(pool->size()))]);
      }
      y = concat_batch(picks);
    }
    const Tensor<T> x = gen.forward(z, style ? &y : nullptr);
    const FeatureMaps<T> fx = net.forward(x);
    const Tensor<T> tl = texture_loss(fx, target, spec);
    Tensor<T> loss = tl;
    if (style) {
      FeatureMaps<T> fy;
      {
        NoGradGuard no_grad;
        fy = net.forward(y);
      }
      const Tensor<T> cl = content_loss(fx, fy, spec);
      rec.content_loss = static_cast<double>(cl.item());
      loss = add(tl, scale(cl, static_cast<T>(spec.alpha)));
    }
    rec.texture_loss = static_cast<double>(tl.item());
    if (!std::isfinite(static_cast<double>(loss.item()))) {
      throw NumericError("training diverged at iteration " + std::to_string(it) +
                         " (texture loss " + std::to_string(rec.texture_loss) + ", content loss " +
                         std::to_string(rec.content_loss) + ")");
    }
    zero_grad(theta);
    backward(loss);
    adam_step(theta, adam, rec.lr);

    if (cfg.diversity_every > 0 && (it + 1) % cfg.diversity_every == 0) {
      const Tensor<T>* content = style ? &pool->front() : nullptr;
      rec.diversity = diversity_metric(gen, cfg.diversity_samples, cfg.seed ^ 0x9e3779b97f4a7c15ULL,
                                       height, width, cfg.noise_scale, content);
      if (!diversity_ref && it + 1 >= 100) diversity_ref = rec.diversity;
      if (diversity_ref && !warned && *rec.diversity < 0.2 * *diversity_ref) {
        warned = true;
        result.warnings.push_back("sample diversity fell to " + std::to_string(*rec.diversity) +
                                  " at iteration " + std::to_string(it) + " (reference " +
                                  std::to_string(*diversity_ref) + "); generator may be collapsing");
      }
    }
    if (cfg.checkpoint_every > 0 && (it + 1) % cfg.checkpoint_every == 0) {
      save_params(gen, cfg.checkpoint_path);
    }
    csv.row(rec);
    result.trace.push_back(rec);
  }
  gen.set_training(false);
  return result;
}

}  // namespace

void TrainConfig::validate() const {
  if (iterations < 0) throw ConfigError("iterations must be >= 0");
  if (batch < 1) throw ConfigError("batch size must be >= 1");
  if (!(schedule.lr0 > 0.0)) throw ConfigError("initial learning rate must be > 0");
  if (!(schedule.factor > 0.0) || schedule.every < 1) throw ConfigError("invalid learning-rate schedule");
  if (noise_scale < 0.0) throw ConfigError("noise scale must be >= 0");
  if (checkpoint_every > 0 && checkpoint_path.empty()) {
    throw ConfigError("checkpoint_every needs a checkpoint path");
  }
  if (diversity_every > 0 && diversity_samples < 2) {
    throw ConfigError("diversity needs at least 2 samples");
  }
}

template <typename T>
TrainResult<T> train_texture(const Tensor<T>& prototype, const GeneratorArch& arch,
                             const DescriptorNet<T>& net, const LossSpec& spec,
                             const TrainConfig& cfg) {
  if (arch.mode != GeneratorMode::kTexture) throw ModeError("train_texture needs a texture architecture");
  return run_training<T>(prototype, nullptr, GeneratorParams<T>::init(arch, cfg.seed), net, spec, cfg);
}

template <typename T>
TrainResult<T> train_texture(const Tensor<T>& prototype, GeneratorParams<T> init,
                             const DescriptorNet<T>& net, const LossSpec& spec,
                             const TrainConfig& cfg) {
  if (init.arch.mode != GeneratorMode::kTexture) throw ModeError("train_texture needs texture parameters");
  return run_training<T>(prototype, nullptr, std::move(init), net, spec, cfg);
}

template <typename T>
TrainResult<T> train_style(const Tensor<T>& prototype, const std::vector<Tensor<T>>& content_pool,
                           const GeneratorArch& arch, const DescriptorNet<T>& net,
                           const LossSpec& spec, const TrainConfig& cfg) {
  if (arch.mode != GeneratorMode::kStyle) throw ModeError("train_style needs a style architecture");
  if (spec.alpha < 0.0) throw ConfigError("content weight alpha must be >= 0");
  if (content_pool.empty()) throw ConfigError("style training needs a non-empty content pool");
  return run_training<T>(prototype, &content_pool, GeneratorParams<T>::init(arch, cfg.seed), net,
                         spec, cfg);
}

template <typename T>
double diversity_metric(GeneratorParams<T>& params, std::int64_t n, std::uint64_t seed,
                        Index height, Index width, double noise_scale, const Tensor<T>* content) {
  if (n < 2) throw ConfigError("diversity needs at least 2 samples");
  const bool was_training = params.training();
  params.set_training(false);
  NoGradGuard no_grad;
  const NoiseStack<T> z =
      sample_noise<T>(height, width, params.arch.scales(), n, static_cast<T>(noise_scale), seed);
  Tensor<T> y;
  if (content != nullptr) {
    y = concat_batch(std::vector<Tensor<T>>(static_cast<std::size_t>(n), *content));
  }
  const Tensor<T> x = params.forward(z, content ? &y : nullptr);
  params.set_training(was_training);

  const auto per = static_cast<std::size_t>(x.numel() / n);
  const auto d = x.data();
  double total = 0.0;
  std::int64_t pairs = 0;
  for (std::int64_t a = 0; a < n; ++a) {
    for (std::int64_t b = a + 1; b < n; ++b) {
      double sq = 0.0;
      for (std::size_t k = 0; k < per; ++k) {
        const double diff = static_cast<double>(d[static_cast<std::size_t>(a) * per + k]) -
                            static_cast<double>(d[static_cast<std::size_t>(b) * per + k]);
        sq += diff * diff;
      }
      total += std::sqrt(sq);
      ++pairs;
    }
  }
  return total / static_cast<double>(pairs) / static_cast<double>(per);
}

std::vector<double> window_means(const std::vector<double>& values, std::size_t window) {
  std::vector<double> out;
  if (window == 0) return out;
  for (std::size_t i = 0; i < values.size(); i += window) {
    const std::size_t end = std::min(values.size(), i + window);
    double s = 0.0;
    for (std::size_t k = i; k < end; ++k) s += values[k];
    out.push_back(s / static_cast<double>(end - i));
  }
  return out;
}

std::vector<double> texture_losses(const std::vector<TrainRecord>& trace) {
  std::vector<double> out;
  out.reserve(trace.size());
  for (const auto& r : trace) out.push_back(r.texture_loss);
  return out;
}

std::vector<double> content_losses(const std::vector<TrainRecord>& trace) {
  std::vector<double> out;
  out.reserve(trace.size());
  for (const auto& r : trace) out.push_back(r.content_loss);
  return out;
}

void write_train_csv(const std::vector<TrainRecord>& trace, const std::string& path) {
  CsvSink csv(path);
  for (const auto& r : trace) csv.row(r);
}

#define TXN_INSTANTIATE_TRAINER(T)                                                            \
  template TrainResult<T> train_texture<T>(const Tensor<T>&, const GeneratorArch&,            \
                                           const DescriptorNet<T>&, const LossSpec&,          \
                                           const TrainConfig&);                               \
  template TrainResult<T> train_texture<T>(const Tensor<T>&, GeneratorParams<T>,              \
                                           const DescriptorNet<T>&, const LossSpec&,          \
                                           const TrainConfig&);                               \
  template TrainResult<T> train_style<T>(const Tensor<T>&, const std::vector<Tensor<T>>&,     \
                                         const GeneratorArch&, const DescriptorNet<T>&,       \
                                         const LossSpec&, const TrainConfig&);                \
  template double diversity_metric<T>(GeneratorParams<T>&, std::int64_t, std::uint64_t,      \
                                      Index, Index, double, const Tensor<T>*);

TXN_INSTANTIATE_TRAINER(float)
TXN_INSTANTIATE_TRAINER(double)

#undef TXN_INSTANTIATE_TRAINER

}  // namespace txn

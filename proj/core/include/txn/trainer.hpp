#pragma once

// Stochastic training of generator parameters against the texture or the
// stylization objective.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "txn/generator.hpp"
#include "txn/loss.hpp"
#include "txn/optim.hpp"

namespace txn {

struct TrainConfig {
  std::int64_t iterations = 2000;
  std::int64_t batch = 16;
  LrSchedule schedule;
  AdamConfig adam;
  /// Multiplier k on the uniform noise.
  double noise_scale = 1.0;
  std::uint64_t seed = 0;
  /// Save params every N iterations (0: never) to checkpoint_path.
  std::int64_t checkpoint_every = 0;
  std::string checkpoint_path;
  /// CSV trace destination; empty disables the file.
  std::string loss_log_path;
  /// Measure diversity every N iterations (0: never) on this many samples.
  std::int64_t diversity_every = 0;
  std::int64_t diversity_samples = 4;

  void validate() const;
};

struct TrainRecord {
  std::int64_t iteration = 0;
  double lr = 0.0;
  double texture_loss = 0.0;
  double content_loss = 0.0;
  std::optional<double> diversity;
};

template <typename T>
struct TrainResult {
  GeneratorParams<T> params;
  std::vector<TrainRecord> trace;
  std::vector<std::string> warnings;
};

/// Minimizes the expected texture loss of g(z) against the prototype
/// [1,3,M,M]. Target Gram matrices are computed once up front.
template <typename T>
TrainResult<T> train_texture(const Tensor<T>& prototype, const GeneratorArch& arch,
                             const DescriptorNet<T>& net, const LossSpec& spec,
                             const TrainConfig& cfg);

/// Continues training from existing parameters.
template <typename T>
TrainResult<T> train_texture(const Tensor<T>& prototype, GeneratorParams<T> init,
                             const DescriptorNet<T>& net, const LossSpec& spec,
                             const TrainConfig& cfg);

/// Minimizes texture_loss(g(y,z)) + alpha * content_loss(g(y,z), y) with y
/// drawn from the content pool (all images [1,3,M,M]).
template <typename T>
TrainResult<T> train_style(const Tensor<T>& prototype, const std::vector<Tensor<T>>& content_pool,
                           const GeneratorArch& arch, const DescriptorNet<T>& net,
                           const LossSpec& spec, const TrainConfig& cfg);

/// Mean pairwise L2 distance between n eval-mode samples, divided by the
/// element count of one sample. Style generators use `content` for all samples.
template <typename T>
double diversity_metric(GeneratorParams<T>& params, std::int64_t n, std::uint64_t seed,
                        Index height, Index width, double noise_scale = 1.0,
                        const Tensor<T>* content = nullptr);

/// Means of consecutive non-overlapping windows (a trailing partial window
/// is averaged over its own length).
std::vector<double> window_means(const std::vector<double>& values, std::size_t window);

std::vector<double> texture_losses(const std::vector<TrainRecord>& trace);
std::vector<double> content_losses(const std::vector<TrainRecord>& trace);

/// Writes `iteration,lr,texture_loss,content_loss,diversity`.
void write_train_csv(const std::vector<TrainRecord>& trace, const std::string& path);

}  // namespace txn

#pragma once

// Iterative pre-image synthesis: optimizes pixels directly so that the
// descriptor statistics of the image match the target. Baseline for the
// feed-forward generator, sharing its descriptor and loss definitions.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "txn/generator.hpp"
#include "txn/loss.hpp"
#include "txn/optim.hpp"

namespace txn {

struct PreimageConfig {
  std::int64_t max_iters = 200;
  double lr = 0.05;
  AdamConfig adam;
  /// Gaussian initialization N(init_mean, init_sigma^2) per pixel.
  double init_mean = 0.5;
  double init_sigma = 0.25;
  std::uint64_t seed = 0;
  /// Stop as soon as the loss is at or below this value.
  std::optional<double> target_loss;
  /// CSV `iteration,loss,millis`; empty disables the file.
  std::string trace_path;

  void validate() const;
};

struct PreimageStep {
  std::int64_t iteration = 0;
  double loss = 0.0;
  /// Best loss seen so far (non-increasing).
  double best_loss = 0.0;
  /// Wall-clock milliseconds since the run started.
  double millis = 0.0;
};

template <typename T>
struct PreimageResult {
  /// Image with the lowest loss seen.
  Tensor<T> image;
  std::vector<PreimageStep> trace;
  double best_loss = 0.0;
  bool reached_target = false;
  /// Milliseconds until the target was reached (or the run ended).
  double millis_to_target = 0.0;
};

/// Texture synthesis when `content` is null, stylization otherwise
/// (texture loss + alpha * content loss against `content`). `init`
/// overrides the random initialization.
template <typename T>
PreimageResult<T> synthesize_iterative(const Tensor<T>& prototype, const DescriptorNet<T>& net,
                                       const LossSpec& spec, const PreimageConfig& cfg,
                                       const Tensor<T>* content = nullptr,
                                       const Tensor<T>* init = nullptr);

void write_preimage_csv(const std::vector<PreimageStep>& trace, const std::string& path);

struct SpeedReport {
  double feedforward_loss = 0.0;
  /// Mean wall-clock time of one single-sample generator forward pass.
  double feedforward_millis = 0.0;
  std::int64_t feedforward_samples = 0;
  double iterative_initial_loss = 0.0;
  double iterative_best_loss = 0.0;
  double iterative_millis_to_match = 0.0;
  std::int64_t iterative_iterations = 0;
  /// False when the iterative run hit max_iters first; ratio is then a lower bound.
  bool matched = false;
  double ratio = 0.0;

  std::string to_json() const;
};

/// Measures the mean loss of `samples` eval-mode generator outputs at the
/// prototype's extent, then runs the iterative method until it matches
/// that loss.
template <typename T>
SpeedReport match_loss_time(GeneratorParams<T>& params, const Tensor<T>& prototype,
                            const DescriptorNet<T>& net, const LossSpec& spec,
                            PreimageConfig iterative, std::int64_t samples = 8,
                            std::uint64_t seed = 0, const Tensor<T>* content = nullptr);

}  // namespace txn

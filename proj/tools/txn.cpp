// txn: train texture/style generators, sample from them, and compare against
// iterative pixel optimization.

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "txn/error.hpp"
#include "txn/image.hpp"
#include "txn/parallel.hpp"
#include "txn/preimage.hpp"
#include "txn/trainer.hpp"

namespace fs = std::filesystem;
using namespace txn;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitOther = 1;

struct CommonOptions {
  std::uint64_t seed = 0;
  bool deterministic = false;
  std::string descriptor;
  std::string descriptor_weights;
  std::vector<std::string> texture_layers;
  std::vector<std::string> content_layers;
};

struct TrainOptions {
  std::string texture;
  std::vector<std::string> content;
  std::string out;
  std::optional<double> alpha;
  int scales = 0;
  std::vector<int> channels;
  std::int64_t iters = 2000;
  std::int64_t batch = 16;
  double lr = 0.1;
  double noise_scale = 1.0;
  std::string log;
  std::int64_t checkpoint_every = 0;
  std::int64_t diversity_every = 0;
};

struct SampleOptions {
  std::string params;
  std::string content;
  std::string out;
  Index width = 0;
  Index height = 0;
  double noise_scale = 1.0;
  int keep = 0;
};

struct IterativeOptions {
  std::string texture;
  std::string content;
  std::string params;
  std::string out;
  std::string trace;
  std::optional<double> alpha;
  std::int64_t iters = 200;
  double lr = 0.05;
  double init_sigma = 0.25;
  std::int64_t samples = 8;
};

void add_common(CLI::App* cmd, CommonOptions& c) {
  cmd->add_option("--config", "Read options from a TOML/INI file (flags override it)");
  cmd->add_option("--seed", c.seed, "Random seed")->capture_default_str();
  cmd->add_flag("--deterministic", c.deterministic, "Single worker, sequential accumulation");
  cmd->add_option("--descriptor", c.descriptor, "Descriptor architecture file (default: tiny)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--descriptor-weights", c.descriptor_weights, "Descriptor weight file")
      ->check(CLI::ExistingFile);
  cmd->add_option("--texture-layers", c.texture_layers, "Descriptor taps for the texture loss");
  cmd->add_option("--content-layers", c.content_layers, "Descriptor taps for the content loss");
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), {}};
}

DescriptorNet<float> make_descriptor(const CommonOptions& c) {
  DescriptorNet<float> arch = c.descriptor.empty()
                                  ? DescriptorNet<float>::tiny()
                                  : DescriptorNet<float>::from_spec(read_text(c.descriptor));
  if (!c.descriptor_weights.empty()) return load_weights_into(arch, c.descriptor_weights);
  return arch;
}

LossSpec make_spec(const CommonOptions& c, const DescriptorNet<float>& net, std::optional<double> alpha) {
  LossSpec spec = LossSpec::defaults_for(net);
  if (!c.texture_layers.empty()) spec.texture_layers = c.texture_layers;
  if (!c.content_layers.empty()) spec.content_layers = c.content_layers;
  spec.alpha = alpha.value_or(0.0);
  spec.validate(net);
  return spec;
}

void check_output(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty() && !fs::is_directory(parent)) {
    throw ConfigError("output directory '" + parent.string() + "' does not exist");
  }
}

Index nearest_multiple(Index v, Index d) {
  const Index down = std::max(d, v / d * d);
  const Index up = (v + d - 1) / d * d;
  return (v - down <= up - v) ? down : up;
}

void check_extents(Index width, Index height, const GeneratorArch& arch) {
  const Index d = arch.divisor();
  if (width < 1 || height < 1 || width % d != 0 || height % d != 0) {
    throw ConfigError("output extents " + std::to_string(width) + "x" + std::to_string(height) +
                      " are not multiples of " + std::to_string(d) + " (2^(K-1), K=" +
                      std::to_string(arch.scales()) + "); nearest valid extents are " +
                      std::to_string(nearest_multiple(std::max<Index>(width, 1), d)) + "x" +
                      std::to_string(nearest_multiple(std::max<Index>(height, 1), d)));
  }
}

Tensor<float> load_image(const std::string& path) { return image_to_tensor<float>(read_ppm(path)); }

void check_square_image(const std::string& what, const Tensor<float>& img, const GeneratorArch& arch) {
  try {
    check_extents(img.dim(3), img.dim(2), arch);
  } catch (const ConfigError& e) {
    throw ConfigError(what + ": " + e.what());
  }
}

int run_train(const CommonOptions& c, const TrainOptions& o, GeneratorMode mode) {
  const bool style = mode == GeneratorMode::kStyle;
  if (style && !o.alpha) throw ConfigError("train-style needs --alpha (content weight)");
  if (style && o.content.empty()) throw ConfigError("train-style needs at least one --content image");
  check_output(o.out);
  if (!o.log.empty()) check_output(o.log);

  GeneratorArch arch = GeneratorArch::with_scales(mode, o.scales > 0 ? o.scales : (style ? 6 : 5));
  if (!o.channels.empty()) arch.channels = o.channels;
  arch.validate();
  const auto net = make_descriptor(c);
  const LossSpec spec = make_spec(c, net, o.alpha);

  TrainConfig cfg;
  cfg.iterations = o.iters;
  cfg.batch = o.batch;
  cfg.schedule.lr0 = o.lr;
  cfg.noise_scale = o.noise_scale;
  cfg.seed = c.seed;
  cfg.loss_log_path = o.log;
  cfg.checkpoint_every = o.checkpoint_every;
  if (o.checkpoint_every > 0) cfg.checkpoint_path = o.out + ".ckpt";
  cfg.diversity_every = o.diversity_every;
  cfg.validate();

  const Tensor<float> proto = load_image(o.texture);
  check_square_image("prototype '" + o.texture + "'", proto, arch);
  std::vector<Tensor<float>> pool;
  for (const auto& p : o.content) {
    pool.push_back(load_image(p));
    if (pool.back().shape() != proto.shape()) {
      throw ConfigError("content image '" + p + "' is " + shape_string(pool.back().shape()) +
                        ", prototype is " + shape_string(proto.shape()));
    }
  }

  const TrainResult<float> res = style ? train_style(proto, pool, arch, net, spec, cfg)
                                       : train_texture(proto, arch, net, spec, cfg);
  save_params(res.params, o.out);
  for (const auto& w : res.warnings) std::cerr << "warning: " << w << '\n';
  if (!res.trace.empty()) {
    const auto w = window_means(texture_losses(res.trace), 50);
    std::printf("trained %lld iterations, %lld parameters; texture loss %.6g -> %.6g (50-iteration means)\n",
                static_cast<long long>(res.trace.size()), static_cast<long long>(count_params(res.params)),
                w.front(), w.back());
  }
  return 0;
}

int run_sample(const CommonOptions& c, const SampleOptions& o, bool stylize, bool ablate) {
  check_output(o.out);
  GeneratorParams<float> params =
      load_params<float>(o.params, stylize ? std::optional(GeneratorMode::kStyle) : std::nullopt);
  const bool style = params.arch.mode == GeneratorMode::kStyle;
  if (!stylize && style) {
    throw ConfigError("'" + o.params + "' holds style parameters; use the stylize command");
  }
  if (ablate && (o.keep < 1 || o.keep > params.arch.scales())) {
    throw ConfigError("--keep must be in [1," + std::to_string(params.arch.scales()) + "]");
  }
  if (o.noise_scale < 0.0) throw ConfigError("--noise-scale must be >= 0");

  Tensor<float> content;
  Index width = o.width;
  Index height = o.height;
  if (stylize) {
    content = load_image(o.content);
    width = content.dim(3);
    height = content.dim(2);
  }
  check_extents(width, height, params.arch);

  params.set_training(false);
  NoGradGuard no_grad;
  const NoiseStack<float> z = sample_noise<float>(height, width, params.arch.scales(), 1,
                                                  static_cast<float>(o.noise_scale), c.seed);
  const Tensor<float> x = ablate ? ablate_scales(params, z, o.keep) : params.forward(z, stylize ? &content : nullptr);
  write_ppm(tensor_to_image(x), o.out);
  return 0;
}

int run_iterative(const CommonOptions& c, const IterativeOptions& o) {
  const bool style = !o.content.empty();
  if (style && !o.alpha) throw ConfigError("stylization needs --alpha (content weight)");
  check_output(o.out);
  if (!o.trace.empty()) check_output(o.trace);
  const auto net = make_descriptor(c);
  const LossSpec spec = make_spec(c, net, o.alpha);

  PreimageConfig cfg;
  cfg.max_iters = o.iters;
  cfg.lr = o.lr;
  cfg.init_sigma = o.init_sigma;
  cfg.seed = c.seed;
  cfg.trace_path = o.trace;
  cfg.validate();

  const Tensor<float> proto = load_image(o.texture);
  Tensor<float> content;
  if (style) content = load_image(o.content);
  const PreimageResult<float> r = synthesize_iterative(proto, net, spec, cfg, style ? &content : nullptr);
  write_ppm(tensor_to_image(r.image), o.out);
  std::printf("iterative synthesis: loss %.6g -> %.6g in %lld iterations, %.1f ms\n", r.trace.front().loss,
              r.best_loss, static_cast<long long>(r.trace.back().iteration), r.trace.back().millis);
  return 0;
}

int run_benchmark(const CommonOptions& c, const IterativeOptions& o) {
  if (!o.out.empty()) check_output(o.out);
  GeneratorParams<float> params = load_params<float>(o.params);
  const bool style = params.arch.mode == GeneratorMode::kStyle;
  if (style && o.content.empty()) throw ConfigError("style parameters need a --content image");
  if (!style && !o.content.empty()) throw ConfigError("texture parameters do not take --content");
  if (style && !o.alpha) throw ConfigError("style benchmark needs --alpha (content weight)");
  const auto net = make_descriptor(c);
  const LossSpec spec = make_spec(c, net, o.alpha);

  PreimageConfig cfg;
  cfg.max_iters = o.iters;
  cfg.lr = o.lr;
  cfg.init_sigma = o.init_sigma;
  cfg.seed = c.seed;
  cfg.trace_path = o.trace;
  cfg.validate();

  const Tensor<float> proto = load_image(o.texture);
  Tensor<float> content;
  if (style) content = load_image(o.content);
  check_square_image("prototype '" + o.texture + "'", proto, params.arch);
  const SpeedReport rep = match_loss_time(params, proto, net, spec, cfg, o.samples, c.seed,
                                          style ? &content : nullptr);
  const std::string json = rep.to_json();
  if (o.out.empty()) {
    std::printf("%s\n", json.c_str());
  } else {
    std::ofstream out(o.out);
    out << json << '\n';
    if (!out) throw IoError("write to '" + o.out + "' failed");
  }
  return 0;
}

// Splices `key = value` pairs from the --config file into the argument list
// (after the subcommand name) unless the same option is given on the
// command line. Unknown keys are configuration errors.
std::vector<std::string> expand_config(CLI::App& app, std::vector<std::string> args) {
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
      break;
    }
  }
  if (path.empty() || args.empty()) return args;
  CLI::App* cmd = app.get_subcommand_no_throw(args.front());
  if (cmd == nullptr) return args;
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigTOML().from_file(path);
  } catch (const CLI::FileError& e) {
    throw ConfigError(e.what());
  }
  std::vector<std::string> injected;
  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--") continue;
    const std::string key = item.fullname();
    if (!item.parents.empty() || cmd->get_option_no_throw("--" + key) == nullptr || key == "config") {
      throw ConfigError("unknown key '" + key + "' in config file '" + path + "' for command '" +
                        cmd->get_name() + "'");
    }
    const std::string flag = "--" + key;
    const bool overridden = std::any_of(args.begin(), args.end(), [&](const std::string& a) {
      return a == flag || a.rfind(flag + "=", 0) == 0;
    });
    if (overridden) continue;
    if (cmd->get_option("--" + key)->get_expected_max() == 0) {
      injected.push_back(flag + "=" + (item.inputs.empty() ? "true" : item.inputs.front()));
    } else {
      injected.push_back(flag);
      injected.insert(injected.end(), item.inputs.begin(), item.inputs.end());
    }
  }
  args.insert(args.begin() + 1, injected.begin(), injected.end());
  return args;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Feed-forward texture synthesis and stylization"};
  app.require_subcommand(1);
  app.allow_config_extras(CLI::config_extras_mode::error);

  CommonOptions common;
  TrainOptions train;
  SampleOptions sample;
  IterativeOptions iter;

  auto add_train = [&](const std::string& name, const std::string& help, bool style) {
    auto* cmd = app.add_subcommand(name, help);
    add_common(cmd, common);
    cmd->add_option("--texture", train.texture, "Texture prototype (PPM)")->required()->check(CLI::ExistingFile);
    if (style) {
      cmd->add_option("--content", train.content, "Content images (PPM), same extent as the prototype")
          ->required()
          ->check(CLI::ExistingFile);
      cmd->add_option("--alpha", train.alpha, "Content loss weight")->required();
    }
    cmd->add_option("--out", train.out, "Output params file")->required();
    cmd->add_option("--scales", train.scales, "Number of generator scales K")->check(CLI::Range(1, 12));
    cmd->add_option("--channels", train.channels, "Per-scale channel counts, coarse to fine");
    cmd->add_option("--iters", train.iters, "Training iterations")->capture_default_str();
    cmd->add_option("--batch", train.batch, "Batch size")->capture_default_str();
    cmd->add_option("--lr", train.lr, "Initial learning rate")->capture_default_str();
    cmd->add_option("--noise-scale", train.noise_scale, "Noise magnitude k")->capture_default_str();
    cmd->add_option("--log", train.log, "Loss trace CSV");
    cmd->add_option("--checkpoint-every", train.checkpoint_every, "Checkpoint interval (writes <out>.ckpt)");
    cmd->add_option("--diversity-every", train.diversity_every, "Diversity measurement interval");
    return cmd;
  };
  auto* train_texture_cmd = add_train("train-texture", "Train a texture generator", false);
  auto* train_style_cmd = add_train("train-style", "Train a stylization generator", true);

  auto* sample_cmd = app.add_subcommand("sample", "Draw one texture sample");
  auto* stylize_cmd = app.add_subcommand("stylize", "Stylize a content image");
  auto* ablate_cmd = app.add_subcommand("ablate", "Sample with all but one noise scale zeroed");
  for (auto* cmd : {sample_cmd, stylize_cmd, ablate_cmd}) {
    add_common(cmd, common);
    cmd->add_option("--params", sample.params, "Generator params file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", sample.out, "Output image (PPM)")->required();
    cmd->add_option("--noise-scale", sample.noise_scale, "Noise magnitude k")->capture_default_str();
  }
  for (auto* cmd : {sample_cmd, ablate_cmd}) {
    cmd->add_option("--width", sample.width, "Output width")->required();
    cmd->add_option("--height", sample.height, "Output height")->required();
  }
  stylize_cmd->add_option("--content", sample.content, "Content image (PPM)")->required()->check(CLI::ExistingFile);
  ablate_cmd->add_option("--keep", sample.keep, "Scale to keep (1 = coarsest)")->required();

  auto* iterative_cmd = app.add_subcommand("iterative", "Optimize pixels directly to match the texture");
  auto* benchmark_cmd = app.add_subcommand("benchmark", "Time feed-forward sampling against iterative synthesis");
  for (auto* cmd : {iterative_cmd, benchmark_cmd}) {
    add_common(cmd, common);
    cmd->add_option("--texture", iter.texture, "Texture prototype (PPM)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--content", iter.content, "Content image (PPM) for stylization")->check(CLI::ExistingFile);
    cmd->add_option("--alpha", iter.alpha, "Content loss weight");
    cmd->add_option("--iters", iter.iters, "Maximum pixel-optimization iterations")->capture_default_str();
    cmd->add_option("--lr", iter.lr, "Pixel learning rate")->capture_default_str();
    cmd->add_option("--init-sigma", iter.init_sigma, "Std-dev of the mid-gray initialization")->capture_default_str();
    cmd->add_option("--trace", iter.trace, "Per-iteration CSV trace");
  }
  iterative_cmd->add_option("--out", iter.out, "Output image (PPM)")->required();
  benchmark_cmd->add_option("--params", iter.params, "Generator params file")->required()->check(CLI::ExistingFile);
  benchmark_cmd->add_option("--samples", iter.samples, "Feed-forward samples")->capture_default_str();
  benchmark_cmd->add_option("--out", iter.out, "JSON report path (default: stdout)");

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    args = expand_config(app, std::move(args));
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    set_deterministic(common.deterministic);
    if (train_texture_cmd->parsed()) return run_train(common, train, GeneratorMode::kTexture);
    if (train_style_cmd->parsed()) return run_train(common, train, GeneratorMode::kStyle);
    if (sample_cmd->parsed()) return run_sample(common, sample, false, false);
    if (stylize_cmd->parsed()) return run_sample(common, sample, true, false);
    if (ablate_cmd->parsed()) return run_sample(common, sample, false, true);
    if (iterative_cmd->parsed()) return run_iterative(common, iter);
    if (benchmark_cmd->parsed()) return run_benchmark(common, iter);
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ShapeError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ModeError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitOther;
  }
  return kExitOther;
}

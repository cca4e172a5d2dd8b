#include <doctest.h>

#include <sstream>

#include "support.hpp"
#include "txn/error.hpp"
#include "txn/image.hpp"
#include "txn/parallel.hpp"
#include "txn/trainer.hpp"

using namespace txn;
using txn::testing::bitwise_equal;
using txn::testing::read_file;
using txn::testing::temp_path;

namespace {

GeneratorArch small_arch(GeneratorMode mode) {
  GeneratorArch arch = GeneratorArch::with_scales(mode, 2);
  arch.channels = {8, 8};
  return arch;
}

Tensor<float> small_prototype() {
  return image_to_tensor<float>(checkerboard(8, 8, 2, {220, 40, 40}, {20, 60, 210}));
}

TrainConfig small_config(std::int64_t iterations) {
  TrainConfig cfg;
  cfg.iterations = iterations;
  cfg.batch = 2;
  cfg.seed = 3;
  cfg.schedule.lr0 = 0.05;
  return cfg;
}

void check_same_params(const GeneratorParams<float>& a, const GeneratorParams<float>& b) {
  const auto pa = a.parameters(), pb = b.parameters();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(bitwise_equal(pa[i], pb[i]));
}

}  // namespace

TEST_CASE("texture training lowers the loss") {
  auto net = DescriptorNet<float>::tiny();
  auto spec = LossSpec::defaults_for(net);
  auto res = train_texture(small_prototype(), small_arch(GeneratorMode::kTexture), net, spec,
                           small_config(60));
  REQUIRE(res.trace.size() == 60);
  CHECK(res.trace[0].iteration == 0);
  CHECK(res.trace[0].lr == 0.05);
  CHECK(res.trace[0].content_loss == 0.0);
  const auto w = window_means(texture_losses(res.trace), 20);
  CHECK(w.back() < w.front());
  CHECK_FALSE(res.params.training());
}

TEST_CASE("training is bitwise reproducible in deterministic mode") {
  set_deterministic(true);
  auto net = DescriptorNet<float>::tiny();
  auto spec = LossSpec::defaults_for(net);
  auto a = train_texture(small_prototype(), small_arch(GeneratorMode::kTexture), net, spec,
                         small_config(10));
  auto b = train_texture(small_prototype(), small_arch(GeneratorMode::kTexture), net, spec,
                         small_config(10));
  set_deterministic(false);
  CHECK(texture_losses(a.trace) == texture_losses(b.trace));
  check_same_params(a.params, b.params);
}

TEST_CASE("resumed training continues from the given parameters") {
  set_deterministic(true);
  auto net = DescriptorNet<float>::tiny();
  auto spec = LossSpec::defaults_for(net);
  auto init = GeneratorParams<float>::init(small_arch(GeneratorMode::kTexture), 3);
  auto fresh = train_texture(small_prototype(), small_arch(GeneratorMode::kTexture), net, spec,
                             small_config(5));
  auto resumed = train_texture(small_prototype(), init, net, spec, small_config(5));
  set_deterministic(false);
  check_same_params(fresh.params, resumed.params);
}

TEST_CASE("loss log, checkpoints and diversity") {
  auto net = DescriptorNet<float>::tiny();
  auto spec = LossSpec::defaults_for(net);
  auto cfg = small_config(6);
  cfg.loss_log_path = temp_path("train.csv");
  cfg.checkpoint_every = 3;
  cfg.checkpoint_path = temp_path("ckpt.bin");
  cfg.diversity_every = 2;
  cfg.diversity_samples = 3;
  auto res = train_texture(small_prototype(), small_arch(GeneratorMode::kTexture), net, spec, cfg);

  std::istringstream csv(read_file(cfg.loss_log_path));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "iteration,lr,texture_loss,content_loss,diversity");
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == 6);
  CHECK_FALSE(res.trace[0].diversity.has_value());
  REQUIRE(res.trace[1].diversity.has_value());
  CHECK(*res.trace[1].diversity > 0.0);

  auto ckpt = load_params<float>(cfg.checkpoint_path, GeneratorMode::kTexture);
  CHECK(ckpt.arch == res.params.arch);

  write_train_csv(res.trace, cfg.loss_log_path + "2");
  CHECK(read_file(cfg.loss_log_path + "2") == read_file(cfg.loss_log_path));
}

TEST_CASE("diversity metric") {
  auto g = GeneratorParams<float>::init(small_arch(GeneratorMode::kTexture), 4);
  CHECK(diversity_metric(g, 4, 1, 8, 8, 0.0) == 0.0);
  const double d = diversity_metric(g, 4, 1, 8, 8, 1.0);
  CHECK(d > 0.0);
  CHECK(diversity_metric(g, 4, 1, 8, 8, 1.0) == d);
  CHECK(g.training());
  CHECK_THROWS_AS(diversity_metric(g, 1, 1, 8, 8, 1.0), ConfigError);
}

TEST_CASE("training configuration errors") {
  auto net = DescriptorNet<float>::tiny();
  auto spec = LossSpec::defaults_for(net);
  auto proto = small_prototype();
  auto cfg = small_config(1);
  cfg.batch = 0;
  CHECK_THROWS_AS(train_texture(proto, small_arch(GeneratorMode::kTexture), net, spec, cfg),
                  ConfigError);
  cfg = small_config(1);
  cfg.checkpoint_every = 1;
  CHECK_THROWS_AS(train_texture(proto, small_arch(GeneratorMode::kTexture), net, spec, cfg),
                  ConfigError);
  cfg = small_config(1);
  auto odd = image_to_tensor<float>(checkerboard(9, 8, 2, {0, 0, 0}, {255, 255, 255}));
  CHECK_THROWS_AS(train_texture(odd, small_arch(GeneratorMode::kTexture), net, spec, cfg),
                  ShapeError);
  CHECK_THROWS_AS(train_texture(proto, small_arch(GeneratorMode::kStyle), net, spec, cfg), ModeError);
  CHECK_THROWS_AS(train_style(proto, {proto}, small_arch(GeneratorMode::kTexture), net, spec, cfg),
                  ModeError);
  CHECK_THROWS_AS(train_style(proto, {}, small_arch(GeneratorMode::kStyle), net, spec, cfg),
                  ConfigError);
  spec.alpha = -1.0;
  CHECK_THROWS_AS(train_style(proto, {proto}, small_arch(GeneratorMode::kStyle), net, spec, cfg),
                  ConfigError);
}

TEST_CASE("style training with alpha zero ignores the content term") {
  set_deterministic(true);
  auto net = DescriptorNet<float>::tiny();
  auto spec = LossSpec::defaults_for(net);
  spec.alpha = 0.0;
  auto texture_only = spec;
  texture_only.content_layers.clear();
  auto proto = small_prototype();
  std::vector<Tensor<float>> pool{
      image_to_tensor<float>(checkerboard(8, 8, 4, {255, 255, 255}, {0, 0, 0})),
      image_to_tensor<float>(checkerboard(8, 8, 1, {90, 10, 200}, {10, 200, 90}))};
  auto a = train_style(proto, pool, small_arch(GeneratorMode::kStyle), net, spec, small_config(8));
  auto b = train_style(proto, pool, small_arch(GeneratorMode::kStyle), net, texture_only,
                       small_config(8));
  set_deterministic(false);
  CHECK(texture_losses(a.trace) == texture_losses(b.trace));
  CHECK(a.trace[0].content_loss > 0.0);
  check_same_params(a.params, b.params);
}

TEST_CASE("window means") {
  CHECK(window_means({1, 2, 3, 4, 5}, 2) == std::vector<double>{1.5, 3.5, 5.0});
  CHECK(window_means({1, 2}, 0).empty());
  CHECK(window_means({}, 3).empty());
}

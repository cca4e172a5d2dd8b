// Acceptance suite: one PASS/FAIL line per criterion; exit status 1 if any fails.

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "support.hpp"
#include "txn/image.hpp"
#include "txn/parallel.hpp"
#include "txn/preimage.hpp"
#include "txn/trainer.hpp"

using namespace txn;
using txn::testing::bitwise_equal;
using txn::testing::check_gradients;
using txn::testing::project;
using txn::testing::random_tensor;
using txn::testing::read_file;
using txn::testing::roll;
using txn::testing::roll_noise;
using txn::testing::temp_path;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Shared texture fixture: 32x32 two-tone checkerboard, tiny descriptor,
// three-scale generator with 8 channels per scale, batch 4.
Tensor<float> fixture_prototype(int size) {
  return image_to_tensor<float>(checkerboard(size, size, 4, {230, 60, 40}, {30, 80, 200}));
}

GeneratorArch fixture_arch(GeneratorMode mode) {
  GeneratorArch arch = GeneratorArch::with_scales(mode, 3);
  arch.channels = {8, 8, 8};
  return arch;
}

TrainConfig fixture_config(std::int64_t iterations) {
  TrainConfig cfg;
  cfg.iterations = iterations;
  cfg.batch = 4;
  cfg.seed = 1;
  return cfg;
}

// ---------------------------------------------------------------------------

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  Rng rng(101);
  auto dims = [&](Index lo, Index hi) { return lo + static_cast<Index>(rng.below(static_cast<std::uint64_t>(hi - lo + 1))); };
  struct Case {
    std::string name;
    double err;
  };
  std::vector<Case> cases;
  auto run = [&](const std::string& name, const testing::LossFn& f, std::vector<Tensor<double>> in,
                 double h = 1e-6) { cases.push_back({name, check_gradients(f, std::move(in), h).rel_error}); };

  {
    const Index m = dims(1, 4), n = dims(1, 5), k = dims(1, 4);
    auto a = random_tensor(rng, {m, n}), b = random_tensor(rng, {m, n});
    auto w = random_tensor(rng, {m, n}, false);
    auto c = random_tensor(rng, {n, k});
    auto wk = random_tensor(rng, {m, k}, false);
    auto r = random_tensor(rng, {1, n});
    auto w3 = random_tensor(rng, {2, m, n}, false);
    run("add", [&] { return project(add(a, b), w); }, {a, b});
    run("sub", [&] { return project(sub(a, b), w); }, {a, b});
    run("mul", [&] { return project(mul(a, b), w); }, {a, b});
    run("scale", [&] { return project(scale(a, 1.3), w); }, {a});
    run("sum", [&] { return sum(mul(a, a)); }, {a});
    run("mean", [&] { return mean(mul(a, b)); }, {a, b});
    run("matmul", [&] { return project(matmul(a, c), wk); }, {a, c});
    run("transpose", [&] { return sum(mul(transpose(a), transpose(b))); }, {a, b});
    run("reshape", [&] { return project(reshape(a, {m * n}), reshape(w, {m * n})); }, {a});
    run("slice", [&] { return sum(mul(slice(a, 1, 0, 1), slice(b, 1, n - 1, n))); }, {a, b});
    run("broadcast_to", [&] { return project(broadcast_to(r, {2, m, n}), w3); }, {r});
    run("concat_batch", [&] {
      auto cat = concat_batch<double>({a, b});
      return sum(mul(cat, cat));
    }, {a, b});
  }
  for (auto pad : {PaddingMode::kZero, PaddingMode::kCircular}) {
    for (int k : {1, 3}) {
      const Index b = dims(1, 2), ci = dims(1, 3), co = dims(1, 3), h = dims(2, 5), w = dims(2, 5);
      ConvSpec<double> s;
      s.weight = random_tensor(rng, {co, ci, k, k});
      s.bias = random_tensor(rng, {co});
      s.padding = pad;
      auto x = random_tensor(rng, {b, ci, h, w});
      auto p = random_tensor(rng, {b, co, h, w}, false);
      run(fmt("conv2d(%s,k=%d)", pad == PaddingMode::kZero ? "zero" : "circular", k),
          [&] { return project(conv2d(x, s), p); }, {x, s.weight, s.bias});
    }
  }
  {
    const Index b = 2, c = dims(1, 3), h = 2 * dims(1, 3), w = 2 * dims(1, 3);
    auto x = random_tensor(rng, {b, c, h, w}, true, 0.01);
    auto y = random_tensor(rng, {b, 2, h, w});
    auto p = random_tensor(rng, {b, c, h, w}, false);
    auto pu = random_tensor(rng, {b, c, 2 * h, 2 * w}, false);
    auto pc = random_tensor(rng, {b, c + 2, h, w}, false);
    auto pp = random_tensor(rng, {b, c, h / 2, w / 2}, false);
    auto pg = random_tensor(rng, {b, c, c}, false);
    run("relu", [&] { return project(relu(x), p); }, {x});
    for (bool training : {true, false}) {
      auto bn = BatchNormState<double>::identity(static_cast<int>(c), true);
      bn.gamma = random_tensor(rng, {c});
      bn.beta = random_tensor(rng, {c});
      bn.running_var = Tensor<double>::full({c}, 0.8);
      bn.training = training;
      run(training ? "batch_norm(train)" : "batch_norm(eval)", [&] { return project(batch_norm(x, bn), p); },
          {x, bn.gamma, bn.beta});
    }
    run("upsample_nearest", [&] { return project(upsample_nearest(x), pu); }, {x});
    run("concat_channels", [&] { return project(concat_channels(x, y), pc); }, {x, y});
    run("pool2d(avg)", [&] { return project(pool2d(x, PoolKind::kAverage), pp); }, {x});
    run("pool2d(max)", [&] { return project(pool2d(x, PoolKind::kMax), pp); }, {x});
    run("gram", [&] { return sum(mul(gram(x), pg)); }, {x});
  }
  {
    auto net = DescriptorNet<double>::tiny(11);
    auto spec = LossSpec::defaults_for(net);
    spec.alpha = 0.5;
    auto proto = random_tensor(rng, {1, 3, 4, 4}, false);
    auto target = compute_grams(net, proto, spec);
    auto x = random_tensor(rng, {2, 3, 4, 4});
    auto y = random_tensor(rng, {2, 3, 4, 4}, false);
    run("texture_loss", [&] { return texture_loss(x, target, net, spec); }, {x});
    run("content_loss", [&] { return content_loss(x, y, net, spec); }, {x});
    run("stylization_loss", [&] { return stylization_loss(x, y, target, net, spec); }, {x});

    GeneratorArch arch = GeneratorArch::with_scales(GeneratorMode::kTexture, 2);
    arch.channels = {8, 8};
    auto g = GeneratorParams<double>::init(arch, 13);
    testing::randomize_batch_norms(g, rng);
    auto z = sample_noise<double>(4, 4, 2, 2, 1.0, 17);
    run("generator+descriptor (texture)", [&] { return texture_loss(g.forward(z), target, net, spec); },
        g.parameters());
    arch.mode = GeneratorMode::kStyle;
    auto s = GeneratorParams<double>::init(arch, 19);
    run("generator+descriptor (style)",
        [&] { return stylization_loss(s.forward(z, &y), y, target, net, spec); }, s.parameters());
  }
  const double secs = seconds_since(t0);
  double worst = 0.0;
  std::string worst_name;
  for (const auto& c : cases) {
    if (!(c.err <= worst)) {
      worst = c.err;
      worst_name = c.name;
    }
  }
  const bool pass = worst < 1e-4 && secs < 60.0;
  return {pass, fmt("%zu checks, max rel error %.2e (%s), %.1f s [limits 1e-4, 60 s]", cases.size(), worst,
                    worst_name.c_str(), secs)};
}

// ---------------------------------------------------------------------------

Outcome gram_algebra() {
  Rng rng(202);
  bool symmetric = true;
  double min_eig = 1e300;
  double worst_rel = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Index c = 1 + static_cast<Index>(rng.below(6));
    const Index h = 1 + static_cast<Index>(rng.below(5)), w = 1 + static_cast<Index>(rng.below(5));
    auto fx = random_tensor(rng, {1, c, h, w}, false);
    auto fy = random_tensor(rng, {1, c, 1 + static_cast<Index>(rng.below(5)), w}, false);
    auto g = gram(fx);
    Eigen::MatrixXd m(c, c);
    for (Index i = 0; i < c; ++i) {
      for (Index j = 0; j < c; ++j) {
        symmetric = symmetric && g.at({0, i, j}) == g.at({0, j, i});
        m(i, j) = g.at({0, i, j});
      }
    }
    min_eig = std::min(min_eig, Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m).eigenvalues().minCoeff());

    GramSet<double> target;
    target.grams["f"] = reshape(gram(fy), {c, c});
    target.spatial["f"] = fy.dim(2) * fy.dim(3);
    LossSpec spec;
    spec.texture_layers = {"f"};
    const double loss = texture_loss<double>({{"f", fx}}, target, spec).item();
    const double mmd = mmd_form(fx, fy);
    worst_rel = std::max(worst_rel, std::abs(loss - mmd) / std::max(std::abs(mmd), 1e-300));
  }
  const bool pass = symmetric && min_eig >= -1e-8 && worst_rel <= 1e-9;
  return {pass, fmt("100 cases: symmetric=%s, min eigenvalue %.2e, max |loss-mmd|/mmd %.2e [limits -1e-8, 1e-9]",
                    symmetric ? "exact" : "NO", min_eig, worst_rel)};
}

// ---------------------------------------------------------------------------

Outcome shift_equivariance() {
  Rng rng(303);
  int exact = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const int k = 1 + static_cast<int>(rng.below(4));
    const auto mode = rng.below(2) == 0 ? GeneratorMode::kTexture : GeneratorMode::kStyle;
    GeneratorArch arch = GeneratorArch::with_scales(mode, k);
    for (auto& c : arch.channels) c = 8 + static_cast<int>(rng.below(9));
    arch.branch_channels = 8 + static_cast<int>(rng.below(5));
    auto g = GeneratorParams<float>::init(arch, rng.next());
    testing::randomize_batch_norms(g, rng);
    g.set_training(false);
    const Index d = arch.divisor();
    const Index h = d * (1 + static_cast<Index>(rng.below(3))) * (k == 1 ? 4 : 1);
    const Index w = d * (1 + static_cast<Index>(rng.below(3))) * (k == 1 ? 4 : 1);
    const Index sy = d * static_cast<Index>(rng.below(static_cast<std::uint64_t>(h / d)));
    const Index sx = d * static_cast<Index>(rng.below(static_cast<std::uint64_t>(w / d)));
    const auto z = sample_noise<float>(h, w, k, 1, 1.0f, rng.next());
    Tensor<float> y, ys;
    if (mode == GeneratorMode::kStyle) {
      y = random_tensor(rng, {1, 3, h, w}, false).cast<float>();
      ys = roll(y, sy, sx);
    }
    NoGradGuard no_grad;
    const bool style = mode == GeneratorMode::kStyle;
    const auto lhs = g.forward(roll_noise(z, sy, sx), style ? &ys : nullptr);
    const auto rhs = roll(g.forward(z, style ? &y : nullptr), sy, sx);
    if (bitwise_equal(lhs, rhs)) ++exact;
  }
  return {exact == 20, fmt("%d/20 random configurations bitwise equivariant", exact)};
}

// ---------------------------------------------------------------------------

std::vector<double> load_pinned_windows(const std::string& path) {
  std::vector<double> out;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("window", 0) == 0) continue;
    out.push_back(std::stod(line.substr(line.find(',') + 1)));
  }
  return out;
}

Outcome texture_training(GeneratorParams<float>* trained) {
  auto net = DescriptorNet<float>::tiny();
  auto spec = LossSpec::defaults_for(net);
  const auto t0 = Clock::now();
  auto res = train_texture(fixture_prototype(32), fixture_arch(GeneratorMode::kTexture), net, spec,
                           fixture_config(500));
  const double secs = seconds_since(t0);
  const auto windows = window_means(texture_losses(res.trace), 50);
  const double initial = std::min(res.trace.front().texture_loss, windows.front());
  const double final_mean = windows.back();
  bool monotone = true;
  for (std::size_t i = 1; i < windows.size(); ++i) monotone = monotone && windows[i] <= windows[i - 1];

  const std::string pin_path = std::string(TXN_TEST_DATA_DIR) + "/texture_fixture_windows.csv";
  const auto pinned = load_pinned_windows(pin_path);
  double worst_dev = 0.0;
  bool pinned_ok = pinned.size() == windows.size();
  for (std::size_t i = 0; pinned_ok && i < windows.size(); ++i) {
    worst_dev = std::max(worst_dev, std::abs(windows[i] - pinned[i]) / pinned[i]);
  }
  pinned_ok = pinned_ok && worst_dev <= 0.2;
  if (std::getenv("TXN_PRINT_TRACE") != nullptr) {
    std::printf("window,mean\n");
    for (std::size_t i = 0; i < windows.size(); ++i) std::printf("%zu,%.9g\n", i, windows[i]);
  }
  *trained = std::move(res.params);
  const bool pass = final_mean < 0.1 * initial && secs < 300.0 && monotone && pinned_ok;
  return {pass, fmt("initial %.4g (min of first loss and first 50-iter mean), final 50-iter mean %.4g (%.2f%%), %.1f s, smoothed trace %s, "
                    "max deviation from pinned trace %s [limits 10%%, 300 s, 20%%]",
                    initial, final_mean, 100.0 * final_mean / initial, secs,
                    monotone ? "non-increasing" : "NOT monotone",
                    pinned.empty() ? "n/a (no pinned trace)" : fmt("%.1f%%", 100.0 * worst_dev).c_str())};
}

// ---------------------------------------------------------------------------

Outcome fully_convolutional() {
  auto net = DescriptorNet<float>::tiny();
  auto spec = LossSpec::defaults_for(net);
  const auto proto = fixture_prototype(64);
  auto res = train_texture(proto, fixture_arch(GeneratorMode::kTexture), net, spec, fixture_config(300));
  const auto target = compute_grams(net, proto, spec);
  auto& g = res.params;
  NoGradGuard no_grad;
  const int n = 8;
  auto mean_loss = [&](Index h, Index w, std::uint64_t seed, double* worst_ratio, double ref) {
    Rng rng(seed);
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      const auto x = g.forward(sample_noise<float>(h, w, 3, 1, 1.0f, rng.next()));
      const double l = texture_loss(x, target, net, spec).item();
      total += l;
      if (worst_ratio != nullptr) *worst_ratio = std::max({*worst_ratio, l / ref, ref / l});
    }
    return total / n;
  };
  const double base = mean_loss(64, 64, 5, nullptr, 0.0);
  double worst = 0.0;
  const double wide = mean_loss(64, 128, 6, &worst, base);
  return {worst <= 1.5, fmt("64x64 mean loss %.4g; 128x64 samples mean %.4g, worst single-sample ratio %.3f "
                            "[limit 1.5]", base, wide, worst)};
}

// ---------------------------------------------------------------------------

Outcome speed_direction() {
  auto net = DescriptorNet<float>::tiny();
  auto spec = LossSpec::defaults_for(net);
  const auto proto = fixture_prototype(32);
  auto res = train_texture(proto, fixture_arch(GeneratorMode::kTexture), net, spec, fixture_config(2000));
  PreimageConfig cfg;
  const SpeedReport rep = match_loss_time(res.params, proto, net, spec, cfg, 8, 7);

  PreimageConfig base;
  base.max_iters = 200;
  const auto it = synthesize_iterative(proto, net, spec, base);
  const double initial = it.trace.front().loss;
  const double reduced = it.best_loss / initial;

  const bool pass = rep.matched && rep.ratio >= 20.0 && reduced < 0.2;
  return {pass, fmt("feed-forward %.3f ms/sample at loss %.4g; iterative matched=%s after %lld iterations, "
                    "%.2f ms; ratio %.1fx; iterative 200-iter loss %.3g -> %.3g (%.2f%%) [limits 20x, 20%%]",
                    rep.feedforward_millis, rep.feedforward_loss, rep.matched ? "yes" : "NO",
                    static_cast<long long>(rep.iterative_iterations), rep.iterative_millis_to_match, rep.ratio,
                    initial, it.best_loss, 100.0 * reduced)};
}

// ---------------------------------------------------------------------------

Outcome optimizer_oracle() {
  const std::vector<double> a{0.5, 2.0, 7.0, 0.01, 3.0};
  const std::vector<double> c{1.0, -3.0, 0.25, 10.0, -0.5};
  std::vector<double> ref{0.0, 0.0, 1.0, -2.0, 4.0}, m(5, 0.0), v(5, 0.0);
  auto theta = Tensor<double>::from_data({5}, ref, true);
  auto at = Tensor<double>::from_data({5}, a), ct = Tensor<double>::from_data({5}, c);
  std::vector<Tensor<double>> params{theta};
  auto state = AdamState<double>::for_params(params);
  double worst = 0.0;
  for (int t = 1; t <= 10; ++t) {
    const double lr = 0.05 * t;
    zero_grad(params);
    auto d = sub(theta, ct);
    backward(sum(mul(at, mul(d, d))));
    adam_step(params, state, lr);
    for (std::size_t i = 0; i < 5; ++i) {
      const double g = 2.0 * a[i] * (ref[i] - c[i]);
      m[i] = 0.9 * m[i] + 0.1 * g;
      v[i] = 0.999 * v[i] + 0.001 * g * g;
      const double mh = m[i] / (1.0 - std::pow(0.9, t));
      const double vh = v[i] / (1.0 - std::pow(0.999, t));
      ref[i] -= lr * mh / (std::sqrt(vh) + 1e-8);
      worst = std::max(worst, std::abs(theta.data()[i] - ref[i]));
    }
  }
  LrSchedule s;
  const double l0 = s.at(0), l1000 = s.at(1000), l1400 = s.at(1400);
  const bool lr_ok = std::abs(l0 - 0.1) < 1e-12 && std::abs(l1000 - 0.07) < 1e-12 && std::abs(l1400 - 0.0343) < 1e-12;
  return {worst <= 1e-12 && lr_ok, fmt("max |adam - scalar reference| %.2e over 10 steps; lr(0)=%.4g lr(1000)=%.4g "
                                       "lr(1400)=%.4g [limit 1e-12]", worst, l0, l1000, l1400)};
}

// ---------------------------------------------------------------------------

Outcome style_objective() {
  auto net = DescriptorNet<float>::tiny();
  auto spec = LossSpec::defaults_for(net);
  const auto proto = fixture_prototype(32);
  const std::vector<Tensor<float>> pool{
      image_to_tensor<float>(checkerboard(32, 32, 16, {250, 250, 250}, {10, 10, 10})),
      image_to_tensor<float>(checkerboard(32, 32, 8, {200, 30, 120}, {40, 180, 60}))};

  set_deterministic(true);
  spec.alpha = 0.0;
  auto with_zero = train_style(proto, pool, fixture_arch(GeneratorMode::kStyle), net, spec, fixture_config(30));
  LossSpec texture_only = spec;
  texture_only.content_layers.clear();
  auto plain = train_style(proto, pool, fixture_arch(GeneratorMode::kStyle), net, texture_only, fixture_config(30));
  set_deterministic(false);
  const bool same = texture_losses(with_zero.trace) == texture_losses(plain.trace);

  spec.alpha = 1e6;
  auto heavy = train_style(proto, pool, fixture_arch(GeneratorMode::kStyle), net, spec, fixture_config(200));
  const auto cw = window_means(content_losses(heavy.trace), 20);
  const double ratio = cw.back() / cw.front();
  return {same && ratio < 0.5,
          fmt("alpha=0 texture trace %s the texture-only run (30 iterations); alpha=1e6 content loss "
              "%.4g -> %.4g (%.1f%%, 20-iteration means) [limit 50%%]",
              same ? "bitwise equals" : "DIFFERS from", cw.front(), cw.back(), 100.0 * ratio)};
}

// ---------------------------------------------------------------------------

Outcome serialization(const GeneratorParams<float>& trained) {
  bool ok = true;
  const auto desc_path = temp_path("acc_desc.bin");
  const auto net = DescriptorNet<float>::tiny();
  save_weights(net, desc_path);
  const auto back = load_weights_into(net, desc_path);
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    if (net.layers[i].kind != DescriptorLayerKind::kConv) continue;
    ok = ok && bitwise_equal(net.layers[i].conv.weight, back.layers[i].conv.weight) &&
         bitwise_equal(net.layers[i].conv.bias, back.layers[i].conv.bias);
  }
  save_weights(back, desc_path + "2");
  const bool desc_ok = ok && read_file(desc_path) == read_file(desc_path + "2");

  const auto gen_path = temp_path("acc_gen.bin");
  save_params(trained, gen_path);
  auto g = load_params<float>(gen_path, GeneratorMode::kTexture);
  bool gen_ok = g.arch == trained.arch;
  const auto pa = trained.parameters(), pb = g.parameters();
  for (std::size_t i = 0; gen_ok && i < pa.size(); ++i) gen_ok = bitwise_equal(pa[i], pb[i]);
  auto& src = const_cast<GeneratorParams<float>&>(trained);
  const auto ba = src.batch_norms(), bb = g.batch_norms();
  bool stats_nontrivial = false;
  for (std::size_t i = 0; gen_ok && i < ba.size(); ++i) {
    gen_ok = bitwise_equal(ba[i]->running_mean, bb[i]->running_mean) &&
             bitwise_equal(ba[i]->running_var, bb[i]->running_var);
    stats_nontrivial = stats_nontrivial || ba[i]->running_mean.data()[0] != 0.0f;
  }
  save_params(g, gen_path + "2");
  gen_ok = gen_ok && read_file(gen_path) == read_file(gen_path + "2");

  const auto img_path = temp_path("acc_img.ppm");
  ImageRGB img(37, 23);
  Rng rng(909);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.below(256));
  write_ppm(img, img_path);
  const auto img_back = read_ppm(img_path);
  write_ppm(img_back, img_path + "2");
  const bool img_ok = img_back == img && read_file(img_path) == read_file(img_path + "2");

  return {desc_ok && gen_ok && stats_nontrivial && img_ok,
          fmt("descriptor weights %s; generator params incl. trained BN running stats %s; PPM %s",
              desc_ok ? "bitwise" : "MISMATCH", gen_ok && stats_nontrivial ? "bitwise" : "MISMATCH",
              img_ok ? "bitwise" : "MISMATCH")};
}

// ---------------------------------------------------------------------------

Outcome parameter_count() {
  const auto arch = GeneratorArch::texture_default();
  const auto n = count_params(GeneratorParams<float>::init(arch, 0));
  std::string channels;
  for (int c : arch.channels) channels += (channels.empty() ? "" : ",") + std::to_string(c);
  return {n >= 40000 && n <= 90000,
          fmt("default 5-scale texture generator (channels %s) has %lld parameters [range 40K-90K]",
              channels.c_str(), static_cast<long long>(n))};
}

}  // namespace

int main() {
  set_worker_count(1);
  int failures = 0;
  auto report = [&](int id, const char* name, const Outcome& o) {
    std::printf("%s [%d] %s: %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failures;
  };
  auto guarded = [&](int id, const char* name, const std::function<Outcome()>& fn) {
    try {
      report(id, name, fn());
    } catch (const std::exception& e) {
      report(id, name, {false, std::string("exception: ") + e.what()});
    }
  };

  GeneratorParams<float> trained;
  guarded(1, "gradient suite", gradient_suite);
  guarded(2, "gram/mmd algebra", gram_algebra);
  guarded(3, "shift equivariance", shift_equivariance);
  guarded(4, "end-to-end texture training", [&] { return texture_training(&trained); });
  guarded(5, "fully-convolutional sampling", fully_convolutional);
  guarded(6, "speed direction", speed_direction);
  guarded(7, "optimizer oracle", optimizer_oracle);
  guarded(8, "style objective sanity", style_objective);
  guarded(9, "serialization", [&] {
    if (trained.scale.empty()) return Outcome{false, "no trained params (criterion 4 did not finish)"};
    return serialization(trained);
  });
  guarded(10, "parameter count", parameter_count);

  std::printf("%d/10 criteria passed\n", 10 - failures);
  return failures == 0 ? 0 : 1;
}

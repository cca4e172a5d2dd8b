#include <doctest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "txn/error.hpp"
#include "txn/ops.hpp"
#include "txn/parallel.hpp"
#include "txn/random.hpp"
#include "txn/tensor.hpp"

using namespace txn;
using txn::testing::check_gradients;
using txn::testing::project;
using txn::testing::random_tensor;

TEST_CASE("tensor construction and element access") {
  auto t = Tensor<float>::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(t.rank() == 2);
  CHECK(t.numel() == 6);
  CHECK(t.at({1, 2}) == 6.0f);
  CHECK(t.at({0, 1}) == 2.0f);
  CHECK_THROWS_AS(t.at({2, 0}), ShapeError);
  CHECK_THROWS_AS(t.item(), ShapeError);
  CHECK(Tensor<float>::scalar(3.5f).item() == 3.5f);
  CHECK_THROWS_AS(Tensor<float>::from_data({2, 2}, {1, 2, 3}), ShapeError);
  CHECK_THROWS_AS(Tensor<float>::zeros({1, 1, 1, 1, 1}), ShapeError);
  CHECK_THROWS_AS(Tensor<float>::zeros({-1}), ShapeError);
  CHECK(Tensor<double>::full({3}, 2.0).data()[2] == 2.0);
}

TEST_CASE("intermediates are immutable and detach drops history") {
  auto a = Tensor<double>::full({2}, 1.0, true);
  auto b = scale(a, 2.0);
  CHECK_FALSE(b.is_leaf());
  CHECK_THROWS_AS(b.mutable_data(), Error);
  auto d = b.detach();
  CHECK(d.is_leaf());
  CHECK_FALSE(d.requires_grad());
  CHECK(d.data()[0] == 2.0);
  CHECK_FALSE(d.same(b));
}

TEST_CASE("backward accumulates through shared subexpressions") {
  // f = sum((a*b) + (a*b)) with the product node consumed twice.
  auto a = Tensor<double>::from_data({2}, {2.0, -3.0}, true);
  auto b = Tensor<double>::from_data({2}, {5.0, 7.0}, true);
  auto p = mul(a, b);
  backward(sum(add(p, p)));
  CHECK(a.grad()[0] == 10.0);
  CHECK(a.grad()[1] == 14.0);
  CHECK(b.grad()[0] == 4.0);
  CHECK(b.grad()[1] == -6.0);

  SUBCASE("leaf gradients accumulate across calls until zeroed") {
    backward(sum(a));
    CHECK(a.grad()[0] == 11.0);
    a.zero_grad();
    CHECK(a.grad()[0] == 0.0);
  }
}

TEST_CASE("backward requires a scalar loss") {
  auto a = Tensor<double>::full({3}, 1.0, true);
  CHECK_THROWS_AS(backward(scale(a, 2.0)), ShapeError);
}

TEST_CASE("no-grad scope records no graph") {
  auto a = Tensor<double>::full({3}, 1.0, true);
  {
    NoGradGuard guard;
    CHECK_FALSE(grad_enabled());
    auto b = scale(a, 2.0);
    CHECK(b.is_leaf());
    CHECK_FALSE(b.requires_grad());
  }
  CHECK(grad_enabled());
  CHECK_FALSE(scale(a, 2.0).is_leaf());
}

TEST_CASE("inputs without requires_grad get no gradient slot") {
  auto a = Tensor<double>::full({2}, 1.0, true);
  auto c = Tensor<double>::full({2}, 4.0);
  backward(sum(mul(a, c)));
  CHECK(a.grad()[0] == 4.0);
  CHECK(c.grad().empty());
}

TEST_CASE("check_finite flags NaN-producing ops") {
  set_check_finite(true);
  auto a = Tensor<double>::from_data({1}, {std::numeric_limits<double>::infinity()});
  CHECK_THROWS_AS(sub(a, a), NumericError);
  set_check_finite(false);
  CHECK(std::isnan(sub(a, a).data()[0]));
}

TEST_CASE("shape errors name both operands") {
  auto a = Tensor<float>::zeros({2, 3});
  auto b = Tensor<float>::zeros({3, 2});
  try {
    add(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2,3]") != std::string::npos);
    CHECK(msg.find("[3,2]") != std::string::npos);
  }
  CHECK_THROWS_AS(matmul(a, a), ShapeError);
  CHECK_THROWS_AS(reshape(a, {4, 2}), ShapeError);
  CHECK_THROWS_AS(slice(a, 1, 2, 5), ShapeError);
  CHECK_THROWS_AS(broadcast_to(a, {2, 4}), ShapeError);
  CHECK_THROWS_AS(concat_batch<float>({a, b}), ShapeError);
}

TEST_CASE("op values") {
  auto a = Tensor<double>::from_data({2, 2}, {1, 2, 3, 4});
  auto b = Tensor<double>::from_data({2, 2}, {5, 6, 7, 8});
  auto m = matmul(a, b);
  CHECK(m.at({0, 0}) == 19.0);
  CHECK(m.at({1, 1}) == 50.0);
  CHECK(transpose(a).at({0, 1}) == 3.0);
  CHECK(mean(a).item() == 2.5);
  CHECK(slice(a, 0, 1, 2).at({0, 1}) == 4.0);
  auto row = Tensor<double>::from_data({2}, {10, 20});
  auto bc = broadcast_to(row, {3, 2});
  CHECK(bc.at({2, 1}) == 20.0);
  auto cat = concat_batch<double>({a, b});
  CHECK(cat.shape() == Shape{4, 2});
  CHECK(cat.at({3, 0}) == 7.0);
}

TEST_CASE("finite-difference checks for tensor ops") {
  Rng rng(7);
  auto a = random_tensor(rng, {3, 4});
  auto b = random_tensor(rng, {3, 4});
  auto w = random_tensor(rng, {3, 4}, false);
  auto c = random_tensor(rng, {4, 5});
  auto w35 = random_tensor(rng, {3, 5}, false);
  auto r = random_tensor(rng, {1, 4});
  auto w234 = random_tensor(rng, {2, 3, 4}, false);

  const double tol = 1e-4;
  CHECK(check_gradients([&] { return project(add(a, b), w); }, {a, b}).rel_error < tol);
  CHECK(check_gradients([&] { return project(sub(a, b), w); }, {a, b}).rel_error < tol);
  CHECK(check_gradients([&] { return project(mul(a, b), w); }, {a, b}).rel_error < tol);
  CHECK(check_gradients([&] { return project(scale(a, -1.7), w); }, {a}).rel_error < tol);
  CHECK(check_gradients([&] { return sum(mul(a, a)); }, {a}).rel_error < tol);
  CHECK(check_gradients([&] { return mean(mul(a, b)); }, {a, b}).rel_error < tol);
  CHECK(check_gradients([&] { return project(matmul(a, c), w35); }, {a, c}).rel_error < tol);
  CHECK(check_gradients([&] { return project(transpose(transpose(a)), w); }, {a}).rel_error < tol);
  CHECK(check_gradients([&] { return project(reshape(reshape(a, {2, 6}), {3, 4}), w); }, {a})
            .rel_error < tol);
  CHECK(check_gradients([&] { return sum(mul(slice(a, 1, 1, 3), slice(b, 1, 0, 2))); }, {a, b})
            .rel_error < tol);
  CHECK(check_gradients([&] { return project(broadcast_to(r, {2, 3, 4}), w234); }, {r})
            .rel_error < tol);
  CHECK(check_gradients(
            [&] {
              auto cat = concat_batch<double>({a, b});
              return sum(mul(cat, cat));
            },
            {a, b})
            .rel_error < tol);
}

TEST_CASE("parallel_for visits every index once and rethrows") {
  std::vector<int> hits(1000, 0);
  parallel_for(hits.size(), [&](std::size_t i) { hits[i] += 1; });
  for (int h : hits) CHECK(h == 1);
  CHECK_THROWS_AS(parallel_for(8, [](std::size_t i) {
                    if (i == 5) throw ConfigError("boom");
                  }),
                  ConfigError);
}

TEST_CASE("rng draws are reproducible and in range") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) {
    const double u = a.uniform();
    CHECK(u == b.uniform());
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    const float f = a.uniform_float();
    CHECK(f == b.uniform_float());
    CHECK(f < 1.0f);
    CHECK(a.below(7) == b.below(7));
    CHECK(a.normal() == b.normal());
  }
  Rng c(1);
  double s = 0.0, s2 = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double z = c.normal();
    s += z;
    s2 += z * z;
  }
  CHECK(std::abs(s / n) < 0.05);
  CHECK(std::abs(s2 / n - 1.0) < 0.05);
}

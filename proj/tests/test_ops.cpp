#include <doctest.h>

#include <cmath>
#include <random>

#include "c2g/errors.hpp"
#include "c2g/ops.hpp"
#include "c2g/params.hpp"
#include "support.hpp"

using namespace c2g;
using c2g::testing::gradcheck;
using c2g::testing::random_tensor;

TEST_CASE("matmul examples") {
  Tensor eye({2, 2}, {1, 0, 0, 1});
  Tensor m({2, 2}, {1, 2, 3, 4});
  CHECK(matmul(eye, m).values() == m.values());
  CHECK(matmul(Tensor({1, 2}, {1, 2}), Tensor({2, 1}, {3, 4})).item() == 11.0);
}

TEST_CASE("matmul gradient of sum(a b)") {
  Tensor a({1, 2}, {1, 1}, true);
  Tensor b({2, 1}, {2, 5});
  sum(matmul(a, b)).backward();
  CHECK(a.grad()[0] == doctest::Approx(2.0));
  CHECK(a.grad()[1] == doctest::Approx(5.0));
}

TEST_CASE("matmul shape mismatch names both shapes") {
  try {
    matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3}));
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
  }
}

TEST_CASE("relu examples and gradient mask") {
  Tensor x({3}, {-1, 0, 2}, true);
  Tensor y = relu(x);
  CHECK(y.values() == std::vector<double>{0, 0, 2});
  sum(y).backward();
  CHECK(std::vector<double>(x.grad().begin(), x.grad().end()) == std::vector<double>{0, 0, 1});
  Tensor pos({3}, {0.5, 1, 2});
  CHECK(relu(pos).values() == pos.values());
}

TEST_CASE("softened softmax examples") {
  auto p = softened_softmax(Tensor({1, 2}, {0.7, 0.7}), 3.0);
  CHECK(p.data()[0] == doctest::Approx(0.5));
  p = softened_softmax(Tensor({1, 2}, {std::log(2.0), 0.0}), 1.0);
  CHECK(p.data()[0] == doctest::Approx(2.0 / 3.0));
  CHECK(p.data()[1] == doctest::Approx(1.0 / 3.0));
  p = softened_softmax(Tensor({1, 2}, {1.0, 0.0}), 100.0);
  CHECK(p.data()[0] == doctest::Approx(0.5025).epsilon(1e-4));
  CHECK(p.data()[1] == doctest::Approx(0.4975).epsilon(1e-4));
  CHECK_THROWS_AS(softened_softmax(Tensor({1, 2}, {1, 0}), 0.0), ParameterError);
}

TEST_CASE("softmax is stable for huge logits") {
  auto p = softened_softmax(Tensor({1, 2}, {1000.0, 0.0}), 1.0);
  CHECK(std::isfinite(p.data()[0]));
  CHECK(p.data()[0] == doctest::Approx(1.0));
}

TEST_CASE("cross entropy examples") {
  std::vector<int> label0{0};
  CHECK(cross_entropy(Tensor({1, 4}, {0, 0, 0, 0}), label0).item() == doctest::Approx(std::log(4.0)));
  CHECK(cross_entropy(Tensor({1, 2}, {1000, 0}), label0).item() == doctest::Approx(0.0));
  CHECK(cross_entropy(Tensor({1, 2}, {std::log(3.0), 0}), label0).item() ==
        doctest::Approx(-std::log(0.75)));
  std::vector<int> bad{2};
  CHECK_THROWS_AS(cross_entropy(Tensor({1, 2}, {0, 0}), bad), std::out_of_range);
}

TEST_CASE("sgd step examples") {
  ModelParams params;
  params.add("p", Tensor({1}, {1.0}, true));
  sum(scale(params.get("p"), 2.0)).backward();
  sgd_step(params, 0.01);
  CHECK(params.get("p").item() == doctest::Approx(0.98));

  params.get("p").zero_grad();
  sgd_step(params, 0.01);
  CHECK(params.get("p").item() == doctest::Approx(0.98));

  ModelParams q;
  q.add("x", Tensor({2}, {1.0, -2.0}, true));
  auto quadratic = [&] { return sum(mul(q.get("x"), q.get("x"))); };
  double previous = quadratic().item();
  for (int step = 0; step < 2; ++step) {
    quadratic().backward();
    sgd_step(q, 0.1);
    const double now = quadratic().item();
    CHECK(now < previous);
    previous = now;
  }
}

TEST_CASE("sgd rejects bad learning rates and missing gradients") {
  ModelParams params;
  params.add("p", Tensor({1}, {1.0}, true));
  CHECK_THROWS_AS(sgd_step(params, 0.0), ParameterError);
  CHECK_THROWS_AS(sgd_step(params, 0.1), StateError);
}

TEST_CASE("every op matches central finite differences") {
  std::mt19937_64 rng(7);
  for (const auto& [name, err] : c2g::testing::op_gradient_errors(rng)) {
    INFO(name);
    CHECK(err < 1e-4);
  }
}

TEST_CASE("composite loss through matmul, relu and softmax") {
  std::mt19937_64 rng(11);
  auto x = random_tensor({4, 3}, rng);
  auto w1 = random_tensor({3, 5}, rng);
  auto w2 = random_tensor({5, 3}, rng);
  const std::vector<int> labels{0, 1, 2, 1};
  double err = gradcheck(
      [&](const std::vector<Tensor>& p) {
        auto logits = matmul(relu(matmul(p[0], p[1])), p[2]);
        return add(cross_entropy(logits, labels), sum(softened_softmax(logits, 3.0)));
      },
      {x, w1, w2});
  CHECK(err < 1e-4);
}

TEST_CASE("im2col geometry") {
  // 1x1 kernel: one row per pixel
  Tensor x({1, 1, 2, 2}, {1, 2, 3, 4});
  auto cols = im2col(x, ConvGeometry{1, 1, 1, 0});
  CHECK(cols.shape() == Shape{4, 1});
  CHECK(cols.values() == x.values());
  // 2x2 kernel on a 2x2 image: one patch
  cols = im2col(x, ConvGeometry{2, 2, 1, 0});
  CHECK(cols.shape() == Shape{1, 4});
  CHECK(cols.values() == x.values());
  CHECK_THROWS_AS(im2col(x, ConvGeometry{3, 3, 1, 0}), ShapeError);
}

TEST_CASE("sym_normalize rejects isolated nodes") {
  CHECK_THROWS(sym_normalize(Tensor({2, 2}, {1, 0, 0, 0})));
}

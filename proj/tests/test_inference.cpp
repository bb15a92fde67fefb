#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "c2g/errors.hpp"
#include "c2g/inference.hpp"
#include "support.hpp"

using namespace c2g;
using c2g::testing::random_tensor;

namespace {

GnnStudent scalar_student(double w1, double w2a, double w2b) {
  std::mt19937_64 rng(0);
  GnnStudent student(1, 1, 2, rng);
  student.params.get("W1").mutable_data()[0] = w1;
  student.params.get("W2").mutable_data()[0] = w2a;
  student.params.get("W2").mutable_data()[1] = w2b;
  return student;
}

}  // namespace

TEST_CASE("cascade links a test point to its coincident training point") {
  std::mt19937_64 rng(1);
  auto train = random_tensor({12, 3}, rng, -1, 1, false);
  std::vector<std::size_t> ids(12);
  std::iota(ids.begin(), ids.end(), 40);
  auto head = euclidean_stub_head(train, ids);
  for (std::size_t k = 0; k < 12; ++k) {
    const std::size_t row[] = {k};
    auto directed = cascade_directed_rows(head, gather_rows(train, row), train, ids, 3);
    std::size_t best = 1;
    for (std::size_t j = 2; j <= 12; ++j)
      if (directed.at(0, j) > directed.at(0, best)) best = j;
    CHECK(best == k + 1);
    // training rows never point at the test node
    for (std::size_t i = 1; i <= 12; ++i) CHECK(directed.at(i, 0) == 0.0);
  }
}

TEST_CASE("smallest cascade is computable by hand") {
  // references x_a = 0, x_b = 3; test x_t = 1; s = 1
  Tensor train({2, 1}, {0.0, 3.0});
  std::vector<std::size_t> ids{0, 1};
  auto head = euclidean_stub_head(train, ids);
  auto student = scalar_student(1.0, 1.0, -1.0);
  auto logits = infer_one_by_one(student, head, Tensor({1, 1}, {1.0}), train, ids, 1);
  // t->a, a->b, b->a; A+I = [[1,.5,0],[.5,1,1],[0,1,1]], degrees 1.5, 2.5, 2
  const double pta = 0.5 / std::sqrt(1.5 * 2.5), pab = 1.0 / std::sqrt(2.5 * 2.0);
  const double h_t = 1.0 / 1.5, h_a = pta * 1.0 + pab * 3.0;
  const double v = h_t / 1.5 + pta * h_a;
  CHECK(logits.shape() == Shape{1, 2});
  CHECK(logits.at(0, 0) == doctest::Approx(v).epsilon(1e-12));
  CHECK(logits.at(0, 1) == doctest::Approx(-v).epsilon(1e-12));
  CHECK(infer_one_by_one(student, head, Tensor({1, 1}, {1.0}), train, ids, 1).values() == logits.values());
  CHECK_THROWS_AS(infer_one_by_one(student, head, Tensor({1, 1}, {1.0}), train, ids, 2), ParameterError);
}

TEST_CASE("surrogates recover coincident training samples") {
  std::mt19937_64 rng(2);
  auto train = random_tensor({15, 4}, rng, -1, 1, false);
  std::vector<std::size_t> ids(15);
  std::iota(ids.begin(), ids.end(), 7);
  auto head = euclidean_stub_head(train, ids);
  const std::vector<std::size_t> picks{4, 11, 0, 9, 2};
  auto graph = surrogate_graph(head, gather_rows(train, picks), train, ids, 3);
  for (std::size_t i = 0; i < picks.size(); ++i) CHECK(graph.surrogates[i] == ids[picks[i]]);
  for (std::size_t i = 0; i < picks.size(); ++i) CHECK(graph.directed.at(i, i) == 0.0);
}

TEST_CASE("two-sample test batch uses the unique two-node graph") {
  Tensor train({3, 1}, {0.0, 2.0, 5.0});
  std::vector<std::size_t> ids{0, 1, 2};
  auto head = euclidean_stub_head(train, ids);
  Tensor test({2, 1}, {0.5, 4.0});
  auto graph = surrogate_graph(head, test, train, ids, 1);
  CHECK(graph.surrogates == std::vector<std::size_t>{0, 2});
  for (double v : graph.propagation.data()) CHECK(v == doctest::Approx(0.5).epsilon(1e-15));
  auto student = scalar_student(1.0, 2.0, -1.0);
  auto logits = infer_batch(student, head, test, train, ids, 1);
  // both nodes see the mean of the mean: 2.25
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(logits.at(i, 0) == doctest::Approx(4.5));
    CHECK(logits.at(i, 1) == doctest::Approx(-2.25));
  }
}

TEST_CASE("single-sample test batch propagates to itself") {
  Tensor train({3, 1}, {0.0, 2.0, 5.0});
  std::vector<std::size_t> ids{0, 1, 2};
  auto head = euclidean_stub_head(train, ids);
  auto graph = surrogate_graph(head, Tensor({1, 1}, {1.9}), train, ids, 2);
  CHECK(graph.surrogates == std::vector<std::size_t>{1});
  CHECK(graph.propagation.values() == std::vector<double>{1.0});
}

TEST_CASE("memorizing student scores perfectly on seen samples") {
  // zero-spread blobs: same-class samples coincide, other classes sit one apart
  auto data = make_blobs(60, 3, 3, 0.0, 0);
  std::vector<std::size_t> train_ids(data.ids);
  auto head = euclidean_stub_head(data.rows(train_ids), train_ids);
  std::mt19937_64 rng(0);
  GnnStudent student(3, 3, 3, rng);
  auto& w1 = student.params.get("W1");
  auto& w2 = student.params.get("W2");
  for (std::size_t i = 0; i < 9; ++i) {
    w1.mutable_data()[i] = i % 4 == 0 ? 1.0 : 0.0;
    w2.mutable_data()[i] = i % 4 == 0 ? 1.0 : 0.0;
  }
  DistillConfig cfg;
  cfg.batch_size = 12;
  cfg.s = 2;
  std::vector<std::size_t> test_ids{0, 4, 8, 13, 17, 21, 30, 31, 32, 45, 46, 47, 59};
  auto reference = choose_reference_batch(train_ids, 30, 1);
  for (auto mechanism : {Mechanism::batch, Mechanism::one_by_one}) {
    auto report = evaluate(student, head, data, test_ids, reference, cfg, mechanism);
    CHECK(report.accuracy == 1.0);
    CHECK(report.predictions.size() == test_ids.size());
  }
}

TEST_CASE("inference report contract") {
  auto data = make_blobs(40, 2, 4, 0.3, 1);
  auto parts = split(data, 0.25, 1);
  std::mt19937_64 rng(3);
  GnnStudent student(4, 5, 2, rng);
  DistanceHead head(4, {6}, parts.train_ids, rng);
  DistillConfig cfg;
  cfg.batch_size = 4;
  cfg.s = 2;
  auto reference = choose_reference_batch(parts.train_ids, 10, 0);
  CHECK(reference.size() == 10);
  CHECK(std::is_sorted(reference.begin(), reference.end()));
  auto report = evaluate(student, head, data, parts.test_ids, reference, cfg, Mechanism::batch);
  CHECK(report.predictions.size() == parts.test_ids.size());
  CHECK(report.accuracy >= 0.0);
  CHECK(report.accuracy <= 1.0);
  CHECK_THROWS_AS(evaluate(student, head, data, {}, reference, cfg, Mechanism::batch), InputError);

  std::ostringstream os;
  report.write_csv(os);
  CHECK(os.str().rfind("mechanism,n_test,accuracy,wall_ms\nbatch,10,", 0) == 0);
  std::ostringstream preds;
  report.write_predictions(preds);
  CHECK(preds.str().rfind("test_id,pred,label\n", 0) == 0);
}

TEST_CASE("wall time grows with the test set") {
  auto data = make_blobs(400, 3, 8, 0.3, 2);
  auto parts = split(data, 0.5, 2);
  std::mt19937_64 rng(4);
  GnnStudent student(8, 16, 3, rng);
  DistanceHead head(8, {32}, parts.train_ids, rng);
  DistillConfig cfg;
  cfg.batch_size = 20;
  cfg.s = 5;
  auto reference = choose_reference_batch(parts.train_ids, 20, 0);
  std::span<const std::size_t> all(parts.test_ids);
  auto small = evaluate(student, head, data, all.first(5), reference, cfg, Mechanism::one_by_one);
  auto large = evaluate(student, head, data, all, reference, cfg, Mechanism::one_by_one);
  CHECK(small.wall_ms < large.wall_ms);
}

TEST_CASE("agreement between prediction lists") {
  std::vector<int> a{0, 1, 2, 1}, b{0, 1, 1, 1};
  CHECK(agreement(a, b) == 0.75);
  std::vector<int> c{0};
  CHECK_THROWS_AS(agreement(a, c), ShapeError);
}

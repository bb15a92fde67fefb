#include <doctest.h>

#include <bit>
#include <cstring>
#include <filesystem>
#include <random>
#include <sstream>

#include "c2g/checkpoint.hpp"
#include "support.hpp"

using namespace c2g;

TEST_CASE("checkpoint round trip is bit exact") {
  std::mt19937_64 rng(1);
  ModelParams params;
  params.add("a.weight", c2g::testing::random_tensor({3, 4}, rng));
  params.add("b", Tensor({2}, {1.0 / 3.0, -0.0}));
  params.add("c", Tensor({1}, {std::numeric_limits<double>::denorm_min()}));
  std::stringstream buffer;
  write_checkpoint(buffer, params);
  auto back = read_checkpoint(buffer);
  REQUIRE(back.size() == params.size());
  auto it = back.begin();
  for (const auto& [name, t] : params) {
    CHECK(it->first == name);
    CHECK(it->second.shape() == t.shape());
    for (std::size_t i = 0; i < t.numel(); ++i)
      CHECK(std::bit_cast<std::uint64_t>(it->second.data()[i]) == std::bit_cast<std::uint64_t>(t.data()[i]));
    ++it;
  }
}

TEST_CASE("checkpoint files round trip") {
  auto path = std::filesystem::temp_directory_path() / "c2g_checkpoint_test.c2g";
  ModelParams params;
  params.add("w", Tensor({2, 2}, {1, 2, 3, 4}));
  save_checkpoint(path, params);
  auto back = load_checkpoint(path);
  CHECK(back.get("w").values() == params.get("w").values());
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);
}

TEST_CASE("corrupt checkpoints are rejected") {
  std::stringstream bad_magic("XXXX");
  CHECK_THROWS_AS(read_checkpoint(bad_magic), CheckpointError);

  ModelParams params;
  params.add("w", Tensor({2, 2}, {1, 2, 3, 4}));
  std::stringstream buffer;
  write_checkpoint(buffer, params);
  auto bytes = buffer.str();
  std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(read_checkpoint(truncated), CheckpointError);
}

TEST_CASE("assign parameters checks names and shapes") {
  ModelParams target;
  target.add("w", Tensor::zeros({2}));
  ModelParams source;
  source.add("net.w", Tensor({2}, {5, 6}));
  assign_parameters(target, source, "net.");
  CHECK(target.get("w").values() == std::vector<double>{5, 6});

  ModelParams wrong;
  wrong.add("w", Tensor::zeros({3}));
  CHECK_THROWS_AS(assign_parameters(target, wrong), CheckpointError);
  CHECK_THROWS_AS(assign_parameters(target, ModelParams{}), CheckpointError);
}

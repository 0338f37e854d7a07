#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "doctest.h"
#include "ranet/model.hpp"
#include "test_util.hpp"

using namespace ranet;
using test_util::bit_equal;
using test_util::random_tensor;

namespace {

// Small but structurally complete configuration for fast tests.
ModelConfig desk_config() {
  ModelConfig c;
  c.input_size = 64;
  c.stem_channels = 8;
  c.channel_scale = 16.0f;
  return c;
}

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() / ("ranet_model_test_" + std::to_string(::getpid()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("desk-scale model emits probability rows") {
  ModelGraph model(desk_config(), 7);
  Rng rng(1);
  Tensor probs = model.forward(random_tensor({2, 3, 64, 64}, rng, 0.0f, 1.0f), Mode::eval);
  CHECK(probs.shape == std::vector<int>{2, 2});
  for (int n = 0; n < 2; ++n) {
    float acc = 0.0f;
    for (int c = 0; c < 2; ++c) {
      const float p = probs.data[static_cast<std::size_t>(n) * 2 + c];
      CHECK(p >= 0.0f);
      CHECK(p <= 1.0f);
      acc += p;
    }
    CHECK(acc == doctest::Approx(1.0f).epsilon(1e-5));
  }
}

TEST_CASE("zero input on a fresh model still yields finite probabilities") {
  ModelGraph model(desk_config(), 3);
  Tensor probs = model.forward(Tensor::zeros({1, 3, 64, 64}), Mode::eval);
  CHECK(probs.all_finite());
  CHECK(probs.data[0] + probs.data[1] == doctest::Approx(1.0f).epsilon(1e-5));
}

TEST_CASE("identical images in a batch produce identical rows in eval mode") {
  ModelGraph model(desk_config(), 11);
  Rng rng(2);
  Tensor img = random_tensor({1, 3, 64, 64}, rng, 0.0f, 1.0f);
  Tensor batch({2, 3, 64, 64});
  std::copy(img.data.begin(), img.data.end(), batch.data.begin());
  std::copy(img.data.begin(), img.data.end(), batch.data.begin() + img.numel());
  Tensor probs = model.forward(batch, Mode::eval);
  CHECK(probs.data[0] == probs.data[2]);
  CHECK(probs.data[1] == probs.data[3]);
}

TEST_CASE("eval forward is bit-identical across repeated calls") {
  ModelGraph model(desk_config(), 13);
  Rng rng(3);
  Tensor batch = random_tensor({1, 3, 64, 64}, rng, 0.0f, 1.0f);
  CHECK(bit_equal(model.forward(batch, Mode::eval), model.forward(batch, Mode::eval)));
}

TEST_CASE("scaled config keeps the stage shape algebra") {
  ModelConfig c;
  c.input_size = 64;
  c.channel_scale = 4.0f;
  c.stem_channels = 8;
  ModelGraph model(c, 5);
  auto trace = model.forward_trace(Tensor::zeros({1, 3, 64, 64}));
  REQUIRE(trace.size() == 12);
  CHECK(trace[0].shape == std::vector<int>{1, 8, 32, 32});      // stem.conv
  CHECK(trace[1].shape == std::vector<int>{1, 8, 16, 16});      // stem.pool
  CHECK(trace[2].shape == std::vector<int>{1, 32, 16, 16});     // stage1.res
  CHECK(trace[3].shape == std::vector<int>{1, 32, 16, 16});     // stage1.att
  CHECK(trace[4].shape == std::vector<int>{1, 64, 8, 8});       // stage2.res
  CHECK(trace[6].shape == std::vector<int>{1, 128, 4, 4});      // stage3.res
  CHECK(trace[8].shape == std::vector<int>{1, 256, 2, 2});      // stage4.res
  CHECK(trace[10].shape == std::vector<int>{1, 256, 2, 2});     // stage6.res
  CHECK(trace[11].shape == std::vector<int>{1, 2});             // head
}

TEST_CASE("model validates config invariants with explicit messages") {
  ModelConfig bad;
  bad.input_size = 100;  // not a multiple of 32
  CHECK_THROWS_WITH_AS(ModelGraph(bad, 0), doctest::Contains("multiple of 32"), std::invalid_argument);
  ModelConfig bad2;
  bad2.channel_scale = -1.0f;
  CHECK_THROWS_WITH_AS(ModelGraph(bad2, 0), doctest::Contains("channel_scale"), std::invalid_argument);
}

TEST_CASE("model rejects wrong input shapes naming expected and actual") {
  ModelGraph model(desk_config(), 1);
  CHECK_THROWS_WITH_AS(model.forward(Tensor::zeros({1, 3, 32, 32}), Mode::eval),
                       doctest::Contains("[N,3,64,64]"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(model.forward(Tensor::zeros({1, 3, 32, 32}), Mode::eval),
                       doctest::Contains("[1x3x32x32]"), std::invalid_argument);
}

TEST_CASE("xavier bounds hold for every conv and dense weight") {
  ModelGraph model(desk_config(), 99);
  for (const auto& p : model.params().all()) {
    if (p->name.find(".weight") == std::string::npos) continue;
    int fan_in = 0, fan_out = 0;
    if (p->value.ndim() == 4) {
      const auto& s = p->value.shape;
      fan_in = s[1] * s[2] * s[3];
      fan_out = s[0] * s[2] * s[3];
    } else {
      fan_in = p->value.dim(0);
      fan_out = p->value.dim(1);
    }
    const float bound = std::sqrt(6.0f / static_cast<float>(fan_in + fan_out));
    CAPTURE(p->name);
    for (float v : p->value.data) {
      CHECK(v <= bound);
      CHECK(v >= -bound);
    }
  }
}

TEST_CASE("biases start at zero and batch-norm stats at identity") {
  ModelGraph model(desk_config(), 4);
  for (const auto& p : model.params().all()) {
    if (p->name.find(".bias") != std::string::npos || p->name.find(".running_mean") != std::string::npos)
      for (float v : p->value.data) CHECK(v == 0.0f);
    if (p->name.find(".running_var") != std::string::npos)
      for (float v : p->value.data) CHECK(v == 1.0f);
  }
}

TEST_CASE("desk-scale parameter count is frozen") {
  // Shape-sum regression value, computed once from the registry at first
  // build; guards accidental architecture drift.
  ModelGraph model(desk_config(), 0);
  CHECK(model.params().total_count() == 182178);
}

TEST_CASE("save/load round trip preserves forward outputs bit-exactly") {
  TempDir tmp;
  ModelGraph model(desk_config(), 21);
  Rng rng(6);
  Tensor batch = random_tensor({1, 3, 64, 64}, rng, 0.0f, 1.0f);
  Tensor before = model.forward(batch, Mode::eval);

  const std::string path = tmp.file("model.ranet");
  model.save(path);
  ModelGraph loaded = ModelGraph::load(path);
  CHECK(bit_equal(loaded.forward(batch, Mode::eval), before));

  // Round trip also preserves batch-norm running stats bit-exactly.
  for (const auto& p : model.params().all()) {
    const Parameter* q = loaded.params().find(p->name);
    REQUIRE(q != nullptr);
    CHECK(p->value.data == q->value.data);
  }
}

TEST_CASE("model file size is header plus four bytes per parameter") {
  TempDir tmp;
  ModelGraph model(desk_config(), 8);
  const std::string path = tmp.file("m.ranet");
  model.save(path);

  std::ifstream in(path, std::ios::binary);
  in.seekg(12);
  std::uint32_t header_len = 0;
  in.seekg(8);
  std::uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), 4);
  in.read(reinterpret_cast<char*>(&header_len), 4);
  const auto size = std::filesystem::file_size(path);
  CHECK(size == 16 + header_len + 4 * model.params().total_count());
}

TEST_CASE("load failure modes are distinct and leave no partial model") {
  TempDir tmp;
  ModelGraph model(desk_config(), 30);
  const std::string good = tmp.file("good.ranet");
  model.save(good);

  SUBCASE("bad magic") {
    const std::string path = tmp.file("bad_magic.ranet");
    std::ofstream(path, std::ios::binary) << "NOTAMODELxxxxxxxxxxxxxxx";
    CHECK_THROWS_WITH_AS(ModelGraph::load(path), doctest::Contains("bad magic"), std::runtime_error);
  }
  SUBCASE("truncated payload") {
    const std::string path = tmp.file("trunc.ranet");
    std::ifstream in(good, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::ofstream(path, std::ios::binary) << bytes.substr(0, bytes.size() - 64);
    CHECK_THROWS_WITH_AS(ModelGraph::load(path), doctest::Contains("truncated"), std::runtime_error);
  }
  SUBCASE("version mismatch") {
    const std::string path = tmp.file("ver.ranet");
    std::ifstream in(good, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    bytes[8] = 9;  // bump version field
    std::ofstream(path, std::ios::binary) << bytes;
    CHECK_THROWS_WITH_AS(ModelGraph::load(path), doctest::Contains("version"), std::runtime_error);
  }
}

TEST_CASE("feature maps: counts, normalization, and round-trip stability") {
  ModelConfig c;
  c.input_size = 64;
  c.stem_channels = 64;
  c.channel_scale = 16.0f;
  ModelGraph model(c, 17);
  Rng rng(18);
  Tensor img = random_tensor({3, 64, 64}, rng, 0.0f, 1.0f);

  auto conv_maps = model.feature_maps(img, FeatureTap::stem_conv, 64);
  REQUIRE(conv_maps.size() == 64);
  CHECK(conv_maps[0].shape == std::vector<int>{32, 32});
  auto pool_maps = model.feature_maps(img, FeatureTap::stem_pool, 64);
  CHECK(pool_maps[0].shape == std::vector<int>{16, 16});
  for (const auto& m : conv_maps)
    for (float v : m.data) {
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
    }

  CHECK_THROWS_WITH_AS(model.feature_maps(img, FeatureTap::stem_conv, 65), doctest::Contains("only"),
                       std::invalid_argument);

  // Zero input with zero bias: all maps collapse to the constant 0.
  auto zero_maps = model.feature_maps(Tensor::zeros({3, 64, 64}), FeatureTap::stem_conv, 64);
  for (const auto& m : zero_maps)
    for (float v : m.data) CHECK(v == 0.0f);

  TempDir tmp;
  const std::string path = tmp.file("fm.ranet");
  model.save(path);
  ModelGraph loaded = ModelGraph::load(path);
  auto reloaded_maps = loaded.feature_maps(img, FeatureTap::stem_conv, 64);
  for (std::size_t i = 0; i < conv_maps.size(); ++i) CHECK(bit_equal(conv_maps[i], reloaded_maps[i]));
}

#include <gtest/gtest.h>

#include <bit>
#include <filesystem>
#include <random>

#include "pptflow/checkpoint.hpp"
#include "test_support.hpp"

using namespace pptflow;

namespace {

Checkpoint sample_checkpoint() {
  PPTNetConfig cfg;
  cfg.input_features = 3;
  cfg.d_model = 8;
  cfg.d_ff = 16;
  cfg.heads = 2;
  cfg.top_k = 2;
  cfg.periodic_blocks = 1;
  cfg.decoder_layers = 1;
  cfg.lookback = 16;
  cfg.horizon = 4;
  Checkpoint ck{cfg, init_params(cfg, 17), {{0.1, -2.0, 1e-300}, {1.0, 0.5, 3.0}}, {"a", "b", "c"}, {{"segment", 1}}};
  // Non-round values exercise exact bit preservation.
  ck.params.query.value[0] = 0.1 + 0.2;
  ck.params.query.value[1] = -0.0;
  return ck;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("pptflow_ckpt_" + name);
}

void expect_artifact_error(const std::string& bytes) {
  try {
    deserialize_checkpoint(bytes, "test");
    FAIL() << "expected an artifact error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kArtifact) << e.what();
  }
}

}  // namespace

TEST(Checkpoint, RoundTripIsBitwise) {
  Checkpoint ck = sample_checkpoint();
  const auto path = temp_path("roundtrip.bin");
  save_checkpoint(path, ck);
  Checkpoint back = load_checkpoint(path);
  std::filesystem::remove(path);

  EXPECT_TRUE(back.config == ck.config);
  auto a = ck.params.all();
  auto b = back.params.all();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i]->name, b[i]->name);
    ASSERT_EQ(a[i]->value.shape(), b[i]->value.shape());
    for (std::size_t k = 0; k < a[i]->value.size(); ++k)
      EXPECT_EQ(std::bit_cast<std::uint64_t>(a[i]->value[k]), std::bit_cast<std::uint64_t>(b[i]->value[k]));
  }
  EXPECT_EQ(back.norm.mean, ck.norm.mean);
  EXPECT_EQ(back.norm.std, ck.norm.std);
  EXPECT_EQ(back.features, ck.features);
  EXPECT_EQ(back.meta["segment"], 1);
  EXPECT_EQ(serialize_checkpoint(back), serialize_checkpoint(ck));

  std::mt19937_64 rng(1);
  const Tensor x = pptflow::testing::random_tensor(Shape{2, 16, 3}, rng);
  const Tensor p1 = predict(x, ck.params, ck.config), p2 = predict(x, back.params, back.config);
  for (std::size_t i = 0; i < p1.size(); ++i) EXPECT_EQ(std::bit_cast<std::uint64_t>(p1[i]), std::bit_cast<std::uint64_t>(p2[i]));
}

TEST(Checkpoint, CorruptionIsRejected) {
  const std::string good = serialize_checkpoint(sample_checkpoint());
  expect_artifact_error("");
  expect_artifact_error("NOTMAGIC" + good.substr(8));
  expect_artifact_error(good.substr(0, good.size() - 1));
  expect_artifact_error(good.substr(0, 20));

  // Header edits: a different d_model no longer matches the stored shapes.
  std::string edited = good;
  const auto pos = edited.find("\"d_model\":8");
  ASSERT_NE(pos, std::string::npos);
  edited.replace(pos, 11, "\"d_model\":4");
  expect_artifact_error(edited);

  // A NaN in the parameter blob.
  std::string nan_blob = good;
  const std::uint64_t bits = std::bit_cast<std::uint64_t>(std::nan(""));
  for (int i = 0; i < 8; ++i) nan_blob[nan_blob.size() - 8 + static_cast<std::size_t>(i)] = static_cast<char>((bits >> (8 * i)) & 0xff);
  expect_artifact_error(nan_blob);

  try {
    load_checkpoint(temp_path("does_not_exist.bin"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kMissingFile);
  }
}

TEST(Checkpoint, ConfigJsonRoundTrip) {
  PPTNetConfig cfg;
  cfg.use_decoder = false;
  cfg.kernel_sizes = {1, 5, 7};
  EXPECT_TRUE(config_from_json(config_to_json(cfg)) == cfg);
  nlohmann::json j = config_to_json(cfg);
  j.erase("heads");
  EXPECT_THROW(config_from_json(j), Error);
}

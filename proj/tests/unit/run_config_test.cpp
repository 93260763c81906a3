#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "manner/errors.hpp"
#include "manner/run_config.hpp"

namespace {

using namespace manner;
namespace fs = std::filesystem;

constexpr const char* kFull = R"(
[model]
channels = 12
depth = 2
chunk_size = 16
variant = small
global_attention = false

[train]
epochs = 3
batch_size = 2
seed = 11
lr_min = 1e-4
lr_max = 5e-3
warmup_fraction = 0.25
cycle_per_epoch = true
segment_seconds = 1
segment_hop_seconds = 0.5
tempo_augment = false
max_steps = 40
validate_every = 2

[loss]
resolutions = 256:64:200,512:128:400
weighted = false
log_floor = 1e-6

[data]
train_noisy = corpus/noisy
train_clean = corpus/clean

[output]
dir = out
)";

TEST(RunConfig, ParsesEverySection) {
  const auto rc = parse_run_config(kFull, "/base");
  EXPECT_EQ(rc.model.channels, 12);
  EXPECT_EQ(rc.model.depth, 2);
  EXPECT_EQ(rc.model.variant, Variant::kSmall);
  EXPECT_FALSE(rc.model.attention.global);
  EXPECT_TRUE(rc.model.attention.local);
  EXPECT_EQ(rc.train.epochs, 3);
  EXPECT_EQ(rc.train.batch_size, 2);
  EXPECT_EQ(rc.train.seed, 11u);
  EXPECT_DOUBLE_EQ(rc.train.lr_max, 5e-3);
  EXPECT_TRUE(rc.train.cycle_per_epoch);
  EXPECT_FALSE(rc.train.tempo_augment);
  EXPECT_EQ(rc.train.max_steps, 40);
  EXPECT_EQ(rc.train.validate_every, 2);
  ASSERT_EQ(rc.train.loss.resolutions.size(), 2u);
  EXPECT_EQ(rc.train.loss.resolutions[1], (StftConfig{512, 128, 400}));
  EXPECT_FALSE(rc.train.loss.weighted);
  EXPECT_EQ(rc.data.train_noisy, fs::path("/base/corpus/noisy"));
  EXPECT_TRUE(rc.data.valid_noisy.empty());
  EXPECT_EQ(rc.output_dir, fs::path("/base/out"));
  EXPECT_NO_THROW(rc.validate(false));
  EXPECT_THROW(rc.validate(true), ConfigError);  // the data directories do not exist
}

TEST(RunConfig, EmptyTextGivesDefaults) {
  const auto rc = parse_run_config("");
  EXPECT_EQ(rc.model, ModelConfig{});
  EXPECT_EQ(rc.train.batch_size, 4);
  EXPECT_EQ(rc.train.loss.resolutions, default_resolutions());
  EXPECT_TRUE(rc.train.loss.weighted);
}

TEST(RunConfig, RejectsUnknownOrMalformedInput) {
  const char* bad[] = {
      "[modle]\nchannels = 12\n",
      "[model]\nchanels = 12\n",
      "[train]\nepochs = three\n",
      "[train]\nepochs = 3.5\n",
      "[train]\ntempo_augment = maybe\n",
      "[loss]\nresolutions = 512:50\n",
      "[loss]\nresolutions = 512:50:240:1\n",
      "[loss]\nresolutions = 512:300:240\n",
      "[data]\ntest_noisy = x\n",
      "[output]\npath = x\n",
      "channels = 12\n",
      "[model\n",
  };
  for (const char* text : bad) EXPECT_THROW(parse_run_config(text), ConfigError) << text;
}

TEST(RunConfig, ValidationCatchesInconsistentValues) {
  auto rc = parse_run_config("[model]\nchannels = 64\n");
  EXPECT_THROW(rc.validate(false), ConfigError);
  rc = parse_run_config("[train]\nlr_min = 0.1\nlr_max = 0.01\n");
  EXPECT_THROW(rc.validate(false), ConfigError);
  rc = parse_run_config("[data]\nvalid_noisy = a\n");
  EXPECT_THROW(rc.validate(false), ConfigError);
}

TEST(RunConfig, LoadsRelativeToTheFile) {
  const auto dir = fs::temp_directory_path() / "manner_run_config";
  fs::remove_all(dir);
  fs::create_directories(dir / "noisy");
  fs::create_directories(dir / "clean");
  std::ofstream(dir / "run.ini") << "[data]\ntrain_noisy = noisy\ntrain_clean = clean\n";
  const auto rc = load_run_config(dir / "run.ini");
  EXPECT_EQ(rc.data.train_clean, dir / "clean");
  EXPECT_NO_THROW(rc.validate(true));
  EXPECT_THROW(load_run_config(dir / "absent.ini"), ConfigError);
  fs::remove_all(dir);
}

TEST(RunConfig, ResolutionList) {
  const auto r = parse_resolutions("512:50:240,1024:120:600");
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0], (StftConfig{512, 50, 240}));
  EXPECT_THROW(parse_resolutions(""), ConfigError);
}

}  // namespace

#include <gtest/gtest.h>

#include <fstream>
#include <limits>
#include <sstream>

#include "darklighter/trainer.hpp"
#include "test_support.hpp"

namespace dl = darklighter;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

dl::TrainConfig small_config(const std::filesystem::path& data, const std::filesystem::path& out) {
  dl::TrainConfig cfg;
  cfg.data_dir = data;
  cfg.output_dir = out;
  cfg.image_size = 16;
  cfg.batch_size = 2;
  cfg.epochs = 2;
  cfg.seed = 5;
  return cfg;
}

}  // namespace

TEST(Trainer, DefaultsFollowTheRecipe) {
  const dl::TrainConfig cfg;
  EXPECT_EQ(cfg.image_size, 256u);
  EXPECT_EQ(cfg.batch_size, 32u);
  EXPECT_EQ(cfg.epochs, 193u);
  EXPECT_FLOAT_EQ(cfg.learning_rate, 1e-4f);
  EXPECT_EQ(cfg.iterations, 8u);
}

TEST(Trainer, RejectsBadConfig) {
  const auto data = dl::testing::synthetic_dataset("trainer_cfg", 2, 16);
  auto check = [&](auto mutate) {
    auto cfg = small_config(data, data / "out");
    mutate(cfg);
    EXPECT_THROW(dl::train(cfg), dl::ConfigError);
  };
  check([](dl::TrainConfig& c) { c.batch_size = 0; });
  check([](dl::TrainConfig& c) { c.learning_rate = 0.0f; });
  check([](dl::TrainConfig& c) { c.learning_rate = -1.0f; });
  check([](dl::TrainConfig& c) { c.epochs = 0; });
  check([](dl::TrainConfig& c) { c.image_size = 8; });
  check([](dl::TrainConfig& c) { c.iterations = 9; });
  check([](dl::TrainConfig& c) { c.iterations = 0; });
  check([](dl::TrainConfig& c) { c.data_dir = c.data_dir / "missing"; });
  const auto empty = dl::testing::scratch_dir("trainer_empty");
  auto cfg = small_config(empty, empty / "out");
  EXPECT_THROW(dl::train(cfg), dl::ConfigError);
}

TEST(Trainer, WritesCsvAndCheckpoints) {
  const auto data = dl::testing::synthetic_dataset("trainer_run", 3, 20);
  auto cfg = small_config(data, dl::testing::scratch_dir("trainer_run_out"));
  cfg.checkpoint_every = 1;
  std::vector<std::string> warnings;
  std::size_t seen = 0;
  const auto r = dl::train(cfg, {[&](const std::string& w) { warnings.push_back(w); },
                                 [&](const dl::LossRecord&) { ++seen; }});
  EXPECT_TRUE(warnings.empty());
  // 3 images in batches of 2: two steps per epoch.
  EXPECT_EQ(r.history.size(), 4u);
  EXPECT_EQ(seen, 4u);
  const auto csv = slurp(r.loss_csv);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "step,total,col,cen,ill,sem,noi");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
  EXPECT_TRUE(std::filesystem::exists(cfg.output_dir / "checkpoint_epoch0001.dlwt"));
  EXPECT_TRUE(std::filesystem::exists(cfg.output_dir / "checkpoint_epoch0002.dlwt"));
  EXPECT_EQ(dl::load_weights(r.checkpoint), r.params);
  const auto tensors = dl::read_dlwt(r.checkpoint);
  const auto step = dl::find_tensor(tensors, "meta.step");
  ASSERT_NE(step, nullptr);
  EXPECT_EQ(step->values[0], 4.0f);
  for (const auto& rec : r.history) {
    EXPECT_NEAR(rec.total, dl::weighted_sum(rec.parts, cfg.loss_weights), 1e-4f * rec.total);
  }
}

TEST(Trainer, SmallDatasetShrinksBatchWithWarning) {
  const auto data = dl::testing::synthetic_dataset("trainer_small", 2, 16);
  auto cfg = small_config(data, dl::testing::scratch_dir("trainer_small_out"));
  cfg.batch_size = 8;
  cfg.max_steps = 1;
  std::vector<std::string> warnings;
  const auto r = dl::train(cfg, {[&](const std::string& w) { warnings.push_back(w); }, {}});
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("batch size 2"), std::string::npos);
  EXPECT_EQ(r.history.size(), 1u);
}

TEST(Trainer, DeterministicAcrossRuns) {
  const auto data = dl::testing::synthetic_dataset("trainer_det", 4, 16);
  auto a = small_config(data, dl::testing::scratch_dir("trainer_det_a"));
  auto b = small_config(data, dl::testing::scratch_dir("trainer_det_b"));
  const auto ra = dl::train(a);
  const auto rb = dl::train(b);
  EXPECT_EQ(slurp(ra.checkpoint), slurp(rb.checkpoint));
  EXPECT_EQ(slurp(ra.loss_csv), slurp(rb.loss_csv));
  auto c = small_config(data, dl::testing::scratch_dir("trainer_det_c"));
  c.seed = 6;
  EXPECT_NE(slurp(dl::train(c).checkpoint), slurp(ra.checkpoint));
}

TEST(Trainer, ResumesFromInitWeights) {
  const auto data = dl::testing::synthetic_dataset("trainer_init", 2, 16);
  const auto out = dl::testing::scratch_dir("trainer_init_out");
  const auto start = dl::testing::random_params<float>(3, 0.05);
  dl::save_weights(start, out / "start.dlwt");
  auto cfg = small_config(data, out);
  cfg.init_weights = out / "start.dlwt";
  cfg.max_steps = 1;
  const auto r = dl::train(cfg);
  // One ADAM step moves each parameter by at most about lr.
  const auto got = r.params.layers();
  const auto ref = start.layers();
  for (std::size_t l = 0; l < got.size(); ++l) {
    for (std::size_t k = 0; k < ref[l]->weight.size(); ++k) {
      EXPECT_NEAR(got[l]->weight[k], ref[l]->weight[k], 1.01e-4f);
    }
  }
}

TEST(Trainer, NonFiniteLossIsNumericError) {
  const auto data = dl::testing::synthetic_dataset("trainer_nan", 2, 16);
  const auto out = dl::testing::scratch_dir("trainer_nan_out");
  auto bad = dl::zero_params<float>();
  bad.head_e.bias[0] = std::numeric_limits<float>::quiet_NaN();
  dl::save_weights(bad, out / "nan.dlwt");
  auto cfg = small_config(data, out);
  cfg.init_weights = out / "nan.dlwt";
  EXPECT_THROW(dl::train(cfg), dl::NumericError);
}

TEST(Trainer, ItemGradientsRespectIterationCount) {
  const auto img = dl::testing::synthetic_dark_image(16, 1);
  const auto fx = dl::ConvPrefixExtractor<float>::random(0);
  const auto p = dl::init_params<float>(2);
  const auto g = dl::compute_item_gradients(img, p, {}, fx, 3);
  // Heads of unused iterations receive no gradient.
  for (std::size_t o = 3; o < 8; ++o) {
    EXPECT_EQ(g.grads.head_e.bias[o], 0.0f);
    EXPECT_EQ(g.grads.head_n.bias[o], 0.0f);
  }
  EXPECT_NE(g.grads.head_e.bias[0], 0.0f);
}

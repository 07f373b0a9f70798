#include <gtest/gtest.h>

#include <fstream>

#include "darklighter/image_io.hpp"
#include "test_support.hpp"

namespace dl = darklighter;

TEST(ImageIo, QuantizeRoundsHalfUpAndClamps) {
  EXPECT_EQ(dl::quantize(0.0f), 0);
  EXPECT_EQ(dl::quantize(1.0f), 255);
  EXPECT_EQ(dl::quantize(-3.0f), 0);
  EXPECT_EQ(dl::quantize(1.7f), 255);
  EXPECT_EQ(dl::quantize(0.5f / 255.0f), 1);
  EXPECT_EQ(dl::quantize(127.49f / 255.0f), 127);
}

TEST(ImageIo, PngRoundTripIsExactOn8BitValues) {
  const auto dir = dl::testing::scratch_dir("image_rt");
  dl::ImageTensor img(3, 5, 7);
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = static_cast<float>((i * 37) % 256) / 255.0f;
  dl::save_png(img, dir / "a.png");
  const auto back = dl::load_image(dir / "a.png");
  EXPECT_EQ(back.shape(), img.shape());
  EXPECT_LT(dl::max_abs_diff(back, img), 1e-7);
}

TEST(ImageIo, GrayscaleIsReplicated) {
  const auto dir = dl::testing::scratch_dir("image_gray");
  dl::ImageTensor g(1, 2, 2);
  g[3] = 1.0f;
  dl::save_png(g, dir / "g.png");
  const auto back = dl::load_image(dir / "g.png");
  ASSERT_EQ(back.channels(), 3u);
  for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(back(c, 1, 1), 1.0f);
  EXPECT_THROW(dl::save_png(dl::ImageTensor(2, 2, 2), dir / "x.png"), dl::ShapeError);
}

TEST(ImageIo, Errors) {
  const auto dir = dl::testing::scratch_dir("image_err");
  EXPECT_THROW(dl::load_image(dir / "missing.png"), dl::IoError);
  {
    std::ofstream(dir / "notes.txt") << "hello";
  }
  EXPECT_THROW(dl::load_image(dir / "notes.txt"), dl::FormatError);
  {
    std::ofstream(dir / "broken.png", std::ios::binary) << "\x89PNG\r\n\x1a\n garbage";
  }
  EXPECT_THROW(dl::load_image(dir / "broken.png"), dl::IoError);
  EXPECT_THROW(dl::save_png(dl::ImageTensor(3, 2, 2), dir / "no" / "dir" / "x.png"), dl::IoError);
}

TEST(ImageIo, ResizeAndListing) {
  const auto dir = dl::testing::scratch_dir("image_list");
  dl::save_png(dl::ImageTensor(3, 8, 12, 0.5f), dir / "b.png");
  dl::save_png(dl::ImageTensor(3, 4, 4, 0.5f), dir / "a.PNG");
  std::ofstream(dir / "c.txt") << "x";
  const auto files = dl::list_images(dir);
  ASSERT_EQ(files.size(), 2u);
  EXPECT_EQ(files[0].filename(), "a.PNG");
  const auto t = dl::load_training_image(files[1], 16);
  EXPECT_EQ(t.shape(), (dl::Shape{3, 16, 16}));
  for (const auto v : t.values()) EXPECT_NEAR(v, 128.0f / 255.0f, 1e-6f);
}

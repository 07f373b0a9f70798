#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "darklighter/error.hpp"
#include "darklighter/tensor.hpp"

namespace darklighter {

/// Round-half-up 8-bit quantization of an intensity clamped to [0,1].
inline std::uint8_t quantize(float v) {
  const float c = std::clamp(v, 0.0f, 1.0f);
  return static_cast<std::uint8_t>(std::floor(c * 255.0f + 0.5f));
}

/// Decodes a PNG/JPEG/PPM/... file into a 3 x H x W RGB tensor in [0,1].
/// Grayscale files are replicated across the three channels.
inline ImageTensor load_image(const std::filesystem::path& path) {
  {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) {
      throw IoError("cannot open image '" + path.string() + "'");
    }
  }
  if (!cv::haveImageReader(path.string())) {
    throw FormatError("'" + path.string() + "' is not a recognized image file");
  }
  cv::Mat bgr;
  try {
    bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  } catch (const cv::Exception&) {
    bgr.release();
  }
  if (bgr.empty()) {
    throw IoError("cannot decode image '" + path.string() + "' (corrupt or truncated)");
  }
  ImageTensor t(3, static_cast<std::size_t>(bgr.rows), static_cast<std::size_t>(bgr.cols));
  for (int y = 0; y < bgr.rows; ++y) {
    const auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        t(c, static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = static_cast<float>(row[x][2 - c]) / 255.0f;
      }
    }
  }
  return t;
}

/// Bilinear resampling (half-pixel centres) of every channel.
inline ImageTensor resize_bilinear(const ImageTensor& image, std::size_t height, std::size_t width) {
  if (image.height() == height && image.width() == width) {
    return image;
  }
  ImageTensor out(image.channels(), height, width);
  for (std::size_t c = 0; c < image.channels(); ++c) {
    const cv::Mat src(static_cast<int>(image.height()), static_cast<int>(image.width()), CV_32F,
                      const_cast<float*>(image.plane(c)));
    cv::Mat dst(static_cast<int>(height), static_cast<int>(width), CV_32F, out.plane(c));
    cv::resize(src, dst, dst.size(), 0, 0, cv::INTER_LINEAR);
  }
  return out;
}

/// Decoded and resized to size x size.
inline ImageTensor load_training_image(const std::filesystem::path& path, std::size_t size) {
  return resize_bilinear(load_image(path), size, size);
}

/// Writes a 1- or 3-channel tensor as an 8-bit PNG.
inline void save_png(const ImageTensor& image, const std::filesystem::path& path) {
  const int h = static_cast<int>(image.height());
  const int w = static_cast<int>(image.width());
  cv::Mat mat;
  if (image.channels() == 3) {
    mat.create(h, w, CV_8UC3);
    for (int y = 0; y < h; ++y) {
      auto* row = mat.ptr<cv::Vec3b>(y);
      for (int x = 0; x < w; ++x) {
        for (std::size_t c = 0; c < 3; ++c) {
          row[x][2 - c] = quantize(image(c, static_cast<std::size_t>(y), static_cast<std::size_t>(x)));
        }
      }
    }
  } else if (image.channels() == 1) {
    mat.create(h, w, CV_8UC1);
    for (int y = 0; y < h; ++y) {
      auto* row = mat.ptr<std::uint8_t>(y);
      for (int x = 0; x < w; ++x) {
        row[x] = quantize(image(0, static_cast<std::size_t>(y), static_cast<std::size_t>(x)));
      }
    }
  } else {
    throw ShapeError("save_png: cannot encode " + image.shape().to_string());
  }
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), mat);
  } catch (const cv::Exception&) {
    ok = false;
  }
  if (!ok) {
    throw IoError("cannot write image '" + path.string() + "'");
  }
}

inline bool is_image_path(const std::filesystem::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".ppm" || ext == ".pgm" || ext == ".bmp";
}

/// Image files directly inside `dir`, sorted by file name.
inline std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && is_image_path(entry.path())) {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace darklighter

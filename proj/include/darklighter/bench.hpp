#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <random>
#include <string>

#include "darklighter/enhancer.hpp"
#include "darklighter/menet.hpp"

namespace darklighter {

struct BenchReport {
  std::size_t size = 0;
  std::size_t repeat = 0;
  std::size_t warmup = 0;
  double mspf = 0.0;  // mean milliseconds per frame
  double fps = 0.0;
  std::size_t params = 0;
  std::uint64_t macs = 0;
  std::uint64_t flops = 0;  // 2 * macs
};

/// Times ME-Net forward + enhancement + export clamp on a random size x size
/// frame. Buffers are reused across frames, as a video loop would.
inline BenchReport run_bench(const MENetParams<float>& params, std::size_t size, std::size_t repeat,
                             std::size_t warmup, std::uint64_t seed = 0) {
  if (size == 0) throw InvalidArgument("bench: size must be positive");
  if (repeat == 0) throw InvalidArgument("bench: repeat must be at least 1");
  ImageTensor frame(3, size, size);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> dist(0.0f, 1.0f);
  for (auto& v : frame.values()) v = dist(rng);

  MENetOutput<float> net;
  float sink = 0.0f;
  auto run_once = [&] {
    forward_into(frame, params, net);
    auto out = enhance_final(frame, net.e_stack, net.n_stack);
    for (auto& v : out.values()) v = std::clamp(v, 0.0f, 1.0f);
    sink += out[0];
  };
  for (std::size_t i = 0; i < warmup; ++i) run_once();
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t i = 0; i < repeat; ++i) run_once();
  const auto t1 = std::chrono::steady_clock::now();
  if (!(sink == sink)) throw NumericError("bench: non-finite output");

  BenchReport r;
  r.size = size;
  r.repeat = repeat;
  r.warmup = warmup;
  r.mspf = std::chrono::duration<double, std::milli>(t1 - t0).count() / static_cast<double>(repeat);
  r.fps = 1000.0 / r.mspf;
  r.params = count_params(params);
  r.macs = count_macs(size, size);
  r.flops = 2 * r.macs;
  return r;
}

inline std::string format_giga(std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2fG", static_cast<double>(v) / 1e9);
  return buf;
}

inline void print_bench(std::ostream& out, const BenchReport& r) {
  char line[160];
  std::snprintf(line, sizeof line, "frame %zux%zu, %zu timed runs after %zu warmup\n", r.size, r.size, r.repeat,
                r.warmup);
  out << line;
  std::snprintf(line, sizeof line, "%10s %10s %10s %10s %10s\n", "MSPF", "FPS", "Params", "FLOPs", "MACs");
  out << line;
  std::snprintf(line, sizeof line, "%10.3f %10.2f %10zu %10s %10s\n", r.mspf, r.fps, r.params,
                format_giga(r.flops).c_str(), format_giga(r.macs).c_str());
  out << line;
  out << "FLOPs counts a multiply-add as 2 operations; MACs counts it as 1 (the figure usually quoted as "
         "FLOPs for this network).\n";
}

}  // namespace darklighter

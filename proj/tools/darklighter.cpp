#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "darklighter/darklighter.hpp"

namespace dl = darklighter;
namespace fs = std::filesystem;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct TrainArgs {
  dl::TrainConfig cfg;
  std::string fx_weights;
  std::string color_mode = "literal";
  std::string init_weights;
  std::size_t log_every = 1;
};

struct EnhanceArgs {
  std::string weights;
  std::string input;
  std::string output = "enhanced";
  std::size_t iterations = dl::kIterations;
  bool save_maps = false;
};

struct BenchArgs {
  std::string weights;
  std::size_t size = 256;
  std::size_t repeat = 100;
  std::size_t warmup = 10;
  std::uint64_t seed = 0;
};

struct InspectArgs {
  std::string weights;
  bool raw = false;
};

struct GradcheckArgs {
  dl::GradCheckOptions options;
};

struct InitArgs {
  std::string output;
  std::uint64_t seed = 0;
  bool zero = false;
};

int cmd_train(TrainArgs& a) {
  auto& cfg = a.cfg;
  if (!a.fx_weights.empty()) {
    cfg.feature_extractor.kind = dl::ExtractorChoice::Kind::pretrained;
    cfg.feature_extractor.path = a.fx_weights;
  }
  cfg.loss_weights.color_mode =
      a.color_mode == "channel_mean" ? dl::ColorLossMode::channel_mean : dl::ColorLossMode::literal;
  if (!a.init_weights.empty()) cfg.init_weights = fs::path(a.init_weights);

  dl::TrainHooks hooks;
  hooks.warn = [](const std::string& msg) { std::cerr << "warning: " << msg << "\n"; };
  hooks.on_step = [&](const dl::LossRecord& r) {
    if (a.log_every != 0 && r.step % a.log_every == 0) {
      std::printf("step %llu  total %.6g  col %.4g  cen %.4g  ill %.4g  sem %.4g  noi %.4g\n",
                  static_cast<unsigned long long>(r.step), static_cast<double>(r.total),
                  static_cast<double>(r.parts.col), static_cast<double>(r.parts.cen),
                  static_cast<double>(r.parts.ill), static_cast<double>(r.parts.sem),
                  static_cast<double>(r.parts.noi));
      std::fflush(stdout);
    }
  };
  const auto result = dl::train(cfg, hooks);
  std::cout << "checkpoint: " << result.checkpoint.string() << "\n"
            << "loss history: " << result.loss_csv.string() << " (" << result.history.size() << " steps)\n";
  return 0;
}

dl::ImageTensor single_map(const dl::MapStack<float>& stack, std::size_t i, float scale, float offset) {
  dl::ImageTensor out(1, stack.height(), stack.width());
  const float* src = stack.map(i);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = src[k] * scale + offset;
  return out;
}

int cmd_enhance(const EnhanceArgs& a) {
  const auto params = dl::load_weights(a.weights);
  std::vector<fs::path> inputs;
  if (fs::is_directory(a.input)) {
    inputs = dl::list_images(a.input);
    if (inputs.empty()) throw dl::ConfigError("no images found in '" + a.input + "'");
  } else {
    inputs.push_back(a.input);
  }
  fs::create_directories(a.output);
  dl::MENetOutput<float> net;
  for (const auto& path : inputs) {
    const auto image = dl::load_image(path);
    dl::forward_into(image, params, net);
    const auto e = dl::leading_maps(net.e_stack, a.iterations);
    const auto n = dl::leading_maps(net.n_stack, a.iterations);
    const auto stem = path.stem().string();
    const fs::path dir(a.output);
    if (a.save_maps) {
      const auto result = dl::enhance(image, e, n);
      dl::save_png(result.exported, dir / (stem + "_enhanced.png"));
      for (std::size_t i = 0; i < a.iterations; ++i) {
        const auto idx = std::to_string(i + 1);
        dl::save_png(result.intermediates[i], dir / (stem + "_iter" + idx + ".png"));
        dl::save_png(single_map(e, i, 0.5f, 0.0f), dir / (stem + "_E" + idx + ".png"));
        dl::save_png(single_map(n, i, 0.5f, 0.5f), dir / (stem + "_N" + idx + ".png"));
      }
    } else {
      auto final = dl::enhance_final(image, e, n);
      dl::save_png(final, dir / (stem + "_enhanced.png"));
    }
    std::cout << path.string() << " -> " << (dir / (stem + "_enhanced.png")).string() << "\n";
  }
  return 0;
}

int cmd_bench(const BenchArgs& a) {
  const auto params = a.weights.empty() ? dl::init_params<float>(0) : dl::load_weights(a.weights);
  const auto report = dl::run_bench(params, a.size, a.repeat, a.warmup, a.seed);
  std::cout << "weights: " << (a.weights.empty() ? std::string("random init (seed 0)") : a.weights) << "\n";
  dl::print_bench(std::cout, report);
  return 0;
}

int cmd_inspect(const InspectArgs& a) {
  const auto tensors = dl::read_dlwt(a.weights);
  std::size_t params = 0;
  std::size_t meta = 0;
  for (const auto& t : tensors) {
    std::printf("%-16s %-14s %8zu\n", t.name.c_str(), t.dims_string().c_str(), t.element_count());
    if (t.name.rfind("meta.", 0) == 0) {
      ++meta;
    } else {
      params += t.element_count();
    }
  }
  std::printf("%zu tensors", tensors.size());
  if (meta != 0) std::printf(" (%zu metadata)", meta);
  std::printf(", %zu parameters\n", params);
  if (!a.raw) {
    const auto net = dl::params_from_tensors(tensors);
    std::printf("ME-Net checkpoint: ok (%zu parameters)\n", dl::count_params(net));
  }
  return 0;
}

int cmd_gradcheck(const GradcheckArgs& a) {
  const auto results = dl::run_gradient_suite(a.options);
  std::vector<std::string> failed;
  std::printf("%-24s %6s %12s  %s\n", "component", "probes", "rel_error", "status");
  for (const auto& r : results) {
    std::printf("%-24s %6zu %12.3e  %s\n", r.component.c_str(), r.probes, r.rel_error, r.passed ? "ok" : "FAIL");
    if (!r.passed) failed.push_back(r.component);
  }
  if (failed.empty()) {
    std::printf("all %zu components within %.0e\n", results.size(), a.options.tolerance);
    return 0;
  }
  std::string list;
  for (const auto& f : failed) list += (list.empty() ? "" : ", ") + f;
  std::fprintf(stderr, "gradient check failed: %s\n", list.c_str());
  return kExitRuntime;
}

int cmd_init(const InitArgs& a) {
  const auto params = a.zero ? dl::zero_params<float>() : dl::init_params<float>(a.seed);
  dl::save_weights(params, a.output);
  std::cout << "wrote " << a.output << " (" << dl::count_params(params) << " parameters)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DarkLighter low-light image enhancer"};
  app.set_config("--config", "", "key=value file; command-line flags take precedence");
  app.require_subcommand(1);

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train ME-Net on a directory of images");
  t->add_option("--data", train.cfg.data_dir, "Directory of training images")->required();
  t->add_option("--output", train.cfg.output_dir, "Checkpoint directory")->capture_default_str();
  t->add_option("--size", train.cfg.image_size, "Training resolution (square)")->capture_default_str();
  t->add_option("--batch", train.cfg.batch_size, "Batch size")->capture_default_str();
  t->add_option("--epochs", train.cfg.epochs, "Epochs")->capture_default_str();
  t->add_option("--lr", train.cfg.learning_rate, "ADAM learning rate")->capture_default_str();
  t->add_option("--seed", train.cfg.seed, "Seed for initialization and shuffling")->capture_default_str();
  t->add_option("--iterations", train.cfg.iterations, "Enhancement iterations used in the loss")
      ->capture_default_str();
  t->add_option("--checkpoint-every", train.cfg.checkpoint_every, "Epochs between checkpoints (0: final only)")
      ->capture_default_str();
  t->add_option("--max-steps", train.cfg.max_steps, "Stop after this many steps (0: no limit)")
      ->capture_default_str();
  t->add_option("--clip", train.cfg.clip_norm, "Global gradient-norm clip (0: off)")->capture_default_str();
  t->add_option("--init-weights", train.init_weights, "Start from this checkpoint");
  t->add_option("--fx-weights", train.fx_weights, "Pretrained feature extractor (fx.conv1..4 DLWT)");
  t->add_option("--fx-seed", train.cfg.feature_extractor.seed, "Seed of the random feature extractor")
      ->capture_default_str();
  t->add_option("--color-mode", train.color_mode, "Colour loss: literal or channel_mean")
      ->check(CLI::IsMember({"literal", "channel_mean"}))
      ->capture_default_str();
  t->add_option("--lambda-col", train.cfg.loss_weights.lambda_col)->capture_default_str();
  t->add_option("--lambda-cen", train.cfg.loss_weights.lambda_cen)->capture_default_str();
  t->add_option("--lambda-ill", train.cfg.loss_weights.lambda_ill)->capture_default_str();
  t->add_option("--lambda-sem", train.cfg.loss_weights.lambda_sem)->capture_default_str();
  t->add_option("--lambda-noi", train.cfg.loss_weights.lambda_noi)->capture_default_str();
  t->add_option("--well-lit", train.cfg.loss_weights.well_lit_level, "Target patch brightness")
      ->capture_default_str();
  t->add_option("--log-every", train.log_every, "Print every n-th step (0: quiet)")->capture_default_str();

  EnhanceArgs enhance;
  auto* e = app.add_subcommand("enhance", "Enhance an image or a directory of images");
  e->add_option("--weights", enhance.weights, "ME-Net checkpoint")->required();
  e->add_option("--input", enhance.input, "Image file or directory")->required()->check(CLI::ExistingPath);
  e->add_option("--output", enhance.output, "Output directory")->capture_default_str();
  e->add_option("--iterations", enhance.iterations, "Iterations to apply")
      ->check(CLI::Range(std::size_t{1}, dl::kIterations))
      ->capture_default_str();
  e->add_flag("--save-maps", enhance.save_maps, "Also write S_i, E_i and N_i images");

  BenchArgs bench;
  auto* b = app.add_subcommand("bench", "Time ME-Net + enhancement on a random frame");
  b->add_option("--weights", bench.weights, "ME-Net checkpoint (default: random init)");
  b->add_option("--size", bench.size, "Frame size")->check(CLI::PositiveNumber)->capture_default_str();
  b->add_option("--repeat", bench.repeat, "Timed runs")->check(CLI::PositiveNumber)->capture_default_str();
  b->add_option("--warmup", bench.warmup, "Untimed runs first")->capture_default_str();
  b->add_option("--seed", bench.seed, "Seed of the random frame")->capture_default_str();

  InspectArgs inspect;
  auto* i = app.add_subcommand("inspect", "List the tensors of a DLWT file");
  i->add_option("weights,--weights", inspect.weights, "DLWT file")->required();
  i->add_flag("--raw", inspect.raw, "Do not check the ME-Net schema");

  GradcheckArgs grad;
  auto* g = app.add_subcommand("gradcheck", "Check analytic gradients against finite differences");
  g->add_option("--seed", grad.options.seed, "Seed of the random instances")->capture_default_str();
  g->add_option("--samples", grad.options.samples, "Coordinates probed per tensor")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  g->add_option("--fault", grad.options.fault, "Negate one component's analytic gradient")->group("");

  InitArgs init;
  auto* n = app.add_subcommand("init", "Write freshly initialized ME-Net weights");
  n->add_option("--output", init.output, "Output DLWT file")->required();
  n->add_option("--seed", init.seed, "Initialization seed")->capture_default_str();
  n->add_flag("--zero", init.zero, "All-zero weights (identity enhancer)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*t) return cmd_train(train);
    if (*e) return cmd_enhance(enhance);
    if (*b) return cmd_bench(bench);
    if (*i) return cmd_inspect(inspect);
    if (*g) return cmd_gradcheck(grad);
    if (*n) return cmd_init(init);
  } catch (const dl::ConfigError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

#include "CLI11.hpp"
#include "flowforge/cli.hpp"

namespace flowforge::cli {

void validate(const RunConfig& cfg) {
  const auto positive = [](std::size_t v, const char* flag) {
    if (v == 0) throw ValidationError(std::string(flag) + " must be positive");
  };
  positive(cfg.image_size, "--image-size");
  positive(cfg.channels, "--channels");
  positive(cfg.width, "--width");
  positive(cfg.kernel, "--kernel");
  positive(cfg.batch, "--batch");
  positive(cfg.log_every, "--log-every");
  positive(cfg.bench_batch, "--bench-batch");
  positive(cfg.bench_size, "--bench-size");
  positive(cfg.bench_channels, "--bench-channels");
  if (cfg.command == "sample") positive(cfg.num_samples, "--num-samples");
  if (!(cfg.lr > 0.0) || !std::isfinite(cfg.lr)) throw ValidationError("--lr must be positive");
  if (!(cfg.temperature >= 0.0) || !std::isfinite(cfg.temperature)) {
    throw ValidationError("--temperature must be non-negative");
  }
  if (!cfg.fault.empty() && cfg.fault != "zero-diagonal") {
    throw ValidationError("unknown --fault '" + cfg.fault + "' (supported: zero-diagonal)");
  }
  try {
    parse_conv_type(cfg.conv);
    if (cfg.command == "train" && cfg.data.starts_with("synthetic:")) {
      model_spec(cfg, cfg.channels, cfg.image_size, cfg.image_size).validate();
    }
  } catch (const std::invalid_argument& e) {
    throw ValidationError(e.what());
  }
}

ModelSpec model_spec(const RunConfig& cfg, std::size_t channels, std::size_t height, std::size_t width) {
  ModelSpec s;
  s.levels = cfg.levels;
  s.depth = cfg.depth;
  s.width = cfg.width;
  s.conv = parse_conv_type(cfg.conv);
  s.kernel = cfg.kernel;
  s.num_reflections = cfg.num_reflections;
  s.channels = channels;
  s.height = height;
  s.image_width = width;
  s.seed = cfg.seed;
  return s;
}

namespace {

void add_flags(CLI::App& app, RunConfig& cfg) {
  app.add_option("--data", cfg.data, "synthetic:textures, synthetic:blobs or a directory of PPM/PGM files");
  app.add_option("--image-size", cfg.image_size, "side length of synthetic images");
  app.add_option("--channels", cfg.channels, "channels of synthetic images");
  app.add_option("--levels", cfg.levels, "number of squeeze levels");
  app.add_option("--depth", cfg.depth, "flow steps per level");
  app.add_option("--width", cfg.width, "coupling network width");
  app.add_option("--conv", cfg.conv, "w1x1, plu, qr, emerging or periodic");
  app.add_option("--kernel", cfg.kernel, "kernel size d of emerging and periodic convolutions");
  app.add_option("--num-reflections", cfg.num_reflections, "Householder reflections for qr (0: one per channel)");
  app.add_option("--lr", cfg.lr, "peak learning rate");
  app.add_option("--batch", cfg.batch, "minibatch size");
  app.add_option("--steps", cfg.steps, "optimizer steps");
  app.add_option("--warmup", cfg.warmup, "linear warmup steps");
  app.add_option("--log-every", cfg.log_every, "steps between log lines");
  app.add_option("--checkpoint-every", cfg.checkpoint_every, "steps between checkpoints (0: end only)");
  app.add_option("--seed", cfg.seed, "seed for initialization, data order and noise");
  app.add_option("--checkpoint", cfg.checkpoint, "checkpoint path");
  app.add_option("--out", cfg.out, "output path for sample grids");
  app.add_option("--temperature", cfg.temperature, "sampling temperature");
  app.add_option("--num-samples", cfg.num_samples, "number of samples");
  app.add_option("--fault", cfg.fault, "seed a fault into the check suites (zero-diagonal)");
  app.add_option("--bench-batch", cfg.bench_batch, "batch size for bench");
  app.add_option("--bench-size", cfg.bench_size, "image side length for bench");
  app.add_option("--bench-channels", cfg.bench_channels, "channels for bench");
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  CLI::App app{"flowforge: normalizing flows with emerging and periodic convolutions"};
  app.require_subcommand(1);
  add_flags(app, cfg);
  for (const char* name : {"train", "eval", "sample", "check", "bench"}) {
    app.add_subcommand(name)->fallthrough();
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kSuccess;
    }
    err << "error: " << e.what() << "\n";
    return kValidationFailure;
  }
  cfg.command = app.get_subcommands().front()->get_name();

  try {
    validate(cfg);
    if (cfg.command == "train") {
      cmd_train(cfg, out);
    } else if (cfg.command == "eval") {
      cmd_eval(cfg, out);
    } else if (cfg.command == "sample") {
      cmd_sample(cfg, out);
    } else if (cfg.command == "check") {
      cmd_check(cfg, out);
    } else {
      cmd_bench(cfg, out);
    }
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << "\n";
    return kNumericalFailure;
  } catch (const LayerNotInvertible& e) {
    err << "error: " << e.what() << "\n";
    return kNumericalFailure;
  } catch (const SingularMatrixError& e) {
    err << "error: " << e.what() << "\n";
    return kNumericalFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kValidationFailure;
  }
  return kSuccess;
}

}  // namespace flowforge::cli

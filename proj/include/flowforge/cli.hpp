#pragma once

// Subcommands behind the flowforge executable. Each takes a validated
// RunConfig, writes its report to `out` and returns structured results so
// tests can drive them without a process boundary.

#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "flowforge/data.hpp"

namespace flowforge::cli {

enum ExitCode : int { kSuccess = 0, kValidationFailure = 1, kNumericalFailure = 2 };

/// Bad flags, unreadable inputs or mismatched shapes.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite losses, singular layers and failed invariant suites.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string command;
  std::string data = "synthetic:textures";
  std::size_t image_size = 16, channels = 3;  // synthetic data only

  std::size_t levels = 2, depth = 4, width = 64;
  std::string conv = "w1x1";
  std::size_t kernel = 3;
  std::size_t num_reflections = 0;

  double lr = 1e-3;
  std::size_t batch = 32;
  std::size_t steps = 1000;
  std::size_t warmup = 100;
  std::size_t log_every = 1;
  std::size_t checkpoint_every = 0;  // 0: only at the end
  std::uint64_t seed = 0;

  std::string checkpoint = "flowforge.ckpt";
  std::string out = "samples.ppm";
  double temperature = 1.0;
  std::size_t num_samples = 16;

  std::string fault;  // check: "zero-diagonal" seeds a singular emerging layer
  std::size_t bench_batch = 100, bench_size = 16, bench_channels = 4;
};

/// Throws ValidationError naming the first bad field.
void validate(const RunConfig& cfg);

/// Model built for images of the given extents.
ModelSpec model_spec(const RunConfig& cfg, std::size_t channels, std::size_t height, std::size_t width);

// ------------------------------------------------------------------ train

struct TrainResult {
  double init_bpd = 0.0;   // fixed monitor batch, before any update
  double final_bpd = 0.0;  // same batch after the last update
  std::vector<double> losses;  // mean train bits/dim per step
};

/// Adam (β₁ 0.9, β₂ 0.999, ε 1e-8) on mean bits/dim with linear warmup.
/// Logs `step=<n> bpd=<f> gnorm=<f>` and checkpoints at the end and every
/// `checkpoint_every` steps (parameters before that step's update). A
/// non-finite loss or gradient raises NumericalError and leaves the last
/// written checkpoint untouched.
TrainResult cmd_train(const RunConfig& cfg, std::ostream& out);

// ------------------------------------------------------------------- eval

struct EvalResult {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t count = 0;
};

/// Bits/dim per example with dequantization noise from `seed`.
std::vector<double> evaluate_bpd(FlowModel& model, const ImageTensor& images, std::uint64_t seed,
                                 std::size_t batch);
EvalResult summarize(const std::vector<double>& values);

/// Test-split bits/dim of the checkpointed model. The dataset is generated
/// from the model's own seed; `--seed` fixes the dequantization noise.
EvalResult cmd_eval(const RunConfig& cfg, std::ostream& out);

// ----------------------------------------------------------------- sample

/// Tiles n images into ceil(√n) columns, filling unused tiles with black.
ImageTensor tile_grid(const ImageTensor& images);

/// Draws `num_samples` images at `temperature` and writes the grid to `out`.
ImageTensor cmd_sample(const RunConfig& cfg, std::ostream& out);

// ------------------------------------------------------------------ check

struct SuiteResult {
  std::string name;
  bool pass = true;
  std::size_t cases = 0;
  double max_abs_error = 0.0;
  double max_rel_error = -1.0;  // gradient suite only
  double tolerance = 0.0;       // on the relative error when max_rel_error is set
  std::string detail;           // first failure, empty on success
};

std::vector<SuiteResult> run_check_suites(std::uint64_t seed, const std::string& fault = "");
/// Prints one line per suite; throws NumericalError when any suite fails.
std::vector<SuiteResult> cmd_check(const RunConfig& cfg, std::ostream& out);

// ------------------------------------------------------------------ bench

struct BenchRow {
  std::string method;
  double cold_ms = 0.0;  // per example, first call
  double warm_ms = 0.0;  // per example, repeated call
};

struct BenchResult {
  std::size_t workers = 1;
  std::vector<BenchRow> rows;  // dense, sequential, batch-parallel, periodic
  double max_inverse_error = 0.0;
};

BenchResult run_bench(std::size_t batch, std::size_t size, std::size_t channels, std::uint64_t seed);
std::string bench_table(const BenchResult& result);
BenchResult cmd_bench(const RunConfig& cfg, std::ostream& out);

// ------------------------------------------------------------------ entry

/// Parses argv, dispatches and maps errors to exit codes.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace flowforge::cli

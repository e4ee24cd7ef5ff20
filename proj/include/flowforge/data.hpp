#pragma once

// Image files, synthetic datasets and model checkpoints.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <string>

#include "flowforge/model.hpp"

namespace flowforge {

/// Malformed input file. `offset()` is the byte position where parsing
/// failed.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& file, std::uint64_t offset, const std::string& why);
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

// ------------------------------------------------------------------ PPM

/// Binary PGM (P5, one channel) or PPM (P6, three channels) with maxval 255,
/// as a batch of one.
ImageTensor load_ppm(const std::filesystem::path& path);
/// Writes example 0 of a one- or three-channel batch.
void save_ppm(const ImageTensor& image, const std::filesystem::path& path);

// -------------------------------------------------------------- datasets

enum class SplitTag { Train, Test };
const char* to_string(SplitTag s);

struct Dataset {
  ImageTensor images;
  SplitTag split = SplitTag::Train;
  std::string source;
  std::uint64_t seed = 0;
};

struct Sinusoid {
  int fy = 0, fx = 0;  // cycles per image along rows and columns
  double amplitude = 0.0, phase = 0.0;
};

/// 127.5 + Σ a·cos(2π(fy·y + fx·x)/size + φ) per pixel plus N(0, noise²),
/// rounded and clamped to 0–255. Integer frequencies make every image
/// continuous across the wrap-around seam.
ImageTensor render_sinusoids(std::span<const Sinusoid> waves, std::size_t size, std::size_t channels,
                             double noise, std::mt19937_64& rng);

/// Mixtures of 2–4 random integer-frequency sinusoids with mild noise.
Dataset synth_periodic_textures(std::size_t n, std::size_t size, std::size_t channels, std::uint64_t seed);

struct BlobOptions {
  std::size_t min_blobs = 1, max_blobs = 3;
};

/// 1–3 Gaussian intensity blobs away from the border on a near-black field.
Dataset synth_dark_field_blobs(std::size_t n, std::size_t size, std::size_t channels, std::uint64_t seed,
                               BlobOptions options = {});

inline constexpr std::size_t kTrainSize = 2048;
inline constexpr std::size_t kTestSize = 512;

struct DatasetRequest {
  std::string descriptor;  // "synthetic:textures", "synthetic:blobs" or a directory
  SplitTag split = SplitTag::Train;
  std::size_t size = 16, channels = 3;
  std::uint64_t seed = 0;
  std::size_t count = 0;  // synthetic only; 0 selects kTrainSize or kTestSize
};

/// Synthetic sets draw train and test from disjoint seed streams. A directory
/// is read in file-name order; every fifth image belongs to the test split.
Dataset load_dataset(const DatasetRequest& request);

// ------------------------------------------------------------ checkpoints

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Training progress stored next to the parameters.
struct TrainingState {
  std::uint64_t step = 0;
  std::string rng;  // textual std::mt19937_64 state; empty when not training
};

struct LoadedCheckpoint {
  std::unique_ptr<FlowModel> model;
  TrainingState state;
};

/// Writes every parameter and buffer through a temporary file that is
/// renamed into place, so an interrupted save never clobbers `path`.
void checkpoint_save(FlowModel& model, const std::filesystem::path& path, const TrainingState& state = {});
/// Rebuilds the model from the embedded spec and restores all parameters.
LoadedCheckpoint checkpoint_load(const std::filesystem::path& path);

}  // namespace flowforge

#include <algorithm>

#include "flowforge/data.hpp"

namespace flowforge {

const char* to_string(SplitTag s) { return s == SplitTag::Train ? "train" : "test"; }

namespace {

// splitmix64 finalizer: decorrelates the train and test streams of one seed.
std::uint64_t mix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Dataset load_directory(const DatasetRequest& req) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(req.descriptor)) {
    throw std::invalid_argument("dataset '" + req.descriptor +
                                "' is neither synthetic:textures, synthetic:blobs nor a directory");
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(req.descriptor)) {
    const std::string ext = entry.path().extension().string();
    if (entry.is_regular_file() && (ext == ".ppm" || ext == ".pgm")) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<ImageTensor> picked;
  for (std::size_t i = 0; i < files.size(); ++i) {
    if ((i % 5 == 4) != (req.split == SplitTag::Test)) continue;
    picked.push_back(load_ppm(files[i]));
    if (picked.back().shape != picked.front().shape) {
      throw std::invalid_argument(files[i].string() + " has shape " + to_string(picked.back().shape) +
                                  ", expected " + to_string(picked.front().shape));
    }
  }
  if (picked.empty()) {
    throw std::invalid_argument("directory " + req.descriptor + " has no " + to_string(req.split) +
                                " images (.ppm/.pgm, every fifth file is test)");
  }
  Shape4 shape = picked.front().shape;
  shape.n = picked.size();
  Dataset d{ImageTensor(shape), req.split, req.descriptor, req.seed};
  for (std::size_t i = 0; i < picked.size(); ++i)
    std::copy(picked[i].data.begin(), picked[i].data.end(), d.images.data.begin() + i * shape.example());
  return d;
}

}  // namespace

Dataset load_dataset(const DatasetRequest& req) {
  const bool synthetic = req.descriptor.starts_with("synthetic:");
  if (!synthetic) return load_directory(req);
  const std::size_t n = req.count ? req.count : (req.split == SplitTag::Train ? kTrainSize : kTestSize);
  const std::uint64_t seed = mix(req.seed * 2 + (req.split == SplitTag::Test ? 1 : 0));
  Dataset d;
  if (req.descriptor == "synthetic:textures") {
    d = synth_periodic_textures(n, req.size, req.channels, seed);
  } else if (req.descriptor == "synthetic:blobs") {
    d = synth_dark_field_blobs(n, req.size, req.channels, seed);
  } else {
    throw std::invalid_argument("unknown synthetic dataset '" + req.descriptor +
                                "' (expected synthetic:textures or synthetic:blobs)");
  }
  d.split = req.split;
  d.seed = req.seed;
  return d;
}

}  // namespace flowforge

#include <cmath>

#include "flowforge/cli.hpp"

namespace flowforge::cli {

ImageTensor tile_grid(const ImageTensor& images) {
  const Shape4 s = images.shape;
  const std::size_t cols = static_cast<std::size_t>(std::ceil(std::sqrt(double(s.n))));
  const std::size_t rows = cols == 0 ? 0 : (s.n + cols - 1) / cols;
  ImageTensor grid({1, s.c, rows * s.h, cols * s.w});
  for (std::size_t n = 0; n < s.n; ++n) {
    const std::size_t ty = n / cols, tx = n % cols;
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t y = 0; y < s.h; ++y)
        for (std::size_t x = 0; x < s.w; ++x) grid.at(0, c, ty * s.h + y, tx * s.w + x) = images.at(n, c, y, x);
  }
  return grid;
}

ImageTensor cmd_sample(const RunConfig& cfg, std::ostream& out) {
  LoadedCheckpoint ckpt = checkpoint_load(cfg.checkpoint);
  FlowModel& model = *ckpt.model;
  if (model.spec().channels != 1 && model.spec().channels != 3) {
    throw ValidationError("sample grids need 1 or 3 channels, the model has " +
                          std::to_string(model.spec().channels));
  }
  std::mt19937_64 rng(cfg.seed);
  Tensor4 x;
  try {
    x = model.sample(cfg.num_samples, cfg.temperature, rng);
  } catch (const LayerNotInvertible& e) {
    const std::vector<Layer*> layers = model.layers();
    std::size_t index = layers.size();
    for (std::size_t i = 0; i < layers.size(); ++i)
      if (layers[i]->name() == e.layer()) index = i;
    throw NumericalError("sampling failed at layer " + std::to_string(index) + " (" + e.what() + ")");
  }
  if (!x.all_finite()) throw NumericalError("sampling produced non-finite values");
  const ImageTensor grid = tile_grid(quantize(x));
  save_ppm(grid, cfg.out);
  out << "sample n=" << cfg.num_samples << " temperature=" << cfg.temperature << " grid=" << grid.shape.w / model.spec().image_width
      << "x" << grid.shape.h / model.spec().height << " out=" << cfg.out << "\n";
  return grid;
}

}  // namespace flowforge::cli

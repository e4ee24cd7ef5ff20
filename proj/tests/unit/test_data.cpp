#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>

#include "flow_helpers.hpp"
#include "flowforge/data.hpp"

using namespace flowforge;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("flowforge_data_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path operator/(const std::string& name) const { return path / name; }
};

void write_bytes(const fs::path& p, const std::string& bytes) {
  std::ofstream f(p, std::ios::binary);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::string read_bytes(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

ImageTensor random_image(Shape4 s, std::mt19937_64& rng) {
  ImageTensor img(s);
  std::uniform_int_distribution<int> px(0, 255);
  for (auto& v : img.data) v = static_cast<std::uint8_t>(px(rng));
  return img;
}

double mean_abs_column_step(const ImageTensor& d, std::size_t a, std::size_t b) {
  double total = 0.0;
  for (std::size_t n = 0; n < d.shape.n; ++n)
    for (std::size_t c = 0; c < d.shape.c; ++c) {
      double ma = 0.0, mb = 0.0;
      for (std::size_t y = 0; y < d.shape.h; ++y) {
        ma += d.at(n, c, y, a);
        mb += d.at(n, c, y, b);
      }
      total += std::abs(ma - mb) / double(d.shape.h);
    }
  return total / double(d.shape.n * d.shape.c);
}

ModelSpec small_spec(ConvType conv) {
  ModelSpec s;
  s.levels = 2;
  s.depth = 1;
  s.width = 4;
  s.conv = conv;
  s.channels = 1;
  s.height = s.image_width = 4;
  s.seed = 3;
  return s;
}

}  // namespace

// --------------------------------------------------------------------- PPM

TEST_CASE("single white PGM pixel") {
  TempDir dir;
  write_bytes(dir / "w.pgm", std::string("P5\n1 1\n255\n") + char(255));
  const ImageTensor img = load_ppm(dir / "w.pgm");
  CHECK(img.shape == Shape4{1, 1, 1, 1});
  CHECK(img.data[0] == 255);
}

TEST_CASE("PPM round trip") {
  TempDir dir;
  std::mt19937_64 rng(1);
  const ImageTensor img = random_image({1, 3, 8, 8}, rng);
  save_ppm(img, dir / "a.ppm");
  const ImageTensor back = load_ppm(dir / "a.ppm");
  CHECK(back == img);
  save_ppm(back, dir / "b.ppm");
  CHECK(read_bytes(dir / "a.ppm") == read_bytes(dir / "b.ppm"));
  // Interleaved on disk: the first three payload bytes are pixel (0, 0).
  const std::string bytes = read_bytes(dir / "a.ppm");
  const std::size_t header = std::string("P6\n8 8\n255\n").size();
  for (std::size_t c = 0; c < 3; ++c) CHECK(static_cast<unsigned char>(bytes[header + c]) == img.at(0, c, 0, 0));
}

TEST_CASE("PPM header comments and whitespace") {
  TempDir dir;
  write_bytes(dir / "c.pgm", std::string("P5 # comment\n  2\t# another\n1 255\n") + char(7) + char(9));
  const ImageTensor img = load_ppm(dir / "c.pgm");
  CHECK(img.shape == Shape4{1, 1, 1, 2});
  CHECK(img.data[0] == 7);
  CHECK(img.data[1] == 9);
}

TEST_CASE("PPM errors") {
  TempDir dir;
  SUBCASE("16-bit maxval") {
    write_bytes(dir / "x.ppm", std::string("P6\n1 1\n65535\n") + std::string(6, '\0'));
    CHECK_THROWS_WITH_AS(load_ppm(dir / "x.ppm"), doctest::Contains("maxval 65535"), FormatError);
  }
  SUBCASE("wrong magic") {
    write_bytes(dir / "x.ppm", "P3\n1 1\n255\n0 0 0\n");
    CHECK_THROWS_AS(load_ppm(dir / "x.ppm"), FormatError);
  }
  SUBCASE("missing height") {
    write_bytes(dir / "x.ppm", "P6\n4 \n");
    CHECK_THROWS_WITH_AS(load_ppm(dir / "x.ppm"), doctest::Contains("height"), FormatError);
  }
  SUBCASE("truncated payload") {
    write_bytes(dir / "x.ppm", std::string("P6\n2 2\n255\n") + std::string(11, 'a'));
    CHECK_THROWS_WITH_AS(load_ppm(dir / "x.ppm"), doctest::Contains("truncated"), FormatError);
  }
  SUBCASE("two-channel batch cannot be saved") {
    CHECK_THROWS_AS(save_ppm(ImageTensor({1, 2, 2, 2}), dir / "y.ppm"), std::invalid_argument);
  }
}

// ---------------------------------------------------------------- synthetic

TEST_CASE("single vertical sinusoid") {
  std::mt19937_64 rng(2);
  const Sinusoid s{1, 0, 40.0, 0.3};
  const ImageTensor img = render_sinusoids(std::span(&s, 1), 8, 1, 0.0, rng);
  for (std::size_t y = 0; y < 8; ++y) {
    const double expected = std::round(127.5 + 40.0 * std::cos(2.0 * std::numbers::pi * double(y) / 8.0 + 0.3));
    for (std::size_t x = 0; x < 8; ++x) CHECK(img.at(0, 0, y, x) == expected);
  }
  // One full period per image: continuing past the last row returns to row 0.
  const double next = std::round(127.5 + 40.0 * std::cos(2.0 * std::numbers::pi * 8.0 / 8.0 + 0.3));
  CHECK(img.at(0, 0, 0, 0) == next);
}

TEST_CASE("textures are periodic, deterministic and in range") {
  const Dataset a = synth_periodic_textures(200, 16, 3, 7);
  const Dataset b = synth_periodic_textures(200, 16, 3, 7);
  CHECK(a.images == b.images);
  CHECK_FALSE(synth_periodic_textures(200, 16, 3, 8).images == a.images);
  double interior = 0.0;
  for (std::size_t x = 0; x + 1 < 16; ++x) interior += mean_abs_column_step(a.images, x, x + 1);
  interior /= 15.0;
  const double seam = mean_abs_column_step(a.images, 0, 15);
  CHECK(seam / interior < 2.0);
  CHECK(seam / interior > 0.5);
  CHECK_THROWS_AS(synth_periodic_textures(1, 3, 1, 0), std::invalid_argument);
}

TEST_CASE("dark-field blobs") {
  SUBCASE("no blobs leaves a near-black field") {
    const Dataset d = synth_dark_field_blobs(50, 16, 3, 1, {0, 0});
    for (auto v : d.images.data) CHECK(v < 5);
  }
  SUBCASE("border is dark and blobs are bright") {
    const Dataset d = synth_dark_field_blobs(1000, 16, 1, 2);
    double border = 0.0, count = 0.0;
    std::uint8_t brightest = 0;
    for (std::size_t n = 0; n < 1000; ++n)
      for (std::size_t y = 0; y < 16; ++y)
        for (std::size_t x = 0; x < 16; ++x) {
          brightest = std::max(brightest, d.images.at(n, 0, y, x));
          if (y == 0 || x == 0 || y == 15 || x == 15) {
            border += d.images.at(n, 0, y, x);
            count += 1.0;
          }
        }
    CHECK(border / count < 10.0);
    CHECK(brightest > 100);
  }
  SUBCASE("deterministic per seed") {
    CHECK(synth_dark_field_blobs(20, 8, 3, 5).images == synth_dark_field_blobs(20, 8, 3, 5).images);
  }
  CHECK_THROWS_AS(synth_dark_field_blobs(1, 7, 1, 0), std::invalid_argument);
}

TEST_CASE("dataset descriptors") {
  SUBCASE("synthetic splits") {
    const Dataset train = load_dataset({"synthetic:textures", SplitTag::Train, 16, 3, 4});
    const Dataset test = load_dataset({"synthetic:textures", SplitTag::Test, 16, 3, 4});
    CHECK(train.images.shape == Shape4{kTrainSize, 3, 16, 16});
    CHECK(test.images.shape == Shape4{kTestSize, 3, 16, 16});
    CHECK(train.split == SplitTag::Train);
    CHECK_FALSE(std::equal(test.images.data.begin(), test.images.data.end(), train.images.data.begin()));
    const Dataset again = load_dataset({"synthetic:textures", SplitTag::Test, 16, 3, 4});
    CHECK(again.images == test.images);
    CHECK(load_dataset({"synthetic:blobs", SplitTag::Train, 8, 1, 4, 10}).images.shape == Shape4{10, 1, 8, 8});
  }
  SUBCASE("directory of images") {
    TempDir dir;
    std::mt19937_64 rng(3);
    std::vector<ImageTensor> images;
    for (int i = 0; i < 6; ++i) {
      images.push_back(random_image({1, 1, 4, 6}, rng));
      save_ppm(images.back(), dir / ("img" + std::to_string(i) + ".pgm"));
    }
    write_bytes(dir / "notes.txt", "ignored");
    const Dataset train = load_dataset({dir.path.string(), SplitTag::Train});
    const Dataset test = load_dataset({dir.path.string(), SplitTag::Test});
    CHECK(train.images.shape == Shape4{5, 1, 4, 6});
    CHECK(test.images.shape == Shape4{1, 1, 4, 6});
    CHECK(test.images.slice(0, 1) == images[4]);
    CHECK(train.images.slice(4, 1) == images[5]);
    save_ppm(random_image({1, 1, 4, 4}, rng), dir / "img9.pgm");
    CHECK_THROWS_WITH_AS(load_dataset({dir.path.string(), SplitTag::Train}), doctest::Contains("img9"),
                         std::invalid_argument);
  }
  CHECK_THROWS_AS(load_dataset({"synthetic:galaxies"}), std::invalid_argument);
  CHECK_THROWS_AS(load_dataset({"/no/such/dir"}), std::invalid_argument);
}

// -------------------------------------------------------------- checkpoints

TEST_CASE("checkpoint round trip is bit-exact") {
  TempDir dir;
  std::mt19937_64 rng(4);
  for (ConvType conv : {ConvType::W1x1, ConvType::PLU, ConvType::QR, ConvType::Emerging, ConvType::Periodic}) {
    FlowModel m(small_spec(conv));
    testing::perturb(m.parameters(), rng, 0.1);
    std::mt19937_64 state_rng(99);
    state_rng.discard(17);
    std::ostringstream rng_text;
    rng_text << state_rng;
    checkpoint_save(m, dir / "a.ckpt", {42, rng_text.str()});
    CHECK_FALSE(fs::exists(dir / "a.ckpt.tmp"));

    const LoadedCheckpoint loaded = checkpoint_load(dir / "a.ckpt");
    CHECK(loaded.model->spec() == m.spec());
    CHECK(loaded.state.step == 42);
    std::mt19937_64 restored;
    std::istringstream(loaded.state.rng) >> restored;
    CHECK(restored == state_rng);
    for (Parameter* p : m.parameters()) {
      const Parameter* q = loaded.model->find(p->name);
      REQUIRE(q != nullptr);
      CHECK(std::memcmp(p->value.data().data(), q->value.data().data(), p->value.size() * sizeof(double)) == 0);
    }
    checkpoint_save(*loaded.model, dir / "b.ckpt", loaded.state);
    CHECK(read_bytes(dir / "a.ckpt") == read_bytes(dir / "b.ckpt"));

    const ImageTensor batch = random_image({3, 1, 4, 4}, rng);
    Tape t1(false), t2(false);
    const Tensor4 x = dequantize(batch, 0.5);
    CHECK(bits_per_dim(t1, m, x).value() == bits_per_dim(t2, *loaded.model, x).value());
  }
}

TEST_CASE("checkpoint corruption is reported with a position") {
  TempDir dir;
  FlowModel m(small_spec(ConvType::Emerging));
  checkpoint_save(m, dir / "a.ckpt");
  const std::string good = read_bytes(dir / "a.ckpt");
  const std::uint32_t header_len = static_cast<unsigned char>(good[8]) | static_cast<unsigned char>(good[9]) << 8;
  const std::size_t first_entry = 12 + header_len;

  const auto load_bad = [&](std::string bytes) {
    write_bytes(dir / "bad.ckpt", bytes);
    return checkpoint_load(dir / "bad.ckpt");
  };
  SUBCASE("name length") {
    std::string bad = good;
    bad[first_entry + 2] = '\x7f';
    try {
      load_bad(bad);
      FAIL("expected a FormatError");
    } catch (const FormatError& e) {
      CHECK(e.offset() == first_entry);
      CHECK(std::string(e.what()).find("byte " + std::to_string(first_entry)) != std::string::npos);
    }
  }
  SUBCASE("header length") {
    std::string bad = good;
    bad[10] = '\x10';
    CHECK_THROWS_WITH_AS(load_bad(bad), doctest::Contains("at byte 8"), FormatError);
  }
  SUBCASE("version") {
    std::string bad = good;
    bad[4] = 2;
    CHECK_THROWS_WITH_AS(load_bad(bad), doctest::Contains("version 2"), FormatError);
  }
  SUBCASE("magic") {
    std::string bad = good;
    bad[0] = 'X';
    CHECK_THROWS_WITH_AS(load_bad(bad), doctest::Contains("magic"), FormatError);
  }
  SUBCASE("truncation") {
    CHECK_THROWS_WITH_AS(load_bad(good.substr(0, good.size() - 3)), doctest::Contains("truncated"), FormatError);
  }
  SUBCASE("shape mismatch") {
    std::string block = good.substr(12, header_len);
    block.replace(block.find("kernel=3"), 8, "kernel=5");
    std::string bad = good.substr(0, 12) + block + good.substr(first_entry);
    CHECK_THROWS_WITH_AS(load_bad(bad), doctest::Contains("model expects"), FormatError);
  }
  SUBCASE("missing parameter") {
    // Dropping the trailing entry leaves the file well formed but incomplete.
    FlowModel probe(small_spec(ConvType::Emerging));
    const Parameter* last = probe.parameters().back();
    const std::size_t tail = 4 + last->name.size() + 4 + 8 * last->rank + 8 * last->value.size();
    CHECK_THROWS_WITH_AS(load_bad(good.substr(0, good.size() - tail)), doctest::Contains("missing parameter"),
                         FormatError);
  }
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <set>

#include "mvgen/dataset.hpp"
#include "mvgen/image_io.hpp"

using namespace mvgen;

namespace {

DatasetConfig tiny_cfg() {
  DatasetConfig c;
  c.image_size = 32;
  c.num_objects = 6;
  c.train_objects = 4;
  c.views_per_train = 4;
  c.views_per_test = 2;
  c.blur_prob = 0.25;
  c.seed = 7;
  return c;
}

// Peak adjacent-pixel difference: a sharp edge concentrates the step into one
// or two pixels, a gaussian-blurred edge spreads it across ~2*sigma pixels.
double max_gradient(const std::vector<uint8_t>& img, int s) {
  double mx = 0;
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < s; ++y)
      for (int x = 0; x + 1 < s; ++x) {
        size_t at = (static_cast<size_t>(c) * s + y) * s + x;
        mx = std::max(mx, std::fabs(static_cast<double>(img[at]) - img[at + 1]));
      }
  return mx;
}

}  // namespace

TEST_CASE("generation is deterministic and reproducible byte-for-byte") {
  auto a = generate_dataset(tiny_cfg());
  auto b = generate_dataset(tiny_cfg());
  REQUIRE(a.records.size() == b.records.size());
  CHECK(a.records.size() == 4u * 4 + 2u * 2);
  for (size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].image == b.records[i].image);
    CHECK(a.records[i].object_id == b.records[i].object_id);
    CHECK(a.records[i].factors.packed() == b.records[i].factors.packed());
  }
  auto c_cfg = tiny_cfg();
  c_cfg.seed = 8;
  auto c = generate_dataset(c_cfg);
  CHECK(a.records[0].image != c.records[0].image);
}

TEST_CASE("content factors are shared across views, pose factors vary") {
  auto ds = generate_dataset(tiny_cfg());
  for (int obj = 0; obj < 4; ++obj) {
    const auto& first = ds.train_record(obj, 0).factors;
    bool pose_varies = false;
    for (int v = 1; v < 4; ++v) {
      const auto& f = ds.train_record(obj, v).factors;
      CHECK(f.shape_kind == first.shape_kind);
      CHECK(f.hue == first.hue);
      CHECK(f.aspect == first.aspect);
      CHECK(f.base_size == first.base_size);
      if (f.rotation != first.rotation || f.dx != first.dx || f.brightness != first.brightness)
        pose_varies = true;
    }
    CHECK(pose_varies);
  }
  // different objects draw different content
  CHECK((ds.train_record(0, 0).factors.hue != ds.train_record(1, 0).factors.hue ||
         ds.train_record(0, 0).factors.base_size != ds.train_record(1, 0).factors.base_size));
}

TEST_CASE("file roundtrip preserves every byte and field") {
  auto ds = generate_dataset(tiny_cfg());
  auto path = (std::filesystem::temp_directory_path() / "mvgen_ds_test.bin").string();
  save_dataset(path, ds);
  auto back = load_dataset(path);
  CHECK(back.cfg.num_objects == ds.cfg.num_objects);
  CHECK(back.cfg.seed == ds.cfg.seed);
  REQUIRE(back.records.size() == ds.records.size());
  for (size_t i = 0; i < ds.records.size(); ++i) {
    CHECK(back.records[i].image == ds.records[i].image);
    CHECK(back.records[i].object_id == ds.records[i].object_id);
    CHECK(back.records[i].factors.packed() == ds.records[i].factors.packed());
  }
  std::remove(path.c_str());
}

TEST_CASE("disk coverage matches the analytic area") {
  Factors f;
  f.shape_kind = 0;
  f.hue = 0.f;  // red: green/blue channels sit at 0.1 inside the shape
  f.aspect = 1.f;
  f.base_size = 0.5f;
  f.rotation = 0.f;
  f.dx = f.dy = 0.f;
  f.scale_jitter = 1.f;
  f.brightness = 1.f;
  f.blurred = false;
  const int s = 64;
  auto img = render_image(f, s);
  // count pixels whose green channel moved more than half the shape/bg gap
  int count = 0;
  for (int i = 0; i < s * s; ++i) {
    double g = img[static_cast<size_t>(s) * s + i] / 255.0;
    if (std::fabs(g - 0.5) > 0.2) ++count;
  }
  double want = std::numbers::pi * 0.25 * 0.25 * s * s;  // pi*(size/2)^2 in pixels
  CHECK(std::fabs(count - want) < 0.02 * want);
}

TEST_CASE("aspect preserves area while stretching the outline") {
  Factors f;
  f.shape_kind = 0;
  f.hue = 0.f;
  f.base_size = 0.5f;
  f.scale_jitter = 1.f;
  f.brightness = 1.f;
  const int s = 64;
  f.aspect = 1.4f;
  auto img = render_image(f, s);
  int count = 0;
  for (int i = 0; i < s * s; ++i)
    if (std::fabs(img[static_cast<size_t>(s) * s + i] / 255.0 - 0.5) > 0.2) ++count;
  double want = std::numbers::pi * 0.25 * 0.25 * s * s;
  CHECK(std::fabs(count - want) < 0.03 * want);
}

TEST_CASE("background encodes brightness exactly") {
  Factors f;
  f.shape_kind = 1;
  f.base_size = 0.3f;
  f.dx = f.dy = 0.f;
  for (float b : {0.6f, 0.85f, 1.0f}) {
    f.brightness = b;
    auto img = render_image(f, 32);
    CHECK(static_cast<int>(img[0]) == static_cast<int>(std::lround(0.5 * b * 255)));
  }
}

TEST_CASE("rotation moves the shading ramp even for a disk") {
  Factors f;
  f.shape_kind = 0;
  f.hue = 0.6f;
  f.base_size = 0.5f;
  f.brightness = 1.f;
  f.rotation = 0.f;
  auto up = render_image(f, 32);
  f.rotation = std::numbers::pi_v<float>;
  auto down = render_image(f, 32);
  CHECK(up != down);
  // the ramp brightens toward local +y: with rotation 0 the top half of the
  // image is brighter; after a half turn the bottom half is
  auto half_mean = [&](const std::vector<uint8_t>& img, bool top) {
    double sum = 0;
    int n = 0;
    for (int y = top ? 0 : 16; y < (top ? 16 : 32); ++y)
      for (int x = 0; x < 32; ++x) {
        sum += img[2 * 32 * 32 + y * 32 + x];  // blue channel carries hue 0.6
        ++n;
      }
    return sum / n;
  };
  CHECK(half_mean(up, true) > half_mean(up, false));
  CHECK(half_mean(down, false) > half_mean(down, true));
}

TEST_CASE("blur flattens edges without moving the mean much") {
  Factors f;
  f.shape_kind = 3;
  f.hue = 0.3f;
  f.base_size = 0.5f;
  f.brightness = 0.9f;
  f.blurred = false;
  auto sharp = render_image(f, 32);
  f.blurred = true;
  auto soft = render_image(f, 32);
  CHECK(max_gradient(soft, 32) < 0.55 * max_gradient(sharp, 32));
  double ms = 0, mb = 0;
  for (size_t i = 0; i < sharp.size(); ++i) {
    ms += sharp[i];
    mb += soft[i];
  }
  CHECK(std::fabs(ms - mb) / sharp.size() < 2.0);
}

TEST_CASE("attribute bits reflect their factor conditions") {
  Factors f;
  f.shape_kind = 2;
  f.hue = 0.7f;
  f.aspect = 1.4f;
  f.base_size = 0.5f;     // > 0.45
  f.scale_jitter = 1.05f;
  f.rotation = 4.f;       // > pi
  f.dx = 0.1f;
  f.dy = 0.1f;            // sum 0.2 > 0.15
  f.brightness = 0.7f;
  f.blurred = true;
  uint16_t bits = attribute_bits(f);
  CHECK((bits & (1 << 0)) == 0);
  CHECK((bits & (1 << 2)) != 0);
  CHECK((bits & (1 << 3)) == 0);
  CHECK((bits & (1 << 4)) != 0);
  CHECK((bits & (1 << 5)) != 0);
  CHECK((bits & (1 << 6)) != 0);
  CHECK((bits & (1 << 7)) != 0);
  CHECK((bits & (1 << 8)) == 0);
  CHECK((bits & (1 << 9)) != 0);

  f.shape_kind = 0;
  f.hue = 0.2f;
  f.aspect = 0.8f;
  f.base_size = 0.4f;     // < 0.45
  f.scale_jitter = 0.95f;
  f.rotation = 1.f;
  f.dx = f.dy = 0.01f;
  f.brightness = 0.95f;
  f.blurred = false;
  bits = attribute_bits(f);
  CHECK(bits == ((1 << 0) | (1 << 3) | (1 << 8)));
  CHECK(std::string(attribute_name(0)) == "disk");
  CHECK(std::string(attribute_name(9)) == "blurred");
}

TEST_CASE("pair sampler returns distinct views of one training object") {
  auto ds = generate_dataset(tiny_cfg());
  Rng rng(3);
  std::vector<size_t> a, b;
  sample_pair_indices(ds, rng, 64, a, b);
  for (int i = 0; i < 64; ++i) {
    CHECK(a[i] != b[i]);
    CHECK(a[i] < ds.train_count());
    CHECK(b[i] < ds.train_count());
    CHECK(ds.records[a[i]].object_id == ds.records[b[i]].object_id);
  }
}

TEST_CASE("tuple sampler returns k distinct views of one object") {
  auto ds = generate_dataset(tiny_cfg());
  Rng rng(4);
  std::vector<size_t> idx;
  sample_tuple_indices(ds, rng, 10, 3, idx);
  REQUIRE(idx.size() == 30);
  for (int t = 0; t < 10; ++t) {
    std::set<size_t> seen;
    uint32_t obj = ds.records[idx[t * 3]].object_id;
    for (int j = 0; j < 3; ++j) {
      CHECK(ds.records[idx[t * 3 + j]].object_id == obj);
      seen.insert(idx[t * 3 + j]);
    }
    CHECK(seen.size() == 3);
  }
  CHECK_THROWS(sample_tuple_indices(ds, rng, 1, 99, idx));
}

TEST_CASE("image batches decode to [-1,1] floats in NCHW order") {
  auto ds = generate_dataset(tiny_cfg());
  auto batch = image_batch(ds, {0, 5});
  CHECK(batch.shape() == std::vector<int>{2, 3, 32, 32});
  for (float v : batch.value()) {
    CHECK(v >= -1.f);
    CHECK(v <= 1.f);
  }
  CHECK(batch.value()[0] ==
        doctest::Approx(static_cast<float>(ds.records[0].image[0]) / 255.f * 2.f - 1.f));
  auto dec = decode_image(ds.records[5].image);
  size_t per = dec.size();
  for (size_t i = 0; i < per; ++i) CHECK(batch.value()[per + i] == dec[i]);
}

TEST_CASE("ppm roundtrip and grid tiling") {
  auto ds = generate_dataset(tiny_cfg());
  auto img = decode_image(ds.records[0].image);
  auto path = (std::filesystem::temp_directory_path() / "mvgen_img_test.ppm").string();
  write_ppm(path, img, 32, 32);
  int h = 0, w = 0;
  auto back = read_ppm(path, h, w);
  CHECK(h == 32);
  CHECK(w == 32);
  for (size_t i = 0; i < img.size(); ++i)
    CHECK(std::fabs(back[i] - img[i]) <= 2.f / 255.f + 1e-6f);
  std::remove(path.c_str());

  std::vector<std::vector<float>> imgs = {img, img, img};
  int gh = 0, gw = 0;
  auto grid = tile_grid(imgs, 32, 32, 2, gh, gw);
  CHECK(gh == 32 * 2 + 2);
  CHECK(gw == 32 * 2 + 2);
  CHECK(grid.size() == static_cast<size_t>(3) * gh * gw);
}

TEST_CASE("config validation rejects inconsistent settings") {
  auto bad = tiny_cfg();
  bad.train_objects = 99;
  CHECK_THROWS(generate_dataset(bad));
  bad = tiny_cfg();
  bad.views_per_train = 1;
  CHECK_THROWS(generate_dataset(bad));
  bad = tiny_cfg();
  bad.num_objects = 1;
  bad.train_objects = 1;
  CHECK_THROWS(generate_dataset(bad));
}

#pragma once

// Procedural multi-view shape dataset. Every object is a colored 2D shape
// (content: kind, hue, aspect, size); every view re-renders it under a fresh
// pose (rotation, shift, scale jitter, brightness, optional blur). Byte
// output is a pure function of (config, seed).

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "mvgen/rng.hpp"
#include "mvgen/tensor.hpp"

namespace mvgen {

struct DatasetConfig {
  int image_size = 32;
  int num_objects = 100;
  int train_objects = 80;  // leading objects; the rest are held out
  int views_per_train = 24;
  int views_per_test = 8;
  double blur_prob = 0.05;
  uint64_t seed = 1;
};

void to_json(nlohmann::json& j, const DatasetConfig& c);
void from_json(const nlohmann::json& j, DatasetConfig& c);

// Latent factors, all stored per record. Content factors repeat across views
// of one object; view factors are per-image.
// Thresholded factors are sampled with a margin band carved out around the
// attribute threshold (noted below) so every attribute bit stays readable
// from the rendered pixels; the bands are symmetric and leave priors at 0.5.
struct Factors {
  int shape_kind = 0;        // 0 disk, 1 square, 2 triangle, 3 cross
  float hue = 0;             // [0,1)
  float aspect = 1;          // uniform [0.6, 1.4], band |a-1| >= 0.1
  float base_size = 0.4f;    // [0.3, 0.6] of image extent, band |s-0.45| >= 0.02
  float rotation = 0;        // [0, 2pi)
  float dx = 0, dy = 0;      // [-0.15, 0.15], band ||dx|+|dy| - 0.15| >= 0.01
  float scale_jitter = 1;    // [0.95, 1.05]
  float brightness = 1;      // [0.6, 1.0]
  bool blurred = false;      // bernoulli(blur_prob), gaussian sigma 1.5px

  std::array<float, 10> packed() const;
  static Factors unpack(const std::array<float, 10>& p);
};

// Binary attribute bits derived from the factors (bit i set = condition holds):
// 0 disk, 1 square, 2 triangle, 3 hue<0.5, 4 aspect>1,
// 5 base_size>0.45, 6 rotation>pi, 7 |dx|+|dy|>0.15,
// 8 brightness>0.8, 9 blurred.
constexpr int kNumAttributes = 10;
uint16_t attribute_bits(const Factors& f);
const char* attribute_name(int bit);

struct DatasetRecord {
  std::vector<uint8_t> image;  // 3*S*S, row-major RGB planes, [-1,1] mapped to [0,255]
  uint32_t object_id = 0;
  Factors factors;
};

struct Dataset {
  DatasetConfig cfg;
  std::vector<DatasetRecord> records;  // train block (object-major) then test block

  size_t train_count() const {
    return static_cast<size_t>(cfg.train_objects) * cfg.views_per_train;
  }
  size_t test_count() const { return records.size() - train_count(); }
  const DatasetRecord& train_record(int object, int view) const {
    return records[static_cast<size_t>(object) * cfg.views_per_train + view];
  }
  const DatasetRecord& test_record(int object, int view) const {
    return records[train_count() + static_cast<size_t>(object) * cfg.views_per_test + view];
  }
};

// Renders one image into [0,255] u8 planes (3*S*S).
std::vector<uint8_t> render_image(const Factors& f, int image_size);

Dataset generate_dataset(const DatasetConfig& cfg);

// Container: magic "MVDS1", u64 LE header length, header JSON, then packed
// records (image bytes, object_id u32 LE, 10 f32 LE params, u16 LE attributes).
void save_dataset(const std::string& path, const Dataset& ds);
Dataset load_dataset(const std::string& path);

// u8 image -> float tensor values in [-1,1].
std::vector<float> decode_image(const std::vector<uint8_t>& img);

// Assembles (n, 3, S, S) float batches. Indices address ds.records directly.
Tensor image_batch(const Dataset& ds, const std::vector<size_t>& indices);

// Two same-object views per pair: returns indices such that a[i] and b[i] are
// distinct views of one training object.
void sample_pair_indices(const Dataset& ds, Rng& rng, int n, std::vector<size_t>& a,
                         std::vector<size_t>& b);

// k distinct views of one training object per tuple, tuple-major layout.
void sample_tuple_indices(const Dataset& ds, Rng& rng, int n, int k, std::vector<size_t>& out);

}  // namespace mvgen

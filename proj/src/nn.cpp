#include "mvgen/nn.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace mvgen {

template <typename T>
void adam_step(ParamSetT<T>& params, const AdamConfig& cfg) {
  params.step += 1;
  const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
  const T bc1 = T(1) - static_cast<T>(std::pow(cfg.beta1, static_cast<double>(params.step)));
  const T bc2 = T(1) - static_cast<T>(std::pow(cfg.beta2, static_cast<double>(params.step)));
  const T lr = static_cast<T>(cfg.lr), eps = static_cast<T>(cfg.eps);
  for (auto& e : params.entries()) {
    if (!e.trainable) continue;
    auto& g = e.tensor.node()->grad;
    if (g.size() != e.tensor.numel()) continue;  // no gradient flowed this step
    auto& p = e.tensor.value();
    for (size_t i = 0; i < p.size(); ++i) {
      if (!std::isfinite(g[i]))
        throw std::runtime_error("non-finite gradient in parameter '" + e.name + "'");
      e.m[i] = b1 * e.m[i] + (T(1) - b1) * g[i];
      e.v[i] = b2 * e.v[i] + (T(1) - b2) * g[i] * g[i];
      T mhat = e.m[i] / bc1;
      T vhat = e.v[i] / bc2;
      p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

template void adam_step(ParamSetT<float>&, const AdamConfig&);
template void adam_step(ParamSetT<double>&, const AdamConfig&);

template <typename T>
void init_normal(TensorT<T>& t, Rng& rng, T stddev, T mean) {
  for (auto& x : t.value()) x = mean + stddev * static_cast<T>(rng.normal());
}

template <typename T>
void init_constant(TensorT<T>& t, T v) {
  std::fill(t.value().begin(), t.value().end(), v);
}

template void init_normal(TensorT<float>&, Rng&, float, float);
template void init_normal(TensorT<double>&, Rng&, double, double);
template void init_constant(TensorT<float>&, float);
template void init_constant(TensorT<double>&, double);

namespace {

constexpr char kMagic[5] = {'M', 'V', 'C', 'K', '1'};

void write_u64(std::ostream& os, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 8);
}

uint64_t read_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw std::runtime_error("checkpoint truncated in header");
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

void write_blob(std::ostream& os, const std::vector<float>& v) {
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(v.size() * sizeof(float)));
}

void read_blob(std::istream& is, std::vector<float>& v, const std::string& what) {
  is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)));
  if (!is) throw std::runtime_error("checkpoint truncated reading " + what);
}

nlohmann::json read_meta_stream(std::istream& is, const std::string& path) {
  char magic[5];
  is.read(magic, 5);
  if (!is || std::memcmp(magic, kMagic, 5) != 0)
    throw std::runtime_error(path + ": not a checkpoint (bad magic)");
  uint64_t len = read_u64(is);
  std::string buf(len, '\0');
  is.read(buf.data(), static_cast<std::streamsize>(len));
  if (!is) throw std::runtime_error(path + ": checkpoint truncated in metadata");
  return nlohmann::json::parse(buf);
}

}  // namespace

void save_checkpoint(const std::string& path, const nlohmann::json& meta, const ParamSet& params) {
  nlohmann::json full = meta;
  full["dtype"] = "f32";
  full["step"] = params.step;
  nlohmann::json manifest = nlohmann::json::array();
  for (const auto& e : params.entries()) {
    manifest.push_back({{"name", e.name},
                        {"shape", e.tensor.shape()},
                        {"trainable", e.trainable}});
  }
  full["params"] = std::move(manifest);
  std::string body = full.dump();

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os.write(kMagic, 5);
  write_u64(os, body.size());
  os.write(body.data(), static_cast<std::streamsize>(body.size()));
  for (const auto& e : params.entries()) {
    write_blob(os, e.tensor.value());
    if (e.trainable) {
      write_blob(os, e.m);
      write_blob(os, e.v);
    }
  }
  if (!os) throw std::runtime_error("write failed for " + path);
}

nlohmann::json load_checkpoint(const std::string& path, ParamSet& params) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  nlohmann::json meta = read_meta_stream(is, path);
  if (meta.value("dtype", "") != "f32") throw std::runtime_error(path + ": unsupported dtype");
  const auto& manifest = meta.at("params");
  if (manifest.size() != params.entries().size())
    throw std::runtime_error(path + ": parameter count mismatch");
  for (size_t i = 0; i < manifest.size(); ++i) {
    auto& e = params.entries()[i];
    const auto& m = manifest[i];
    if (m.at("name").get<std::string>() != e.name)
      throw std::runtime_error(path + ": parameter order mismatch at '" + e.name + "'");
    if (m.at("shape").get<std::vector<int>>() != e.tensor.shape())
      throw std::runtime_error(path + ": shape mismatch for '" + e.name + "'");
    if (m.at("trainable").get<bool>() != e.trainable)
      throw std::runtime_error(path + ": trainable flag mismatch for '" + e.name + "'");
    read_blob(is, e.tensor.value(), e.name);
    if (e.trainable) {
      read_blob(is, e.m, e.name + ".m");
      read_blob(is, e.v, e.name + ".v");
    }
  }
  params.step = meta.value("step", int64_t{0});
  meta.erase("params");
  return meta;
}

nlohmann::json read_checkpoint_meta(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  return read_meta_stream(is, path);
}

}  // namespace mvgen

#pragma once

// Named parameter registry, Adam, weight init, and checkpoint serialization.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "mvgen/rng.hpp"
#include "mvgen/tensor.hpp"

namespace mvgen {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct ParamEntryT {
  std::string name;
  TensorT<T> tensor;
  std::vector<T> m, v;  // Adam moments; kept only for trainable entries
  bool trainable = true;
};

// Ordered registry: declaration order defines the checkpoint blob layout.
template <typename T>
class ParamSetT {
 public:
  // Returned tensors are shared handles onto the registered node, so they
  // stay valid across later add() calls.
  TensorT<T> add(const std::string& name, TensorT<T> t, bool trainable = true) {
    for (const auto& e : entries_)
      if (e.name == name) throw std::invalid_argument("duplicate parameter name: " + name);
    ParamEntryT<T> e;
    e.name = name;
    e.tensor = std::move(t);
    e.trainable = trainable;
    e.tensor.set_requires_grad(trainable);
    if (trainable) {
      e.m.assign(e.tensor.numel(), T(0));
      e.v.assign(e.tensor.numel(), T(0));
    }
    entries_.push_back(std::move(e));
    return entries_.back().tensor;
  }

  std::vector<ParamEntryT<T>>& entries() { return entries_; }
  const std::vector<ParamEntryT<T>>& entries() const { return entries_; }

  TensorT<T> get(const std::string& name) const {
    for (const auto& e : entries_)
      if (e.name == name) return e.tensor;
    throw std::out_of_range("no parameter named " + name);
  }

  size_t scalar_count() const {
    size_t n = 0;
    for (const auto& e : entries_) n += e.tensor.numel();
    return n;
  }

  void zero_grads() {
    for (auto& e : entries_)
      if (e.trainable) e.tensor.zero_grad();
  }

  // Freeze/unfreeze all trainable tensors; frozen ones also skip backward work.
  void set_frozen(bool frozen) {
    for (auto& e : entries_)
      if (e.trainable) e.tensor.set_requires_grad(!frozen);
  }

  int64_t step = 0;  // shared Adam timestep, serialized with the state

 private:
  std::vector<ParamEntryT<T>> entries_;
};

using ParamSet = ParamSetT<float>;

// One bias-corrected Adam update over every trainable entry whose gradient
// has been populated this step. Throws (naming the parameter) on a non-finite
// gradient so a diverging run stops at the first bad step.
template <typename T>
void adam_step(ParamSetT<T>& params, const AdamConfig& cfg);

template <typename T> void init_normal(TensorT<T>& t, Rng& rng, T stddev, T mean = T(0));
template <typename T> void init_constant(TensorT<T>& t, T v);

// Checkpoint container: magic "MVCK1", u64 LE metadata length, JSON metadata
// (caller fields + dtype/step/parameter manifest), then raw little-endian f32
// blobs in registry order — value, then Adam m and v for trainable entries.
void save_checkpoint(const std::string& path, const nlohmann::json& meta, const ParamSet& params);

// The registry must already hold identically named/shaped entries (build the
// model first, then restore into it). Returns the caller metadata.
nlohmann::json load_checkpoint(const std::string& path, ParamSet& params);

// Reads just the metadata block (to recover the arch descriptor before
// constructing the model).
nlohmann::json read_checkpoint_meta(const std::string& path);

}  // namespace mvgen

#pragma once

// Alternating adversarial training loops (one discriminator update, one
// generator update per step) for the four model flavors, with JSON-lines
// logging, periodic checkpoint bundles and bit-exact resume.

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mvgen/dataset.hpp"
#include "mvgen/models.hpp"

namespace mvgen {

struct TrainConfig {
  int steps = 8000;
  int batch = 64;
  double g_lr = 1e-3;   // generator
  double d_lr = 2e-4;   // discriminator
  double e_lr = 5e-5;   // encoder (models that have one)
  double beta1 = 0.5;   // momentum-style beta; 0.5 is the usual GAN setting
  double beta2 = 0.999;
  bool minimax_g = false;  // default non-saturating generator loss
  uint64_t seed = 0;
  int log_every = 50;
  int checkpoint_every = 0;  // 0: only write the final bundle; n: refresh it every n steps
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

struct StepStats {
  int step = 0;
  double d_loss = 0, g_loss = 0;
  double d_real = 0, d_fake = 0;  // mean discriminator outputs on this step's batches
  double ms = 0;
};

using StepHook = std::function<void(const StepStats&)>;

// A bundle directory holds bundle.json ({model, arch, k, seed, step,
// rng_state, train_config, dataset{...}}) plus one checkpoint per network
// (g.ckpt / d.ckpt / e.ckpt). Training appends to <dir>/log.jsonl.
//
// Passing an empty out_dir disables all file output. If out_dir already holds
// a bundle for the same model/arch, training resumes from its step and rng
// state. Throws on a non-finite loss, leaving the last written bundle intact.
void train_gmv(GmvModel& m, const Dataset& ds, const TrainConfig& cfg, const std::string& out_dir,
               const StepHook& hook = {});
void train_cgmv(CgmvModel& m, const Dataset& ds, const TrainConfig& cfg,
                const std::string& out_dir, const StepHook& hook = {});
void train_cgan(CganModel& m, const Dataset& ds, const TrainConfig& cfg,
                const std::string& out_dir, const StepHook& hook = {});
void train_tuple(TupleGanModel& m, const Dataset& ds, const TrainConfig& cfg,
                 const std::string& out_dir, const StepHook& hook = {});

// Evenly spaced linear blends (1-t)a + tb for t = i/(steps-1); endpoints are
// exactly a and b. steps >= 2, equal lengths.
std::vector<std::vector<float>> interpolate_latent(const std::vector<float>& a,
                                                   const std::vector<float>& b, int steps);

// Bundle IO usable outside the trainer (sampling / evaluation tools).
void save_bundle(const std::string& dir, const nlohmann::json& info,
                 const std::vector<std::pair<std::string, const ParamSet*>>& nets);
nlohmann::json read_bundle_info(const std::string& dir);
void load_bundle_nets(const std::string& dir,
                      const std::vector<std::pair<std::string, ParamSet*>>& nets);

}  // namespace mvgen

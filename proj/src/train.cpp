#include "mvgen/train.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "mvgen/losses.hpp"

namespace mvgen {

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"steps", c.steps},       {"batch", c.batch},
       {"g_lr", c.g_lr},         {"d_lr", c.d_lr},
       {"e_lr", c.e_lr},         {"beta1", c.beta1},
       {"beta2", c.beta2},       {"minimax_g", c.minimax_g},
       {"seed", c.seed},         {"log_every", c.log_every},
       {"checkpoint_every", c.checkpoint_every}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  c.steps = j.at("steps").get<int>();
  c.batch = j.at("batch").get<int>();
  c.g_lr = j.at("g_lr").get<double>();
  c.d_lr = j.at("d_lr").get<double>();
  c.e_lr = j.at("e_lr").get<double>();
  c.beta1 = j.at("beta1").get<double>();
  c.beta2 = j.at("beta2").get<double>();
  c.minimax_g = j.at("minimax_g").get<bool>();
  c.seed = j.at("seed").get<uint64_t>();
  c.log_every = j.at("log_every").get<int>();
  c.checkpoint_every = j.at("checkpoint_every").get<int>();
}

std::vector<std::vector<float>> interpolate_latent(const std::vector<float>& a,
                                                   const std::vector<float>& b, int steps) {
  if (a.size() != b.size()) throw std::invalid_argument("interpolate: length mismatch");
  if (steps < 2) throw std::invalid_argument("interpolate: need at least 2 steps");
  std::vector<std::vector<float>> out(steps);
  for (int i = 0; i < steps; ++i) {
    float t = static_cast<float>(i) / static_cast<float>(steps - 1);
    out[i].resize(a.size());
    for (size_t j = 0; j < a.size(); ++j) out[i][j] = (1.0f - t) * a[j] + t * b[j];
  }
  return out;
}

void save_bundle(const std::string& dir, const nlohmann::json& info,
                 const std::vector<std::pair<std::string, const ParamSet*>>& nets) {
  std::filesystem::create_directories(dir);
  for (const auto& [name, ps] : nets)
    save_checkpoint(dir + "/" + name + ".ckpt", {{"net", name}}, *ps);
  // manifest written last: a bundle without it is treated as absent
  std::ofstream os(dir + "/bundle.json", std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write bundle manifest in " + dir);
  os << info.dump(2) << "\n";
}

nlohmann::json read_bundle_info(const std::string& dir) {
  std::ifstream is(dir + "/bundle.json");
  if (!is) throw std::runtime_error("no bundle manifest in " + dir);
  return nlohmann::json::parse(is);
}

void load_bundle_nets(const std::string& dir,
                      const std::vector<std::pair<std::string, ParamSet*>>& nets) {
  for (const auto& [name, ps] : nets) load_checkpoint(dir + "/" + name + ".ckpt", *ps);
}

namespace {

double mean_of(const Tensor& t) {
  double s = 0;
  for (float v : t.value()) s += v;
  return s / static_cast<double>(t.numel());
}

AdamConfig adam_for(double lr, const TrainConfig& cfg) {
  return {lr, cfg.beta1, cfg.beta2, 1e-8};
}

// Resume/save/log scaffolding shared by the four loops. step_fn runs one
// discriminator update followed by one generator update.
void run_loop(const std::string& model_name, const nlohmann::json& arch_j, int tuple_k,
              const Dataset& ds, const TrainConfig& cfg, const std::string& out_dir,
              const StepHook& hook,
              const std::vector<std::pair<std::string, ParamSet*>>& nets,
              const std::function<void(Rng&, StepStats&)>& step_fn) {
  Rng rng = Rng(cfg.seed).substream("train");
  int start = 0;
  nlohmann::json ds_j = ds.cfg;

  if (!out_dir.empty() && std::filesystem::exists(out_dir + "/bundle.json")) {
    nlohmann::json info = read_bundle_info(out_dir);
    if (info.at("model").get<std::string>() != model_name)
      throw std::runtime_error(out_dir + ": bundle holds a different model kind");
    if (info.at("arch") != arch_j)
      throw std::runtime_error(out_dir + ": bundle architecture does not match");
    if (info.at("dataset") != ds_j)
      throw std::runtime_error(out_dir + ": bundle was trained on a different dataset");
    start = info.at("step").get<int>();
    rng.restore_state(info.at("rng_state").get<std::string>());
    load_bundle_nets(out_dir, nets);
  }

  auto save = [&](int step) {
    if (out_dir.empty()) return;
    nlohmann::json info = {{"model", model_name}, {"arch", arch_j},
                           {"seed", cfg.seed},    {"step", step},
                           {"rng_state", rng.serialize_state()},
                           {"train_config", cfg}, {"dataset", ds_j}};
    if (tuple_k > 0) info["k"] = tuple_k;
    std::vector<std::pair<std::string, const ParamSet*>> cnets;
    for (const auto& [n, p] : nets) cnets.emplace_back(n, p);
    save_bundle(out_dir, info, cnets);
  };

  std::ofstream log;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    log.open(out_dir + "/log.jsonl", std::ios::app);
  }

  for (int step = start; step < cfg.steps; ++step) {
    StepStats st;
    st.step = step + 1;
    auto t0 = std::chrono::steady_clock::now();
    step_fn(rng, st);
    st.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    if (!std::isfinite(st.d_loss) || !std::isfinite(st.g_loss))
      throw std::runtime_error("non-finite loss at step " + std::to_string(st.step) +
                               "; last checkpoint kept");
    if (hook) hook(st);
    if (log && (st.step % cfg.log_every == 0 || st.step == cfg.steps || step == start)) {
      nlohmann::json line = {{"step", st.step},     {"d_loss", st.d_loss}, {"g_loss", st.g_loss},
                             {"d_real", st.d_real}, {"d_fake", st.d_fake}, {"ms", st.ms}};
      log << line.dump() << "\n";
      log.flush();
    }
    if (cfg.checkpoint_every > 0 && st.step % cfg.checkpoint_every == 0 && st.step != cfg.steps)
      save(st.step);
  }
  save(cfg.steps);
}

}  // namespace

void train_gmv(GmvModel& m, const Dataset& ds, const TrainConfig& cfg, const std::string& out_dir,
               const StepHook& hook) {
  auto step_fn = [&](Rng& rng, StepStats& st) {
    const int b = cfg.batch;
    // discriminator: real same-object pairs vs generated shared-content pairs
    m.pd.zero_grads();
    std::vector<size_t> ia, ib;
    sample_pair_indices(ds, rng, b, ia, ib);
    Tensor r1 = image_batch(ds, ia), r2 = image_batch(ds, ib);
    Tensor f1, f2;
    {
      NoGradGuard ng;
      Tensor c = sample_normal(rng, b, m.cfg.content_dim);
      Tensor v1 = sample_normal(rng, b, m.cfg.view_dim);
      Tensor v2 = sample_normal(rng, b, m.cfg.view_dim);
      f1 = m.gen.forward(concat_channels(c, v1), true);
      f2 = m.gen.forward(concat_channels(c, v2), true);
    }
    auto d_real = m.disc.forward(concat_channels(r1, r2), true);
    auto d_fake = m.disc.forward(concat_channels(f1, f2), true);
    auto dl = gan_d_loss(d_real, d_fake);
    dl.backward();
    adam_step(m.pd, adam_for(cfg.d_lr, cfg));
    st.d_loss = dl.item();
    st.d_real = mean_of(d_real);
    st.d_fake = mean_of(d_fake);

    // generator: fool the pair discriminator with fresh draws
    m.pg.zero_grads();
    m.pd.set_frozen(true);
    Tensor c = sample_normal(rng, b, m.cfg.content_dim);
    Tensor v1 = sample_normal(rng, b, m.cfg.view_dim);
    Tensor v2 = sample_normal(rng, b, m.cfg.view_dim);
    auto g1 = m.gen.forward(concat_channels(c, v1), true);
    auto g2 = m.gen.forward(concat_channels(c, v2), true);
    auto gl = gan_g_loss(m.disc.forward(concat_channels(g1, g2), true), cfg.minimax_g);
    gl.backward();
    m.pd.set_frozen(false);
    adam_step(m.pg, adam_for(cfg.g_lr, cfg));
    st.g_loss = gl.item();
  };
  run_loop("gmv", nlohmann::json(m.cfg), 0, ds, cfg, out_dir, hook,
           {{"g", &m.pg}, {"d", &m.pd}}, step_fn);
}

void train_cgmv(CgmvModel& m, const Dataset& ds, const TrainConfig& cfg,
                const std::string& out_dir, const StepHook& hook) {
  auto step_fn = [&](Rng& rng, StepStats& st) {
    const int b = cfg.batch;
    // discriminator sees three pair kinds: (x1,x2), (G(E(x1),v),G(E(x1),v')),
    // and (G(E(x1),v''), x1) with the genuine image second
    m.pd.zero_grads();
    std::vector<size_t> ia, ib;
    sample_pair_indices(ds, rng, b, ia, ib);
    Tensor x1 = image_batch(ds, ia), x2 = image_batch(ds, ib);
    Tensor f1, f2, f3;
    {
      NoGradGuard ng;
      auto e = m.enc.forward(x1, true);
      Tensor v1 = sample_normal(rng, b, m.cfg.view_dim);
      Tensor v2 = sample_normal(rng, b, m.cfg.view_dim);
      Tensor v3 = sample_normal(rng, b, m.cfg.view_dim);
      f1 = m.gen.forward(concat_channels(e, v1), true);
      f2 = m.gen.forward(concat_channels(e, v2), true);
      f3 = m.gen.forward(concat_channels(e, v3), true);
    }
    auto d_real = m.disc.forward(concat_channels(x1, x2), true);
    auto d_pair = m.disc.forward(concat_channels(f1, f2), true);
    auto d_mixed = m.disc.forward(concat_channels(f3, x1), true);
    auto dl = three_term_d_loss(d_real, d_pair, d_mixed);
    dl.backward();
    adam_step(m.pd, adam_for(cfg.d_lr, cfg));
    st.d_loss = dl.item();
    st.d_real = mean_of(d_real);
    st.d_fake = 0.5 * (mean_of(d_pair) + mean_of(d_mixed));

    // generator + encoder trained jointly against the frozen discriminator
    m.pg.zero_grads();
    m.pe.zero_grads();
    m.pd.set_frozen(true);
    sample_pair_indices(ds, rng, b, ia, ib);
    Tensor y1 = image_batch(ds, ia);
    auto e = m.enc.forward(y1, true);
    Tensor v1 = sample_normal(rng, b, m.cfg.view_dim);
    Tensor v2 = sample_normal(rng, b, m.cfg.view_dim);
    Tensor v3 = sample_normal(rng, b, m.cfg.view_dim);
    auto g1 = m.gen.forward(concat_channels(e, v1), true);
    auto g2 = m.gen.forward(concat_channels(e, v2), true);
    auto g3 = m.gen.forward(concat_channels(e, v3), true);
    auto gl = two_term_g_loss(m.disc.forward(concat_channels(g1, g2), true),
                              m.disc.forward(concat_channels(g3, y1), true), cfg.minimax_g);
    gl.backward();
    m.pd.set_frozen(false);
    adam_step(m.pg, adam_for(cfg.g_lr, cfg));
    adam_step(m.pe, adam_for(cfg.e_lr, cfg));
    st.g_loss = gl.item();
  };
  run_loop("cgmv", nlohmann::json(m.cfg), 0, ds, cfg, out_dir, hook,
           {{"g", &m.pg}, {"d", &m.pd}, {"e", &m.pe}}, step_fn);
}

void train_cgan(CganModel& m, const Dataset& ds, const TrainConfig& cfg,
                const std::string& out_dir, const StepHook& hook) {
  auto step_fn = [&](Rng& rng, StepStats& st) {
    const int b = cfg.batch;
    // discriminator judges (target, condition) stacks: a genuine other view
    // of the conditioning object vs a generated one
    m.pd.zero_grads();
    std::vector<size_t> ia, ib;
    sample_pair_indices(ds, rng, b, ia, ib);
    Tensor x = image_batch(ds, ia), y = image_batch(ds, ib);
    Tensor f;
    {
      NoGradGuard ng;
      auto e = m.enc.forward(y, true);
      Tensor v = sample_normal(rng, b, m.cfg.view_dim);
      f = m.gen.forward(concat_channels(e, v), true);
    }
    auto d_real = m.disc.forward(concat_channels(x, y), true);
    auto d_fake = m.disc.forward(concat_channels(f, y), true);
    auto dl = gan_d_loss(d_real, d_fake);
    dl.backward();
    adam_step(m.pd, adam_for(cfg.d_lr, cfg));
    st.d_loss = dl.item();
    st.d_real = mean_of(d_real);
    st.d_fake = mean_of(d_fake);

    // generator + encoder
    m.pg.zero_grads();
    m.pe.zero_grads();
    m.pd.set_frozen(true);
    sample_pair_indices(ds, rng, b, ia, ib);
    Tensor y2 = image_batch(ds, ib);
    auto e = m.enc.forward(y2, true);
    Tensor v = sample_normal(rng, b, m.cfg.view_dim);
    auto g = m.gen.forward(concat_channels(e, v), true);
    auto gl = gan_g_loss(m.disc.forward(concat_channels(g, y2), true), cfg.minimax_g);
    gl.backward();
    m.pd.set_frozen(false);
    adam_step(m.pg, adam_for(cfg.g_lr, cfg));
    adam_step(m.pe, adam_for(cfg.e_lr, cfg));
    st.g_loss = gl.item();
  };
  run_loop("cgan", nlohmann::json(m.cfg), 0, ds, cfg, out_dir, hook,
           {{"g", &m.pg}, {"d", &m.pd}, {"e", &m.pe}}, step_fn);
}

void train_tuple(TupleGanModel& m, const Dataset& ds, const TrainConfig& cfg,
                 const std::string& out_dir, const StepHook& hook) {
  const int k = m.k;
  auto stack_tuple = [&](const std::vector<Tensor>& imgs) {
    Tensor acc = imgs[0];
    for (size_t i = 1; i < imgs.size(); ++i) acc = concat_channels(acc, imgs[i]);
    return acc;
  };
  auto real_tuple = [&](Rng& rng, int b) {
    std::vector<size_t> idx;
    sample_tuple_indices(ds, rng, b, k, idx);
    std::vector<Tensor> per_pos;
    for (int j = 0; j < k; ++j) {
      std::vector<size_t> pos(b);
      for (int i = 0; i < b; ++i) pos[i] = idx[static_cast<size_t>(i) * k + j];
      per_pos.push_back(image_batch(ds, pos));
    }
    return stack_tuple(per_pos);
  };
  auto step_fn = [&](Rng& rng, StepStats& st) {
    const int b = cfg.batch;
    m.pd.zero_grads();
    Tensor reals = real_tuple(rng, b);
    Tensor fakes;
    {
      NoGradGuard ng;
      auto z = sample_normal(rng, b, m.gen.latent_dim());
      fakes = stack_tuple(m.gen.forward(z, true));
    }
    auto d_real = m.disc.forward(reals, true);
    auto d_fake = m.disc.forward(fakes, true);
    auto dl = gan_d_loss(d_real, d_fake);
    dl.backward();
    adam_step(m.pd, adam_for(cfg.d_lr, cfg));
    st.d_loss = dl.item();
    st.d_real = mean_of(d_real);
    st.d_fake = mean_of(d_fake);

    m.pg.zero_grads();
    m.pd.set_frozen(true);
    auto z = sample_normal(rng, b, m.gen.latent_dim());
    auto gl = gan_g_loss(m.disc.forward(stack_tuple(m.gen.forward(z, true)), true), cfg.minimax_g);
    gl.backward();
    m.pd.set_frozen(false);
    adam_step(m.pg, adam_for(cfg.g_lr, cfg));
    st.g_loss = gl.item();
  };
  run_loop("tuple", nlohmann::json(m.cfg), k, ds, cfg, out_dir, hook,
           {{"g", &m.pg}, {"d", &m.pd}}, step_fn);
}

}  // namespace mvgen

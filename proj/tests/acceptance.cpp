// Acceptance battery: ten numbered checks, one PASS/FAIL line each, nonzero
// exit if any fail. Checks 6-9 need desk-scale training runs; their bundles,
// evaluation reports and measurement classifiers are cached under
// MVGEN_ACCEPT_CACHE (default baked in at build time), so the first run is
// expensive and later runs only re-measure. Wall-clock spent training is
// accumulated in a sidecar next to each bundle and re-checked against the
// compute budget on every run.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mvgen/dataset.hpp"
#include "mvgen/eval.hpp"
#include "mvgen/gradcheck.hpp"
#include "mvgen/image_io.hpp"
#include "mvgen/losses.hpp"
#include "mvgen/metrics.hpp"
#include "mvgen/models.hpp"
#include "mvgen/nn.hpp"
#include "mvgen/rng.hpp"
#include "mvgen/threading.hpp"
#include "mvgen/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mvgen;

namespace {

// ---------------------------------------------------------------------------
// frozen run configuration

// Desk scale: 80x24 training images at 32px. The headline run (check 6) uses
// the full 8000-step budget; the three-seed ordering fleet (checks 7-9) runs
// a shorter identical budget per model so three models x three seeds stays
// tractable on a small machine.
constexpr int kDeskWidth = 32;
constexpr int kHeadlineSteps = 8000;
constexpr int kFleetSteps = 4000;
constexpr int kFleetWidth = 24;
const uint64_t kFleetSeeds[3] = {1, 2, 3};

DatasetConfig desk_config() {
  DatasetConfig c;
  c.image_size = 32;
  c.num_objects = 100;
  c.train_objects = 80;
  c.views_per_train = 24;
  c.views_per_test = 8;
  c.blur_prob = 0.05;
  c.seed = 1;
  return c;
}

ArchConfig desk_arch(int width) {
  ArchConfig a;
  a.image_size = 32;
  a.content_dim = 32;
  a.view_dim = 8;
  a.width = width;
  return a;
}

TrainConfig desk_train(int steps, uint64_t seed) {
  TrainConfig t;
  t.steps = steps;
  t.batch = 64;
  t.seed = seed;
  t.log_every = 200;
  t.checkpoint_every = 1000;  // crash-resumable
  return t;
}

EvalConfig desk_eval() {
  EvalConfig e;
  e.n_pairs = 5000;
  e.n_images = 1000;
  e.seed = 0;
  return e;
}

// ---------------------------------------------------------------------------
// reporting

int g_failures = 0;

void report(int id, const char* name, bool pass, const std::string& detail) {
  std::printf("[%2d] %s  %s: %s\n", id, pass ? "PASS" : "FAIL", name, detail.c_str());
  std::fflush(stdout);
  g_failures += !pass;
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

// ---------------------------------------------------------------------------
// cache plumbing

std::string cache_root() {
  const char* env = std::getenv("MVGEN_ACCEPT_CACHE");
  std::string root = env && *env ? env : MVGEN_ACCEPT_DEFAULT_CACHE;
  fs::create_directories(root);
  return root;
}

const Dataset& desk_dataset() {
  static Dataset ds = [] {
    std::string path = cache_root() + "/desk.mvds";
    if (fs::exists(path)) {
      Dataset d = load_dataset(path);
      if (nlohmann::json(d.cfg) == nlohmann::json(desk_config())) return d;
    }
    Dataset d = generate_dataset(desk_config());
    save_dataset(path, d);
    return d;
  }();
  return ds;
}

double read_sidecar_seconds(const std::string& path) {
  std::ifstream in(path);
  if (!in) return 0;
  try {
    return json::parse(in).at("wall_s").get<double>();
  } catch (const std::exception&) {
    return 0;
  }
}

// Trains (or resumes) one desk bundle under the cache, accumulating the
// wall-clock seconds actually spent training into <dir>.train_time.json.
std::string ensure_bundle(const std::string& model, int width, int steps, uint64_t seed) {
  std::ostringstream name;
  name << model << "_w" << width << "_s" << steps << "_seed" << seed;
  std::string dir = cache_root() + "/" + name.str();
  std::string sidecar = dir + ".train_time.json";

  if (fs::exists(dir + "/bundle.json")) {
    json info = read_bundle_info(dir);
    if (info.at("step").get<int>() >= steps) return dir;
  }

  std::printf("     training %s ...\n", name.str().c_str());
  std::fflush(stdout);
  const Dataset& ds = desk_dataset();
  ArchConfig arch = desk_arch(width);
  TrainConfig tc = desk_train(steps, seed);
  auto t0 = std::chrono::steady_clock::now();
  if (model == "gmv") {
    GmvModel m(arch, seed);
    train_gmv(m, ds, tc, dir);
  } else if (model == "cgmv") {
    CgmvModel m(arch, seed);
    train_cgmv(m, ds, tc, dir);
  } else if (model == "cgan") {
    CganModel m(arch, seed);
    train_cgan(m, ds, tc, dir);
  } else if (model == "dcganx8") {
    TupleGanModel m(arch, 8, seed);
    train_tuple(m, ds, tc, dir);
  } else {
    throw std::runtime_error("unknown model " + model);
  }
  double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  json side{{"wall_s", read_sidecar_seconds(sidecar) + dt}};
  std::ofstream(sidecar) << side.dump(2) << "\n";
  return dir;
}

double bundle_train_minutes(const std::string& dir) {
  return read_sidecar_seconds(dir + ".train_time.json") / 60.0;
}

// Evaluation reports live inside the bundle directory and are keyed by the
// embedded eval config; a config change invalidates them.
json ensure_report(const std::string& bundle_dir) {
  EvalConfig cfg = desk_eval();
  std::string path = bundle_dir + "/eval_report.json";
  if (fs::exists(path)) {
    try {
      json r = json::parse(std::ifstream(path));
      if (r.at("eval_config") == json(cfg)) return r;
    } catch (const std::exception&) {
    }
  }
  std::printf("     evaluating %s ...\n", bundle_dir.c_str());
  std::fflush(stdout);
  json r = evaluate_bundle(bundle_dir, desk_dataset(), cfg, cache_root() + "/clf");
  std::ofstream(path) << r.dump(2) << "\n";
  return r;
}

// ---------------------------------------------------------------------------
// 1: autodiff

void check_autodiff() {
  auto t0 = std::chrono::steady_clock::now();
  auto entries = gradcheck_battery(1e-5);
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  double worst = 0;
  std::string worst_name;
  for (const auto& e : entries)
    if (e.result.max_rel_err > worst) {
      worst = e.result.max_rel_err;
      worst_name = e.name;
    }
  bool pass = worst < 1e-4 && secs < 60.0 && entries.size() >= 20;
  report(1, "autodiff gradcheck", pass,
         fmt("%zu entries, worst %.2e (%s), %.2f s", entries.size(), worst, worst_name.c_str(),
             secs));
}

// ---------------------------------------------------------------------------
// 2: adam

// scalar reference straight from the update equations, independent of the
// library implementation
std::vector<double> scalar_adam(double theta, const std::vector<double>& grads, double lr,
                                double b1, double b2, double eps) {
  std::vector<double> traj;
  double m = 0, v = 0;
  for (size_t t = 1; t <= grads.size(); ++t) {
    double g = grads[t - 1];
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    double mh = m / (1 - std::pow(b1, static_cast<double>(t)));
    double vh = v / (1 - std::pow(b2, static_cast<double>(t)));
    theta -= lr * mh / (std::sqrt(vh) + eps);
    traj.push_back(theta);
  }
  return traj;
}

void check_adam() {
  double worst = 0;
  // constant and signed-constant gradients plus a seeded random sequence, each
  // run through the library on a small tensor and compared element-wise
  struct Case {
    double theta0;
    std::vector<double> grads;
    AdamConfig cfg;
  };
  std::vector<Case> cases = {
      {0.5, {0.1, 0.1, 0.1, 0.1, 0.1}, {0.01, 0.9, 0.999, 1e-8}},
      {-1.25, {2.0, 2.0, -1.0, 0.5, 0.25}, {0.002, 0.5, 0.99, 1e-8}},
  };
  Rng rng(424242);
  Case random_case{0.8, {}, {0.005, 0.9, 0.999, 1e-8}};
  for (int i = 0; i < 5; ++i) random_case.grads.push_back(rng.normal());
  cases.push_back(random_case);

  for (const auto& c : cases) {
    auto want = scalar_adam(c.theta0, c.grads, c.cfg.lr, c.cfg.beta1, c.cfg.beta2, c.cfg.eps);
    ParamSetT<double> ps;
    auto p = ps.add("theta", TensorT<double>::from({2}, {c.theta0, c.theta0}));
    for (size_t t = 0; t < c.grads.size(); ++t) {
      p.grad()[0] = c.grads[t];
      p.grad()[1] = c.grads[t];
      adam_step(ps, c.cfg);
      ps.zero_grads();
      worst = std::max(worst, std::fabs(p.value()[0] - want[t]));
      worst = std::max(worst, std::fabs(p.value()[1] - want[t]));
    }
  }
  report(2, "adam oracle", worst < 1e-10, fmt("max |theta - reference| %.2e", worst));
}

// ---------------------------------------------------------------------------
// 3: metric oracles

double auc_brute(const std::vector<double>& pos, const std::vector<double>& neg) {
  double wins = 0;
  for (double p : pos)
    for (double n : neg) {
      if (p < n) wins += 1;
      else if (p == n) wins += 0.5;
    }
  return wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

void check_metrics() {
  Rng rng(202);
  int auc_exact = 0;
  for (int it = 0; it < 100; ++it) {
    int m = 1 + static_cast<int>(rng.uniform_int(200));
    int n = 1 + static_cast<int>(rng.uniform_int(200));
    bool gridded = rng.bernoulli(0.5);  // integer grid forces heavy ties
    auto draw = [&](int count) {
      std::vector<double> v(count);
      for (auto& x : v) x = gridded ? std::floor(rng.uniform(0, 8)) : rng.uniform(0, 1);
      return v;
    };
    auto pos = draw(m), neg = draw(n);
    auc_exact += auc_lower_distance(pos, neg) == auc_brute(pos, neg);
  }

  // closed forms: D(p,p) = 0; D(0.3, 0.7) and a 10-dim sum frozen from an
  // independent high-precision computation
  double b_worst = 0;
  b_worst = std::max(b_worst, std::fabs(bhattacharyya_bernoulli_sum({0.37}, {0.37})));
  b_worst = std::max(
      b_worst, std::fabs(bhattacharyya_bernoulli_sum({0.3}, {0.7}) - 0.08717669357238887));
  {
    std::vector<double> p(10, 0.5), q(10);
    for (int i = 0; i < 10; ++i) q[i] = 0.4 + 0.02 * i;
    double direct = 0;
    for (int i = 0; i < 10; ++i) {
      double bc = std::sqrt(p[i] * q[i]) + std::sqrt((1 - p[i]) * (1 - q[i]));
      direct += -std::log(bc);
    }
    b_worst = std::max(b_worst, std::fabs(bhattacharyya_bernoulli_sum(p, q) - direct));
  }

  std::vector<uint16_t> codes = {7, 7, 9, 1023, 9, 7, 0};  // 4 distinct / 7
  bool uniq_ok = unique_combination_ratio(codes) == 4.0 / 7.0;
  std::reverse(codes.begin(), codes.end());
  uniq_ok = uniq_ok && unique_combination_ratio(codes) == 4.0 / 7.0;

  bool pass = auc_exact == 100 && b_worst < 1e-12 && uniq_ok;
  report(3, "metric oracles", pass,
         fmt("auc exact %d/100, bhattacharyya err %.1e, unique-ratio %s", auc_exact, b_worst,
             uniq_ok ? "ok" : "WRONG"));
}

// ---------------------------------------------------------------------------
// 4: loss identities

Tensor probs_from(Rng& rng, int n) {
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.uniform(0.08, 0.92));
  return Tensor::from({n}, std::move(v));
}

double mean_log(const Tensor& t, bool one_minus) {
  double s = 0;
  for (float v : t.value()) s += std::log(one_minus ? 1.0 - v : static_cast<double>(v));
  return s / static_cast<double>(t.numel());
}

void check_losses() {
  Rng rng(77);
  double worst = 0;
  for (int it = 0; it < 20; ++it) {
    Tensor a = probs_from(rng, 5), b = probs_from(rng, 5), c = probs_from(rng, 5);
    double d2 = -mean_log(a, false) - mean_log(b, true);
    double d3 = d2 - mean_log(c, true);
    double gn = -mean_log(a, false);
    double gm = mean_log(a, true);
    worst = std::max(worst, std::fabs(gan_d_loss(a, b).value()[0] - d2));
    worst = std::max(worst, std::fabs(three_term_d_loss(a, b, c).value()[0] - d3));
    worst = std::max(worst, std::fabs(gan_g_loss(a).value()[0] - gn));
    worst = std::max(worst, std::fabs(gan_g_loss(a, true).value()[0] - gm));
    worst = std::max(worst,
                     std::fabs(two_term_g_loss(a, b).value()[0] -
                               (-mean_log(a, false) - mean_log(b, false))));
  }
  Tensor half = Tensor::from({4}, {0.5f, 0.5f, 0.5f, 0.5f});
  const double ln2 = std::log(2.0);
  double fix2 = std::fabs(gan_d_loss(half, half).value()[0] - 2 * ln2);
  double fix3 = std::fabs(three_term_d_loss(half, half, half).value()[0] - 3 * ln2);
  bool pass = worst < 1e-6 && fix2 < 1e-6 && fix3 < 1e-6;
  report(4, "loss identities", pass,
         fmt("composition err %.1e, 2ln2 err %.1e, 3ln2 err %.1e", worst, fix2, fix3));
}

// ---------------------------------------------------------------------------
// 5: determinism

std::vector<char> file_bytes(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path);
  return std::vector<char>((std::istreambuf_iterator<char>(is)),
                           std::istreambuf_iterator<char>());
}

DatasetConfig check5_ds_config() {
  DatasetConfig c;
  c.image_size = 16;
  c.num_objects = 10;
  c.train_objects = 8;
  c.views_per_train = 5;
  c.views_per_test = 3;
  c.blur_prob = 0.1;
  c.seed = 99;
  return c;
}

void check_determinism() {
  std::string tmp = cache_root() + "/tmp_det";
  fs::remove_all(tmp);
  fs::create_directories(tmp);

  Dataset d1 = generate_dataset(check5_ds_config());
  Dataset d2 = generate_dataset(check5_ds_config());
  save_dataset(tmp + "/a.mvds", d1);
  save_dataset(tmp + "/b.mvds", d2);
  bool ds_ok = file_bytes(tmp + "/a.mvds") == file_bytes(tmp + "/b.mvds");

  // the cached desk dataset must match a fresh regeneration byte for byte
  desk_dataset();
  Dataset desk_again = generate_dataset(desk_config());
  save_dataset(tmp + "/desk.mvds", desk_again);
  bool desk_ok = file_bytes(tmp + "/desk.mvds") == file_bytes(cache_root() + "/desk.mvds");

  int prev_threads = thread_count();
  set_thread_count(1);
  ArchConfig arch;
  arch.image_size = 16;
  arch.content_dim = 8;
  arch.view_dim = 4;
  arch.width = 8;
  TrainConfig tc;
  tc.steps = 30;
  tc.batch = 8;
  tc.seed = 5;
  tc.log_every = 10;
  for (const char* run : {"r1", "r2"}) {
    GmvModel m(arch, tc.seed);
    train_gmv(m, d1, tc, tmp + "/" + run);
  }
  set_thread_count(prev_threads);
  bool train_ok = file_bytes(tmp + "/r1/g.ckpt") == file_bytes(tmp + "/r2/g.ckpt") &&
                  file_bytes(tmp + "/r1/d.ckpt") == file_bytes(tmp + "/r2/d.ckpt");
  fs::remove_all(tmp);

  report(5, "determinism", ds_ok && desk_ok && train_ok,
         fmt("dataset bytes %s, cached desk bytes %s, 30-step checkpoints %s",
             ds_ok ? "identical" : "DIFFER", desk_ok ? "identical" : "DIFFER",
             train_ok ? "identical" : "DIFFER"));
}

// ---------------------------------------------------------------------------
// 6: desk-scale headline run

void check_headline() {
  std::string gmv = ensure_bundle("gmv", kDeskWidth, kHeadlineSteps, 1);
  std::string x8 = ensure_bundle("dcganx8", kDeskWidth, kHeadlineSteps, 1);
  json rg = ensure_report(gmv);
  json rx = ensure_report(x8);
  double auc_g = rg.at("metrics").at("auc").at("gen_gen").get<double>();
  double auc_x = rx.at("metrics").at("auc").at("gen_gen").get<double>();

  // compute budget: 45 min x 4 cores; we charge wall time times the worker
  // count this machine actually used (ideal scaling - recorded, not assumed)
  double mins = bundle_train_minutes(gmv);
  double core_min = mins * thread_count();
  bool time_ok = core_min > 0 && core_min <= 45.0 * 4;
  bool auc_ok = auc_g >= 0.65 && auc_g > auc_x;
  report(6, "gmv desk-scale", auc_ok && time_ok,
         fmt("gen-gen auc %.3f (target >= 0.65) vs dcganx8 %.3f; trained %.1f min x %d threads = "
             "%.0f core-min (budget 180)",
             auc_g, auc_x, mins, thread_count(), core_min));
}

// ---------------------------------------------------------------------------
// 7-9: three-seed ordering fleet

struct FleetRow {
  double uniq_cgmv, uniq_cgan, d2e_gmv, d2e_cgan, blur_gmv, blur_cgan;
};

FleetRow fleet_row(uint64_t seed) {
  json g = ensure_report(ensure_bundle("gmv", kFleetWidth, kFleetSteps, seed));
  json c = ensure_report(ensure_bundle("cgmv", kFleetWidth, kFleetSteps, seed));
  json n = ensure_report(ensure_bundle("cgan", kFleetWidth, kFleetSteps, seed));
  auto dist = [](const json& r, const char* key) {
    return r.at("metrics").at("distribution").at(key).get<double>();
  };
  return {dist(c, "diversity"), dist(n, "diversity"), dist(g, "d2e"),
          dist(n, "d2e"),       dist(g, "blurry_rate"), dist(n, "blurry_rate")};
}

const std::vector<FleetRow>& fleet() {
  static std::vector<FleetRow> rows = [] {
    std::vector<FleetRow> r;
    for (uint64_t s : kFleetSeeds) r.push_back(fleet_row(s));
    return r;
  }();
  return rows;
}

void check_mode_collapse() {
  int uniq_wins = 0, d2e_wins = 0;
  std::ostringstream d;
  for (const auto& r : fleet()) {
    uniq_wins += r.uniq_cgmv > r.uniq_cgan;
    d2e_wins += r.d2e_gmv < r.d2e_cgan;
    d << fmt(" [uniq %.3f vs %.3f; d2e %.3f vs %.3f]", r.uniq_cgmv, r.uniq_cgan, r.d2e_gmv,
             r.d2e_cgan);
  }
  bool pass = uniq_wins >= 2 && d2e_wins >= 2;
  report(7, "mode-collapse ordering", pass,
         fmt("cgmv>cgan diversity %d/3, gmv<cgan d2e %d/3;%s", uniq_wins, d2e_wins,
             d.str().c_str()));
}

void check_content_transfer() {
  json r = ensure_report(ensure_bundle("cgmv", kFleetWidth, kFleetSteps, kFleetSeeds[0]));
  const json& t = r.at("metrics").at("content_transfer");
  double chance = t.at("chance").get<double>();
  double code = t.at("code_linear_acc").get<double>();
  double gen = t.at("transfer_acc").get<double>();
  bool pass = chance == 0.05 && code >= 5 * chance && gen >= 3 * chance;
  report(8, "content transfer", pass,
         fmt("code linear %.3f (>= %.2f), generated %.3f (>= %.2f), chance %.2f", code, 5 * chance,
             gen, 3 * chance, chance));
}

void check_blurry() {
  int wins = 0;
  std::ostringstream d;
  for (const auto& r : fleet()) {
    bool ok = std::fabs(r.blur_gmv - 0.05) <= 0.15 && r.blur_gmv < r.blur_cgan;
    wins += ok;
    d << fmt(" [gmv %.3f cgan %.3f]", r.blur_gmv, r.blur_cgan);
  }
  report(9, "blurry-rate ordering", wins >= 2, fmt("%d/3 seeds;%s", wins, d.str().c_str()));
}

// ---------------------------------------------------------------------------
// 10: grid replay through the command-line tool

unsigned char quantize(float v) {
  return static_cast<unsigned char>(std::lround(std::clamp((v + 1.f) * 0.5f, 0.f, 1.f) * 255.f));
}

std::vector<unsigned char> grid_cell_u8(const std::vector<float>& grid, int h, int w, int cell,
                                        int r, int c) {
  std::vector<unsigned char> out;
  size_t plane = static_cast<size_t>(h) * w;
  int oy = r * (cell + 2), ox = c * (cell + 2);
  for (int ch = 0; ch < 3; ++ch)
    for (int y = 0; y < cell; ++y)
      for (int x = 0; x < cell; ++x)
        out.push_back(quantize(grid[ch * plane + static_cast<size_t>(oy + y) * w + ox + x]));
  return out;
}

int run_cli(const std::string& args) {
  std::string cmd = std::string(MVGEN_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

void check_grid_replay() {
  // a lightly trained small model is enough: the claim is structural
  std::string tmp = cache_root() + "/tmp_grid";
  fs::remove_all(tmp);
  fs::create_directories(tmp);
  Dataset ds = generate_dataset(check5_ds_config());
  ArchConfig arch;
  arch.image_size = 16;
  arch.content_dim = 8;
  arch.view_dim = 4;
  arch.width = 8;
  TrainConfig tc;
  tc.steps = 40;
  tc.batch = 8;
  tc.seed = 12;
  tc.log_every = 20;
  GmvModel m(arch, tc.seed);
  train_gmv(m, ds, tc, tmp + "/bundle");

  bool grid_ok = true, interp_ok = true;
  // (a) every grid tile regenerates bit-exactly, one latent at a time
  if (run_cli("sample --bundle " + tmp + "/bundle --out " + tmp + "/g.ppm" +
              " --rows 3 --cols 4 --seed 17") != 0)
    throw std::runtime_error("sample grid failed");
  json latents = json::parse(std::ifstream(tmp + "/g.ppm.manifest.json")).at("latents");
  auto cs = latents.at("contents").get<std::vector<std::vector<float>>>();
  auto vs = latents.at("views").get<std::vector<std::vector<float>>>();
  int h = 0, w = 0;
  auto grid = read_ppm(tmp + "/g.ppm", h, w);
  auto gen_one = [&](std::vector<float> l) {
    const int dim = static_cast<int>(l.size());
    NoGradGuard ng;
    Tensor img = m.gen.forward(Tensor::from({1, dim}, std::move(l)), false);
    std::vector<unsigned char> u8(img.numel());
    for (size_t i = 0; i < img.numel(); ++i) u8[i] = quantize(img.value()[i]);
    return u8;
  };
  for (size_t i = 0; i < cs.size(); ++i)
    for (size_t j = 0; j < vs.size(); ++j) {
      std::vector<float> l = cs[i];
      l.insert(l.end(), vs[j].begin(), vs[j].end());
      grid_ok = grid_ok && grid_cell_u8(grid, h, w, 16, static_cast<int>(i),
                                        static_cast<int>(j)) == gen_one(std::move(l));
    }

  // (b) a two-step interpolation is exactly the two direct endpoint renders
  if (run_cli("sample --bundle " + tmp + "/bundle --out " + tmp + "/i.ppm" +
              " --mode interpolate --steps 2 --seed 23") != 0)
    throw std::runtime_error("sample interpolate failed");
  json il = json::parse(std::ifstream(tmp + "/i.ppm.manifest.json")).at("latents");
  auto from = il.at("from").get<std::vector<float>>();
  auto to = il.at("to").get<std::vector<float>>();
  auto fixedv = il.at("fixed").get<std::vector<float>>();
  auto with_view = [&](std::vector<float> c) {
    c.insert(c.end(), fixedv.begin(), fixedv.end());
    return c;
  };
  int ih = 0, iw = 0;
  auto igrid = read_ppm(tmp + "/i.ppm", ih, iw);
  interp_ok = grid_cell_u8(igrid, ih, iw, 16, 0, 0) == gen_one(with_view(from)) &&
              grid_cell_u8(igrid, ih, iw, 16, 0, 1) == gen_one(with_view(to));

  fs::remove_all(tmp);
  report(10, "grid replay", grid_ok && interp_ok,
         fmt("12/12 grid tiles %s, interpolation endpoints %s",
             grid_ok ? "bit-exact" : "MISMATCH", interp_ok ? "bit-exact" : "MISMATCH"));
}

int g_ran = 0;

// MVGEN_ACCEPT_ONLY="1,3,10" narrows a run while iterating; unset runs all.
// Skipped checks are reported as skipped, never as passes.
bool wanted(int id) {
  const char* only = std::getenv("MVGEN_ACCEPT_ONLY");
  if (!only || !*only) return true;
  std::stringstream ss(only);
  std::string tok;
  while (std::getline(ss, tok, ','))
    if (!tok.empty() && std::atoi(tok.c_str()) == id) return true;
  return false;
}

void guarded(void (*fn)(), int id, const char* name) {
  if (!wanted(id)) {
    std::printf("[%2d] SKIP  %s (filtered by MVGEN_ACCEPT_ONLY)\n", id, name);
    return;
  }
  ++g_ran;
  try {
    fn();
  } catch (const std::exception& e) {
    report(id, name, false, std::string("exception: ") + e.what());
  }
}

}  // namespace

int main() {
  std::printf("acceptance battery (cache: %s, %d worker threads)\n", cache_root().c_str(),
              thread_count());
  guarded(check_autodiff, 1, "autodiff gradcheck");
  guarded(check_adam, 2, "adam oracle");
  guarded(check_metrics, 3, "metric oracles");
  guarded(check_losses, 4, "loss identities");
  guarded(check_determinism, 5, "determinism");
  guarded(check_headline, 6, "gmv desk-scale");
  guarded(check_mode_collapse, 7, "mode-collapse ordering");
  guarded(check_content_transfer, 8, "content transfer");
  guarded(check_blurry, 9, "blurry-rate ordering");
  guarded(check_grid_replay, 10, "grid replay");
  std::printf("%d/%d executed criteria pass (%d of 10 run)\n", g_ran - g_failures, g_ran, g_ran);
  return g_failures == 0 ? 0 : 1;
}

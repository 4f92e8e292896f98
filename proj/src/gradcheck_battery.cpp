#include "mvgen/gradcheck.hpp"

#include "mvgen/ops.hpp"
#include "mvgen/rng.hpp"

namespace mvgen {

namespace {

using DT = TensorT<double>;

// kept away from 0 so ReLU-family kinks never sit inside the stencil
DT rand_leaf(std::vector<int> shape, Rng& rng, double lo_gap = 0.05) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) {
    x = rng.normal();
    if (std::fabs(x) < lo_gap) x = x < 0 ? -lo_gap * 2 : lo_gap * 2;
  }
  return DT::from(std::move(shape), std::move(v));
}

DT rand_unit(std::vector<int> shape, Rng& rng) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(0.05, 0.95);
  return DT::from(std::move(shape), std::move(v));
}

}  // namespace

std::vector<BatteryEntry> gradcheck_battery(double h) {
  std::vector<BatteryEntry> out;
  Rng rng(911);
  auto push = [&](const std::string& name, std::vector<DT> leaves,
                  const std::function<DT()>& f) {
    out.push_back({name, gradcheck(std::move(leaves), f, h)});
  };

  auto a = rand_leaf({3, 4}, rng);
  auto b = rand_leaf({3, 4}, rng);
  push("add", {a, b}, [&] { return sum_all(add(a, b)); });
  push("sub", {a, b}, [&] { return sum_all(sub(a, b)); });
  push("mul", {a, b}, [&] { return mean_all(mul(a, b)); });
  push("scale", {a, b}, [&] { return sum_all(scale(mul(a, b), 2.5)); });
  push("add_scalar", {a, b}, [&] { return sum_all(add_scalar(mul(a, b), -1.25)); });
  push("relu", {a, b}, [&] { return sum_all(mul(relu(a), b)); });
  push("leaky_relu", {a, b}, [&] { return sum_all(mul(leaky_relu(a, 0.2), b)); });
  push("tanh", {a, b}, [&] { return sum_all(mul(tanh_op(a), b)); });
  push("sigmoid", {a, b}, [&] { return sum_all(mul(sigmoid(a), b)); });
  push("reshape", {a, b},
       [&] { return sum_all(mul(reshape(a, {4, 3}), reshape(b, {4, 3}))); });
  push("concat_channels", {a, b},
       [&] { return sum_all(mul(concat_channels(a, b), concat_channels(b, a))); });

  auto x = rand_leaf({4, 5}, rng);
  auto w = rand_leaf({5, 3}, rng);
  auto bias = rand_leaf({3}, rng);
  push("matmul_bias", {x, w, bias},
       [&] { return mean_all(tanh_op(add_bias(matmul(x, w), bias))); });

  auto xs = rand_leaf({2, 3, 4, 4}, rng);
  auto bs = rand_leaf({3}, rng);
  push("add_bias_spatial", {xs, bs},
       [&] { return mean_all(mul(add_bias(xs, bs), add_bias(xs, bs))); });

  for (auto [st, pad] : {std::pair{1, 0}, {1, 1}, {2, 1}}) {
    auto xc = rand_leaf({2, 3, 6, 6}, rng);
    auto kc = rand_leaf({4, 3, 3, 3}, rng);
    push("conv2d_s" + std::to_string(st) + "p" + std::to_string(pad), {xc, kc},
         [&xc, &kc, st = st, pad = pad] {
           return mean_all(mul(conv2d(xc, kc, st, pad), conv2d(xc, kc, st, pad)));
         });
  }

  auto xt = rand_leaf({2, 4, 3, 3}, rng);
  auto kt = rand_leaf({4, 3, 4, 4}, rng);
  push("conv_transpose2d", {xt, kt}, [&] {
    auto y = conv_transpose2d(xt, kt, 2, 1);
    return mean_all(mul(y, y));
  });

  auto xb = rand_leaf({4, 3, 2, 2}, rng);
  auto g = rand_leaf({3}, rng);
  auto beta = rand_leaf({3}, rng);
  auto rm = DT::zeros({3});
  auto rv = DT::from({3}, {1.0, 1.0, 1.0});
  push("batch_norm_train", {xb, g, beta}, [&] {
    auto rm2 = rm.detach();
    auto rv2 = rv.detach();
    return mean_all(mul(batch_norm(xb, g, beta, rm2, rv2, true), xb));
  });
  auto rm3 = DT::from({3}, {0.1, -0.2, 0.3});
  auto rv3 = DT::from({3}, {0.9, 1.1, 1.4});
  push("batch_norm_eval", {xb, g, beta}, [&] {
    return mean_all(mul(batch_norm(xb, g, beta, rm3, rv3, false), xb));
  });

  auto p = rand_unit({8}, rng);
  auto t = rand_unit({8}, rng);
  push("bce_const_target", {p}, [&] { return bce_loss(p, 1.0); });
  push("bce_tensor_target", {p}, [&] { return bce_loss(p, t); });

  auto logits = rand_leaf({5, 7}, rng);
  std::vector<int> labels = {0, 3, 6, 2, 2};
  push("softmax_cross_entropy", {logits},
       [&] { return softmax_cross_entropy(logits, labels); });

  {
    auto xn = rand_leaf({2, 3, 8, 8}, rng);
    auto k1 = rand_leaf({4, 3, 3, 3}, rng);
    auto g1 = rand_leaf({4}, rng);
    auto b1 = rand_leaf({4}, rng);
    auto k2 = rand_leaf({5, 4, 4, 4}, rng);
    auto wn = rand_leaf({5 * 4 * 4, 3}, rng);
    auto bn = rand_leaf({3}, rng);
    auto rmn = DT::zeros({4});
    auto rvn = DT::from({4}, {1, 1, 1, 1});
    std::vector<int> ln = {1, 2};
    push("composed_conv_net", {xn, k1, g1, b1, k2, wn, bn}, [&, ln] {
      auto rm2 = rmn.detach();
      auto rv2 = rvn.detach();
      auto h2 = leaky_relu(batch_norm(conv2d(xn, k1, 1, 1), g1, b1, rm2, rv2, true), 0.2);
      auto h3 = leaky_relu(conv2d(h2, k2, 2, 1), 0.2);
      auto lg = add_bias(matmul(reshape(h3, {2, 5 * 4 * 4}), wn), bn);
      return softmax_cross_entropy(lg, ln);
    });
  }
  {
    auto z = rand_leaf({2, 6}, rng);
    auto wg = rand_leaf({6, 4 * 2 * 2}, rng);
    auto gg = rand_leaf({4}, rng);
    auto bg = rand_leaf({4}, rng);
    auto kg = rand_leaf({4, 3, 4, 4}, rng);
    auto rmg = DT::zeros({4});
    auto rvg = DT::from({4}, {1, 1, 1, 1});
    push("composed_generator_head", {z, wg, gg, bg, kg}, [&] {
      auto rm2 = rmg.detach();
      auto rv2 = rvg.detach();
      auto hg = relu(batch_norm(reshape(matmul(z, wg), {2, 4, 2, 2}), gg, bg, rm2, rv2, true));
      auto img = tanh_op(conv_transpose2d(hg, kg, 2, 1));
      return mean_all(mul(img, img));
    });
  }
  return out;
}

}  // namespace mvgen

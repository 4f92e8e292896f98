#pragma once

// Central-difference gradient verification, double precision. The callable
// must rebuild its graph from the given leaves on every invocation.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "mvgen/tensor.hpp"

namespace mvgen {

struct GradcheckResult {
  double max_rel_err = 0.0;
  size_t checked = 0;
};

// Relative error uses max(1, |numeric|, |analytic|) as denominator so tiny
// gradients are compared absolutely.
inline GradcheckResult gradcheck(std::vector<TensorT<double>> leaves,
                                 const std::function<TensorT<double>()>& f, double h = 1e-5) {
  for (auto& p : leaves) {
    p.set_requires_grad(true);
    p.zero_grad();
  }
  auto loss = f();
  loss.backward();
  std::vector<std::vector<double>> analytic;
  analytic.reserve(leaves.size());
  for (auto& p : leaves) analytic.push_back(p.grad());

  auto eval = [&]() {
    NoGradGuard g;
    return f().item();
  };
  GradcheckResult r;
  for (size_t pi = 0; pi < leaves.size(); ++pi) {
    auto& v = leaves[pi].value();
    for (size_t i = 0; i < v.size(); ++i) {
      double orig = v[i];
      v[i] = orig + h;
      double lp = eval();
      v[i] = orig - h;
      double lm = eval();
      v[i] = orig;
      double num = (lp - lm) / (2 * h);
      double ana = analytic[pi][i];
      double denom = std::max({1.0, std::fabs(num), std::fabs(ana)});
      r.max_rel_err = std::max(r.max_rel_err, std::fabs(num - ana) / denom);
      ++r.checked;
    }
  }
  return r;
}

struct BatteryEntry {
  std::string name;
  GradcheckResult result;
};

// Checks every differentiable op plus two composed nets (a conv classifier
// and an upsampling generator head) against central differences.
std::vector<BatteryEntry> gradcheck_battery(double h = 1e-5);

}  // namespace mvgen

#include "mvgen/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "mvgen/kernels.hpp"
#include "mvgen/ops.hpp"

namespace mvgen {

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

namespace {

template <typename T>
TensorT<T> make_out(std::vector<int> shape) {
  auto n = std::make_shared<NodeT<T>>();
  n->value.resize(shape_numel(shape));
  n->shape = std::move(shape);
  return TensorT<T>(std::move(n));
}

// Record parents and the backward closure iff grad mode is on and some
// parent actually requires grad.
template <typename T, typename Fn>
void attach(TensorT<T>& out, std::vector<std::shared_ptr<NodeT<T>>> parents, Fn&& fn) {
  if (!g_grad_enabled) return;
  bool any = false;
  for (const auto& p : parents) any = any || p->requires_grad;
  if (!any) return;
  out.node()->requires_grad = true;
  out.node()->parents = std::move(parents);
  out.node()->backward_fn = std::forward<Fn>(fn);
}

template <typename T>
void check_same_shape(const TensorT<T>& a, const TensorT<T>& b, const char* op) {
  if (a.shape() != b.shape()) throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

// Split (N, C, ...) into batch / channels / trailing spatial extent.
template <typename T>
void split_ncs(const TensorT<T>& x, int& n, int& c, int& s) {
  if (x.shape().size() < 2) throw std::invalid_argument("expected tensor with >= 2 dims");
  n = x.dim(0);
  c = x.dim(1);
  s = static_cast<int>(x.numel() / (static_cast<size_t>(n) * c));
}

}  // namespace

template <typename T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) {
  check_same_shape(a, b, "add");
  auto out = make_out<T>(a.shape());
  const auto &av = a.value(), &bv = b.value();
  auto& ov = out.value();
  for (size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] + bv[i];
  auto ap = a.node(), bp = b.node();
  attach(out, {ap, bp}, [ap, bp](const NodeT<T>& self) {
    if (ap->requires_grad) {
      ap->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) ap->grad[i] += self.grad[i];
    }
    if (bp->requires_grad) {
      bp->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) bp->grad[i] += self.grad[i];
    }
  });
  return out;
}

template <typename T>
TensorT<T> sub(const TensorT<T>& a, const TensorT<T>& b) {
  check_same_shape(a, b, "sub");
  auto out = make_out<T>(a.shape());
  const auto &av = a.value(), &bv = b.value();
  auto& ov = out.value();
  for (size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] - bv[i];
  auto ap = a.node(), bp = b.node();
  attach(out, {ap, bp}, [ap, bp](const NodeT<T>& self) {
    if (ap->requires_grad) {
      ap->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) ap->grad[i] += self.grad[i];
    }
    if (bp->requires_grad) {
      bp->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) bp->grad[i] -= self.grad[i];
    }
  });
  return out;
}

template <typename T>
TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b) {
  check_same_shape(a, b, "mul");
  auto out = make_out<T>(a.shape());
  const auto &av = a.value(), &bv = b.value();
  auto& ov = out.value();
  for (size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] * bv[i];
  auto ap = a.node(), bp = b.node();
  attach(out, {ap, bp}, [ap, bp](const NodeT<T>& self) {
    if (ap->requires_grad) {
      ap->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) ap->grad[i] += self.grad[i] * bp->value[i];
    }
    if (bp->requires_grad) {
      bp->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) bp->grad[i] += self.grad[i] * ap->value[i];
    }
  });
  return out;
}

template <typename T>
TensorT<T> scale(const TensorT<T>& a, T s) {
  auto out = make_out<T>(a.shape());
  const auto& av = a.value();
  auto& ov = out.value();
  for (size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] * s;
  auto ap = a.node();
  attach(out, {ap}, [ap, s](const NodeT<T>& self) {
    ap->ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) ap->grad[i] += self.grad[i] * s;
  });
  return out;
}

template <typename T>
TensorT<T> add_scalar(const TensorT<T>& a, T s) {
  auto out = make_out<T>(a.shape());
  const auto& av = a.value();
  auto& ov = out.value();
  for (size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] + s;
  auto ap = a.node();
  attach(out, {ap}, [ap](const NodeT<T>& self) {
    ap->ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) ap->grad[i] += self.grad[i];
  });
  return out;
}

template <typename T>
TensorT<T> add_bias(const TensorT<T>& x, const TensorT<T>& bias) {
  int n, c, s;
  split_ncs(x, n, c, s);
  if (bias.shape() != std::vector<int>{c})
    throw std::invalid_argument("add_bias: bias must be (channels)");
  auto out = make_out<T>(x.shape());
  const auto &xv = x.value(), &bv = bias.value();
  auto& ov = out.value();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < c; ++j) {
      size_t base = (static_cast<size_t>(i) * c + j) * s;
      for (int k = 0; k < s; ++k) ov[base + k] = xv[base + k] + bv[j];
    }
  auto xp = x.node(), bp = bias.node();
  attach(out, {xp, bp}, [xp, bp, n, c, s](const NodeT<T>& self) {
    if (xp->requires_grad) {
      xp->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) xp->grad[i] += self.grad[i];
    }
    if (bp->requires_grad) {
      bp->ensure_grad();
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < c; ++j) {
          size_t base = (static_cast<size_t>(i) * c + j) * s;
          T sum = 0;
          for (int k = 0; k < s; ++k) sum += self.grad[base + k];
          bp->grad[j] += sum;
        }
    }
  });
  return out;
}

template <typename T>
TensorT<T> matmul(const TensorT<T>& x, const TensorT<T>& w) {
  if (x.shape().size() != 2 || w.shape().size() != 2 || x.dim(1) != w.dim(0))
    throw std::invalid_argument("matmul: need (N,K) @ (K,M)");
  int n = x.dim(0), k = x.dim(1), m = w.dim(1);
  auto out = make_out<T>({n, m});
  kern::gemm(x.value().data(), w.value().data(), out.value().data(), n, k, m);
  auto xp = x.node(), wp = w.node();
  attach(out, {xp, wp}, [xp, wp, n, k, m](const NodeT<T>& self) {
    if (xp->requires_grad) {
      xp->ensure_grad();
      kern::gemm_nt(self.grad.data(), wp->value.data(), xp->grad.data(), n, m, k, true);
    }
    if (wp->requires_grad) {
      wp->ensure_grad();
      kern::gemm_tn(xp->value.data(), self.grad.data(), wp->grad.data(), k, n, m, true);
    }
  });
  return out;
}

template <typename T>
TensorT<T> relu(const TensorT<T>& x) {
  auto out = make_out<T>(x.shape());
  const auto& xv = x.value();
  auto& ov = out.value();
  for (size_t i = 0; i < ov.size(); ++i) ov[i] = xv[i] > T(0) ? xv[i] : T(0);
  auto xp = x.node();
  attach(out, {xp}, [xp](const NodeT<T>& self) {
    xp->ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i)
      if (xp->value[i] > T(0)) xp->grad[i] += self.grad[i];
  });
  return out;
}

template <typename T>
TensorT<T> leaky_relu(const TensorT<T>& x, T slope) {
  auto out = make_out<T>(x.shape());
  const auto& xv = x.value();
  auto& ov = out.value();
  for (size_t i = 0; i < ov.size(); ++i) ov[i] = xv[i] > T(0) ? xv[i] : slope * xv[i];
  auto xp = x.node();
  attach(out, {xp}, [xp, slope](const NodeT<T>& self) {
    xp->ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i)
      xp->grad[i] += self.grad[i] * (xp->value[i] > T(0) ? T(1) : slope);
  });
  return out;
}

template <typename T>
TensorT<T> tanh_op(const TensorT<T>& x) {
  auto out = make_out<T>(x.shape());
  const auto& xv = x.value();
  auto& ov = out.value();
  for (size_t i = 0; i < ov.size(); ++i) ov[i] = std::tanh(xv[i]);
  auto xp = x.node();
  attach(out, {xp}, [xp](const NodeT<T>& self) {
    xp->ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i)
      xp->grad[i] += self.grad[i] * (T(1) - self.value[i] * self.value[i]);
  });
  return out;
}

template <typename T>
TensorT<T> sigmoid(const TensorT<T>& x) {
  auto out = make_out<T>(x.shape());
  const auto& xv = x.value();
  auto& ov = out.value();
  for (size_t i = 0; i < ov.size(); ++i) ov[i] = T(1) / (T(1) + std::exp(-xv[i]));
  auto xp = x.node();
  attach(out, {xp}, [xp](const NodeT<T>& self) {
    xp->ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i)
      xp->grad[i] += self.grad[i] * self.value[i] * (T(1) - self.value[i]);
  });
  return out;
}

template <typename T>
TensorT<T> reshape(const TensorT<T>& x, std::vector<int> shape) {
  if (shape_numel(shape) != x.numel()) throw std::invalid_argument("reshape: numel mismatch");
  auto out = make_out<T>(std::move(shape));
  out.value() = x.value();
  auto xp = x.node();
  attach(out, {xp}, [xp](const NodeT<T>& self) {
    xp->ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) xp->grad[i] += self.grad[i];
  });
  return out;
}

template <typename T>
TensorT<T> concat_channels(const TensorT<T>& a, const TensorT<T>& b) {
  int na, ca, sa, nb, cb, sb;
  split_ncs(a, na, ca, sa);
  split_ncs(b, nb, cb, sb);
  if (na != nb || sa != sb || a.shape().size() != b.shape().size())
    throw std::invalid_argument("concat_channels: non-channel dims must match");
  for (size_t i = 2; i < a.shape().size(); ++i)
    if (a.shape()[i] != b.shape()[i])
      throw std::invalid_argument("concat_channels: trailing dims must match");
  std::vector<int> shape = a.shape();
  shape[1] = ca + cb;
  auto out = make_out<T>(shape);
  const auto &av = a.value(), &bv = b.value();
  auto& ov = out.value();
  size_t arow = static_cast<size_t>(ca) * sa, brow = static_cast<size_t>(cb) * sb;
  for (int i = 0; i < na; ++i) {
    std::memcpy(ov.data() + i * (arow + brow), av.data() + i * arow, arow * sizeof(T));
    std::memcpy(ov.data() + i * (arow + brow) + arow, bv.data() + i * brow, brow * sizeof(T));
  }
  auto ap = a.node(), bp = b.node();
  attach(out, {ap, bp}, [ap, bp, na, arow, brow](const NodeT<T>& self) {
    for (int i = 0; i < na; ++i) {
      const T* g = self.grad.data() + i * (arow + brow);
      if (ap->requires_grad) {
        ap->ensure_grad();
        for (size_t j = 0; j < arow; ++j) ap->grad[i * arow + j] += g[j];
      }
      if (bp->requires_grad) {
        bp->ensure_grad();
        for (size_t j = 0; j < brow; ++j) bp->grad[i * brow + j] += g[arow + j];
      }
    }
  });
  return out;
}

template <typename T>
TensorT<T> sum_all(const TensorT<T>& x) {
  auto out = make_out<T>({1});
  T sum = 0;
  for (T v : x.value()) sum += v;
  out.value()[0] = sum;
  auto xp = x.node();
  attach(out, {xp}, [xp](const NodeT<T>& self) {
    xp->ensure_grad();
    for (size_t i = 0; i < xp->grad.size(); ++i) xp->grad[i] += self.grad[0];
  });
  return out;
}

template <typename T>
TensorT<T> mean_all(const TensorT<T>& x) {
  auto out = make_out<T>({1});
  T sum = 0;
  for (T v : x.value()) sum += v;
  T inv = T(1) / static_cast<T>(x.numel());
  out.value()[0] = sum * inv;
  auto xp = x.node();
  attach(out, {xp}, [xp, inv](const NodeT<T>& self) {
    xp->ensure_grad();
    for (size_t i = 0; i < xp->grad.size(); ++i) xp->grad[i] += self.grad[0] * inv;
  });
  return out;
}

template <typename T>
TensorT<T> conv2d(const TensorT<T>& x, const TensorT<T>& kernel, int stride, int pad) {
  if (x.shape().size() != 4 || kernel.shape().size() != 4 || kernel.dim(1) != x.dim(1))
    throw std::invalid_argument("conv2d: need x (N,C,H,W), kernel (O,C,K,K)");
  if (kernel.dim(2) != kernel.dim(3)) throw std::invalid_argument("conv2d: kernel must be square");
  int batch = x.dim(0), out_c = kernel.dim(0), ks = kernel.dim(2);
  ConvDims d = make_conv_dims(x.dim(1), x.dim(2), x.dim(3), ks, stride, pad);
  const int R = d.patch_rows(), P = d.patch_cols();
  auto out = make_out<T>({batch, out_c, d.out_h, d.out_w});
  const size_t x_step = static_cast<size_t>(d.channels) * d.height * d.width;
  const size_t y_step = static_cast<size_t>(out_c) * P;
  {
    std::vector<T> cols(static_cast<size_t>(R) * P);
    for (int n = 0; n < batch; ++n) {
      kern::im2col(x.value().data() + n * x_step, cols.data(), d);
      kern::gemm(kernel.value().data(), cols.data(), out.value().data() + n * y_step, out_c, R, P);
    }
  }
  auto xp = x.node(), kp = kernel.node();
  attach(out, {xp, kp}, [xp, kp, d, batch, out_c, R, P, x_step, y_step](const NodeT<T>& self) {
    std::vector<T> cols(static_cast<size_t>(R) * P);
    if (kp->requires_grad) {
      kp->ensure_grad();
      // dW += dy_n @ im2col(x_n)^T, accumulated in batch order.
      for (int n = 0; n < batch; ++n) {
        kern::im2col(xp->value.data() + n * x_step, cols.data(), d);
        kern::gemm_nt(self.grad.data() + n * y_step, cols.data(), kp->grad.data(), out_c, P, R,
                      true);
      }
    }
    if (xp->requires_grad) {
      xp->ensure_grad();
      // dx_n += col2im(W^T @ dy_n)
      std::vector<T> img(x_step);
      for (int n = 0; n < batch; ++n) {
        kern::gemm_tn(kp->value.data(), self.grad.data() + n * y_step, cols.data(), R, out_c, P);
        kern::col2im(cols.data(), img.data(), d);
        T* dst = xp->grad.data() + n * x_step;
        for (size_t i = 0; i < x_step; ++i) dst[i] += img[i];
      }
    }
  });
  return out;
}

template <typename T>
TensorT<T> conv_transpose2d(const TensorT<T>& x, const TensorT<T>& kernel, int stride, int pad) {
  if (x.shape().size() != 4 || kernel.shape().size() != 4 || kernel.dim(0) != x.dim(1))
    throw std::invalid_argument("conv_transpose2d: need x (N,C,H,W), kernel (C,O,K,K)");
  if (kernel.dim(2) != kernel.dim(3))
    throw std::invalid_argument("conv_transpose2d: kernel must be square");
  int batch = x.dim(0), in_c = x.dim(1), out_c = kernel.dim(1), ks = kernel.dim(2);
  int out_h = (x.dim(2) - 1) * stride - 2 * pad + ks;
  int out_w = (x.dim(3) - 1) * stride - 2 * pad + ks;
  if (out_h <= 0 || out_w <= 0) throw std::invalid_argument("conv_transpose2d: empty output");
  ConvDims d = make_conv_dims(out_c, out_h, out_w, ks, stride, pad);
  if (d.out_h != x.dim(2) || d.out_w != x.dim(3))
    throw std::logic_error("conv_transpose2d: dims do not invert");
  const int R = d.patch_rows(), P = d.patch_cols();  // R = out_c*k*k, P = in spatial
  auto out = make_out<T>({batch, out_c, out_h, out_w});
  const size_t x_step = static_cast<size_t>(in_c) * P;
  const size_t y_step = static_cast<size_t>(out_c) * out_h * out_w;
  {
    std::vector<T> cols(static_cast<size_t>(R) * P);
    for (int n = 0; n < batch; ++n) {
      // cols = k^T @ x_n, then scatter patches back onto the (larger) output.
      kern::gemm_tn(kernel.value().data(), x.value().data() + n * x_step, cols.data(), R, in_c, P);
      kern::col2im(cols.data(), out.value().data() + n * y_step, d);
    }
  }
  auto xp = x.node(), kp = kernel.node();
  attach(out, {xp, kp}, [xp, kp, d, batch, in_c, R, P, x_step, y_step](const NodeT<T>& self) {
    std::vector<T> cols(static_cast<size_t>(R) * P);
    if (kp->requires_grad) {
      kp->ensure_grad();
      for (int n = 0; n < batch; ++n) {
        kern::im2col(self.grad.data() + n * y_step, cols.data(), d);
        kern::gemm_nt(xp->value.data() + n * x_step, cols.data(), kp->grad.data(), in_c, P, R,
                      true);
      }
    }
    if (xp->requires_grad) {
      xp->ensure_grad();
      for (int n = 0; n < batch; ++n) {
        kern::im2col(self.grad.data() + n * y_step, cols.data(), d);
        kern::gemm(kp->value.data(), cols.data(), xp->grad.data() + n * x_step, in_c, R, P, true);
      }
    }
  });
  return out;
}

template <typename T>
TensorT<T> batch_norm(const TensorT<T>& x, const TensorT<T>& gamma, const TensorT<T>& beta,
                      TensorT<T>& running_mean, TensorT<T>& running_var, bool training, T momentum,
                      T eps) {
  int n, c, s;
  split_ncs(x, n, c, s);
  if (gamma.numel() != static_cast<size_t>(c) || beta.numel() != static_cast<size_t>(c) ||
      running_mean.numel() != static_cast<size_t>(c) || running_var.numel() != static_cast<size_t>(c))
    throw std::invalid_argument("batch_norm: per-channel params must be (C)");
  const T m_count = static_cast<T>(n) * static_cast<T>(s);
  std::vector<T> mu(c), invstd(c);
  const auto& xv = x.value();
  if (training) {
    if (n * s < 2) throw std::invalid_argument("batch_norm: training needs >= 2 samples per channel");
    for (int j = 0; j < c; ++j) {
      T sum = 0;
      for (int i = 0; i < n; ++i) {
        const T* p = xv.data() + (static_cast<size_t>(i) * c + j) * s;
        for (int k = 0; k < s; ++k) sum += p[k];
      }
      mu[j] = sum / m_count;
      T var = 0;
      for (int i = 0; i < n; ++i) {
        const T* p = xv.data() + (static_cast<size_t>(i) * c + j) * s;
        for (int k = 0; k < s; ++k) {
          T dlt = p[k] - mu[j];
          var += dlt * dlt;
        }
      }
      var /= m_count;
      invstd[j] = T(1) / std::sqrt(var + eps);
      running_mean.value()[j] = (T(1) - momentum) * running_mean.value()[j] + momentum * mu[j];
      running_var.value()[j] = (T(1) - momentum) * running_var.value()[j] +
                               momentum * var * m_count / (m_count - T(1));
    }
  } else {
    for (int j = 0; j < c; ++j) {
      mu[j] = running_mean.value()[j];
      invstd[j] = T(1) / std::sqrt(running_var.value()[j] + eps);
    }
  }
  auto out = make_out<T>(x.shape());
  auto& ov = out.value();
  const auto &gv = gamma.value(), &bv = beta.value();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < c; ++j) {
      size_t base = (static_cast<size_t>(i) * c + j) * s;
      for (int k = 0; k < s; ++k) ov[base + k] = gv[j] * (xv[base + k] - mu[j]) * invstd[j] + bv[j];
    }
  auto xp = x.node(), gp = gamma.node(), bp = beta.node();
  attach(out, {xp, gp, bp},
         [xp, gp, bp, n, c, s, m_count, training, mu = std::move(mu),
          invstd = std::move(invstd)](const NodeT<T>& self) {
           for (int j = 0; j < c; ++j) {
             T sum_dy = 0, sum_dy_xhat = 0;
             for (int i = 0; i < n; ++i) {
               size_t base = (static_cast<size_t>(i) * c + j) * s;
               for (int k = 0; k < s; ++k) {
                 T dy = self.grad[base + k];
                 sum_dy += dy;
                 sum_dy_xhat += dy * (xp->value[base + k] - mu[j]) * invstd[j];
               }
             }
             if (gp->requires_grad) {
               gp->ensure_grad();
               gp->grad[j] += sum_dy_xhat;
             }
             if (bp->requires_grad) {
               bp->ensure_grad();
               bp->grad[j] += sum_dy;
             }
             if (xp->requires_grad) {
               xp->ensure_grad();
               T g = gp->value[j];
               for (int i = 0; i < n; ++i) {
                 size_t base = (static_cast<size_t>(i) * c + j) * s;
                 for (int k = 0; k < s; ++k) {
                   T dy = self.grad[base + k];
                   if (training) {
                     T xhat = (xp->value[base + k] - mu[j]) * invstd[j];
                     xp->grad[base + k] +=
                         g * invstd[j] * (dy - sum_dy / m_count - xhat * sum_dy_xhat / m_count);
                   } else {
                     xp->grad[base + k] += g * invstd[j] * dy;
                   }
                 }
               }
             }
           }
         });
  return out;
}

namespace {
template <typename T>
constexpr T kBceEps = T(1e-7);
}

template <typename T>
TensorT<T> bce_loss(const TensorT<T>& pred, T target) {
  auto out = make_out<T>({1});
  const auto& pv = pred.value();
  const T lo = kBceEps<T>, hi = T(1) - kBceEps<T>;
  T sum = 0;
  for (T p : pv) {
    T pc = std::min(hi, std::max(lo, p));
    sum += -(target * std::log(pc) + (T(1) - target) * std::log(T(1) - pc));
  }
  T inv = T(1) / static_cast<T>(pv.size());
  out.value()[0] = sum * inv;
  auto pp = pred.node();
  attach(out, {pp}, [pp, target, inv, lo, hi](const NodeT<T>& self) {
    pp->ensure_grad();
    for (size_t i = 0; i < pp->value.size(); ++i) {
      T p = pp->value[i];
      if (p <= lo || p >= hi) continue;  // clamp region: zero slope
      pp->grad[i] += self.grad[0] * inv * (-(target / p) + (T(1) - target) / (T(1) - p));
    }
  });
  return out;
}

template <typename T>
TensorT<T> bce_loss(const TensorT<T>& pred, const TensorT<T>& target) {
  check_same_shape(pred, target, "bce_loss");
  auto out = make_out<T>({1});
  const auto &pv = pred.value(), &tv = target.value();
  const T lo = kBceEps<T>, hi = T(1) - kBceEps<T>;
  T sum = 0;
  for (size_t i = 0; i < pv.size(); ++i) {
    T pc = std::min(hi, std::max(lo, pv[i]));
    sum += -(tv[i] * std::log(pc) + (T(1) - tv[i]) * std::log(T(1) - pc));
  }
  T inv = T(1) / static_cast<T>(pv.size());
  out.value()[0] = sum * inv;
  auto pp = pred.node(), tp = target.node();
  attach(out, {pp}, [pp, tp, inv, lo, hi](const NodeT<T>& self) {
    pp->ensure_grad();
    for (size_t i = 0; i < pp->value.size(); ++i) {
      T p = pp->value[i], t = tp->value[i];
      if (p <= lo || p >= hi) continue;
      pp->grad[i] += self.grad[0] * inv * (-(t / p) + (T(1) - t) / (T(1) - p));
    }
  });
  return out;
}

template <typename T>
TensorT<T> softmax_cross_entropy(const TensorT<T>& logits, const std::vector<int>& labels) {
  if (logits.shape().size() != 2 || static_cast<size_t>(logits.dim(0)) != labels.size())
    throw std::invalid_argument("softmax_cross_entropy: logits (N,K), labels (N)");
  int n = logits.dim(0), k = logits.dim(1);
  for (int lbl : labels)
    if (lbl < 0 || lbl >= k) throw std::invalid_argument("softmax_cross_entropy: label out of range");
  auto out = make_out<T>({1});
  const auto& lv = logits.value();
  T sum = 0;
  for (int i = 0; i < n; ++i) {
    const T* row = lv.data() + static_cast<size_t>(i) * k;
    T mx = row[0];
    for (int j = 1; j < k; ++j) mx = std::max(mx, row[j]);
    T lse = 0;
    for (int j = 0; j < k; ++j) lse += std::exp(row[j] - mx);
    lse = mx + std::log(lse);
    sum += lse - row[labels[i]];
  }
  T inv = T(1) / static_cast<T>(n);
  out.value()[0] = sum * inv;
  auto lp = logits.node();
  attach(out, {lp}, [lp, labels, n, k, inv](const NodeT<T>& self) {
    lp->ensure_grad();
    for (int i = 0; i < n; ++i) {
      const T* row = lp->value.data() + static_cast<size_t>(i) * k;
      T* grow = lp->grad.data() + static_cast<size_t>(i) * k;
      T mx = row[0];
      for (int j = 1; j < k; ++j) mx = std::max(mx, row[j]);
      T z = 0;
      for (int j = 0; j < k; ++j) z += std::exp(row[j] - mx);
      for (int j = 0; j < k; ++j) {
        T soft = std::exp(row[j] - mx) / z;
        grow[j] += self.grad[0] * inv * (soft - (j == labels[i] ? T(1) : T(0)));
      }
    }
  });
  return out;
}

template <typename T>
std::vector<int> argmax_rows(const TensorT<T>& logits) {
  if (logits.shape().size() != 2) throw std::invalid_argument("argmax_rows: need (N,K)");
  int n = logits.dim(0), k = logits.dim(1);
  std::vector<int> out(n);
  for (int i = 0; i < n; ++i) {
    const T* row = logits.value().data() + static_cast<size_t>(i) * k;
    out[i] = static_cast<int>(std::max_element(row, row + k) - row);
  }
  return out;
}

#define MVGEN_INSTANTIATE_OPS(T)                                                                  \
  template TensorT<T> add(const TensorT<T>&, const TensorT<T>&);                                  \
  template TensorT<T> sub(const TensorT<T>&, const TensorT<T>&);                                  \
  template TensorT<T> mul(const TensorT<T>&, const TensorT<T>&);                                  \
  template TensorT<T> scale(const TensorT<T>&, T);                                                \
  template TensorT<T> add_scalar(const TensorT<T>&, T);                                           \
  template TensorT<T> add_bias(const TensorT<T>&, const TensorT<T>&);                             \
  template TensorT<T> matmul(const TensorT<T>&, const TensorT<T>&);                               \
  template TensorT<T> relu(const TensorT<T>&);                                                    \
  template TensorT<T> leaky_relu(const TensorT<T>&, T);                                           \
  template TensorT<T> tanh_op(const TensorT<T>&);                                                 \
  template TensorT<T> sigmoid(const TensorT<T>&);                                                 \
  template TensorT<T> reshape(const TensorT<T>&, std::vector<int>);                               \
  template TensorT<T> concat_channels(const TensorT<T>&, const TensorT<T>&);                      \
  template TensorT<T> sum_all(const TensorT<T>&);                                                 \
  template TensorT<T> mean_all(const TensorT<T>&);                                                \
  template TensorT<T> conv2d(const TensorT<T>&, const TensorT<T>&, int, int);                     \
  template TensorT<T> conv_transpose2d(const TensorT<T>&, const TensorT<T>&, int, int);           \
  template TensorT<T> batch_norm(const TensorT<T>&, const TensorT<T>&, const TensorT<T>&,         \
                                 TensorT<T>&, TensorT<T>&, bool, T, T);                           \
  template TensorT<T> bce_loss(const TensorT<T>&, T);                                             \
  template TensorT<T> bce_loss(const TensorT<T>&, const TensorT<T>&);                             \
  template TensorT<T> softmax_cross_entropy(const TensorT<T>&, const std::vector<int>&);          \
  template std::vector<int> argmax_rows(const TensorT<T>&);

MVGEN_INSTANTIATE_OPS(float)
MVGEN_INSTANTIATE_OPS(double)

}  // namespace mvgen

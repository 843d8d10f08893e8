#include "climdown/tensor/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include "climdown/error.hpp"
#include "climdown/kernels/conv.hpp"
#include "climdown/kernels/matmul.hpp"

namespace climdown::tensor {
namespace {

// Neumaier summation: scalar losses are differenced by the gradient checker, so their
// rounding noise matters more than a few extra flops.
struct CompensatedSum {
  double sum = 0.0, c = 0.0;
  void add(double v) {
    const double t = sum + v;
    c += std::fabs(sum) >= std::fabs(v) ? (sum - t) + v : (v - t) + sum;
    sum = t;
  }
  double value() const { return sum + c; }
};

std::size_t norm_axis(int axis, std::size_t rank) {
  const int r = static_cast<int>(rank);
  const int k = axis < 0 ? r + axis : axis;
  if (k < 0 || k >= r) throw ValidationError("axis " + std::to_string(axis) + " out of range");
  return static_cast<std::size_t>(k);
}

struct AxisSplit {
  std::size_t outer = 1, len = 1, inner = 1;
};

AxisSplit split_at(const Shape& s, std::size_t axis) {
  AxisSplit a;
  for (std::size_t i = 0; i < axis; ++i) a.outer *= s[i];
  a.len = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) a.inner *= s[i];
  return a;
}

void require_suffix(const char* op, const Shape& a, const Shape& b) {
  bool ok = b.size() <= a.size();
  for (std::size_t i = 0; ok && i < b.size(); ++i) ok = a[a.size() - b.size() + i] == b[i];
  if (!ok) {
    throw ValidationError(std::string(op) + ": shape " + shape_str(b) +
                          " does not broadcast to " + shape_str(a));
  }
}

void require_same(const char* op, const Shape& a, const Shape& b) {
  if (a != b) {
    throw ValidationError(std::string(op) + ": shapes " + shape_str(a) + " and " + shape_str(b) +
                          " differ");
  }
}

std::span<const double> maybe(const Tensor& t) {
  return t.defined() ? t.data() : std::span<const double>{};
}

template <class F, class D>
Tensor unary(const char* name, const Tensor& x, F f, D dydx) {
  std::vector<double> y(x.size());
  const auto xv = x.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = f(xv[i]);
  return make_op(name, x.shape(), std::move(y), {x}, [dydx](const Node& o, std::vector<Tensor>& in) {
    auto gx = in[0].mutable_grad();
    const auto xv = in[0].data();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += o.grad[i] * dydx(xv[i], o.value[i]);
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_suffix("add", a.shape(), b.shape());
  const std::size_t nb = b.size();
  std::vector<double> y(a.data().begin(), a.data().end());
  const auto bv = b.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[i % nb];
  return make_op("add", a.shape(), std::move(y), {a, b}, [nb](const Node& o, std::vector<Tensor>& in) {
    if (in[0].requires_grad()) {
      auto ga = in[0].mutable_grad();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += o.grad[i];
    }
    if (in[1].requires_grad()) {
      auto gb = in[1].mutable_grad();
      for (std::size_t i = 0; i < o.grad.size(); ++i) gb[i % nb] += o.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same("sub", a.shape(), b.shape());
  std::vector<double> y(a.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[i] - b[i];
  return make_op("sub", a.shape(), std::move(y), {a, b}, [](const Node& o, std::vector<Tensor>& in) {
    if (in[0].requires_grad()) {
      auto ga = in[0].mutable_grad();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += o.grad[i];
    }
    if (in[1].requires_grad()) {
      auto gb = in[1].mutable_grad();
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= o.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_suffix("mul", a.shape(), b.shape());
  const std::size_t nb = b.size();
  std::vector<double> y(a.size());
  const auto av = a.data();
  const auto bv = b.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] * bv[i % nb];
  return make_op("mul", a.shape(), std::move(y), {a, b}, [nb](const Node& o, std::vector<Tensor>& in) {
    const auto av = in[0].data();
    const auto bv = in[1].data();
    if (in[0].requires_grad()) {
      auto ga = in[0].mutable_grad();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += o.grad[i] * bv[i % nb];
    }
    if (in[1].requires_grad()) {
      auto gb = in[1].mutable_grad();
      for (std::size_t i = 0; i < o.grad.size(); ++i) gb[i % nb] += o.grad[i] * av[i];
    }
  });
}

Tensor scale(const Tensor& a, double s) {
  return unary("scale", a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary("add_scalar", a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ValidationError("matmul: cannot multiply " + shape_str(a.shape()) + " by " +
                          shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> y(m * n, 0.0);
  kernels::matmul_nn(m, n, k, a.data(), b.data(), y);
  return make_op("matmul", {m, n}, std::move(y), {a, b},
                 [m, n, k](const Node& o, std::vector<Tensor>& in) {
                   if (in[0].requires_grad())
                     kernels::matmul_nt(m, k, n, o.grad, in[1].data(), in[0].mutable_grad());
                   if (in[1].requires_grad())
                     kernels::matmul_tn(k, n, m, in[0].data(), o.grad, in[1].mutable_grad());
                 });
}

Tensor bmm(const Tensor& a, const Tensor& b, bool transpose_b) {
  const bool ok = a.rank() == 3 && b.rank() == 3 && a.dim(0) == b.dim(0) &&
                  a.dim(2) == (transpose_b ? b.dim(2) : b.dim(1));
  if (!ok) {
    throw ValidationError("bmm: cannot multiply " + shape_str(a.shape()) + " by " +
                          shape_str(b.shape()) + (transpose_b ? "^T" : ""));
  }
  const std::size_t nb = a.dim(0), m = a.dim(1), k = a.dim(2);
  const std::size_t n = transpose_b ? b.dim(1) : b.dim(2);
  std::vector<double> y(nb * m * n, 0.0);
  const auto av = a.data();
  const auto bv = b.data();
  for (std::size_t t = 0; t < nb; ++t) {
    const auto at = av.subspan(t * m * k, m * k);
    const auto bt = bv.subspan(t * k * n, k * n);
    const auto yt = std::span<double>(y).subspan(t * m * n, m * n);
    if (transpose_b) {
      kernels::matmul_nt(m, n, k, at, bt, yt);
    } else {
      kernels::matmul_nn(m, n, k, at, bt, yt);
    }
  }
  return make_op(
      "bmm", {nb, m, n}, std::move(y), {a, b},
      [nb, m, n, k, transpose_b](const Node& o, std::vector<Tensor>& in) {
        const auto g = std::span<const double>(o.grad);
        const auto av = in[0].data();
        const auto bv = in[1].data();
        for (std::size_t t = 0; t < nb; ++t) {
          const auto gt = g.subspan(t * m * n, m * n);
          if (in[0].requires_grad()) {
            auto ga = in[0].mutable_grad().subspan(t * m * k, m * k);
            const auto bt = bv.subspan(t * k * n, k * n);
            if (transpose_b) {
              kernels::matmul_nn(m, k, n, gt, bt, ga);
            } else {
              kernels::matmul_nt(m, k, n, gt, bt, ga);
            }
          }
          if (in[1].requires_grad()) {
            auto gb = in[1].mutable_grad().subspan(t * k * n, k * n);
            const auto at = av.subspan(t * m * k, m * k);
            if (transpose_b) {
              kernels::matmul_tn(n, k, m, gt, at, gb);
            } else {
              kernels::matmul_tn(k, n, m, at, gt, gb);
            }
          }
        }
      });
}

Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.rank() < 1 || w.rank() != 2 || x.dim(-1) != w.dim(0) ||
      (b.defined() && (b.rank() != 1 || b.dim(0) != w.dim(1)))) {
    throw ValidationError("dense: incompatible shapes x" + shape_str(x.shape()) + " W" +
                          shape_str(w.shape()) + (b.defined() ? " b" + shape_str(b.shape()) : ""));
  }
  const std::size_t din = w.dim(0), dout = w.dim(1), rows = x.size() / din;
  std::vector<double> y(rows * dout, 0.0);
  if (b.defined()) {
    for (std::size_t r = 0; r < rows; ++r) std::copy(b.data().begin(), b.data().end(), y.begin() + r * dout);
  }
  kernels::matmul_nn(rows, dout, din, x.data(), w.data(), y);
  Shape shape = x.shape();
  shape.back() = dout;
  std::vector<Tensor> ins{x, w};
  if (b.defined()) ins.push_back(b);
  return make_op("dense", std::move(shape), std::move(y), std::move(ins),
                 [rows, din, dout](const Node& o, std::vector<Tensor>& in) {
                   if (in[0].requires_grad())
                     kernels::matmul_nt(rows, din, dout, o.grad, in[1].data(), in[0].mutable_grad());
                   if (in[1].requires_grad())
                     kernels::matmul_tn(din, dout, rows, in[0].data(), o.grad, in[1].mutable_grad());
                   if (in.size() > 2 && in[2].requires_grad()) {
                     auto gb = in[2].mutable_grad();
                     for (std::size_t r = 0; r < rows; ++r)
                       for (std::size_t j = 0; j < dout; ++j) gb[j] += o.grad[r * dout + j];
                   }
                 });
}

Tensor relu(const Tensor& x) {
  KinkRecorder::record(x.data());
  return unary("relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
               [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      "sigmoid", x,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& x) {
  return unary("tanh", x, [](double v) { return std::tanh(v); },
               [](double, double y) { return 1.0 - y * y; });
}

Tensor softmax(const Tensor& x, int axis) {
  const auto ax = norm_axis(axis, x.rank());
  const auto s = split_at(x.shape(), ax);
  std::vector<double> y(x.size());
  const auto xv = x.data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.len * s.inner + i;
      double mx = xv[base];
      for (std::size_t j = 1; j < s.len; ++j) mx = std::max(mx, xv[base + j * s.inner]);
      double sum = 0.0;
      for (std::size_t j = 0; j < s.len; ++j) {
        const double e = std::exp(xv[base + j * s.inner] - mx);
        y[base + j * s.inner] = e;
        sum += e;
      }
      for (std::size_t j = 0; j < s.len; ++j) y[base + j * s.inner] /= sum;
    }
  }
  return make_op("softmax", x.shape(), std::move(y), {x}, [s](const Node& o, std::vector<Tensor>& in) {
    auto gx = in[0].mutable_grad();
    for (std::size_t a = 0; a < s.outer; ++a) {
      for (std::size_t i = 0; i < s.inner; ++i) {
        const std::size_t base = a * s.len * s.inner + i;
        double dot = 0.0;
        for (std::size_t j = 0; j < s.len; ++j) {
          const std::size_t p = base + j * s.inner;
          dot += o.grad[p] * o.value[p];
        }
        for (std::size_t j = 0; j < s.len; ++j) {
          const std::size_t p = base + j * s.inner;
          gx[p] += o.value[p] * (o.grad[p] - dot);
        }
      }
    }
  });
}

Tensor conv2d(const Tensor& x, const Tensor& k, const Tensor& b, std::size_t stride,
              Padding padding) {
  if (x.rank() != 4 || k.rank() != 4 || k.dim(1) != x.dim(1) || k.dim(2) != k.dim(3) ||
      stride == 0 || (b.defined() && (b.rank() != 1 || b.dim(0) != k.dim(0)))) {
    throw ValidationError("conv2d: incompatible shapes x" + shape_str(x.shape()) + " K" +
                          shape_str(k.shape()));
  }
  kernels::ConvGeom g;
  g.n = x.dim(0);
  g.c_in = x.dim(1);
  g.h = x.dim(2);
  g.w = x.dim(3);
  g.c_out = k.dim(0);
  g.k = k.dim(2);
  g.stride = stride;
  if (padding == Padding::kSame) {
    if (g.k % 2 == 0) throw ValidationError("conv2d: same padding needs an odd kernel");
    g.pad = g.k / 2;
  }
  if (g.h + 2 * g.pad < g.k || g.w + 2 * g.pad < g.k) {
    throw ValidationError("conv2d: kernel " + std::to_string(g.k) + " larger than padded input");
  }
  std::vector<double> y(g.out_size());
  kernels::conv2d_forward(g, x.data(), k.data(), maybe(b), y);
  std::vector<Tensor> ins{x, k};
  if (b.defined()) ins.push_back(b);
  return make_op("conv2d", {g.n, g.c_out, g.h_out(), g.w_out()}, std::move(y), std::move(ins),
                 [g](const Node& o, std::vector<Tensor>& in) {
                   if (in[0].requires_grad())
                     kernels::conv2d_backward_input(g, o.grad, in[1].data(), in[0].mutable_grad());
                   const bool bias_grad = in.size() > 2 && in[2].requires_grad();
                   if (in[1].requires_grad() || bias_grad) {
                     std::vector<double> scratch;
                     std::span<double> dk;
                     if (in[1].requires_grad()) {
                       dk = in[1].mutable_grad();
                     } else {
                       scratch.assign(in[1].size(), 0.0);
                       dk = scratch;
                     }
                     kernels::conv2d_backward_weight(g, in[0].data(), o.grad, dk,
                                                     bias_grad ? in[2].mutable_grad()
                                                               : std::span<double>{});
                   }
                 });
}

Tensor conv2d_transpose(const Tensor& x, const Tensor& k, const Tensor& b, std::size_t stride) {
  if (x.rank() != 4 || k.rank() != 4 || k.dim(0) != x.dim(1) || k.dim(2) != k.dim(3) ||
      stride == 0 || (b.defined() && (b.rank() != 1 || b.dim(0) != k.dim(1)))) {
    throw ValidationError("conv2d_transpose: incompatible shapes x" + shape_str(x.shape()) +
                          " K" + shape_str(k.shape()));
  }
  // The forward map is the input-gradient of a conv2d from the output grid back to x.
  kernels::ConvGeom g;
  g.n = x.dim(0);
  g.c_out = x.dim(1);
  g.c_in = k.dim(1);
  g.k = k.dim(2);
  g.stride = stride;
  g.h = (x.dim(2) - 1) * stride + g.k;
  g.w = (x.dim(3) - 1) * stride + g.k;
  const std::size_t plane = g.h * g.w;
  std::vector<double> y(g.in_size(), 0.0);
  kernels::conv2d_backward_input(g, x.data(), k.data(), y);
  if (b.defined()) {
    for (std::size_t n = 0; n < g.n; ++n)
      for (std::size_t c = 0; c < g.c_in; ++c)
        for (std::size_t p = 0; p < plane; ++p) y[(n * g.c_in + c) * plane + p] += b[c];
  }
  std::vector<Tensor> ins{x, k};
  if (b.defined()) ins.push_back(b);
  return make_op("conv2d_transpose", {g.n, g.c_in, g.h, g.w}, std::move(y), std::move(ins),
                 [g, plane](const Node& o, std::vector<Tensor>& in) {
                   if (in[0].requires_grad()) {
                     std::vector<double> tmp(g.out_size());
                     kernels::conv2d_forward(g, o.grad, in[1].data(), {}, tmp);
                     auto gx = in[0].mutable_grad();
                     for (std::size_t i = 0; i < tmp.size(); ++i) gx[i] += tmp[i];
                   }
                   if (in[1].requires_grad())
                     kernels::conv2d_backward_weight(g, o.grad, in[0].data(), in[1].mutable_grad(), {});
                   if (in.size() > 2 && in[2].requires_grad()) {
                     auto gb = in[2].mutable_grad();
                     for (std::size_t n = 0; n < g.n; ++n)
                       for (std::size_t c = 0; c < g.c_in; ++c)
                         for (std::size_t p = 0; p < plane; ++p)
                           gb[c] += o.grad[(n * g.c_in + c) * plane + p];
                   }
                 });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel(shape) != x.size()) {
    throw ValidationError("reshape: " + shape_str(x.shape()) + " to " + shape_str(shape));
  }
  std::vector<double> y(x.data().begin(), x.data().end());
  return make_op("reshape", std::move(shape), std::move(y), {x}, [](const Node& o, std::vector<Tensor>& in) {
    auto gx = in[0].mutable_grad();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += o.grad[i];
  });
}

Tensor permute(const Tensor& x, const std::vector<std::size_t>& perm) {
  const std::size_t r = x.rank();
  std::vector<bool> used(r, false);
  bool ok = perm.size() == r;
  for (std::size_t i = 0; ok && i < r; ++i) {
    ok = perm[i] < r && !used[perm[i]];
    if (ok) used[perm[i]] = true;
  }
  if (!ok) throw ValidationError("permute: invalid axis order for rank " + std::to_string(r));
  std::vector<std::size_t> in_stride(r, 1);
  for (std::size_t i = r; i-- > 1;) in_stride[i - 1] = in_stride[i] * x.shape()[i];
  Shape out_shape(r);
  for (std::size_t i = 0; i < r; ++i) out_shape[i] = x.shape()[perm[i]];

  auto src = std::make_shared<std::vector<std::size_t>>(x.size());
  std::vector<std::size_t> idx(r, 0);
  for (std::size_t o = 0; o < x.size(); ++o) {
    std::size_t off = 0;
    for (std::size_t i = 0; i < r; ++i) off += idx[i] * in_stride[perm[i]];
    (*src)[o] = off;
    for (std::size_t i = r; i-- > 0;) {
      if (++idx[i] < out_shape[i]) break;
      idx[i] = 0;
    }
  }
  std::vector<double> y(x.size());
  for (std::size_t o = 0; o < y.size(); ++o) y[o] = x[(*src)[o]];
  return make_op("permute", std::move(out_shape), std::move(y), {x},
                 [src](const Node& o, std::vector<Tensor>& in) {
                   auto gx = in[0].mutable_grad();
                   for (std::size_t i = 0; i < o.grad.size(); ++i) gx[(*src)[i]] += o.grad[i];
                 });
}

Tensor slice(const Tensor& x, int axis, std::size_t start, std::size_t len) {
  const auto ax = norm_axis(axis, x.rank());
  if (len == 0 || start + len > x.shape()[ax]) {
    throw ValidationError("slice: [" + std::to_string(start) + ", " + std::to_string(start + len) +
                          ") outside axis of length " + std::to_string(x.shape()[ax]));
  }
  const auto s = split_at(x.shape(), ax);
  Shape shape = x.shape();
  shape[ax] = len;
  std::vector<double> y(s.outer * len * s.inner);
  const auto xv = x.data();
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(xv.begin() + (o * s.len + start) * s.inner, len * s.inner,
                y.begin() + o * len * s.inner);
  }
  return make_op("slice", std::move(shape), std::move(y), {x},
                 [s, start, len](const Node& o, std::vector<Tensor>& in) {
                   auto gx = in[0].mutable_grad();
                   for (std::size_t a = 0; a < s.outer; ++a) {
                     const std::size_t src = a * len * s.inner;
                     const std::size_t dst = (a * s.len + start) * s.inner;
                     for (std::size_t i = 0; i < len * s.inner; ++i) gx[dst + i] += o.grad[src + i];
                   }
                 });
}

Tensor concat(const std::vector<Tensor>& xs, int axis) {
  if (xs.empty()) throw ValidationError("concat: no inputs");
  const auto ax = norm_axis(axis, xs[0].rank());
  Shape shape = xs[0].shape();
  std::size_t total = 0;
  for (const auto& t : xs) {
    Shape a = t.shape(), b = xs[0].shape();
    if (a.size() != b.size()) throw ValidationError("concat: rank mismatch");
    a[ax] = b[ax] = 0;
    if (a != b) throw ValidationError("concat: shapes differ off the concat axis");
    total += t.shape()[ax];
  }
  shape[ax] = total;
  const auto s = split_at(shape, ax);
  std::vector<double> y(numel(shape));
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& t : xs) {
    offsets.push_back(off);
    const std::size_t len = t.shape()[ax];
    for (std::size_t o = 0; o < s.outer; ++o) {
      std::copy_n(t.data().begin() + o * len * s.inner, len * s.inner,
                  y.begin() + (o * total + off) * s.inner);
    }
    off += len;
  }
  return make_op("concat", std::move(shape), std::move(y), xs,
                 [s, ax, offsets, total](const Node& o, std::vector<Tensor>& in) {
                   for (std::size_t k = 0; k < in.size(); ++k) {
                     if (!in[k].requires_grad()) continue;
                     const std::size_t len = in[k].shape()[ax];
                     auto g = in[k].mutable_grad();
                     for (std::size_t a = 0; a < s.outer; ++a)
                       for (std::size_t i = 0; i < len * s.inner; ++i)
                         g[a * len * s.inner + i] += o.grad[(a * total + offsets[k]) * s.inner + i];
                   }
                 });
}

Tensor mean_axis(const Tensor& x, int axis) {
  const auto ax = norm_axis(axis, x.rank());
  const auto s = split_at(x.shape(), ax);
  Shape shape = x.shape();
  shape.erase(shape.begin() + static_cast<std::ptrdiff_t>(ax));
  std::vector<double> y(s.outer * s.inner, 0.0);
  const auto xv = x.data();
  const double inv = 1.0 / static_cast<double>(s.len);
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t j = 0; j < s.len; ++j)
      for (std::size_t i = 0; i < s.inner; ++i)
        y[o * s.inner + i] += xv[(o * s.len + j) * s.inner + i];
  for (double& v : y) v *= inv;
  return make_op("mean_axis", std::move(shape), std::move(y), {x},
                 [s, inv](const Node& o, std::vector<Tensor>& in) {
                   auto gx = in[0].mutable_grad();
                   for (std::size_t a = 0; a < s.outer; ++a)
                     for (std::size_t j = 0; j < s.len; ++j)
                       for (std::size_t i = 0; i < s.inner; ++i)
                         gx[(a * s.len + j) * s.inner + i] += o.grad[a * s.inner + i] * inv;
                 });
}

Tensor sum_all(const Tensor& x) {
  CompensatedSum acc;
  for (double v : x.data()) acc.add(v);
  return make_op("sum_all", {}, {acc.value()}, {x}, [](const Node& o, std::vector<Tensor>& in) {
    for (double& g : in[0].mutable_grad()) g += o.grad[0];
  });
}

Tensor mean_all(const Tensor& x) {
  return scale(sum_all(x), 1.0 / static_cast<double>(x.size()));
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  const std::size_t d = x.dim(-1);
  if (gamma.shape() != Shape{d} || beta.shape() != Shape{d}) {
    throw ValidationError("layer_norm: gamma/beta must have shape [" + std::to_string(d) + "]");
  }
  const std::size_t rows = x.size() / d;
  auto xhat = std::make_shared<std::vector<double>>(x.size());
  auto inv = std::make_shared<std::vector<double>>(rows);
  std::vector<double> y(x.size());
  const auto xv = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += xv[r * d + j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double c = xv[r * d + j] - mu;
      var += c * c;
    }
    var /= static_cast<double>(d);
    (*inv)[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      const double h = (xv[r * d + j] - mu) * (*inv)[r];
      (*xhat)[r * d + j] = h;
      y[r * d + j] = gamma[j] * h + beta[j];
    }
  }
  return make_op("layer_norm", x.shape(), std::move(y), {x, gamma, beta},
                 [d, rows, xhat, inv](const Node& o, std::vector<Tensor>& in) {
                   const auto gm = in[1].data();
                   for (std::size_t r = 0; r < rows; ++r) {
                     const double* g = o.grad.data() + r * d;
                     const double* h = xhat->data() + r * d;
                     if (in[1].requires_grad()) {
                       auto gg = in[1].mutable_grad();
                       for (std::size_t j = 0; j < d; ++j) gg[j] += g[j] * h[j];
                     }
                     if (in[2].requires_grad()) {
                       auto gb = in[2].mutable_grad();
                       for (std::size_t j = 0; j < d; ++j) gb[j] += g[j];
                     }
                     if (in[0].requires_grad()) {
                       double m1 = 0.0, m2 = 0.0;
                       for (std::size_t j = 0; j < d; ++j) {
                         const double dh = g[j] * gm[j];
                         m1 += dh;
                         m2 += dh * h[j];
                       }
                       m1 /= static_cast<double>(d);
                       m2 /= static_cast<double>(d);
                       auto gx = in[0].mutable_grad();
                       for (std::size_t j = 0; j < d; ++j)
                         gx[r * d + j] += (*inv)[r] * (g[j] * gm[j] - m1 - h[j] * m2);
                     }
                   }
                 });
}

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormState& st,
                  bool training) {
  if (x.rank() < 2) throw ValidationError("batch_norm: need [n, c, ...]");
  const std::size_t n = x.dim(0), c = x.dim(1), inner = x.size() / (n * c);
  if (gamma.shape() != Shape{c} || beta.shape() != Shape{c} || st.running_mean.size() != c ||
      st.running_var.size() != c) {
    throw ValidationError("batch_norm: parameter size does not match " + std::to_string(c) +
                          " channels");
  }
  const double count = static_cast<double>(n * inner);
  auto xhat = std::make_shared<std::vector<double>>(x.size());
  auto inv = std::make_shared<std::vector<double>>(c);
  const auto xv = x.data();
  std::vector<double> y(x.size());
  for (std::size_t ch = 0; ch < c; ++ch) {
    double mu, var;
    if (training) {
      mu = 0.0;
      for (std::size_t b = 0; b < n; ++b)
        for (std::size_t i = 0; i < inner; ++i) mu += xv[(b * c + ch) * inner + i];
      mu /= count;
      var = 0.0;
      for (std::size_t b = 0; b < n; ++b)
        for (std::size_t i = 0; i < inner; ++i) {
          const double d = xv[(b * c + ch) * inner + i] - mu;
          var += d * d;
        }
      var /= count;
      st.running_mean[ch] = st.momentum * st.running_mean[ch] + (1.0 - st.momentum) * mu;
      st.running_var[ch] = st.momentum * st.running_var[ch] + (1.0 - st.momentum) * var;
    } else {
      mu = st.running_mean[ch];
      var = st.running_var[ch];
    }
    (*inv)[ch] = 1.0 / std::sqrt(var + st.eps);
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t i = 0; i < inner; ++i) {
        const std::size_t p = (b * c + ch) * inner + i;
        (*xhat)[p] = (xv[p] - mu) * (*inv)[ch];
        y[p] = gamma[ch] * (*xhat)[p] + beta[ch];
      }
  }
  return make_op(
      "batch_norm", x.shape(), std::move(y), {x, gamma, beta},
      [n, c, inner, count, training, xhat, inv](const Node& o, std::vector<Tensor>& in) {
        const auto gm = in[1].data();
        for (std::size_t ch = 0; ch < c; ++ch) {
          double sg = 0.0, sgh = 0.0;
          for (std::size_t b = 0; b < n; ++b)
            for (std::size_t i = 0; i < inner; ++i) {
              const std::size_t p = (b * c + ch) * inner + i;
              sg += o.grad[p];
              sgh += o.grad[p] * (*xhat)[p];
            }
          if (in[1].requires_grad()) in[1].mutable_grad()[ch] += sgh;
          if (in[2].requires_grad()) in[2].mutable_grad()[ch] += sg;
          if (!in[0].requires_grad()) continue;
          auto gx = in[0].mutable_grad();
          const double k = gm[ch] * (*inv)[ch];
          const double m1 = sg / count, m2 = sgh / count;
          for (std::size_t b = 0; b < n; ++b)
            for (std::size_t i = 0; i < inner; ++i) {
              const std::size_t p = (b * c + ch) * inner + i;
              gx[p] += training ? k * (o.grad[p] - m1 - (*xhat)[p] * m2) : k * o.grad[p];
            }
        }
      });
}

Tensor mse(const Tensor& pred, const Tensor& target) {
  require_same("mse", pred.shape(), target.shape());
  return weighted_mse(pred, target, {});
}

Tensor weighted_mse(const Tensor& pred, const Tensor& target, std::span<const double> w) {
  require_same("weighted_mse", pred.shape(), target.shape());
  if (!w.empty() && w.size() != pred.size()) throw ValidationError("weighted_mse: weight size");
  auto weights = std::make_shared<std::vector<double>>(w.begin(), w.end());
  const double inv_n = 1.0 / static_cast<double>(pred.size());
  CompensatedSum acc;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    acc.add((w.empty() ? 1.0 : w[i]) * d * d);
  }
  return make_op(w.empty() ? "mse" : "weighted_mse", {}, {acc.value() * inv_n}, {pred, target},
                 [weights, inv_n](const Node& o, std::vector<Tensor>& in) {
                   const auto p = in[0].data();
                   const auto t = in[1].data();
                   for (std::size_t i = 0; i < p.size(); ++i) {
                     const double wi = weights->empty() ? 1.0 : (*weights)[i];
                     const double g = o.grad[0] * 2.0 * wi * (p[i] - t[i]) * inv_n;
                     if (in[0].requires_grad()) in[0].mutable_grad()[i] += g;
                     if (in[1].requires_grad()) in[1].mutable_grad()[i] -= g;
                   }
                 });
}

Tensor attention_weights(const Tensor& q, const Tensor& k) {
  if (q.rank() != 3 || k.rank() != 3 || q.dim(2) != k.dim(2) || q.dim(0) != k.dim(0)) {
    throw ValidationError("attention: Q" + shape_str(q.shape()) + " and K" + shape_str(k.shape()) +
                          " disagree");
  }
  const double s = 1.0 / std::sqrt(static_cast<double>(q.dim(2)));
  return softmax(scale(bmm(q, k, true), s), -1);
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v) {
  if (v.rank() != 3 || v.dim(0) != k.dim(0) || v.dim(1) != k.dim(1)) {
    throw ValidationError("attention: K" + shape_str(k.shape()) + " and V" + shape_str(v.shape()) +
                          " disagree");
  }
  return bmm(attention_weights(q, k), v);
}

LstmState lstm_gate_update(const Tensor& z, const Tensor& c_prev, int axis) {
  const auto ax = norm_axis(axis, z.rank());
  if (z.shape()[ax] % 4 != 0) throw ValidationError("lstm: gate axis not divisible by 4");
  const std::size_t h = z.shape()[ax] / 4;
  const auto i = sigmoid(slice(z, axis, 0, h));
  const auto f = sigmoid(slice(z, axis, h, h));
  const auto o = sigmoid(slice(z, axis, 2 * h, h));
  const auto g = tanh(slice(z, axis, 3 * h, h));
  require_same("lstm", f.shape(), c_prev.shape());
  auto c = add(mul(f, c_prev), mul(i, g));
  auto hn = mul(o, tanh(c));
  return {hn, c};
}

LstmState lstm_cell(const Tensor& x, const LstmState& prev, const LstmParams& p) {
  if (x.rank() != 2 || prev.h.rank() != 2 || p.w_h.rank() != 2 || p.w_h.dim(0) != prev.h.dim(1) ||
      p.w_h.dim(1) != 4 * prev.h.dim(1)) {
    throw ValidationError("lstm_cell: hidden size mismatch");
  }
  const auto z = add(dense(x, p.w_x, p.b), matmul(prev.h, p.w_h));
  return lstm_gate_update(z, prev.c, 1);
}

LstmState convlstm_step(const Tensor& gates_x, const LstmState& prev, const Tensor& k_h) {
  if (k_h.rank() != 4 || k_h.dim(0) != gates_x.dim(1) || prev.h.rank() != 4 ||
      4 * prev.h.dim(1) != gates_x.dim(1)) {
    throw ValidationError("convlstm: hidden channel mismatch");
  }
  const auto z = add(gates_x, conv2d(prev.h, k_h, Tensor(), 1, Padding::kSame));
  return lstm_gate_update(z, prev.c, 1);
}

LstmState convlstm_cell(const Tensor& x, const LstmState& prev, const ConvLstmParams& p) {
  return convlstm_step(conv2d(x, p.k_x, p.b, 1, Padding::kSame), prev, p.k_h);
}

}  // namespace climdown::tensor

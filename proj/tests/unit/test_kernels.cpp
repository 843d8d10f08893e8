#include <cmath>
#include <vector>

#include "doctest.h"

#include "climdown/kernels/conv.hpp"
#include "climdown/kernels/matmul.hpp"
#include "climdown/kernels/parallel.hpp"
#include "climdown/kernels/regrid.hpp"
#include "climdown/rng.hpp"

using namespace climdown;
using namespace climdown::kernels;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

void check_close(const std::vector<double>& a, const std::vector<double>& b, double tol) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    REQUIRE(std::abs(a[i] - b[i]) <= tol * (1.0 + std::abs(b[i])));
}

struct ThreadGuard {
  ~ThreadGuard() { set_num_threads(0); }
};

}  // namespace

TEST_CASE("conv2d kernels agree with the naive reference") {
  Rng rng(11);
  for (std::size_t stride : {1u, 2u}) {
    for (std::size_t k : {1u, 3u, 5u}) {
      ConvGeom g{2, 3, 9, 7, 4, k, stride, stride == 1 ? (k - 1) / 2 : 0};
      if (k > g.h) continue;
      const auto x = random_vec(rng, g.in_size());
      const auto K = random_vec(rng, g.kernel_size());
      const auto b = random_vec(rng, g.c_out);
      const auto dy = random_vec(rng, g.out_size());

      std::vector<double> y(g.out_size()), y_ref(g.out_size());
      conv2d_forward(g, x, K, b, y);
      conv2d_forward_reference(g, x, K, b, y_ref);
      check_close(y, y_ref, 1e-13);

      std::vector<double> dx(g.in_size()), dx_ref(g.in_size());
      conv2d_backward_input(g, dy, K, dx);
      conv2d_backward_input_reference(g, dy, K, dx_ref);
      check_close(dx, dx_ref, 1e-13);

      std::vector<double> dk(g.kernel_size()), dk_ref(g.kernel_size());
      std::vector<double> db(g.c_out), db_ref(g.c_out);
      conv2d_backward_weight(g, x, dy, dk, db);
      conv2d_backward_weight_reference(g, x, dy, dk_ref, db_ref);
      check_close(dk, dk_ref, 1e-13);
      check_close(db, db_ref, 1e-13);
    }
  }
}

TEST_CASE("conv2d kernels are bit-identical across thread counts") {
  ThreadGuard guard;
  Rng rng(5);
  ConvGeom g{3, 4, 12, 12, 6, 3, 1, 1};
  const auto x = random_vec(rng, g.in_size());
  const auto K = random_vec(rng, g.kernel_size());
  const auto dy = random_vec(rng, g.out_size());
  auto run = [&](int threads) {
    set_num_threads(threads);
    std::vector<double> y(g.out_size()), dx(g.in_size()), dk(g.kernel_size());
    conv2d_forward(g, x, K, {}, y);
    conv2d_backward_input(g, dy, K, dx);
    conv2d_backward_weight(g, x, dy, dk, {});
    y.insert(y.end(), dx.begin(), dx.end());
    y.insert(y.end(), dk.begin(), dk.end());
    return y;
  };
  CHECK(run(1) == run(4));
}

TEST_CASE("matmul variants agree with the reference") {
  Rng rng(3);
  const std::size_t m = 7, n = 5, k = 9;
  const auto a = random_vec(rng, m * k);
  const auto b = random_vec(rng, k * n);
  std::vector<double> c(m * n), c_ref(m * n);
  matmul_nn(m, n, k, a, b, c);
  matmul_reference(m, n, k, a, b, c_ref);
  check_close(c, c_ref, 1e-13);

  // A^T stored as [k, m].
  std::vector<double> at(k * m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) at[p * m + i] = a[i * k + p];
  std::vector<double> c_tn(m * n);
  matmul_tn(m, n, k, at, b, c_tn);
  check_close(c_tn, c_ref, 1e-13);

  // B^T stored as [n, k].
  std::vector<double> bt(n * k);
  for (std::size_t p = 0; p < k; ++p)
    for (std::size_t j = 0; j < n; ++j) bt[j * k + p] = b[p * n + j];
  std::vector<double> c_nt(m * n);
  matmul_nt(m, n, k, a, bt, c_nt);
  check_close(c_nt, c_ref, 1e-13);
}

TEST_CASE("regrid kernel: parallel equals reference bit for bit") {
  ThreadGuard guard;
  Rng rng(9);
  const std::vector<double> sy{0, 1, 2.5, 4}, sx{-1, 0, 1, 2, 3};
  const std::vector<double> dy{-0.5, 0, 0.3, 1, 2.2, 4, 5}, dx{-1, -0.2, 0.5, 2.9, 3.5};
  const auto wy = bilinear_weights(sy, dy);
  const auto wx = bilinear_weights(sx, dx);
  RegridGeom g{6, sy.size(), sx.size(), dy.size(), dx.size(), 1e20};
  auto src = random_vec(rng, g.nt * g.src_ny * g.src_nx);
  src[7] = 1e20;
  std::vector<double> ref(g.nt * g.dst_ny * g.dst_nx), par(ref.size());
  regrid_reference(g, wy, wx, src, ref);
  set_num_threads(3);
  regrid_parallel(g, wy, wx, src, par);
  CHECK(ref == par);
}

TEST_CASE("bilinear weights clamp outside the source range") {
  const std::vector<double> src{0.0, 1.0, 2.0};
  const std::vector<double> dst{-10.0, 0.0, 0.25, 2.0, 7.0};
  const auto w = bilinear_weights(src, dst);
  CHECK(w.lower == std::vector<std::size_t>{0, 0, 0, 1, 1});
  CHECK(w.weight == std::vector<double>{0.0, 0.0, 0.25, 1.0, 1.0});
}

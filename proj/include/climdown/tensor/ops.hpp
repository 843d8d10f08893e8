#pragma once

#include <span>
#include <vector>

#include "climdown/tensor/tensor.hpp"

namespace climdown::tensor {

// Broadcasting is limited to one rule: the second operand's shape may be a trailing
// suffix of the first's (bias vectors, positional tables, per-pixel offsets).

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);  // same shapes
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);

/// [m,k] x [k,n]
Tensor matmul(const Tensor& a, const Tensor& b);
/// Batched: [B,m,k] x [B,k,n], or [B,m,k] x [B,n,k]^T with transpose_b.
Tensor bmm(const Tensor& a, const Tensor& b, bool transpose_b = false);
/// x[..., d_in] W[d_in, d_out] + b[d_out]. `b` may be undefined.
Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
/// Max-subtracted softmax over `axis`.
Tensor softmax(const Tensor& x, int axis = -1);

enum class Padding { kSame, kValid };
/// x[n,c_in,h,w], K[c_out,c_in,k,k], b[c_out] (may be undefined). Cross-correlation.
Tensor conv2d(const Tensor& x, const Tensor& k, const Tensor& b, std::size_t stride = 1,
              Padding padding = Padding::kSame);
/// x[n,c_in,h,w], K[c_in,c_out,k,k] -> [n,c_out,(h-1)s+k,(w-1)s+k]. The adjoint of conv2d.
Tensor conv2d_transpose(const Tensor& x, const Tensor& k, const Tensor& b, std::size_t stride);

Tensor reshape(const Tensor& x, Shape shape);
Tensor permute(const Tensor& x, const std::vector<std::size_t>& perm);
Tensor slice(const Tensor& x, int axis, std::size_t start, std::size_t len);
Tensor concat(const std::vector<Tensor>& xs, int axis);
/// Mean over one axis, which is removed.
Tensor mean_axis(const Tensor& x, int axis);
Tensor sum_all(const Tensor& x);
Tensor mean_all(const Tensor& x);

/// Normalises over the last axis; gamma, beta have the size of that axis.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

struct BatchNormState {
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double momentum = 0.9;  // weight on the old running value
  double eps = 1e-5;
  explicit BatchNormState(std::size_t channels = 0)
      : running_mean(channels, 0.0), running_var(channels, 1.0) {}
};
/// Per-channel normalisation of x[n,c,...]. Training uses batch statistics (population
/// variance) and updates the running buffers; inference uses the buffers.
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormState& st,
                  bool training);

Tensor mse(const Tensor& pred, const Tensor& target);
/// mean(w * (pred - target)^2) with constant weights.
Tensor weighted_mse(const Tensor& pred, const Tensor& target, std::span<const double> w);

/// softmax(Q K^T / sqrt(d_k)) for Q[B,Lq,dk], K[B,Lk,dk].
Tensor attention_weights(const Tensor& q, const Tensor& k);
/// attention_weights(Q, K) V, V[B,Lk,dv].
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v);

struct LstmState {
  Tensor h;
  Tensor c;
};
/// Gate pre-activations are laid out i, f, o, g along the last axis.
struct LstmParams {
  Tensor w_x;  // [d, 4H]
  Tensor w_h;  // [H, 4H]
  Tensor b;    // [4H]
};
/// x[n,d], h,c [n,H].
LstmState lstm_cell(const Tensor& x, const LstmState& prev, const LstmParams& p);

/// Same gate algebra with convolutions (same padding); gates along the channel axis.
struct ConvLstmParams {
  Tensor k_x;  // [4H, c, k, k]
  Tensor k_h;  // [4H, H, k, k]
  Tensor b;    // [4H]
};
/// X[n,c,h,w], h,c [n,H,h,w].
LstmState convlstm_cell(const Tensor& x, const LstmState& prev, const ConvLstmParams& p);
/// One step given the input part of the gates already computed ([n,4H,h,w]).
LstmState convlstm_step(const Tensor& gates_x, const LstmState& prev, const Tensor& k_h);

/// c' = f*c + i*g, h' = o*tanh(c') from pre-activations z split into 4 along `axis`.
LstmState lstm_gate_update(const Tensor& z, const Tensor& c_prev, int axis);

}  // namespace climdown::tensor

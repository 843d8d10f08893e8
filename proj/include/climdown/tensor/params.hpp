#pragma once

#include <cstdint>
#include <deque>
#include <span>
#include <string>
#include <vector>

#include "climdown/rng.hpp"
#include "climdown/tensor/ops.hpp"

namespace climdown::tensor {

/// Named trainable tensors plus named non-trainable buffers (batch-norm running stats),
/// in registration order. The order fixes the checkpoint layout.
class ParameterSet {
 public:
  struct Param {
    std::string name;
    Tensor tensor;
  };
  struct Buffer {
    std::string name;
    std::vector<double>* values;
  };

  ParameterSet() = default;
  // Buffers are referenced by address, so copies would alias; moves keep deque storage.
  ParameterSet(const ParameterSet&) = delete;
  ParameterSet& operator=(const ParameterSet&) = delete;
  ParameterSet(ParameterSet&&) = default;
  ParameterSet& operator=(ParameterSet&&) = default;

  /// Registers `t` as trainable (a fresh leaf with requires_grad).
  Tensor add(const std::string& name, const Tensor& t);
  /// Owns a BatchNormState for `channels` and registers its two buffers.
  BatchNormState& add_batch_norm(const std::string& name, std::size_t channels);
  /// Owns a plain non-trainable buffer.
  std::vector<double>& add_buffer(const std::string& name, std::vector<double> init);

  const std::vector<Param>& params() const { return params_; }
  const std::vector<Buffer>& buffers() const { return buffers_; }
  std::vector<Tensor> tensors() const;
  const Tensor& get(const std::string& name) const;

  std::size_t count() const;
  void zero_grad();

  /// Flat copies of all parameter and buffer values, in layout order.
  std::vector<double> flat_values() const;
  /// Inverse of flat_values(); the size must match.
  void set_flat_values(std::span<const double> v);

 private:
  std::vector<Param> params_;
  std::vector<Buffer> buffers_;
  std::deque<BatchNormState> bn_;
  std::deque<std::vector<double>> plain_;
};

/// U(-sqrt(6/fan_in), +sqrt(6/fan_in)).
Tensor he_uniform(Shape shape, std::size_t fan_in, Rng& rng);
/// U(-sqrt(6/(fan_in+fan_out)), +...).
Tensor glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng);

}  // namespace climdown::tensor

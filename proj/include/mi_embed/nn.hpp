#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace mi_embed {

using Vector = std::vector<double>;

enum class Activation { relu, identity };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

/// Dense row-major matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), values(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }

  bool operator==(const Matrix&) const = default;
};

struct DenseLayer {
  Matrix weights;  // out_dim x in_dim
  Vector bias;
  Activation activation = Activation::identity;

  std::size_t in_dim() const { return weights.cols; }
  std::size_t out_dim() const { return weights.rows; }

  bool operator==(const DenseLayer&) const = default;
};

/**
 * Fully connected feed-forward network.
 *
 * Every mutation through mutable_layers() moves the network to a fresh
 * revision; forward caches remember the revision they were computed against
 * so that backward() can reject them once the parameters have changed.
 */
class DenseNet {
 public:
  DenseNet() = default;
  /// Validates shape consistency and finiteness.
  explicit DenseNet(std::vector<DenseLayer> layers);

  /// Seeded Glorot-uniform weights, zero biases.
  static DenseNet initialize(const std::vector<std::size_t>& layer_dims,
                             const std::vector<Activation>& activations, std::uint64_t seed);

  std::vector<std::size_t> layer_dims() const;
  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::size_t parameter_count() const;

  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& mutable_layers();

  std::uint64_t revision() const { return revision_; }

  /// Flat parameter view in (layer, weights row-major, bias) order.
  std::vector<double> flat_parameters() const;
  void set_flat_parameters(std::span<const double> params);

  bool operator==(const DenseNet& other) const { return layers_ == other.layers_; }

 private:
  std::vector<DenseLayer> layers_;
  std::uint64_t revision_ = 0;
};

struct Gradients {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;

  static Gradients zeros_like(const DenseNet& net);

  Gradients& operator+=(const Gradients& other);
  Gradients& operator*=(double s);
  bool all_finite() const;
  bool congruent_with(const DenseNet& net) const;
  std::vector<double> flat() const;
};

/// Per-layer inputs and pre-activations recorded by a forward pass.
struct ForwardCache {
  std::uint64_t revision = 0;
  std::vector<Vector> inputs;
  std::vector<Vector> pre_activations;
  Vector output;
};

Vector forward(const DenseNet& net, std::span<const double> input);
ForwardCache forward_cached(const DenseNet& net, std::span<const double> input);

/// Reverse-mode gradients of a scalar loss whose gradient at the network output is output_grad.
Gradients backward(const DenseNet& net, const ForwardCache& cache, std::span<const double> output_grad);

/// Summed gradients over a batch of cached passes.
Gradients backward(const DenseNet& net, std::span<const ForwardCache> caches,
                   std::span<const Vector> output_grads);

DenseNet sgd_step(const DenseNet& net, const Gradients& grads, double lr);

/// SGD with optional heavy-ball momentum; owns its velocity buffers.
class SgdOptimizer {
 public:
  SgdOptimizer(double lr, double momentum = 0.0);

  void step(DenseNet& net, const Gradients& grads);

 private:
  double lr_;
  double momentum_;
  Gradients velocity_;
  bool initialized_ = false;
};

inline constexpr int kCheckpointFormatVersion = 1;

nlohmann::json to_json(const DenseNet& net);
DenseNet net_from_json(const nlohmann::json& doc);

void save_net(const DenseNet& net, const std::filesystem::path& path);
DenseNet load_net(const std::filesystem::path& path);

}  // namespace mi_embed

#include "mi_embed/nn.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>

#include "mi_embed/errors.hpp"
#include "mi_embed/rng.hpp"

namespace mi_embed {

namespace {

std::uint64_t next_revision() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

bool finite(std::span<const double> xs) {
  return std::all_of(xs.begin(), xs.end(), [](double x) { return std::isfinite(x); });
}

double activate(Activation a, double z) {
  return a == Activation::relu ? (z > 0.0 ? z : 0.0) : z;
}

double activate_derivative(Activation a, double z) {
  return a == Activation::relu ? (z > 0.0 ? 1.0 : 0.0) : 1.0;
}

}  // namespace

std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "identity"; }

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "identity") return Activation::identity;
  throw InvalidArgument("unknown activation '" + s + "'");
}

DenseNet::DenseNet(std::vector<DenseLayer> layers) : layers_(std::move(layers)), revision_(next_revision()) {
  if (layers_.empty()) throw DimensionError("network needs at least one layer");
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const auto& layer = layers_[k];
    if (layer.weights.rows == 0 || layer.weights.cols == 0)
      throw DimensionError("layer " + std::to_string(k) + " has an empty weight matrix");
    if (layer.weights.values.size() != layer.weights.rows * layer.weights.cols)
      throw DimensionError("layer " + std::to_string(k) + " weight storage does not match its shape");
    if (layer.bias.size() != layer.weights.rows)
      throw DimensionError("layer " + std::to_string(k) + " bias length does not match output dim");
    if (k > 0 && layer.weights.cols != layers_[k - 1].weights.rows)
      throw DimensionError("layer " + std::to_string(k) + " input dim does not match previous output dim");
    if (!finite(layer.weights.values) || !finite(layer.bias))
      throw InvalidArgument("layer " + std::to_string(k) + " has non-finite parameters");
  }
}

DenseNet DenseNet::initialize(const std::vector<std::size_t>& layer_dims,
                              const std::vector<Activation>& activations, std::uint64_t seed) {
  if (layer_dims.size() < 2) throw DimensionError("need at least input and output dims");
  if (activations.size() != layer_dims.size() - 1)
    throw DimensionError("need one activation per layer");
  Rng rng(seed);
  std::vector<DenseLayer> layers;
  for (std::size_t k = 0; k + 1 < layer_dims.size(); ++k) {
    const std::size_t in = layer_dims[k];
    const std::size_t out = layer_dims[k + 1];
    if (in == 0 || out == 0) throw DimensionError("layer dims must be positive");
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    DenseLayer layer{Matrix(out, in), Vector(out, 0.0), activations[k]};
    for (auto& w : layer.weights.values) w = dist(rng);
    layers.push_back(std::move(layer));
  }
  return DenseNet(std::move(layers));
}

std::vector<std::size_t> DenseNet::layer_dims() const {
  std::vector<std::size_t> dims;
  if (layers_.empty()) return dims;
  dims.push_back(layers_.front().in_dim());
  for (const auto& l : layers_) dims.push_back(l.out_dim());
  return dims;
}

std::size_t DenseNet::input_dim() const { return layers_.empty() ? 0 : layers_.front().in_dim(); }
std::size_t DenseNet::output_dim() const { return layers_.empty() ? 0 : layers_.back().out_dim(); }

std::size_t DenseNet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weights.values.size() + l.bias.size();
  return n;
}

std::vector<DenseLayer>& DenseNet::mutable_layers() {
  revision_ = next_revision();
  return layers_;
}

std::vector<double> DenseNet::flat_parameters() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for (const auto& l : layers_) {
    out.insert(out.end(), l.weights.values.begin(), l.weights.values.end());
    out.insert(out.end(), l.bias.begin(), l.bias.end());
  }
  return out;
}

void DenseNet::set_flat_parameters(std::span<const double> params) {
  if (params.size() != parameter_count()) throw DimensionError("flat parameter count mismatch");
  std::size_t i = 0;
  for (auto& l : mutable_layers()) {
    for (auto& w : l.weights.values) w = params[i++];
    for (auto& b : l.bias) b = params[i++];
  }
}

Gradients Gradients::zeros_like(const DenseNet& net) {
  Gradients g;
  for (const auto& l : net.layers()) {
    g.weights.emplace_back(l.weights.rows, l.weights.cols);
    g.biases.emplace_back(l.bias.size(), 0.0);
  }
  return g;
}

Gradients& Gradients::operator+=(const Gradients& other) {
  if (weights.size() != other.weights.size()) throw DimensionError("gradient layer count mismatch");
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (weights[k].values.size() != other.weights[k].values.size() || biases[k].size() != other.biases[k].size())
      throw DimensionError("gradient shape mismatch");
    for (std::size_t i = 0; i < weights[k].values.size(); ++i) weights[k].values[i] += other.weights[k].values[i];
    for (std::size_t i = 0; i < biases[k].size(); ++i) biases[k][i] += other.biases[k][i];
  }
  return *this;
}

Gradients& Gradients::operator*=(double s) {
  for (auto& m : weights)
    for (auto& v : m.values) v *= s;
  for (auto& b : biases)
    for (auto& v : b) v *= s;
  return *this;
}

bool Gradients::all_finite() const {
  for (std::size_t k = 0; k < weights.size(); ++k)
    if (!finite(weights[k].values) || !finite(biases[k])) return false;
  return true;
}

bool Gradients::congruent_with(const DenseNet& net) const {
  const auto& layers = net.layers();
  if (weights.size() != layers.size() || biases.size() != layers.size()) return false;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    if (weights[k].rows != layers[k].weights.rows || weights[k].cols != layers[k].weights.cols) return false;
    if (biases[k].size() != layers[k].bias.size()) return false;
  }
  return true;
}

std::vector<double> Gradients::flat() const {
  std::vector<double> out;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    out.insert(out.end(), weights[k].values.begin(), weights[k].values.end());
    out.insert(out.end(), biases[k].begin(), biases[k].end());
  }
  return out;
}

ForwardCache forward_cached(const DenseNet& net, std::span<const double> input) {
  if (net.layers().empty()) throw DimensionError("forward on an empty network");
  if (input.size() != net.input_dim())
    throw DimensionError("input length " + std::to_string(input.size()) + " does not match network input dim " +
                         std::to_string(net.input_dim()));
  ForwardCache cache;
  cache.revision = net.revision();
  Vector current(input.begin(), input.end());
  for (const auto& layer : net.layers()) {
    Vector z(layer.bias);
    for (std::size_t r = 0; r < layer.weights.rows; ++r) {
      const double* row = &layer.weights.values[r * layer.weights.cols];
      double acc = 0.0;
      for (std::size_t c = 0; c < layer.weights.cols; ++c) acc += row[c] * current[c];
      z[r] += acc;
    }
    Vector a(z.size());
    for (std::size_t r = 0; r < z.size(); ++r) a[r] = activate(layer.activation, z[r]);
    cache.inputs.push_back(std::move(current));
    cache.pre_activations.push_back(std::move(z));
    current = std::move(a);
  }
  cache.output = std::move(current);
  return cache;
}

Vector forward(const DenseNet& net, std::span<const double> input) {
  return forward_cached(net, input).output;
}

namespace {

void accumulate_backward(const DenseNet& net, const ForwardCache& cache, std::span<const double> output_grad,
                         Gradients& grads) {
  const auto& layers = net.layers();
  if (cache.revision != net.revision() || cache.inputs.size() != layers.size())
    throw StaleCacheError("forward cache does not belong to this network revision");
  if (output_grad.size() != net.output_dim()) throw DimensionError("output gradient length mismatch");

  Vector delta(output_grad.begin(), output_grad.end());
  for (std::size_t k = layers.size(); k-- > 0;) {
    const auto& layer = layers[k];
    const auto& z = cache.pre_activations[k];
    const auto& in = cache.inputs[k];
    for (std::size_t r = 0; r < delta.size(); ++r) delta[r] *= activate_derivative(layer.activation, z[r]);

    auto& gw = grads.weights[k];
    auto& gb = grads.biases[k];
    for (std::size_t r = 0; r < layer.weights.rows; ++r) {
      if (delta[r] == 0.0) continue;
      double* row = &gw.values[r * gw.cols];
      for (std::size_t c = 0; c < layer.weights.cols; ++c) row[c] += delta[r] * in[c];
      gb[r] += delta[r];
    }
    if (k == 0) break;
    Vector upstream(layer.weights.cols, 0.0);
    for (std::size_t r = 0; r < layer.weights.rows; ++r) {
      if (delta[r] == 0.0) continue;
      const double* row = &layer.weights.values[r * layer.weights.cols];
      for (std::size_t c = 0; c < layer.weights.cols; ++c) upstream[c] += row[c] * delta[r];
    }
    delta = std::move(upstream);
  }
}

}  // namespace

Gradients backward(const DenseNet& net, const ForwardCache& cache, std::span<const double> output_grad) {
  Gradients grads = Gradients::zeros_like(net);
  accumulate_backward(net, cache, output_grad, grads);
  return grads;
}

Gradients backward(const DenseNet& net, std::span<const ForwardCache> caches, std::span<const Vector> output_grads) {
  if (caches.size() != output_grads.size()) throw DimensionError("one output gradient per cached pass required");
  Gradients grads = Gradients::zeros_like(net);
  for (std::size_t i = 0; i < caches.size(); ++i) accumulate_backward(net, caches[i], output_grads[i], grads);
  return grads;
}

DenseNet sgd_step(const DenseNet& net, const Gradients& grads, double lr) {
  if (!grads.congruent_with(net)) throw DimensionError("gradients are not shape-congruent with the network");
  if (!grads.all_finite()) throw TrainingDiverged("non-finite gradient in sgd step");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw InvalidArgument("learning rate must be finite and non-negative");
  DenseNet out = net;
  auto& layers = out.mutable_layers();
  for (std::size_t k = 0; k < layers.size(); ++k) {
    auto& w = layers[k].weights.values;
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * grads.weights[k].values[i];
    auto& b = layers[k].bias;
    for (std::size_t i = 0; i < b.size(); ++i) b[i] -= lr * grads.biases[k][i];
  }
  return out;
}

SgdOptimizer::SgdOptimizer(double lr, double momentum) : lr_(lr), momentum_(momentum) {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw InvalidArgument("learning rate must be finite and non-negative");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw InvalidArgument("momentum must be in [0, 1)");
}

void SgdOptimizer::step(DenseNet& net, const Gradients& grads) {
  if (!grads.congruent_with(net)) throw DimensionError("gradients are not shape-congruent with the network");
  if (!grads.all_finite()) throw TrainingDiverged("non-finite gradient in sgd step");
  if (momentum_ == 0.0) {
    net = sgd_step(net, grads, lr_);
    return;
  }
  if (!initialized_) {
    velocity_ = Gradients::zeros_like(net);
    initialized_ = true;
  }
  velocity_ *= momentum_;
  velocity_ += grads;
  net = sgd_step(net, velocity_, lr_);
}

nlohmann::json to_json(const DenseNet& net) {
  nlohmann::json doc;
  doc["format_version"] = kCheckpointFormatVersion;
  doc["layer_dims"] = net.layer_dims();
  auto& acts = doc["activations"] = nlohmann::json::array();
  auto& weights = doc["weights"] = nlohmann::json::array();
  auto& biases = doc["biases"] = nlohmann::json::array();
  for (const auto& l : net.layers()) {
    acts.push_back(to_string(l.activation));
    weights.push_back(l.weights.values);
    biases.push_back(l.bias);
  }
  return doc;
}

DenseNet net_from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("format_version").get<int>() != kCheckpointFormatVersion)
      throw InvalidArgument("unsupported checkpoint format_version");
    const auto dims = doc.at("layer_dims").get<std::vector<std::size_t>>();
    const auto acts = doc.at("activations").get<std::vector<std::string>>();
    const auto weights = doc.at("weights").get<std::vector<std::vector<double>>>();
    const auto biases = doc.at("biases").get<std::vector<std::vector<double>>>();
    if (dims.size() < 2 || acts.size() != dims.size() - 1 || weights.size() != acts.size() ||
        biases.size() != acts.size())
      throw DimensionError("checkpoint layer counts are inconsistent");
    std::vector<DenseLayer> layers;
    for (std::size_t k = 0; k < acts.size(); ++k) {
      DenseLayer layer;
      layer.weights.rows = dims[k + 1];
      layer.weights.cols = dims[k];
      layer.weights.values = weights[k];
      layer.bias = biases[k];
      layer.activation = activation_from_string(acts[k]);
      layers.push_back(std::move(layer));
    }
    return DenseNet(std::move(layers));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed network checkpoint: ") + e.what());
  }
}

void save_net(const DenseNet& net, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << to_json(net).dump(2) << '\n';
}

DenseNet load_net(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return net_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidArgument("cannot parse " + path.string() + ": " + e.what());
  }
}

}  // namespace mi_embed

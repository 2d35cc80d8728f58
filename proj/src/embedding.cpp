#include "mi_embed/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include "mi_embed/errors.hpp"
#include "mi_embed/rng.hpp"

namespace mi_embed {

namespace {

double l2(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void validate_batch(std::span<const Vector> embeddings, std::span<const std::size_t> labels) {
  if (embeddings.size() != labels.size()) throw DimensionError("one label per embedding required");
  std::map<std::size_t, std::size_t> counts;
  for (auto l : labels) ++counts[l];
  if (counts.size() < 2) throw DegenerateBatch("batch-hard loss needs at least two users");
  for (const auto& [label, n] : counts)
    if (n < 2) throw DegenerateBatch("user " + std::to_string(label) + " has fewer than two samples in the batch");
  for (const auto& e : embeddings) {
    if (e.size() != embeddings.front().size()) throw DimensionError("embeddings differ in dimension");
    for (double x : e)
      if (!std::isfinite(x)) throw InvalidArgument("non-finite embedding in batch");
  }
}

// Distance of a to b and the unit direction (a - b) / |a - b|, zero when coincident.
void add_distance_grad(const Vector& a, const Vector& b, double dist, double coeff, Vector& grad_a, Vector& grad_b) {
  if (dist == 0.0 || coeff == 0.0) return;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double g = coeff * (a[i] - b[i]) / dist;
    grad_a[i] += g;
    grad_b[i] -= g;
  }
}

std::vector<std::size_t> hidden_and_output(std::size_t input_dim, const TrainingConfig& config) {
  std::vector<std::size_t> dims{input_dim};
  dims.insert(dims.end(), config.hidden.begin(), config.hidden.end());
  dims.push_back(config.embedding_dim);
  return dims;
}

}  // namespace

Encoder initial_encoder(std::size_t input_dim, const TrainingConfig& config) {
  if (config.embedding_dim < 2) throw InvalidArgument("embedding dim must be at least 2");
  if (input_dim == 0) throw DimensionError("encoder input dim must be positive");
  const auto dims = hidden_and_output(input_dim, config);
  std::vector<Activation> acts(dims.size() - 1, Activation::relu);
  acts.back() = Activation::identity;
  return Encoder{DenseNet::initialize(dims, acts, derive_seed(config.seed, 0)), config, 0.0};
}

std::vector<HardestPair> mine_batch_hard(std::span<const Vector> embeddings, std::span<const std::size_t> labels) {
  validate_batch(embeddings, labels);
  const std::size_t n = embeddings.size();
  std::vector<double> dist(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) dist[i * n + j] = dist[j * n + i] = l2(embeddings[i], embeddings[j]);

  std::vector<HardestPair> mined(n);
  for (std::size_t a = 0; a < n; ++a) {
    HardestPair h{n, n, -1.0, 0.0};
    for (std::size_t j = 0; j < n; ++j) {
      if (j == a) continue;
      const double d = dist[a * n + j];
      if (labels[j] == labels[a]) {
        if (d > h.positive_distance) {
          h.positive = j;
          h.positive_distance = d;
        }
      } else if (h.negative == n || d < h.negative_distance) {
        h.negative = j;
        h.negative_distance = d;
      }
    }
    mined[a] = h;
  }
  return mined;
}

BatchLoss batch_hard_loss(std::span<const Vector> embeddings, std::span<const std::size_t> labels) {
  BatchLoss out;
  out.mined = mine_batch_hard(embeddings, labels);
  const std::size_t n = embeddings.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  out.grads.assign(n, Vector(embeddings.front().size(), 0.0));
  for (std::size_t a = 0; a < n; ++a) {
    const auto& h = out.mined[a];
    const double z = h.positive_distance - h.negative_distance;
    out.loss += softplus(z);
    const double coeff = sigmoid(z) * inv_n;
    add_distance_grad(embeddings[a], embeddings[h.positive], h.positive_distance, coeff, out.grads[a],
                      out.grads[h.positive]);
    add_distance_grad(embeddings[a], embeddings[h.negative], h.negative_distance, -coeff, out.grads[a],
                      out.grads[h.negative]);
  }
  out.loss *= inv_n;
  return out;
}

Encoder train_encoder(const UserSamples& data, const TrainingConfig& config) {
  const std::size_t P = config.identities_per_batch;
  const std::size_t K = config.samples_per_identity;
  if (P < 2 || K < 2) throw InvalidArgument("batch needs P >= 2 identities and K >= 2 samples each");
  if (!(config.lr > 0.0)) throw InvalidArgument("learning rate must be positive");
  if (data.size() < P)
    throw SizingError("training needs at least P=" + std::to_string(P) + " users, got " + std::to_string(data.size()));
  if (config.augmentation) config.augmentation->validate();

  std::vector<const std::vector<Sample>*> users;
  std::size_t dim = 0;
  for (const auto& [user, samples] : data) {
    if (samples.empty()) throw SizingError("user " + user + " has no training samples");
    for (const auto& s : samples) {
      if (dim == 0) dim = s.features.size();
      if (s.features.size() != dim) throw DimensionError("inconsistent feature dimension in training data");
    }
    users.push_back(&samples);
  }

  Encoder encoder = initial_encoder(dim, config);
  if (config.epochs == 0) return encoder;

  Rng rng(derive_seed(config.seed, 1));
  SgdOptimizer optimizer(config.lr, config.momentum);
  std::vector<std::size_t> order(users.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t n_batches = (users.size() + P - 1) / P;

  std::vector<Vector> inputs(P * K);
  std::vector<std::size_t> labels(P * K);
  std::vector<ForwardCache> caches(P * K);
  std::vector<Vector> embeddings(P * K);
  std::vector<std::size_t> pick;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < n_batches; ++b) {
      for (std::size_t p = 0; p < P; ++p) {
        const auto& samples = *users[order[(b * P + p) % users.size()]];
        const std::size_t m = samples.size();
        pick.resize(m);
        std::iota(pick.begin(), pick.end(), 0);
        if (m >= K) {
          for (std::size_t j = 0; j < K; ++j)
            std::swap(pick[j], pick[std::uniform_int_distribution<std::size_t>(j, m - 1)(rng)]);
        } else {
          pick.resize(K);
          for (auto& j : pick) j = std::uniform_int_distribution<std::size_t>(0, m - 1)(rng);
        }
        for (std::size_t j = 0; j < K; ++j) {
          const auto& f = samples[pick[j]].features;
          inputs[p * K + j] = config.augmentation ? augment(f, *config.augmentation, rng) : f;
          labels[p * K + j] = p;
        }
      }
      for (std::size_t i = 0; i < inputs.size(); ++i) {
        caches[i] = forward_cached(encoder.net, inputs[i]);
        embeddings[i] = caches[i].output;
        for (double x : embeddings[i])
          if (!std::isfinite(x))
            throw TrainingDiverged("non-finite embedding at epoch " + std::to_string(epoch), static_cast<long>(epoch));
      }
      const BatchLoss loss = batch_hard_loss(embeddings, labels);
      if (!std::isfinite(loss.loss))
        throw TrainingDiverged("non-finite triplet loss at epoch " + std::to_string(epoch), static_cast<long>(epoch));
      try {
        optimizer.step(encoder.net, backward(encoder.net, caches, loss.grads));
      } catch (const TrainingDiverged&) {
        throw TrainingDiverged("non-finite gradient at epoch " + std::to_string(epoch), static_cast<long>(epoch));
      }
      epoch_loss += loss.loss;
    }
    encoder.final_loss = epoch_loss / static_cast<double>(n_batches);
  }
  return encoder;
}

Vector embed(const Encoder& encoder, std::span<const double> features) { return forward(encoder.net, features); }

Vector embed(const Encoder& encoder, const Sample& sample) { return embed(encoder, sample.features); }

std::vector<Vector> embed_samples(const Encoder& encoder, std::span<const Sample> samples) {
  std::vector<Vector> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(embed(encoder, s));
  return out;
}

std::vector<Vector> embed_user(const Encoder& encoder, const UserCluster& cluster) {
  return embed_samples(encoder, cluster.samples);
}

nlohmann::json to_json(const TrainingConfig& c) {
  nlohmann::json j{{"epochs", c.epochs},
                   {"lr", c.lr},
                   {"momentum", c.momentum},
                   {"identities_per_batch", c.identities_per_batch},
                   {"samples_per_identity", c.samples_per_identity},
                   {"hidden", c.hidden},
                   {"embedding_dim", c.embedding_dim},
                   {"seed", c.seed}};
  if (c.augmentation) {
    const auto& a = *c.augmentation;
    j["augmentation"] = {{"noise_sigma", a.noise_sigma},
                         {"dropout_rate", a.dropout_rate},
                         {"scale_min", a.scale_min},
                         {"scale_max", a.scale_max},
                         {"n_views", a.n_views}};
  }
  return j;
}

TrainingConfig training_config_from_json(const nlohmann::json& j) {
  TrainingConfig c;
  c.epochs = j.at("epochs").get<std::size_t>();
  c.lr = j.at("lr").get<double>();
  c.momentum = j.at("momentum").get<double>();
  c.identities_per_batch = j.at("identities_per_batch").get<std::size_t>();
  c.samples_per_identity = j.at("samples_per_identity").get<std::size_t>();
  c.hidden = j.at("hidden").get<std::vector<std::size_t>>();
  c.embedding_dim = j.at("embedding_dim").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("augmentation")) {
    const auto& a = j.at("augmentation");
    c.augmentation = AugmentationSpec{a.at("noise_sigma").get<double>(), a.at("dropout_rate").get<double>(),
                                      a.at("scale_min").get<double>(), a.at("scale_max").get<double>(),
                                      a.at("n_views").get<std::size_t>()};
  }
  return c;
}

nlohmann::json to_json(const Encoder& encoder) {
  nlohmann::json j = to_json(encoder.net);
  j["training_config"] = to_json(encoder.config);
  j["final_loss"] = encoder.final_loss;
  return j;
}

Encoder encoder_from_json(const nlohmann::json& doc) {
  try {
    Encoder e{net_from_json(doc), training_config_from_json(doc.at("training_config")),
              doc.value("final_loss", 0.0)};
    if (e.embedding_dim() < 2) throw InvalidArgument("encoder embedding dim must be at least 2");
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw InvalidArgument(std::string("malformed encoder checkpoint: ") + ex.what());
  }
}

void save_encoder(const Encoder& encoder, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << to_json(encoder).dump(2) << '\n';
}

Encoder load_encoder(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return encoder_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidArgument("cannot parse " + path.string() + ": " + e.what());
  }
}

}  // namespace mi_embed

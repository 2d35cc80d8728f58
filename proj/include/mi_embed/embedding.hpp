#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"
#include "mi_embed/augment.hpp"
#include "mi_embed/dataset.hpp"
#include "mi_embed/nn.hpp"

namespace mi_embed {

struct TrainingConfig {
  std::size_t epochs = 200;
  double lr = 0.01;
  double momentum = 0.9;
  std::size_t identities_per_batch = 8;  // P
  std::size_t samples_per_identity = 4;  // K
  std::vector<std::size_t> hidden = {32, 32};
  std::size_t embedding_dim = 8;
  std::uint64_t seed = 0;
  // Training-time augmentation; empty when unset.
  std::optional<AugmentationSpec> augmentation;

  bool operator==(const TrainingConfig&) const = default;
};

struct Encoder {
  DenseNet net;
  TrainingConfig config;
  double final_loss = 0.0;  // mean batch loss over the last epoch; 0 when untrained

  std::size_t input_dim() const { return net.input_dim(); }
  std::size_t embedding_dim() const { return net.output_dim(); }
};

/// The seeded, untrained encoder for the given input dimension.
Encoder initial_encoder(std::size_t input_dim, const TrainingConfig& config);

struct HardestPair {
  std::size_t positive;
  std::size_t negative;
  double positive_distance;
  double negative_distance;
};

/// Per-anchor hardest positive (farthest same-label) and hardest negative
/// (closest other-label) under L2 distance. Ties resolve to the lowest index.
std::vector<HardestPair> mine_batch_hard(std::span<const Vector> embeddings, std::span<const std::size_t> labels);

struct BatchLoss {
  double loss = 0.0;
  std::vector<Vector> grads;  // d loss / d embedding, one per input embedding
  std::vector<HardestPair> mined;
};

/**
 * Soft-margin batch-hard triplet loss:
 *   mean over anchors a of softplus(max_p D(a,p) - min_n D(a,n)).
 * Requires at least two labels and at least two samples per label.
 */
BatchLoss batch_hard_loss(std::span<const Vector> embeddings, std::span<const std::size_t> labels);

struct TripletBatch {
  std::vector<std::string> user_ids;  // P distinct users
  std::vector<Vector> features;       // P*K rows, user-major
  std::vector<std::size_t> labels;    // index into user_ids per row
};

Encoder train_encoder(const UserSamples& data, const TrainingConfig& config);

Vector embed(const Encoder& encoder, std::span<const double> features);
Vector embed(const Encoder& encoder, const Sample& sample);
std::vector<Vector> embed_user(const Encoder& encoder, const UserCluster& cluster);
std::vector<Vector> embed_samples(const Encoder& encoder, std::span<const Sample> samples);

nlohmann::json to_json(const TrainingConfig& config);
TrainingConfig training_config_from_json(const nlohmann::json& doc);

nlohmann::json to_json(const Encoder& encoder);
Encoder encoder_from_json(const nlohmann::json& doc);
void save_encoder(const Encoder& encoder, const std::filesystem::path& path);
Encoder load_encoder(const std::filesystem::path& path);

}  // namespace mi_embed

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "mi_embed/embedding.hpp"
#include "mi_embed/features.hpp"
#include "mi_embed/nn.hpp"
#include "mi_embed/shadow.hpp"

namespace mi_embed {

enum class FeatureMode { c_only, p_only, both };

std::string to_string(FeatureMode mode);
/// Accepts "c", "p", "both" and the long forms "c_only", "p_only".
FeatureMode feature_mode_from_string(const std::string& s);
std::size_t feature_count(FeatureMode mode);

/// The raw (unstandardized) classifier inputs selected by mode.
Vector select_features(const AttackFeatures& f, FeatureMode mode);

struct AttackHyperparams {
  std::size_t epochs = 150;
  double lr = 0.05;
  double momentum = 0.9;
  std::size_t batch_size = 32;
  std::vector<std::size_t> hidden = {16, 16};
};

struct AttackModel {
  DenseNet net;  // features -> hidden -> hidden -> 1 logit
  FeatureMode mode = FeatureMode::both;
  Vector mean;
  Vector stddev;
  double decision_threshold = 0.0;

  Vector standardize(const AttackFeatures& f) const;
};

struct LossAndGradients {
  double loss = 0.0;
  Gradients grads;
};

/// Mean binary cross-entropy on logits; labels are 1 for member and 0 for nonmember.
LossAndGradients logistic_loss(const DenseNet& net, std::span<const Vector> inputs, std::span<const double> labels);

AttackModel train_attack(const AttackDataset& data, FeatureMode mode, const AttackHyperparams& hp,
                         std::uint64_t seed);

/// Logit of membership.
double attack_score(const AttackModel& model, const AttackFeatures& features);
MembershipLabel attack_verdict(const AttackModel& model, double score);

struct Inference {
  MembershipLabel verdict = MembershipLabel::nonmember;
  double score = 0.0;
  AttackFeatures features;
};

Inference infer_user(const AttackModel& model, const Encoder& victim, const UserCluster& cluster, std::size_t k,
                     std::uint64_t seed);
Inference infer_features(const AttackModel& model, const AttackFeatures& features);

nlohmann::json to_json(const AttackModel& model);
AttackModel attack_model_from_json(const nlohmann::json& doc);
void save_attack_model(const AttackModel& model, const std::filesystem::path& path);
AttackModel load_attack_model(const std::filesystem::path& path);

}  // namespace mi_embed

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "mi_embed/dataset.hpp"
#include "mi_embed/embedding.hpp"
#include "mi_embed/features.hpp"

namespace mi_embed {

struct ShadowConfig {
  std::size_t n_shadows = 10;
  std::size_t member_users = 40;
  std::size_t nonmember_users = 40;
  double within_user_split = 0.5;
  TrainingConfig encoder;
  std::size_t k = 15;
  std::uint64_t master_seed = 0;
  // Fraction of each member's k feature samples drawn from its training samples.
  double training_proportion = 0.0;
  std::size_t workers = 0;  // 0: default_workers()

  void validate() const;
};

struct AttackRow {
  AttackFeatures features;
  MembershipLabel label = MembershipLabel::member;
  std::size_t shadow_index = 0;

  bool operator==(const AttackRow&) const = default;
};

struct AttackDataset {
  std::vector<AttackRow> rows;

  std::size_t count(MembershipLabel label) const;
};

/// Seed of shadow `index`; every random stream of that shadow derives from it.
std::uint64_t shadow_seed(std::uint64_t master_seed, std::size_t index);

std::vector<MembershipSplit> build_shadow_splits(const Dataset& shadow_pool, const ShadowConfig& config);

/**
 * Per-member feature-extraction pools of exactly k samples:
 * floor(proportion * k) from training members, the rest from non-training members.
 */
UserSamples mix_training_access(const MembershipSplit& split, double proportion, std::size_t k, std::uint64_t seed);

/// Labeled feature rows for one split under one encoder, sorted by user id.
std::vector<AttackRow> attack_rows(const Encoder& encoder, const MembershipSplit& split, std::size_t k,
                                   double proportion, std::uint64_t seed, std::size_t shadow_index,
                                   const std::string& encoder_id);

struct ShadowRun {
  std::vector<Encoder> encoders;
  AttackDataset dataset;
};

std::vector<Encoder> train_shadows(const std::vector<MembershipSplit>& splits, const ShadowConfig& config);

AttackDataset build_attack_dataset(const std::vector<MembershipSplit>& splits, const std::vector<Encoder>& encoders,
                                   const ShadowConfig& config, double proportion);

ShadowRun run_shadows(const std::vector<MembershipSplit>& splits, const ShadowConfig& config);

std::string shadow_encoder_id(std::size_t index);

// Feature-cache columns followed by shadow_index.
void write_attack_dataset(const AttackDataset& data, std::ostream& out);
AttackDataset read_attack_dataset(std::istream& in);

}  // namespace mi_embed

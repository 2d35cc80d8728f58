#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mi_embed/augment.hpp"
#include "mi_embed/dataset.hpp"
#include "mi_embed/embedding.hpp"
#include "mi_embed/features.hpp"

namespace mi_embed {

enum class KnowledgeMode { full_knowledge, unknown_augmentations };

std::string to_string(KnowledgeMode mode);
/// Accepts "full"/"unknown" and the long forms.
KnowledgeMode knowledge_mode_from_string(const std::string& s);

/// Stand-in for the augmentation set an attacker picks without knowing the victim's:
/// vector analogues of a strong image pipeline (crop as 50% coordinate dropout,
/// brightness jitter as scaling in [0.6, 1.4], color jitter as noise with sigma 0.75,
/// about 0.4 of the per-feature std of the default synthetic data).
AugmentationSpec default_unknown_augmentations();

/// Augmentations the attacker uses against `victim` in the given mode.
AugmentationSpec attacker_augmentations(const Encoder& victim, KnowledgeMode mode,
                                        const AugmentationSpec& unknown = default_unknown_augmentations());

/// Mean pairwise cosine similarity among the embeddings of n_views augmented copies.
double record_score(const Encoder& victim, std::span<const double> features, const AugmentationSpec& spec,
                    std::uint64_t seed);
double record_score(const Encoder& victim, const Sample& sample, const AugmentationSpec& spec, std::uint64_t seed);

/// Mean of cosine(z_i, z_j) over unordered pairs. Throws DegenerateSimilarity on a zero vector.
double mean_pairwise_cosine(std::span<const Vector> embeddings);

/// Per-sample scores; each sample's stream derives from seed and its sample_id.
std::vector<double> record_scores(const Encoder& victim, std::span<const Sample> samples,
                                  const AugmentationSpec& spec, std::uint64_t seed);

/// Strict majority of member votes; ties go to nonmember.
MembershipLabel majority_vote(std::span<const double> scores, double threshold);

MembershipLabel user_verdict(const Encoder& victim, std::span<const Sample> samples, const AugmentationSpec& spec,
                             double threshold, std::uint64_t seed);

struct ScoredUser {
  std::vector<double> scores;
  MembershipLabel label = MembershipLabel::nonmember;
};

/// Threshold maximizing user-level majority-vote accuracy over a 1-D sweep of
/// the observed scores. Returns the midpoint of the winning interval.
double fit_vote_threshold(std::span<const ScoredUser> users);

/// Scores the non-training members and non-members of each shadow under its own encoder.
std::vector<ScoredUser> score_shadow_users(const std::vector<MembershipSplit>& splits,
                                           const std::vector<Encoder>& encoders, const AugmentationSpec& spec,
                                           std::uint64_t seed);

}  // namespace mi_embed

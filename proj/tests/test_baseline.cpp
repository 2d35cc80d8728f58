#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "mi_embed/baseline.hpp"
#include "mi_embed/errors.hpp"
#include "mi_embed/rng.hpp"
#include "oracles.hpp"

using namespace mi_embed;

namespace {

std::vector<Sample> user_samples(std::size_t n, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto pts = oracle::random_points(rng, n, dim);
  std::vector<Sample> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back({"u", "u_s" + std::to_string(i), pts[i]});
  return out;
}

// Non-zero output biases keep embeddings away from the origin under heavy dropout.
Encoder random_encoder(std::uint64_t seed, std::size_t dim = 6) {
  TrainingConfig cfg;
  cfg.hidden = {12};
  cfg.embedding_dim = 4;
  cfg.seed = seed;
  auto enc = initial_encoder(dim, cfg);
  auto& bias = enc.net.mutable_layers().back().bias;
  for (std::size_t i = 0; i < bias.size(); ++i) bias[i] = 1.0 + 0.5 * static_cast<double>(i);
  return enc;
}

}  // namespace

TEST(KnowledgeModeNames, Parse) {
  EXPECT_EQ(knowledge_mode_from_string("full"), KnowledgeMode::full_knowledge);
  EXPECT_EQ(knowledge_mode_from_string("unknown"), KnowledgeMode::unknown_augmentations);
  EXPECT_THROW(knowledge_mode_from_string("partial"), InvalidArgument);
}

TEST(AttackerAugmentations, FullKnowledgeUsesVictimSpec) {
  auto victim = random_encoder(1);
  const auto none = attacker_augmentations(victim, KnowledgeMode::full_knowledge);
  EXPECT_TRUE(none.is_identity());
  const AugmentationSpec spec{0.2, 0.1, 0.9, 1.1, 5};
  victim.config.augmentation = spec;
  EXPECT_EQ(attacker_augmentations(victim, KnowledgeMode::full_knowledge), spec);
  EXPECT_EQ(attacker_augmentations(victim, KnowledgeMode::unknown_augmentations), default_unknown_augmentations());
}

TEST(Augment, IdentitySpecCopiesInput) {
  Rng rng(1);
  const Vector x{1.0, -2.0, 3.0};
  EXPECT_EQ(augment(x, AugmentationSpec{}, rng), x);
}

TEST(Augment, DropoutZeroesAndScalingBounds) {
  Rng rng(2);
  const Vector x(200, 1.0);
  const auto dropped = augment(x, AugmentationSpec{0.0, 0.5, 1.0, 1.0, 2}, rng);
  const auto zeros = std::count(dropped.begin(), dropped.end(), 0.0);
  EXPECT_GT(zeros, 60);
  EXPECT_LT(zeros, 140);
  const auto scaled = augment(x, AugmentationSpec{0.0, 0.0, 0.5, 2.0, 2}, rng);
  EXPECT_GE(scaled[0], 0.5);
  EXPECT_LE(scaled[0], 2.0);
  for (double v : scaled) EXPECT_EQ(v, scaled[0]);
}

TEST(AugmentationSpec, Validation) {
  EXPECT_THROW((AugmentationSpec{0.0, 0.0, 1.0, 1.0, 1}.validate()), InvalidArgument);
  EXPECT_THROW((AugmentationSpec{-1.0, 0.0, 1.0, 1.0, 4}.validate()), InvalidArgument);
  EXPECT_THROW((AugmentationSpec{0.0, 1.0, 1.0, 1.0, 4}.validate()), InvalidArgument);
  EXPECT_THROW((AugmentationSpec{0.0, 0.0, 2.0, 1.0, 4}.validate()), InvalidArgument);
}

TEST(RecordScore, NoiselessViewsScoreOne) {
  const auto enc = random_encoder(3);
  for (const auto& s : user_samples(5, 6, 4)) EXPECT_NEAR(record_score(enc, s, AugmentationSpec{}, 1), 1.0, 1e-12);
}

TEST(RecordScore, LargeNoiseInHighDimensionNearZero) {
  const auto enc = oracle::identity_encoder(400);
  const Vector x(400, 1.0);
  const double score = record_score(enc, x, AugmentationSpec{200.0, 0.0, 1.0, 1.0, 16}, 5);
  EXPECT_LT(std::abs(score), 0.05);
}

TEST(RecordScore, EqualsExhaustivePairAverage) {
  const auto enc = random_encoder(6);
  const AugmentationSpec spec{0.5, 0.2, 0.8, 1.2, 7};
  for (const auto& s : user_samples(10, 6, 7)) {
    Rng rng(42);
    std::vector<Vector> views;
    for (std::size_t v = 0; v < spec.n_views; ++v) views.push_back(oracle::forward(enc.net, augment(s.features, spec, rng)));
    EXPECT_NEAR(record_score(enc, s, spec, 42), oracle::mean_pairwise_cosine(views), 1e-12);
  }
}

TEST(RecordScore, BoundedAndDeterministic) {
  const auto enc = random_encoder(8);
  const auto spec = default_unknown_augmentations();
  for (const auto& s : user_samples(30, 6, 9)) {
    const double score = record_score(enc, s, spec, 3);
    EXPECT_GE(score, -1.0);
    EXPECT_LE(score, 1.0);
    EXPECT_EQ(score, record_score(enc, s, spec, 3));
  }
}

TEST(RecordScore, ZeroNormEmbeddingIsDegenerate) {
  auto enc = oracle::identity_encoder(3);
  EXPECT_THROW(record_score(enc, Vector{0.0, 0.0, 0.0}, AugmentationSpec{}, 1), DegenerateSimilarity);
  EXPECT_THROW(mean_pairwise_cosine(std::vector<Vector>{{1.0, 0.0}, {0.0, 0.0}}), DegenerateSimilarity);
}

TEST(MajorityVote, Examples) {
  EXPECT_EQ(majority_vote(std::vector<double>{0.9, 0.8, 0.95}, 0.5), MembershipLabel::member);
  EXPECT_EQ(majority_vote(std::vector<double>{0.9, 0.1, 0.2}, 0.5), MembershipLabel::nonmember);
  EXPECT_EQ(majority_vote(std::vector<double>{0.9, 0.1}, 0.5), MembershipLabel::nonmember);
  EXPECT_EQ(majority_vote(std::vector<double>{0.5}, 0.5), MembershipLabel::nonmember);
  EXPECT_THROW(majority_vote(std::vector<double>{}, 0.5), InvalidArgument);
}

TEST(UserVerdict, InvariantUnderSampleReordering) {
  const auto enc = random_encoder(10);
  const auto spec = default_unknown_augmentations();
  auto samples = user_samples(9, 6, 11);
  const auto scores = record_scores(enc, samples, spec, 13);
  std::vector<double> sorted_scores = scores;
  std::sort(sorted_scores.begin(), sorted_scores.end());
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    const double threshold = sorted_scores[trial % sorted_scores.size()];
    const auto verdict = user_verdict(enc, samples, spec, threshold, 13);
    std::shuffle(samples.begin(), samples.end(), rng);
    EXPECT_EQ(user_verdict(enc, samples, spec, threshold, 13), verdict);
  }
}

TEST(FitVoteThreshold, SeparatesCleanUsers) {
  const std::vector<ScoredUser> users{{{0.9, 0.8, 0.7}, MembershipLabel::member},
                                      {{0.2, 0.3, 0.1}, MembershipLabel::nonmember},
                                      {{0.75, 0.85, 0.15}, MembershipLabel::member},
                                      {{0.25, 0.05, 0.72}, MembershipLabel::nonmember}};
  const double t = fit_vote_threshold(users);
  for (const auto& u : users) EXPECT_EQ(majority_vote(u.scores, t), u.label);
  EXPECT_GT(t, 0.25);
  EXPECT_LT(t, 0.7);
}

TEST(FitVoteThreshold, AllMembersPicksThresholdBelowEverything) {
  const std::vector<ScoredUser> users{{{0.4, 0.5}, MembershipLabel::member}, {{0.1, 0.3}, MembershipLabel::member}};
  const double t = fit_vote_threshold(users);
  EXPECT_LT(t, 0.1);
  EXPECT_THROW(fit_vote_threshold(std::vector<ScoredUser>{}), InvalidArgument);
}

TEST(ScoreShadowUsers, LabelsNontrainingMembersAndNonmembers) {
  SyntheticParams p;
  p.n_users = 12;
  p.samples_per_user = 6;
  p.dim = 6;
  const auto split = partition(generate_synthetic(p), 4, 5, 0.5, 3);
  const auto users = score_shadow_users({split}, {random_encoder(2)}, default_unknown_augmentations(), 1);
  ASSERT_EQ(users.size(), 9u);
  EXPECT_EQ(std::count_if(users.begin(), users.end(), [](const ScoredUser& u) { return u.label == MembershipLabel::member; }),
            4);
  for (const auto& u : users) EXPECT_EQ(u.scores.size(), u.label == MembershipLabel::member ? 3u : 6u);
}

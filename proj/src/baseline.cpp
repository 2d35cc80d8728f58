#include "mi_embed/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mi_embed/errors.hpp"
#include "mi_embed/rng.hpp"

namespace mi_embed {

std::string to_string(KnowledgeMode mode) {
  return mode == KnowledgeMode::full_knowledge ? "full_knowledge" : "unknown_augmentations";
}

KnowledgeMode knowledge_mode_from_string(const std::string& s) {
  if (s == "full" || s == "full_knowledge") return KnowledgeMode::full_knowledge;
  if (s == "unknown" || s == "unknown_augmentations") return KnowledgeMode::unknown_augmentations;
  throw InvalidArgument("unknown knowledge mode '" + s + "'");
}

AugmentationSpec default_unknown_augmentations() { return AugmentationSpec{0.75, 0.5, 0.6, 1.4, 8}; }

AugmentationSpec attacker_augmentations(const Encoder& victim, KnowledgeMode mode, const AugmentationSpec& unknown) {
  if (mode == KnowledgeMode::unknown_augmentations) return unknown;
  if (victim.config.augmentation) return *victim.config.augmentation;
  AugmentationSpec none;
  none.n_views = unknown.n_views;
  return none;
}

double mean_pairwise_cosine(std::span<const Vector> z) {
  if (z.size() < 2) throw InvalidArgument("cosine similarity needs at least two views");
  std::vector<double> norms;
  for (const auto& v : z) {
    double s = 0.0;
    for (double x : v) s += x * x;
    if (!(s > 0.0)) throw DegenerateSimilarity("zero-norm embedding has no direction");
    norms.push_back(std::sqrt(s));
  }
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < z.size(); ++i)
    for (std::size_t j = i + 1; j < z.size(); ++j) {
      double dot = 0.0;
      for (std::size_t d = 0; d < z[i].size(); ++d) dot += z[i][d] * z[j][d];
      total += std::clamp(dot / (norms[i] * norms[j]), -1.0, 1.0);
    }
  const double pairs = static_cast<double>(z.size()) * static_cast<double>(z.size() - 1) / 2.0;
  return std::clamp(total / pairs, -1.0, 1.0);
}

double record_score(const Encoder& victim, std::span<const double> features, const AugmentationSpec& spec,
                    std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  std::vector<Vector> views;
  views.reserve(spec.n_views);
  for (std::size_t v = 0; v < spec.n_views; ++v) views.push_back(embed(victim, augment(features, spec, rng)));
  return mean_pairwise_cosine(views);
}

double record_score(const Encoder& victim, const Sample& sample, const AugmentationSpec& spec, std::uint64_t seed) {
  return record_score(victim, sample.features, spec, seed);
}

std::vector<double> record_scores(const Encoder& victim, std::span<const Sample> samples,
                                  const AugmentationSpec& spec, std::uint64_t seed) {
  std::vector<double> scores;
  scores.reserve(samples.size());
  for (const auto& s : samples) scores.push_back(record_score(victim, s, spec, derive_seed(seed, stable_hash(s.sample_id))));
  return scores;
}

MembershipLabel majority_vote(std::span<const double> scores, double threshold) {
  if (scores.empty()) throw InvalidArgument("majority vote over an empty user");
  const auto votes = std::count_if(scores.begin(), scores.end(), [&](double s) { return s > threshold; });
  return 2 * static_cast<std::size_t>(votes) > scores.size() ? MembershipLabel::member : MembershipLabel::nonmember;
}

MembershipLabel user_verdict(const Encoder& victim, std::span<const Sample> samples, const AugmentationSpec& spec,
                             double threshold, std::uint64_t seed) {
  if (samples.empty()) throw InvalidArgument("user has no samples to vote with");
  return majority_vote(record_scores(victim, samples, spec, seed), threshold);
}

double fit_vote_threshold(std::span<const ScoredUser> users) {
  if (users.empty()) throw InvalidArgument("threshold fitting needs scored users");
  std::vector<double> candidates;
  std::vector<std::vector<double>> sorted;
  for (const auto& u : users) {
    if (u.scores.empty()) throw InvalidArgument("scored user without scores");
    candidates.insert(candidates.end(), u.scores.begin(), u.scores.end());
    sorted.push_back(u.scores);
    std::sort(sorted.back().begin(), sorted.back().end());
  }
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  // Thresholds below the smallest score make every sample vote member.
  candidates.insert(candidates.begin(), candidates.front() - 1.0);

  std::size_t best_correct = 0;
  std::size_t best = 0;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    std::size_t correct = 0;
    for (std::size_t u = 0; u < users.size(); ++u) {
      const auto& s = sorted[u];
      const auto above = static_cast<std::size_t>(s.end() - std::upper_bound(s.begin(), s.end(), candidates[c]));
      const auto verdict = 2 * above > s.size() ? MembershipLabel::member : MembershipLabel::nonmember;
      if (verdict == users[u].label) ++correct;
    }
    if (correct > best_correct) {
      best_correct = correct;
      best = c;
    }
  }
  if (best + 1 < candidates.size()) return 0.5 * (candidates[best] + candidates[best + 1]);
  return candidates[best] + 1.0;
}

std::vector<ScoredUser> score_shadow_users(const std::vector<MembershipSplit>& splits,
                                           const std::vector<Encoder>& encoders, const AugmentationSpec& spec,
                                           std::uint64_t seed) {
  if (splits.size() != encoders.size()) throw InvalidArgument("one encoder per shadow split required");
  std::vector<ScoredUser> users;
  for (std::size_t i = 0; i < splits.size(); ++i) {
    const std::uint64_t s = derive_seed(seed, i);
    for (const auto& [user, samples] : splits[i].nontraining_members)
      users.push_back({record_scores(encoders[i], samples, spec, s), MembershipLabel::member});
    for (const auto& [user, samples] : splits[i].nonmembers)
      users.push_back({record_scores(encoders[i], samples, spec, s), MembershipLabel::nonmember});
  }
  return users;
}

}  // namespace mi_embed

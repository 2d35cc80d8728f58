#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "mi_embed/dataset.hpp"
#include "mi_embed/embedding.hpp"

namespace mi_embed {

/// Cluster-compactness features of one user's embeddings.
struct AttackFeatures {
  std::string user_id;
  double c_u = 0.0;  // mean distance to the centroid
  double p_u = 0.0;  // mean distance over all unordered pairs
  std::size_t k_used = 0;
  std::string encoder_id;

  bool operator==(const AttackFeatures&) const = default;
};

/// (1/k) sum_i |z_i - mean(z)|. Requires k >= 2.
double center_distance(std::span<const Vector> embeddings);

/// Mean L2 distance over the k(k-1)/2 unordered pairs. Requires k >= 2.
double pairwise_distance(std::span<const Vector> embeddings);

/// Uniform subsample of exactly k samples, without replacement. Keeps the
/// original relative order; returns all samples unchanged when size() == k.
std::vector<Sample> subsample(std::span<const Sample> samples, std::size_t k, std::uint64_t seed);

AttackFeatures features_from_embeddings(std::string user_id, std::span<const Vector> embeddings,
                                        std::string encoder_id = {});

AttackFeatures extract_features(const Encoder& encoder, std::string user_id, std::span<const Sample> samples,
                                std::size_t k, std::uint64_t seed, std::string encoder_id = {});
AttackFeatures extract_features(const Encoder& encoder, const UserCluster& cluster, std::size_t k,
                                std::uint64_t seed, std::string encoder_id = {});

enum class MembershipLabel { member, nonmember, unknown };

std::string to_string(MembershipLabel label);
MembershipLabel label_from_string(const std::string& s);

struct FeatureRow {
  AttackFeatures features;
  MembershipLabel label = MembershipLabel::unknown;
};

// Feature cache: user_id,encoder_id,k_used,c_u,p_u,label
void write_feature_cache(std::span<const FeatureRow> rows, std::ostream& out);
std::vector<FeatureRow> read_feature_cache(std::istream& in);

}  // namespace mi_embed

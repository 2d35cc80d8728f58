#include "mi_embed/features.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "mi_embed/errors.hpp"
#include "mi_embed/rng.hpp"

namespace mi_embed {

namespace {

void check_points(std::span<const Vector> z) {
  if (z.size() < 2) throw InsufficientSamples("compactness features need at least 2 samples");
  for (const auto& v : z) {
    if (v.size() != z.front().size()) throw DimensionError("embeddings differ in dimension");
    for (double x : v)
      if (!std::isfinite(x)) throw InvalidArgument("non-finite embedding value");
  }
}

std::string format_double(double x) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, end);
}

double parse_double(const std::string& s, std::size_t row) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) throw ParseError("bad number '" + s + "'", row);
  return v;
}

}  // namespace

double center_distance(std::span<const Vector> z) {
  check_points(z);
  const std::size_t k = z.size();
  const std::size_t dim = z.front().size();
  Vector center(dim, 0.0);
  for (const auto& v : z)
    for (std::size_t d = 0; d < dim; ++d) center[d] += v[d];
  for (auto& c : center) c /= static_cast<double>(k);
  double total = 0.0;
  for (const auto& v : z) {
    double s = 0.0;
    for (std::size_t d = 0; d < dim; ++d) s += (v[d] - center[d]) * (v[d] - center[d]);
    total += std::sqrt(s);
  }
  return total / static_cast<double>(k);
}

double pairwise_distance(std::span<const Vector> z) {
  check_points(z);
  const std::size_t k = z.size();
  const std::size_t dim = z.front().size();
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j) {
      double s = 0.0;
      for (std::size_t d = 0; d < dim; ++d) s += (z[i][d] - z[j][d]) * (z[i][d] - z[j][d]);
      total += std::sqrt(s);
    }
  return total / (static_cast<double>(k) * static_cast<double>(k - 1) / 2.0);
}

std::vector<Sample> subsample(std::span<const Sample> samples, std::size_t k, std::uint64_t seed) {
  if (samples.size() < k) throw InsufficientSamples("need " + std::to_string(k) + " samples, have " +
                                                    std::to_string(samples.size()));
  if (samples.size() == k) return {samples.begin(), samples.end()};
  std::vector<std::size_t> idx(samples.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  for (std::size_t j = 0; j < k; ++j)
    std::swap(idx[j], idx[std::uniform_int_distribution<std::size_t>(j, idx.size() - 1)(rng)]);
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  std::vector<Sample> out;
  out.reserve(k);
  for (auto i : idx) out.push_back(samples[i]);
  return out;
}

AttackFeatures features_from_embeddings(std::string user_id, std::span<const Vector> embeddings,
                                        std::string encoder_id) {
  return AttackFeatures{std::move(user_id), center_distance(embeddings), pairwise_distance(embeddings),
                        embeddings.size(), std::move(encoder_id)};
}

AttackFeatures extract_features(const Encoder& encoder, std::string user_id, std::span<const Sample> samples,
                                std::size_t k, std::uint64_t seed, std::string encoder_id) {
  if (k < 2) throw InvalidArgument("feature sample count k must be at least 2");
  if (samples.size() < k)
    throw InsufficientSamples("user " + user_id + " has " + std::to_string(samples.size()) + " samples, k=" +
                              std::to_string(k) + " required");
  const auto chosen = subsample(samples, k, seed);
  const auto z = embed_samples(encoder, chosen);
  return features_from_embeddings(std::move(user_id), z, std::move(encoder_id));
}

AttackFeatures extract_features(const Encoder& encoder, const UserCluster& cluster, std::size_t k,
                                std::uint64_t seed, std::string encoder_id) {
  return extract_features(encoder, cluster.user_id, cluster.samples, k, seed, std::move(encoder_id));
}

std::string to_string(MembershipLabel label) {
  switch (label) {
    case MembershipLabel::member:
      return "member";
    case MembershipLabel::nonmember:
      return "nonmember";
    default:
      return "unknown";
  }
}

MembershipLabel label_from_string(const std::string& s) {
  if (s == "member") return MembershipLabel::member;
  if (s == "nonmember") return MembershipLabel::nonmember;
  if (s == "unknown") return MembershipLabel::unknown;
  throw InvalidArgument("unknown membership label '" + s + "'");
}

void write_feature_cache(std::span<const FeatureRow> rows, std::ostream& out) {
  out << "user_id,encoder_id,k_used,c_u,p_u,label\n";
  for (const auto& r : rows)
    out << r.features.user_id << ',' << r.features.encoder_id << ',' << r.features.k_used << ','
        << format_double(r.features.c_u) << ',' << format_double(r.features.p_u) << ',' << to_string(r.label) << '\n';
}

std::vector<FeatureRow> read_feature_cache(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("user_id,encoder_id,k_used,c_u,p_u,label", 0) != 0)
    throw ParseError("feature cache header missing", 1);
  std::vector<FeatureRow> rows;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 6) throw ParseError("expected 6 fields", row);
    FeatureRow r;
    r.features.user_id = f[0];
    r.features.encoder_id = f[1];
    r.features.k_used = static_cast<std::size_t>(parse_double(f[2], row));
    r.features.c_u = parse_double(f[3], row);
    r.features.p_u = parse_double(f[4], row);
    try {
      r.label = label_from_string(f[5]);
    } catch (const InvalidArgument& e) {
      throw ParseError(e.what(), row);
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace mi_embed

#include "mi_embed/attack.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "mi_embed/errors.hpp"
#include "mi_embed/rng.hpp"

namespace mi_embed {

namespace {

double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

std::string to_string(FeatureMode mode) {
  switch (mode) {
    case FeatureMode::c_only:
      return "c_only";
    case FeatureMode::p_only:
      return "p_only";
    default:
      return "both";
  }
}

FeatureMode feature_mode_from_string(const std::string& s) {
  if (s == "c" || s == "c_only") return FeatureMode::c_only;
  if (s == "p" || s == "p_only") return FeatureMode::p_only;
  if (s == "both") return FeatureMode::both;
  throw InvalidArgument("unknown feature mode '" + s + "'");
}

std::size_t feature_count(FeatureMode mode) { return mode == FeatureMode::both ? 2 : 1; }

Vector select_features(const AttackFeatures& f, FeatureMode mode) {
  switch (mode) {
    case FeatureMode::c_only:
      return {f.c_u};
    case FeatureMode::p_only:
      return {f.p_u};
    default:
      return {f.c_u, f.p_u};
  }
}

Vector AttackModel::standardize(const AttackFeatures& f) const {
  Vector x = select_features(f, mode);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = (x[i] - mean[i]) / stddev[i];
  return x;
}

LossAndGradients logistic_loss(const DenseNet& net, std::span<const Vector> inputs, std::span<const double> labels) {
  if (inputs.size() != labels.size() || inputs.empty()) throw DimensionError("need one label per input row");
  if (net.output_dim() != 1) throw DimensionError("attack network must emit a single logit");
  LossAndGradients out{0.0, Gradients::zeros_like(net)};
  const double inv_n = 1.0 / static_cast<double>(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto cache = forward_cached(net, inputs[i]);
    const double s = cache.output[0];
    out.loss += (softplus(s) - labels[i] * s) * inv_n;
    const double g = (sigmoid(s) - labels[i]) * inv_n;
    out.grads += backward(net, cache, std::span<const double>(&g, 1));
  }
  return out;
}

AttackModel train_attack(const AttackDataset& data, FeatureMode mode, const AttackHyperparams& hp,
                         std::uint64_t seed) {
  if (data.rows.size() < 10) throw SizingError("attack training needs at least 10 rows");
  if (data.count(MembershipLabel::member) == 0 || data.count(MembershipLabel::nonmember) == 0)
    throw InvalidArgument("attack dataset must contain both member and nonmember rows");
  if (hp.batch_size == 0) throw InvalidArgument("batch size must be positive");

  const std::size_t n = data.rows.size();
  const std::size_t d = feature_count(mode);
  AttackModel model;
  model.mode = mode;
  model.mean.assign(d, 0.0);
  model.stddev.assign(d, 0.0);
  std::vector<Vector> raw(n);
  std::vector<double> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (data.rows[i].label == MembershipLabel::unknown) throw InvalidArgument("attack rows must be labeled");
    raw[i] = select_features(data.rows[i].features, mode);
    labels[i] = data.rows[i].label == MembershipLabel::member ? 1.0 : 0.0;
    for (std::size_t j = 0; j < d; ++j) model.mean[j] += raw[i][j] / static_cast<double>(n);
  }
  for (const auto& x : raw)
    for (std::size_t j = 0; j < d; ++j) model.stddev[j] += (x[j] - model.mean[j]) * (x[j] - model.mean[j]);
  for (auto& s : model.stddev) {
    s = std::sqrt(s / static_cast<double>(n));
    // A constant column carries no signal; leave it centered but unscaled.
    if (!(s > 0.0)) s = 1.0;
  }
  std::vector<Vector> inputs(n);
  for (std::size_t i = 0; i < n; ++i) inputs[i] = model.standardize(data.rows[i].features);

  std::vector<std::size_t> dims{d};
  dims.insert(dims.end(), hp.hidden.begin(), hp.hidden.end());
  dims.push_back(1);
  std::vector<Activation> acts(dims.size() - 1, Activation::relu);
  acts.back() = Activation::identity;
  model.net = DenseNet::initialize(dims, acts, derive_seed(seed, 0));

  Rng rng(derive_seed(seed, 1));
  SgdOptimizer optimizer(hp.lr, hp.momentum);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<Vector> batch_x;
  std::vector<double> batch_y;
  for (std::size_t epoch = 0; epoch < hp.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += hp.batch_size) {
      const std::size_t end = std::min(n, start + hp.batch_size);
      batch_x.clear();
      batch_y.clear();
      for (std::size_t i = start; i < end; ++i) {
        batch_x.push_back(inputs[order[i]]);
        batch_y.push_back(labels[order[i]]);
      }
      auto step = logistic_loss(model.net, batch_x, batch_y);
      if (!std::isfinite(step.loss))
        throw TrainingDiverged("attack training diverged at epoch " + std::to_string(epoch), static_cast<long>(epoch));
      try {
        optimizer.step(model.net, step.grads);
      } catch (const TrainingDiverged&) {
        throw TrainingDiverged("attack training diverged at epoch " + std::to_string(epoch), static_cast<long>(epoch));
      }
    }
  }
  return model;
}

double attack_score(const AttackModel& model, const AttackFeatures& features) {
  return forward(model.net, model.standardize(features))[0];
}

MembershipLabel attack_verdict(const AttackModel& model, double score) {
  return score > model.decision_threshold ? MembershipLabel::member : MembershipLabel::nonmember;
}

Inference infer_features(const AttackModel& model, const AttackFeatures& features) {
  const double score = attack_score(model, features);
  return Inference{attack_verdict(model, score), score, features};
}

Inference infer_user(const AttackModel& model, const Encoder& victim, const UserCluster& cluster, std::size_t k,
                     std::uint64_t seed) {
  return infer_features(model, extract_features(victim, cluster, k, seed, "victim"));
}

nlohmann::json to_json(const AttackModel& model) {
  nlohmann::json j;
  j["format_version"] = kCheckpointFormatVersion;
  j["feature_mode"] = to_string(model.mode);
  j["mean"] = model.mean;
  j["stddev"] = model.stddev;
  // JSON has no infinity; store the threshold as a string when it is not finite.
  if (std::isfinite(model.decision_threshold))
    j["decision_threshold"] = model.decision_threshold;
  else
    j["decision_threshold"] = model.decision_threshold > 0 ? "inf" : "-inf";
  j["net"] = to_json(model.net);
  return j;
}

AttackModel attack_model_from_json(const nlohmann::json& doc) {
  try {
    AttackModel m;
    m.mode = feature_mode_from_string(doc.at("feature_mode").get<std::string>());
    m.mean = doc.at("mean").get<Vector>();
    m.stddev = doc.at("stddev").get<Vector>();
    const auto& t = doc.at("decision_threshold");
    if (t.is_string())
      m.decision_threshold = t.get<std::string>() == "inf" ? std::numeric_limits<double>::infinity()
                                                          : -std::numeric_limits<double>::infinity();
    else
      m.decision_threshold = t.get<double>();
    m.net = net_from_json(doc.at("net"));
    const std::size_t d = feature_count(m.mode);
    if (m.mean.size() != d || m.stddev.size() != d || m.net.input_dim() != d || m.net.output_dim() != 1)
      throw DimensionError("attack checkpoint shapes do not match its feature mode");
    for (double s : m.stddev)
      if (!(s > 0.0)) throw InvalidArgument("attack checkpoint has a non-positive standard deviation");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed attack checkpoint: ") + e.what());
  }
}

void save_attack_model(const AttackModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << to_json(model).dump(2) << '\n';
}

AttackModel load_attack_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return attack_model_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidArgument("cannot parse " + path.string() + ": " + e.what());
  }
}

}  // namespace mi_embed

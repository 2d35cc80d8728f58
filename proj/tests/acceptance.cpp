// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "mi_embed/attack.hpp"
#include "mi_embed/embedding.hpp"
#include "mi_embed/experiment.hpp"
#include "mi_embed/features.hpp"
#include "mi_embed/rng.hpp"
#include "oracles.hpp"

using namespace mi_embed;

namespace {

const std::filesystem::path kConfigDir = MI_EMBED_CONFIG_DIR;

struct Outcome {
  bool pass;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double time_limit_s;  // 0: no limit
  std::function<Outcome()> check;
};

double mean_accuracy(const MetricsReport& r, const std::string& cell) {
  const auto* c = r.cell(cell);
  return c && c->accuracy.mean ? *c->accuracy.mean : NAN;
}

double mean_recall(const MetricsReport& r, const std::string& cell) {
  const auto* c = r.cell(cell);
  return c && c->recall.mean ? *c->recall.mean : NAN;
}

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), pattern, a, b, c);
  return buf;
}

// Main-experiment reports shared by the strength, baseline and determinism checks.
const MetricsReport& main_report() {
  static const MetricsReport report = run_experiment(load_config(kConfigDir / "desk.ini"));
  return report;
}

Outcome oracle_equivalence() {
  std::mt19937_64 rng(1);
  double worst = 0.0;
  for (int set = 0; set < 1000; ++set) {
    const std::size_t k = 2 + rng() % 63;
    const std::size_t dim = 1 + rng() % 32;
    const auto z = oracle::random_points(rng, k, dim);
    worst = std::max({worst, std::abs(center_distance(z) - oracle::center_distance(z)),
                      std::abs(pairwise_distance(z) - oracle::pairwise_distance(z))});
  }
  return {worst <= 1e-12, fmt("1000 sets, max abs deviation %.3g (tol 1e-12)", worst)};
}

Outcome sandwich() {
  std::mt19937_64 rng(2);
  std::size_t violations = 0;
  for (int set = 0; set < 10000; ++set) {
    const std::size_t k = 2 + rng() % 31;
    const std::size_t dim = 1 + rng() % 16;
    const double scale = std::exp(std::uniform_real_distribution<double>(-3.0, 3.0)(rng));
    const auto z = oracle::random_points(rng, k, dim, scale);
    const double c = center_distance(z), p = pairwise_distance(z);
    if (c > p + 1e-9 || p > 2.0 * c + 1e-9) ++violations;
  }
  return {violations == 0, fmt("10000 sets, %.0f violations of C <= P <= 2C (tol 1e-9)", violations)};
}

Outcome gradient_checks() {
  std::mt19937_64 rng(3);
  std::size_t instances = 0, failed_entries = 0, entries = 0;
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t P = 2 + trial % 3, K = 2 + (trial / 3) % 3, dim = 2 + trial % 5;
    std::vector<std::size_t> labels;
    for (std::size_t p = 0; p < P; ++p)
      for (std::size_t k = 0; k < K; ++k) labels.push_back(p);
    const auto z = oracle::random_points(rng, labels.size(), dim);
    const auto analytic = batch_hard_loss(z, labels).grads;
    std::vector<double> flat;
    for (const auto& v : z) flat.insert(flat.end(), v.begin(), v.end());
    const auto numeric = oracle::finite_difference(
        [&](const std::vector<double>& x) {
          std::vector<Vector> zz(labels.size(), Vector(dim));
          for (std::size_t i = 0; i < x.size(); ++i) zz[i / dim][i % dim] = x[i];
          return batch_hard_loss(zz, labels).loss;
        },
        flat);
    for (std::size_t i = 0; i < numeric.size(); ++i, ++entries)
      failed_entries += oracle::relative_error(analytic[i / dim][i % dim], numeric[i]) >= 1e-4;
    ++instances;
  }
  std::size_t resampled = 0;
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t d = 1 + trial % 2;
    const auto net =
        DenseNet::initialize({d, 16, 16, 1}, {Activation::relu, Activation::relu, Activation::identity}, rng());
    const auto inputs = oracle::random_points(rng, 12, d);
    // Central differences straddling a relu corner do not estimate a derivative.
    if (oracle::relu_margin(net, inputs) < 1e-3) {
      ++resampled;
      --trial;
      continue;
    }
    std::vector<double> labels;
    for (int i = 0; i < 12; ++i) labels.push_back(static_cast<double>(i % 2));
    const auto analytic = logistic_loss(net, inputs, labels).grads.flat();
    auto probe = net;
    const auto numeric = oracle::finite_difference(
        [&](const std::vector<double>& params) {
          probe.set_flat_parameters(params);
          return logistic_loss(probe, inputs, labels).loss;
        },
        net.flat_parameters());
    for (std::size_t i = 0; i < numeric.size(); ++i, ++entries)
      failed_entries += oracle::relative_error(analytic[i], numeric[i]) >= 1e-4;
    ++instances;
  }
  return {instances >= 50 && failed_entries == 0,
          fmt("%.0f instances, %.0f of %.0f gradient entries off by rel err >= 1e-4", static_cast<double>(instances),
              static_cast<double>(failed_entries), static_cast<double>(entries)) +
              fmt(", %.0f draws within 1e-3 of a relu corner redrawn", static_cast<double>(resampled))};
}

Outcome mining_equivalence() {
  std::mt19937_64 rng(4);
  std::size_t mismatches = 0;
  for (int batch = 0; batch < 200; ++batch) {
    const std::size_t P = 2 + rng() % 3, K = 2 + rng() % 3;
    std::vector<std::size_t> labels;
    for (std::size_t p = 0; p < P; ++p)
      for (std::size_t k = 0; k < K; ++k) labels.push_back(p);
    const auto z = oracle::random_points(rng, labels.size(), 1 + rng() % 6);
    const auto got = mine_batch_hard(z, labels);
    const auto want = oracle::batch_hard(z, labels);
    for (std::size_t a = 0; a < z.size(); ++a)
      mismatches += got[a].positive != want[a].positive || got[a].negative != want[a].negative ||
                    got[a].positive_distance != want[a].positive_distance ||
                    got[a].negative_distance != want[a].negative_distance;
  }
  return {mismatches == 0, fmt("200 batches with P,K <= 4, %.0f anchor mismatches", mismatches)};
}

Outcome compactness_effect() {
  const auto cfg = load_config(kConfigDir / "desk.ini");
  std::size_t wins = 0;
  std::string gaps;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto params = cfg.synthetic;
    params.seed = derive_seed(seed, streams::kData);
    const auto split = partition(generate_synthetic(params), 40, 40, 0.5, derive_seed(seed, streams::kSplit));
    auto tc = cfg.victim;
    tc.seed = derive_seed(seed, streams::kVictim);
    const auto victim = train_encoder(split.training_members, tc);
    auto mean_c = [&](const UserSamples& part) {
      double total = 0.0;
      for (const auto& [user, samples] : part)
        total += extract_features(victim, user, samples, cfg.k, derive_seed(seed, stable_hash(user))).c_u;
      return total / static_cast<double>(part.size());
    };
    const double member = mean_c(split.nontraining_members), nonmember = mean_c(split.nonmembers);
    wins += member < nonmember;
    gaps += fmt(" %.3f<%.3f", member, nonmember);
  }
  return {wins == 5, fmt("%.0f/5 seeds with mean C_u(non-training members) < mean C_u(non-members):", wins) + gaps};
}

Outcome attack_strength() {
  const double acc = mean_accuracy(main_report(), kCellAttack);
  return {main_report().complete() && acc >= 60.0, fmt("mean accuracy %.2f%% over 5 seeds (need >= 60)", acc)};
}

Outcome training_access_sweep() {
  const auto report = run_experiment(load_config(kConfigDir / "sweep.ini"));
  const double lo = mean_accuracy(report, proportion_cell(0.0)), hi = mean_accuracy(report, proportion_cell(1.0));
  return {report.complete() && hi - lo >= 5.0, fmt("accuracy 0%%: %.2f, 100%%: %.2f, gain %.2f points (need >= 5)",
                                                    lo, hi, hi - lo)};
}

Outcome ablation_shape() {
  const auto report = run_experiment(load_config(kConfigDir / "ablation.ini"));
  const double c = mean_accuracy(report, "c_only"), p = mean_accuracy(report, "p_only");
  const double both = mean_accuracy(report, "both");
  return {report.complete() && both >= std::max(c, p) - 2.0,
          fmt("both %.2f, C_u only %.2f, P_u only %.2f (need both >= max - 2)", both, c, p)};
}

Outcome group_recall_trend() {
  const auto cfg = load_config(kConfigDir / "group_recall.ini");
  const auto report = run_experiment(cfg);
  const double most = mean_recall(report, group_cell(0)), fewest = mean_recall(report, group_cell(cfg.groups - 1));
  return {report.complete() && most >= fewest,
          fmt("recall most-samples group %.2f, fewest-samples group %.2f (need most >= fewest)", most, fewest)};
}

Outcome baseline_gap() {
  const double attack = mean_accuracy(main_report(), kCellAttack);
  const double baseline = mean_accuracy(main_report(), kCellEncoderMiUnknown);
  return {main_report().complete() && baseline <= attack - 5.0,
          fmt("baseline (unknown augmentations) %.2f vs attack %.2f, gap %.2f points (need >= 5)", baseline, attack,
              attack - baseline)};
}

Outcome determinism() {
  const auto first = report_render(main_report(), ReportFormat::json);
  const auto second = report_render(run_experiment(load_config(kConfigDir / "desk.ini")), ReportFormat::json);
  return {first == second, fmt("rerun of the main experiment: %.0f vs %.0f bytes, ", first.size(), second.size()) +
                               (first == second ? "identical" : "different")};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "compactness oracle equivalence", 5, oracle_equivalence},
      {2, "sandwich property", 10, sandwich},
      {3, "gradient checks", 30, gradient_checks},
      {4, "batch-hard mining equivalence", 5, mining_equivalence},
      {5, "compactness effect", 180, compactness_effect},
      {6, "end-to-end attack strength", 600, attack_strength},
      {7, "training-access sweep", 900, training_access_sweep},
      {8, "feature ablation shape", 0, ablation_shape},
      {9, "group-recall trend", 0, group_recall_trend},
      {10, "baseline comparison", 0, baseline_gap},
      {11, "determinism", 0, determinism},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome{false, ""};
    try {
      outcome = c.check();
    } catch (const std::exception& e) {
      outcome = {false, std::string("error: ") + e.what()};
    }
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = c.time_limit_s == 0 || elapsed < c.time_limit_s;
    const bool pass = outcome.pass && in_time;
    failures += !pass;
    std::printf("%s [%2d] %s: %s; %.2f s%s\n", pass ? "PASS" : "FAIL", c.id, c.name.c_str(), outcome.detail.c_str(),
                elapsed, in_time ? "" : fmt(" exceeds %.0f s limit", c.time_limit_s).c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}

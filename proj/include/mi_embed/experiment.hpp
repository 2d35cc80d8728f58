#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mi_embed/attack.hpp"
#include "mi_embed/augment.hpp"
#include "mi_embed/dataset.hpp"
#include "mi_embed/embedding.hpp"
#include "mi_embed/metrics.hpp"
#include "mi_embed/shadow.hpp"

namespace mi_embed {

enum class ExperimentKind { main, training_access_sweep, ablation, group_recall };

std::string to_string(ExperimentKind kind);
ExperimentKind experiment_kind_from_string(const std::string& s);

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::main;
  std::size_t repeats = 5;
  std::uint64_t seed = 1;
  std::size_t k = 15;

  // Synthetic data unless csv_path is set.
  SyntheticParams synthetic;
  std::string csv_path;

  std::size_t n_members = 40;
  std::size_t n_nonmembers = 40;
  double within_user_split = 0.5;

  // Shadows reuse the victim architecture and training settings.
  TrainingConfig victim;
  std::size_t n_shadows = 10;
  std::size_t shadow_member_users = 40;
  std::size_t shadow_nonmember_users = 40;

  AttackHyperparams attack;
  FeatureMode feature_mode = FeatureMode::both;

  bool baseline = true;
  AugmentationSpec unknown_augmentations;

  std::vector<double> proportions = {0.0, 0.25, 0.5, 0.75, 1.0};
  std::size_t groups = 5;
  std::size_t workers = 0;

  void validate() const;
};

ExperimentConfig default_experiment_config();

/// Flat `key = value` text with [sections]. Unknown keys are rejected.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Fully resolved config in the same format; parse_config(render_config(c)) == c.
std::string render_config(const ExperimentConfig& config);

ShadowConfig shadow_config(const ExperimentConfig& config, std::uint64_t master_seed);

struct RepeatResult {
  std::size_t repeat = 0;
  std::optional<double> accuracy;
  std::optional<double> precision;
  std::optional<double> recall;
  std::string detail;

  bool operator==(const RepeatResult&) const = default;
};

struct ReportCell {
  std::string name;
  std::vector<RepeatResult> per_repeat;
  Aggregate accuracy;
  Aggregate precision;
  Aggregate recall;
  bool complete = true;

  bool operator==(const ReportCell&) const = default;
};

struct RepeatStatus {
  std::size_t repeat = 0;
  std::uint64_t seed = 0;
  bool ok = true;
  std::string error;

  bool operator==(const RepeatStatus&) const = default;
};

struct MetricsReport {
  std::string experiment;
  std::string config;
  std::vector<std::uint64_t> seeds;
  std::vector<RepeatStatus> repeats;
  std::vector<ReportCell> cells;

  bool complete() const;
  const ReportCell* cell(const std::string& name) const;

  bool operator==(const MetricsReport&) const = default;
};

/// Seed of repeat r; every stage of that repeat derives its stream from it.
std::uint64_t repeat_seed(std::uint64_t base, std::size_t repeat);

MetricsReport run_experiment(const ExperimentConfig& config);

enum class ReportFormat { json, table };

ReportFormat report_format_from_string(const std::string& s);
std::string report_render(const MetricsReport& report, ReportFormat format);
MetricsReport report_from_json(const nlohmann::json& doc);

// Cell names used by the experiment kinds.
inline constexpr const char* kCellAttack = "user_level_mia";
inline constexpr const char* kCellEncoderMiUnknown = "encodermi_unknown_augmentations";
inline constexpr const char* kCellEncoderMiFull = "encodermi_full_knowledge";
std::string proportion_cell(double proportion);
std::string group_cell(std::size_t group);

}  // namespace mi_embed

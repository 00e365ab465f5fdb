#pragma once

#include "meta.hpp"
#include "metrics.hpp"
#include "policy.hpp"
#include "safety.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ldg {

inline constexpr const char* kVersion = "1.0.0";
inline constexpr const char* kConfigSchema = "lazydagger-experiment/1";
inline constexpr const char* kSummarySchema = "lazydagger-summary/1";
inline constexpr const char* kCsvSchema = "lazydagger-epochs/1";
inline constexpr const char* kManifestSchema = "lazydagger-manifest/1";

enum class AlgorithmVariant {
  BehaviorCloning,
  DAgger,
  SafeDAgger,
  LazyDAgger,
  SafeDAggerExecution,
  LazyDAggerExecution,
};

std::string_view to_string(AlgorithmVariant v);
std::optional<AlgorithmVariant> variant_from_string(std::string_view name);
Algorithm base_algorithm(AlgorithmVariant v);
bool is_execution_variant(AlgorithmVariant v);

/// tau_sup is either a fixed fraction of the maximum action discrepancy or
/// calibrated after pretraining so that a target fraction of the offline data
/// is labelled unsafe.
struct TauSupSpec {
  std::optional<double> fraction;
  std::optional<double> calibrate_target;
};

/// tau_auto is a fixed fraction, or a multiple of the resolved tau_sup.
struct TauAutoSpec {
  std::optional<double> fraction;
  std::optional<double> ratio;
};

struct NetworkConfig {
  std::vector<std::size_t> hidden;
  TrainConfig train;
};

inline TrainConfig default_training() {
  TrainConfig t;
  t.gradient_steps_per_epoch = 2000;
  return t;
}

struct RemoteSupervisorConfig {
  std::string bind = "127.0.0.1";
  int port = 7070;
  int health_port = 7071;
  std::string session = "default";
  std::string token;
  double timeout_s = 120.0;
  int decimation = 10;
};

struct ExperimentConfig {
  std::string environment_id = "point_goal_2d";
  nlohmann::json environment_params = nlohmann::json::object();
  std::vector<AlgorithmVariant> algorithms{AlgorithmVariant::LazyDAgger};
  std::size_t offline_pairs = 4000;
  double policy_fraction = 0.7;
  int bc_pretrain_epochs = 5;
  int epochs = 10;            // N
  int steps_per_epoch = 1000; // T
  TauSupSpec tau_sup{std::nullopt, 0.2};
  TauAutoSpec tau_auto{std::nullopt, 0.5};
  double sigma2 = 0.05;
  std::optional<bool> update_policy;  // unset: true, or false for execution variants
  std::vector<double> latency_grid{0.0, 1.0, 2.0, 5.0, 10.0};
  std::vector<std::uint64_t> seeds{0, 1, 2};
  std::optional<double> burden_budget;  // reported, never enforced
  int test_rollouts = 10;
  std::optional<std::size_t> bc_extra_pairs;  // unset: match LazyDAgger's mean online pairs
  NetworkConfig policy{{64, 64}, default_training()};
  NetworkConfig classifier{{32, 32}, default_training()};
  std::optional<RemoteSupervisorConfig> remote_supervisor;
  std::string output_dir = "runs/experiment";

  bool updates_policy(AlgorithmVariant v) const;
};

/// Parses and validates a JSON document. Every problem is reported with its
/// field path in one ConfigError.
ExperimentConfig validate_config(const std::string& text);
ExperimentConfig config_from_json(const nlohmann::json& doc);

/// The fully resolved configuration with every default spelled out.
nlohmann::json to_json(const ExperimentConfig& config);

struct ResolvedThresholds {
  ThresholdPair fraction;  // of the maximum action discrepancy
  ThresholdPair absolute;
  std::optional<Calibration> calibration;
};

/// Offline data, the pretrained policy and classifier, and the thresholds
/// shared by every algorithm run with one seed.
struct Pretrained {
  Dataset offline;
  Dataset policy_data;
  Dataset safe_data;
  RobotPolicy policy;
  DiscrepancyClassifier classifier;
  ResolvedThresholds thresholds;
  bool classifier_single_class = false;
};

Pretrained pretrain(const ExperimentConfig& config, const Environment& env, std::uint64_t seed);

struct EpochRow {
  int epoch = 0;
  double test_success_rate = 0.0;
  double mean_test_return = 0.0;
  std::size_t switches_total = 0;
  std::size_t supervisor_actions_total = 0;
};

struct SeedRun {
  AlgorithmVariant variant{};
  std::uint64_t seed = 0;
  std::vector<EpochRow> rows;
  BurdenReport train_report;
  std::size_t online_pairs = 0;
  std::size_t dataset_size = 0;
  std::string initial_policy_hash;
  std::string final_policy_hash;
  bool test_purity = true;
  std::filesystem::path directory;
};

struct RunManifest {
  nlohmann::json resolved_config;
  std::string input_hash;
  std::vector<std::uint64_t> seeds;
  nlohmann::json thresholds;  // per seed
  nlohmann::json budgets;     // label budgets per algorithm
  std::string version = kVersion;
  double wall_clock_s = 0.0;
  std::filesystem::path output_dir;
  std::vector<SeedRun> runs;

  nlohmann::json to_json() const;
};

struct RunOptions {
  bool resume = false;
  std::optional<std::filesystem::path> output_dir;
};

/// Pretraining, every configured algorithm for every seed, per-epoch test
/// rollouts, and all artifacts under the output directory.
RunManifest run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

/// CSV text for a list of epoch rows (header first).
std::string epochs_csv(const std::vector<EpochRow>& rows, std::span<const double> latency_grid);

/// Writes episodes.jsonl and summary.json for a set of logs; used for
/// algorithm runs and for hand-built comparison inputs.
void write_run_summary(const std::filesystem::path& dir, std::span<const EpisodeLog> logs,
                       const nlohmann::json& extra = nlohmann::json::object());

/// Burden table, cutoff latency and switch/action ratios between two run
/// directories, treating the first as the candidate whose burden should be
/// lower.
nlohmann::json compare(const std::filesystem::path& run_a, const std::filesystem::path& run_b,
                       std::span<const double> latency_grid);

/// Pretrains with the configured seed and reports the calibrated tau_sup.
nlohmann::json calibrate(const ExperimentConfig& config, std::uint64_t seed, double target);

}  // namespace ldg

#pragma once

#include "episode_log.hpp"
#include "types.hpp"

#include <json.hpp>

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ldg {

/// Context switches in one episode: unequal adjacent modes plus a closing
/// switch when the episode ends under supervision.
std::size_t count_switches(std::span<const Mode> episode);

/// Supervisor-mode steps in one episode.
std::size_t count_supervisor_actions(std::span<const Mode> episode);

/// Lengths of the maximal supervisor runs in one episode.
std::vector<std::size_t> intervention_lengths(std::span<const Mode> episode);

std::vector<Mode> modes_of(const EpisodeLog& log);

/// B = L * C + D, in supervisor-action time units.
double burden(double switches, double supervisor_actions, double latency);

struct BurdenCounts {
  double switches = 0.0;            // C
  double supervisor_actions = 0.0;  // D
};

struct CutoffLatency {
  std::optional<double> value;
  std::string reason;  // set when value is empty

  bool defined() const { return value.has_value(); }
};

/// Latency above which the first report's burden is lower than the second's.
CutoffLatency cutoff_latency(const BurdenCounts& lazy, const BurdenCounts& safe);

struct EpochBurden {
  int epoch = 0;
  std::size_t switches = 0;
  std::size_t supervisor_actions = 0;
  std::size_t interventions = 0;
};

struct BurdenReport {
  std::size_t episodes = 0;
  std::size_t switches = 0;            // C, summed over episodes
  std::size_t supervisor_actions = 0;  // D, summed over episodes
  std::vector<std::size_t> intervention_lengths;
  std::size_t successes = 0;
  double total_return = 0.0;
  std::vector<EpochBurden> per_epoch;

  std::size_t interventions() const { return intervention_lengths.size(); }
  double mean_intervention_length() const;
  double success_rate() const;
  double mean_return() const;
  double switches_per_episode() const;
  double supervisor_actions_per_episode() const;
  BurdenCounts counts() const {
    return {static_cast<double>(switches), static_cast<double>(supervisor_actions)};
  }
  double burden_at(double latency) const {
    return burden(static_cast<double>(switches), static_cast<double>(supervisor_actions),
                  latency);
  }
};

/// Throws SchemaError naming the first malformed episode.
void validate_log(const EpisodeLog& log);

BurdenReport summarize(std::span<const EpisodeLog> logs);

nlohmann::json to_json(const BurdenReport& report, std::span<const double> latency_grid,
                       std::optional<double> burden_budget = std::nullopt);
nlohmann::json to_json(const CutoffLatency& cutoff);

}  // namespace ldg

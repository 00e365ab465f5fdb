#include "metrics.hpp"

#include "errors.hpp"

#include <algorithm>
#include <map>
#include <numeric>

namespace ldg {

std::size_t count_switches(std::span<const Mode> episode) {
  std::size_t switches = 0;
  for (std::size_t i = 1; i < episode.size(); ++i) {
    if (episode[i] != episode[i - 1]) ++switches;
  }
  // An episode that starts under supervision still begins with a hand-off.
  if (!episode.empty() && episode.front() == Mode::Supervisor) ++switches;
  if (!episode.empty() && episode.back() == Mode::Supervisor) ++switches;
  return switches;
}

std::size_t count_supervisor_actions(std::span<const Mode> episode) {
  return static_cast<std::size_t>(std::count(episode.begin(), episode.end(), Mode::Supervisor));
}

std::vector<std::size_t> intervention_lengths(std::span<const Mode> episode) {
  std::vector<std::size_t> lengths;
  std::size_t run = 0;
  for (Mode m : episode) {
    if (m == Mode::Supervisor) {
      ++run;
    } else if (run > 0) {
      lengths.push_back(run);
      run = 0;
    }
  }
  if (run > 0) lengths.push_back(run);
  return lengths;
}

std::vector<Mode> modes_of(const EpisodeLog& log) {
  std::vector<Mode> modes;
  modes.reserve(log.records.size());
  for (const auto& r : log.records) modes.push_back(r.mode);
  return modes;
}

double burden(double switches, double supervisor_actions, double latency) {
  if (switches < 0.0 || supervisor_actions < 0.0 || latency < 0.0) {
    throw ContractViolation("burden: counts and latency must be non-negative");
  }
  return latency * switches + supervisor_actions;
}

CutoffLatency cutoff_latency(const BurdenCounts& lazy, const BurdenCounts& safe) {
  CutoffLatency out;
  const double dc = safe.switches - lazy.switches;
  const double dd = lazy.supervisor_actions - safe.supervisor_actions;
  if (dc > 0.0) {
    out.value = std::max(0.0, dd / dc);
  } else if (dd >= 0.0) {
    out.reason = "first run never has fewer context switches and uses at least as many "
                 "supervisor actions; its burden is never lower";
  } else {
    out.value = 0.0;
  }
  return out;
}

double BurdenReport::mean_intervention_length() const {
  if (intervention_lengths.empty()) return 0.0;
  const auto total =
      std::accumulate(intervention_lengths.begin(), intervention_lengths.end(), std::size_t{0});
  return static_cast<double>(total) / static_cast<double>(intervention_lengths.size());
}

double BurdenReport::success_rate() const {
  return episodes == 0 ? 0.0 : static_cast<double>(successes) / static_cast<double>(episodes);
}

double BurdenReport::mean_return() const {
  return episodes == 0 ? 0.0 : total_return / static_cast<double>(episodes);
}

double BurdenReport::switches_per_episode() const {
  return episodes == 0 ? 0.0 : static_cast<double>(switches) / static_cast<double>(episodes);
}

double BurdenReport::supervisor_actions_per_episode() const {
  return episodes == 0 ? 0.0
                       : static_cast<double>(supervisor_actions) / static_cast<double>(episodes);
}

void validate_log(const EpisodeLog& log) {
  const std::string where = "episode " + std::to_string(log.episode) + " (epoch " +
                            std::to_string(log.epoch) + ")";
  for (std::size_t i = 0; i < log.records.size(); ++i) {
    const auto& r = log.records[i];
    if (i > 0 && r.t <= log.records[i - 1].t) {
      throw SchemaError(where + ": timesteps not strictly increasing at record " +
                        std::to_string(i));
    }
    if (r.supervisor_action.has_value() != r.discrepancy.has_value()) {
      throw SchemaError(where + ": discrepancy recorded without a supervisor action at t=" +
                        std::to_string(r.t));
    }
    if ((r.mode == Mode::Supervisor) != r.supervisor_action.has_value()) {
      throw SchemaError(where + ": supervisor action presence disagrees with mode at t=" +
                        std::to_string(r.t));
    }
  }
}

BurdenReport summarize(std::span<const EpisodeLog> logs) {
  BurdenReport report;
  std::map<int, EpochBurden> epochs;
  for (const auto& log : logs) {
    validate_log(log);
    const auto modes = modes_of(log);
    const std::size_t c = count_switches(modes);
    const std::size_t d = count_supervisor_actions(modes);
    const auto lengths = intervention_lengths(modes);
    report.episodes += 1;
    report.switches += c;
    report.supervisor_actions += d;
    report.intervention_lengths.insert(report.intervention_lengths.end(), lengths.begin(),
                                       lengths.end());
    report.successes += log.success ? 1 : 0;
    report.total_return += log.total_return;
    auto& e = epochs[log.epoch];
    e.epoch = log.epoch;
    e.switches += c;
    e.supervisor_actions += d;
    e.interventions += lengths.size();
  }
  for (const auto& [_, e] : epochs) report.per_epoch.push_back(e);
  return report;
}

nlohmann::json to_json(const BurdenReport& r, std::span<const double> latency_grid,
                       std::optional<double> burden_budget) {
  nlohmann::json burden_table = nlohmann::json::array();
  for (double l : latency_grid) {
    nlohmann::json row{{"L", l}, {"B", r.burden_at(l)}};
    if (burden_budget) row["within_budget"] = r.burden_at(l) <= *burden_budget;
    burden_table.push_back(row);
  }
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : r.per_epoch) {
    epochs.push_back({{"epoch", e.epoch},
                      {"C", e.switches},
                      {"D", e.supervisor_actions},
                      {"interventions", e.interventions}});
  }
  nlohmann::json j{{"episodes", r.episodes},
                   {"C", r.switches},
                   {"D", r.supervisor_actions},
                   {"interventions", r.interventions()},
                   {"intervention_lengths", r.intervention_lengths},
                   {"mean_intervention_length", r.mean_intervention_length()},
                   {"C_per_episode", r.switches_per_episode()},
                   {"D_per_episode", r.supervisor_actions_per_episode()},
                   {"success_rate", r.success_rate()},
                   {"mean_return", r.mean_return()},
                   {"burden", burden_table},
                   {"per_epoch", epochs}};
  if (burden_budget) j["burden_budget"] = *burden_budget;
  return j;
}

nlohmann::json to_json(const CutoffLatency& cutoff) {
  if (cutoff.defined()) return {{"defined", true}, {"value", *cutoff.value}};
  return {{"defined", false}, {"reason", cutoff.reason}};
}

}  // namespace ldg

#pragma once

#include "types.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ldg {

/// One timestep of a rollout under the meta-controller.
struct StepRecord {
  int t = 0;
  Mode mode = Mode::Autonomous;
  EnvState state;
  EnvAction robot_action;
  EnvAction executed_action;
  std::optional<double> f_prediction;
  std::optional<EnvAction> supervisor_action;  // present iff the supervisor was queried
  std::optional<double> discrepancy;           // present iff supervisor_action is
  std::int64_t wall_ns = 0;                    // monotonic clock; ignored by equality

  bool same_trace(const StepRecord& other) const;
};

struct EpisodeLog {
  enum class Phase { Train, Test };

  Phase phase = Phase::Train;
  int epoch = 0;
  int episode = 0;  // index within the run (train) or within the epoch (test)
  std::uint64_t seed = 0;
  std::vector<StepRecord> records;
  bool success = false;
  bool collision = false;
  bool truncated = false;  // cut off by the epoch's step budget rather than done
  double total_return = 0.0;

  bool same_trace(const EpisodeLog& other) const;
};

nlohmann::json to_json(const StepRecord& r);
StepRecord step_record_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const EpisodeLog& log);
EpisodeLog episode_log_from_json(const nlohmann::json& doc);

}  // namespace ldg

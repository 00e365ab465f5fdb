#include "episode_log.hpp"

#include "errors.hpp"

namespace ldg {

namespace {

nlohmann::json vec(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector vec_from(const nlohmann::json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

bool StepRecord::same_trace(const StepRecord& o) const {
  return t == o.t && mode == o.mode && state == o.state && robot_action == o.robot_action &&
         executed_action == o.executed_action && f_prediction == o.f_prediction &&
         supervisor_action == o.supervisor_action && discrepancy == o.discrepancy;
}

bool EpisodeLog::same_trace(const EpisodeLog& o) const {
  if (phase != o.phase || epoch != o.epoch || episode != o.episode || seed != o.seed ||
      success != o.success || collision != o.collision || truncated != o.truncated ||
      total_return != o.total_return || records.size() != o.records.size()) {
    return false;
  }
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!records[i].same_trace(o.records[i])) return false;
  }
  return true;
}

nlohmann::json to_json(const StepRecord& r) {
  nlohmann::json j{{"t", r.t},
                   {"mode", to_string(r.mode)},
                   {"state", vec(r.state.values)},
                   {"robot_action", vec(r.robot_action.values)},
                   {"executed_action", vec(r.executed_action.values)},
                   {"wall_ns", r.wall_ns}};
  j["f"] = r.f_prediction ? nlohmann::json(*r.f_prediction) : nlohmann::json(nullptr);
  j["supervisor_action"] =
      r.supervisor_action ? vec(r.supervisor_action->values) : nlohmann::json(nullptr);
  j["discrepancy"] = r.discrepancy ? nlohmann::json(*r.discrepancy) : nlohmann::json(nullptr);
  return j;
}

StepRecord step_record_from_json(const nlohmann::json& j) {
  StepRecord r;
  r.t = j.at("t").get<int>();
  r.mode = mode_from_string(j.at("mode").get<std::string>());
  r.state.values = vec_from(j.at("state"));
  r.robot_action.values = vec_from(j.at("robot_action"));
  r.executed_action.values = vec_from(j.at("executed_action"));
  r.wall_ns = j.value("wall_ns", std::int64_t{0});
  if (!j.at("f").is_null()) r.f_prediction = j.at("f").get<double>();
  if (!j.at("supervisor_action").is_null()) {
    r.supervisor_action = EnvAction{vec_from(j.at("supervisor_action"))};
  }
  if (!j.at("discrepancy").is_null()) r.discrepancy = j.at("discrepancy").get<double>();
  return r;
}

nlohmann::json to_json(const EpisodeLog& log) {
  nlohmann::json records = nlohmann::json::array();
  for (const auto& r : log.records) records.push_back(to_json(r));
  return {{"phase", log.phase == EpisodeLog::Phase::Train ? "train" : "test"},
          {"epoch", log.epoch},
          {"episode", log.episode},
          {"seed", log.seed},
          {"success", log.success},
          {"collision", log.collision},
          {"truncated", log.truncated},
          {"return", log.total_return},
          {"records", records}};
}

EpisodeLog episode_log_from_json(const nlohmann::json& j) {
  try {
    EpisodeLog log;
    const auto phase = j.at("phase").get<std::string>();
    if (phase != "train" && phase != "test") throw SchemaError("unknown phase " + phase);
    log.phase = phase == "train" ? EpisodeLog::Phase::Train : EpisodeLog::Phase::Test;
    log.epoch = j.at("epoch").get<int>();
    log.episode = j.at("episode").get<int>();
    log.seed = j.at("seed").get<std::uint64_t>();
    log.success = j.at("success").get<bool>();
    log.collision = j.at("collision").get<bool>();
    log.truncated = j.at("truncated").get<bool>();
    log.total_return = j.at("return").get<double>();
    for (const auto& r : j.at("records")) log.records.push_back(step_record_from_json(r));
    return log;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("episode log: ") + e.what());
  }
}

}  // namespace ldg

#include "harness.hpp"

#include "digest.hpp"
#include "errors.hpp"
#include "service.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <numeric>
#include <set>
#include <sstream>

namespace ldg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::pair<AlgorithmVariant, std::string_view> kVariantNames[] = {
    {AlgorithmVariant::BehaviorCloning, "bc"},
    {AlgorithmVariant::DAgger, "dagger"},
    {AlgorithmVariant::SafeDAgger, "safedagger"},
    {AlgorithmVariant::LazyDAgger, "lazydagger"},
    {AlgorithmVariant::SafeDAggerExecution, "safedagger-exec"},
    {AlgorithmVariant::LazyDAggerExecution, "lazydagger-exec"},
};

}  // namespace

std::string_view to_string(AlgorithmVariant v) {
  for (const auto& [variant, name] : kVariantNames) {
    if (variant == v) return name;
  }
  return "unknown";
}

std::optional<AlgorithmVariant> variant_from_string(std::string_view name) {
  for (const auto& [variant, n] : kVariantNames) {
    if (n == name) return variant;
  }
  return std::nullopt;
}

Algorithm base_algorithm(AlgorithmVariant v) {
  switch (v) {
    case AlgorithmVariant::BehaviorCloning: return Algorithm::BehaviorCloning;
    case AlgorithmVariant::DAgger: return Algorithm::DAgger;
    case AlgorithmVariant::SafeDAgger:
    case AlgorithmVariant::SafeDAggerExecution: return Algorithm::SafeDAgger;
    case AlgorithmVariant::LazyDAgger:
    case AlgorithmVariant::LazyDAggerExecution: return Algorithm::LazyDAgger;
  }
  return Algorithm::LazyDAgger;
}

bool is_execution_variant(AlgorithmVariant v) {
  return v == AlgorithmVariant::SafeDAggerExecution || v == AlgorithmVariant::LazyDAggerExecution;
}

bool ExperimentConfig::updates_policy(AlgorithmVariant v) const {
  if (is_execution_variant(v)) return false;
  return update_policy.value_or(true);
}

// Config parsing ---------------------------------------------------------------

namespace {

class Reader {
 public:
  explicit Reader(std::vector<std::string>& errors) : errors_(errors) {}

  void error(const std::string& path, const std::string& message) {
    errors_.push_back(path + ": " + message);
  }

  void reject_unknown(const json& obj, const std::string& path,
                      std::initializer_list<std::string_view> known) {
    for (const auto& [key, value] : obj.items()) {
      if (std::find(known.begin(), known.end(), key) == known.end()) {
        error(path.empty() ? key : path + "." + key, "unknown field");
      }
    }
  }

  std::optional<double> number(const json& obj, const std::string& key, const std::string& path) {
    if (!obj.contains(key)) return std::nullopt;
    const auto& v = obj.at(key);
    if (!v.is_number()) {
      error(path, "expected a number");
      return std::nullopt;
    }
    const double d = v.get<double>();
    if (!std::isfinite(d)) {
      error(path, "must be finite");
      return std::nullopt;
    }
    return d;
  }

  std::optional<std::int64_t> integer(const json& obj, const std::string& key,
                                      const std::string& path, std::int64_t min) {
    if (!obj.contains(key)) return std::nullopt;
    const auto& v = obj.at(key);
    if (!v.is_number_integer()) {
      error(path, "expected an integer");
      return std::nullopt;
    }
    const auto i = v.get<std::int64_t>();
    if (i < min) {
      error(path, "must be >= " + std::to_string(min));
      return std::nullopt;
    }
    return i;
  }

  std::optional<bool> boolean(const json& obj, const std::string& key, const std::string& path) {
    if (!obj.contains(key)) return std::nullopt;
    if (!obj.at(key).is_boolean()) {
      error(path, "expected true or false");
      return std::nullopt;
    }
    return obj.at(key).get<bool>();
  }

  std::optional<std::string> string(const json& obj, const std::string& key,
                                    const std::string& path) {
    if (!obj.contains(key)) return std::nullopt;
    if (!obj.at(key).is_string()) {
      error(path, "expected a string");
      return std::nullopt;
    }
    return obj.at(key).get<std::string>();
  }

 private:
  std::vector<std::string>& errors_;
};

// "calibrate:0.2" or "ratio:0.5" style values.
std::optional<double> prefixed(const std::string& text, std::string_view prefix) {
  if (text.rfind(prefix, 0) != 0) return std::nullopt;
  const std::string rest = text.substr(prefix.size());
  try {
    std::size_t used = 0;
    const double v = std::stod(rest, &used);
    if (used != rest.size()) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

void read_network(Reader& r, const json& doc, const std::string& path, NetworkConfig& net) {
  if (!doc.is_object()) {
    r.error(path, "expected an object");
    return;
  }
  r.reject_unknown(doc, path,
                   {"hidden", "learning_rate", "batch_size", "gradient_steps_per_epoch",
                    "l2_coefficient", "optimizer"});
  if (doc.contains("hidden")) {
    const auto& h = doc.at("hidden");
    if (!h.is_array() || h.empty()) {
      r.error(path + ".hidden", "expected a nonempty list of layer widths");
    } else {
      net.hidden.clear();
      for (std::size_t i = 0; i < h.size(); ++i) {
        if (!h[i].is_number_integer() || h[i].get<std::int64_t>() < 1) {
          r.error(path + ".hidden[" + std::to_string(i) + "]", "expected a positive integer");
        } else {
          net.hidden.push_back(h[i].get<std::size_t>());
        }
      }
    }
  }
  if (auto v = r.number(doc, "learning_rate", path + ".learning_rate")) {
    if (*v <= 0.0) r.error(path + ".learning_rate", "must be > 0");
    net.train.learning_rate = *v;
  }
  if (auto v = r.integer(doc, "batch_size", path + ".batch_size", 1)) {
    net.train.batch_size = static_cast<std::size_t>(*v);
  }
  if (auto v = r.integer(doc, "gradient_steps_per_epoch", path + ".gradient_steps_per_epoch", 0)) {
    net.train.gradient_steps_per_epoch = static_cast<std::size_t>(*v);
  }
  if (auto v = r.number(doc, "l2_coefficient", path + ".l2_coefficient")) {
    if (*v < 0.0) r.error(path + ".l2_coefficient", "must be >= 0");
    net.train.l2_coefficient = *v;
  }
  if (auto v = r.string(doc, "optimizer", path + ".optimizer")) {
    if (*v == "adam") {
      net.train.optimizer = nn::OptimizerKind::Adam;
    } else if (*v == "sgd") {
      net.train.optimizer = nn::OptimizerKind::Sgd;
    } else {
      r.error(path + ".optimizer", "expected \"adam\" or \"sgd\"");
    }
  }
}

json network_json(const NetworkConfig& net) {
  return {{"hidden", net.hidden},
          {"learning_rate", net.train.learning_rate},
          {"batch_size", net.train.batch_size},
          {"gradient_steps_per_epoch", net.train.gradient_steps_per_epoch},
          {"l2_coefficient", net.train.l2_coefficient},
          {"optimizer", net.train.optimizer == nn::OptimizerKind::Adam ? "adam" : "sgd"}};
}

}  // namespace

ExperimentConfig config_from_json(const json& doc) {
  std::vector<std::string> errors;
  Reader r(errors);
  ExperimentConfig c;
  if (!doc.is_object()) throw ConfigError("(root): expected a JSON object");

  r.reject_unknown(doc, "",
                   {"schema", "environment", "algorithms", "algorithm", "offline_pairs",
                    "policy_fraction", "bc_pretrain_epochs", "epochs", "steps_per_epoch",
                    "tau_sup", "tau_auto", "sigma2", "update_policy", "latency_grid", "seeds",
                    "burden_budget", "test_rollouts", "bc_extra_pairs", "policy", "classifier",
                    "remote_supervisor", "output_dir"});

  if (auto s = r.string(doc, "schema", "schema"); s && *s != kConfigSchema) {
    r.error("schema", "expected \"" + std::string(kConfigSchema) + "\", found \"" + *s + "\"");
  }

  if (doc.contains("environment")) {
    const auto& e = doc.at("environment");
    if (e.is_string()) {
      c.environment_id = e.get<std::string>();
    } else if (e.is_object()) {
      r.reject_unknown(e, "environment", {"id", "params"});
      if (auto id = r.string(e, "id", "environment.id")) c.environment_id = *id;
      if (e.contains("params")) {
        if (!e.at("params").is_object()) {
          r.error("environment.params", "expected an object");
        } else {
          c.environment_params = e.at("params");
        }
      }
    } else {
      r.error("environment", "expected an id string or {\"id\", \"params\"}");
    }
  }
  try {
    make_environment(c.environment_id, c.environment_params);
  } catch (const std::exception& ex) {
    r.error("environment", ex.what());
  }

  const bool has_list = doc.contains("algorithms");
  if (has_list && doc.contains("algorithm")) {
    r.error("algorithm", "give either algorithm or algorithms, not both");
  }
  if (has_list || doc.contains("algorithm")) {
    const std::string key = has_list ? "algorithms" : "algorithm";
    json list = doc.at(key);
    if (list.is_string()) list = json::array({list});
    if (!list.is_array() || list.empty()) {
      r.error(key, "expected an algorithm name or a nonempty list of names");
    } else {
      c.algorithms.clear();
      for (std::size_t i = 0; i < list.size(); ++i) {
        const std::string path = key + "[" + std::to_string(i) + "]";
        const auto v = list[i].is_string() ? variant_from_string(list[i].get<std::string>())
                                           : std::nullopt;
        if (!v) {
          r.error(path, "expected one of bc, dagger, safedagger, lazydagger, safedagger-exec, "
                        "lazydagger-exec");
        } else if (std::find(c.algorithms.begin(), c.algorithms.end(), *v) !=
                   c.algorithms.end()) {
          r.error(path, "listed twice");
        } else {
          c.algorithms.push_back(*v);
        }
      }
    }
  }

  if (auto v = r.integer(doc, "offline_pairs", "offline_pairs", 2)) c.offline_pairs = *v;
  if (auto v = r.number(doc, "policy_fraction", "policy_fraction")) {
    if (*v <= 0.0 || *v >= 1.0) r.error("policy_fraction", "must lie strictly between 0 and 1");
    c.policy_fraction = *v;
  }
  if (auto v = r.integer(doc, "bc_pretrain_epochs", "bc_pretrain_epochs", 0)) {
    c.bc_pretrain_epochs = static_cast<int>(*v);
  }
  if (auto v = r.integer(doc, "epochs", "epochs", 0)) c.epochs = static_cast<int>(*v);
  if (auto v = r.integer(doc, "steps_per_epoch", "steps_per_epoch", 1)) {
    c.steps_per_epoch = static_cast<int>(*v);
  }

  if (doc.contains("tau_sup")) {
    const auto& v = doc.at("tau_sup");
    c.tau_sup = {};
    if (v.is_number()) {
      const double f = v.get<double>();
      if (f < 0.0 || f > 1.0) r.error("tau_sup", "fraction must lie in [0, 1]");
      c.tau_sup.fraction = f;
    } else if (v.is_string() && prefixed(v.get<std::string>(), "calibrate:")) {
      const double t = *prefixed(v.get<std::string>(), "calibrate:");
      if (t <= 0.0 || t >= 1.0) r.error("tau_sup", "calibration target must lie in (0, 1)");
      c.tau_sup.calibrate_target = t;
    } else {
      r.error("tau_sup", "expected a fraction or \"calibrate:<target>\"");
    }
  }
  if (doc.contains("tau_auto")) {
    const auto& v = doc.at("tau_auto");
    c.tau_auto = {};
    if (v.is_number()) {
      const double f = v.get<double>();
      if (f < 0.0 || f > 1.0) r.error("tau_auto", "fraction must lie in [0, 1]");
      c.tau_auto.fraction = f;
    } else if (v.is_string() && prefixed(v.get<std::string>(), "ratio:")) {
      const double q = *prefixed(v.get<std::string>(), "ratio:");
      if (q < 0.0 || q > 1.0) r.error("tau_auto", "ratio must lie in [0, 1] so tau_auto <= tau_sup");
      c.tau_auto.ratio = q;
    } else {
      r.error("tau_auto", "expected a fraction or \"ratio:<multiple of tau_sup>\"");
    }
  }
  if (c.tau_sup.fraction && c.tau_auto.fraction && *c.tau_auto.fraction > *c.tau_sup.fraction) {
    r.error("tau_auto", "must not exceed tau_sup");
  }

  const bool any_exec = std::any_of(c.algorithms.begin(), c.algorithms.end(), is_execution_variant);
  const bool all_exec = std::all_of(c.algorithms.begin(), c.algorithms.end(), is_execution_variant);
  if (auto v = r.number(doc, "sigma2", "sigma2")) {
    if (*v < 0.0) r.error("sigma2", "must be >= 0");
    if (any_exec && *v > 0.0) r.error("sigma2", "execution variants run without noise; must be 0");
    c.sigma2 = *v;
  } else if (all_exec) {
    c.sigma2 = 0.0;
  }
  if (auto v = r.boolean(doc, "update_policy", "update_policy")) {
    if (any_exec && *v) r.error("update_policy", "execution variants never update the policy");
    c.update_policy = *v;
  }

  if (doc.contains("latency_grid")) {
    const auto& g = doc.at("latency_grid");
    if (!g.is_array() || g.empty()) {
      r.error("latency_grid", "expected a nonempty list of latencies");
    } else {
      c.latency_grid.clear();
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (!g[i].is_number() || g[i].get<double>() < 0.0) {
          r.error("latency_grid[" + std::to_string(i) + "]", "expected a number >= 0");
        } else {
          c.latency_grid.push_back(g[i].get<double>());
        }
      }
    }
  }
  if (doc.contains("seeds")) {
    const auto& s = doc.at("seeds");
    if (!s.is_array() || s.empty()) {
      r.error("seeds", "expected a nonempty list of seeds");
    } else {
      c.seeds.clear();
      std::set<std::uint64_t> seen;
      for (std::size_t i = 0; i < s.size(); ++i) {
        const std::string path = "seeds[" + std::to_string(i) + "]";
        if (!s[i].is_number_unsigned() && !(s[i].is_number_integer() && s[i].get<std::int64_t>() >= 0)) {
          r.error(path, "expected a nonnegative integer");
        } else if (!seen.insert(s[i].get<std::uint64_t>()).second) {
          r.error(path, "listed twice");
        } else {
          c.seeds.push_back(s[i].get<std::uint64_t>());
        }
      }
    }
  }
  if (auto v = r.number(doc, "burden_budget", "burden_budget")) {
    if (*v < 0.0) r.error("burden_budget", "must be >= 0");
    c.burden_budget = *v;
  }
  if (auto v = r.integer(doc, "test_rollouts", "test_rollouts", 1)) {
    c.test_rollouts = static_cast<int>(*v);
  }
  if (auto v = r.integer(doc, "bc_extra_pairs", "bc_extra_pairs", 0)) {
    c.bc_extra_pairs = static_cast<std::size_t>(*v);
  }
  if (doc.contains("policy")) read_network(r, doc.at("policy"), "policy", c.policy);
  if (doc.contains("classifier")) read_network(r, doc.at("classifier"), "classifier", c.classifier);

  if (doc.contains("remote_supervisor")) {
    const auto& s = doc.at("remote_supervisor");
    if (!s.is_object()) {
      r.error("remote_supervisor", "expected an object");
    } else {
      RemoteSupervisorConfig rs;
      r.reject_unknown(s, "remote_supervisor",
                       {"bind", "port", "health_port", "session", "token", "timeout_s",
                        "decimation"});
      if (auto v = r.string(s, "bind", "remote_supervisor.bind")) rs.bind = *v;
      if (auto v = r.integer(s, "port", "remote_supervisor.port", 0)) rs.port = static_cast<int>(*v);
      if (auto v = r.integer(s, "health_port", "remote_supervisor.health_port", 0)) {
        rs.health_port = static_cast<int>(*v);
      }
      if (rs.port > 65535) r.error("remote_supervisor.port", "must be <= 65535");
      if (rs.health_port > 65535) r.error("remote_supervisor.health_port", "must be <= 65535");
      if (auto v = r.string(s, "session", "remote_supervisor.session")) {
        if (v->empty()) r.error("remote_supervisor.session", "must not be empty");
        rs.session = *v;
      }
      if (auto v = r.string(s, "token", "remote_supervisor.token")) rs.token = *v;
      if (auto v = r.number(s, "timeout_s", "remote_supervisor.timeout_s")) {
        if (*v <= 0.0) r.error("remote_supervisor.timeout_s", "must be > 0");
        rs.timeout_s = *v;
      }
      if (auto v = r.integer(s, "decimation", "remote_supervisor.decimation", 1)) {
        rs.decimation = static_cast<int>(*v);
      }
      c.remote_supervisor = rs;
    }
  }
  if (auto v = r.string(doc, "output_dir", "output_dir")) {
    if (v->empty()) r.error("output_dir", "must not be empty");
    c.output_dir = *v;
  }

  if (!errors.empty()) {
    std::string msg;
    for (const auto& e : errors) msg += (msg.empty() ? "" : "\n") + e;
    throw ConfigError(msg);
  }
  return c;
}

ExperimentConfig validate_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("(root): invalid JSON: ") + e.what());
  }
  return config_from_json(doc);
}

json to_json(const ExperimentConfig& c) {
  json algorithms = json::array();
  for (auto v : c.algorithms) algorithms.push_back(to_string(v));
  json tau_sup = c.tau_sup.fraction ? json(*c.tau_sup.fraction)
                                    : json("calibrate:" + json(*c.tau_sup.calibrate_target).dump());
  json tau_auto = c.tau_auto.fraction ? json(*c.tau_auto.fraction)
                                      : json("ratio:" + json(*c.tau_auto.ratio).dump());
  auto env = make_environment(c.environment_id, c.environment_params);
  json doc = {
      {"schema", kConfigSchema},
      {"environment", {{"id", c.environment_id}, {"params", env->params()}}},
      {"algorithms", algorithms},
      {"offline_pairs", c.offline_pairs},
      {"policy_fraction", c.policy_fraction},
      {"bc_pretrain_epochs", c.bc_pretrain_epochs},
      {"epochs", c.epochs},
      {"steps_per_epoch", c.steps_per_epoch},
      {"tau_sup", tau_sup},
      {"tau_auto", tau_auto},
      {"sigma2", c.sigma2},
      {"update_policy", c.update_policy.value_or(true)},
      {"latency_grid", c.latency_grid},
      {"seeds", c.seeds},
      {"burden_budget", c.burden_budget ? json(*c.burden_budget) : json(nullptr)},
      {"test_rollouts", c.test_rollouts},
      {"bc_extra_pairs", c.bc_extra_pairs ? json(*c.bc_extra_pairs) : json("match:lazydagger")},
      {"policy", network_json(c.policy)},
      {"classifier", network_json(c.classifier)},
      {"output_dir", c.output_dir},
  };
  if (c.remote_supervisor) {
    const auto& rs = *c.remote_supervisor;
    doc["remote_supervisor"] = {{"bind", rs.bind},          {"port", rs.port},
                                {"health_port", rs.health_port}, {"session", rs.session},
                                {"token", rs.token.empty() ? "" : "<set>"},
                                {"timeout_s", rs.timeout_s}, {"decimation", rs.decimation}};
  }
  // A "match:lazydagger" placeholder is not a valid input value; the echoed
  // config is for reading, config_from_json accepts the numeric forms.
  if (!c.bc_extra_pairs) doc.erase("bc_extra_pairs");
  if (!c.burden_budget) doc.erase("burden_budget");
  return doc;
}

// Pretraining ------------------------------------------------------------------

namespace {

std::vector<std::size_t> layer_sizes(std::size_t in, const std::vector<std::size_t>& hidden,
                                     std::size_t out) {
  std::vector<std::size_t> sizes{in};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(out);
  return sizes;
}

json thresholds_json(const ResolvedThresholds& t) {
  json doc = {{"tau_sup_fraction", t.fraction.tau_sup},
              {"tau_auto_fraction", t.fraction.tau_auto},
              {"tau_sup", t.absolute.tau_sup},
              {"tau_auto", t.absolute.tau_auto}};
  if (t.calibration) {
    doc["calibration"] = {{"unsafe_fraction", t.calibration->unsafe_fraction},
                          {"samples", t.calibration->samples},
                          {"warning", t.calibration->warning},
                          {"reason", t.calibration->reason}};
  }
  return doc;
}

}  // namespace

Pretrained pretrain(const ExperimentConfig& config, const Environment& env, std::uint64_t seed) {
  const auto& spec = env.spec();
  Pretrained p;
  p.offline = collect_supervisor_data(env, config.offline_pairs, derive_seed(seed, streams::kOffline));
  std::tie(p.policy_data, p.safe_data) =
      split_dataset(p.offline, config.policy_fraction, derive_seed(seed, streams::kSplit));

  p.policy = init_policy(layer_sizes(spec.state_dim, config.policy.hidden, spec.action_dim),
                         spec.action_low, spec.action_high,
                         derive_seed(seed, streams::kPolicyInit));
  for (int e = 0; e < config.bc_pretrain_epochs; ++e) {
    p.policy = train_bc(std::move(p.policy), p.policy_data, config.policy.train,
                        derive_seed(seed, streams::kPretrain, static_cast<std::uint64_t>(e), 0))
                   .policy;
  }

  const double max_d = env.max_action_discrepancy();
  auto& t = p.thresholds;
  if (config.tau_sup.calibrate_target) {
    t.calibration = calibrate_tau_sup(p.policy, p.offline, *config.tau_sup.calibrate_target);
    t.absolute.tau_sup = t.calibration->tau_sup;
    t.fraction.tau_sup = t.absolute.tau_sup / max_d;
  } else {
    t.fraction.tau_sup = *config.tau_sup.fraction;
    t.absolute.tau_sup = t.fraction.tau_sup * max_d;
  }
  if (config.tau_auto.ratio) {
    t.absolute.tau_auto = *config.tau_auto.ratio * t.absolute.tau_sup;
    t.fraction.tau_auto = *config.tau_auto.ratio * t.fraction.tau_sup;
  } else {
    t.fraction.tau_auto = *config.tau_auto.fraction;
    t.absolute.tau_auto = t.fraction.tau_auto * max_d;
  }
  try {
    t.absolute.validate();
  } catch (const ContractViolation& e) {
    throw ConfigError(std::string("tau_auto: ") + e.what());
  }

  Dataset both = p.policy_data;
  both.append_all(p.safe_data);
  p.classifier = init_classifier(layer_sizes(spec.state_dim, config.classifier.hidden, 1),
                                 derive_seed(seed, streams::kClassifierInit));
  const int rounds = std::max(config.bc_pretrain_epochs, 1);
  for (int e = 0; e < rounds; ++e) {
    auto fit = train_classifier(std::move(p.classifier), both, p.policy, t.absolute.tau_sup,
                                config.classifier.train,
                                derive_seed(seed, streams::kPretrain, static_cast<std::uint64_t>(e), 1));
    p.classifier = std::move(fit.classifier);
    p.classifier_single_class = fit.single_class;
  }
  return p;
}

// Artifacts --------------------------------------------------------------------

namespace {

std::string format_number(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << text;
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " into place: " + ec.message());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string jsonl(std::span<const EpisodeLog> logs) {
  std::string out;
  for (const auto& log : logs) {
    out += to_json(log).dump();
    out += '\n';
  }
  return out;
}

std::vector<EpisodeLog> read_jsonl(const fs::path& path) {
  std::vector<EpisodeLog> logs;
  std::istringstream in(read_text(path));
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      logs.push_back(episode_log_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw SchemaError(path.string() + " line " + std::to_string(n) + ": " + e.what());
    }
  }
  return logs;
}

json rows_json(const std::vector<EpochRow>& rows) {
  json out = json::array();
  for (const auto& r : rows) {
    out.push_back({{"epoch", r.epoch},
                   {"test_success_rate", r.test_success_rate},
                   {"mean_test_return", r.mean_test_return},
                   {"C_total", r.switches_total},
                   {"D_total", r.supervisor_actions_total}});
  }
  return out;
}

std::vector<EpochRow> rows_from_json(const json& doc) {
  std::vector<EpochRow> rows;
  for (const auto& r : doc) {
    EpochRow row;
    row.epoch = r.at("epoch").get<int>();
    row.test_success_rate = r.at("test_success_rate").get<double>();
    row.mean_test_return = r.at("mean_test_return").get<double>();
    row.switches_total = r.at("C_total").get<std::size_t>();
    row.supervisor_actions_total = r.at("D_total").get<std::size_t>();
    rows.push_back(row);
  }
  return rows;
}

fs::path epoch_log_path(const fs::path& dir, int epoch) {
  return dir / "logs" / ("epoch_" + std::to_string(epoch) + ".jsonl");
}

fs::path test_log_path(const fs::path& dir, int epoch) {
  return dir / "logs" / ("test_" + std::to_string(epoch) + ".jsonl");
}

// Train logs of a finished or partial run, in epoch order.
std::vector<EpisodeLog> load_train_logs(const fs::path& dir, int epochs) {
  std::vector<EpisodeLog> logs;
  for (int e = 0; e < epochs; ++e) {
    auto part = read_jsonl(epoch_log_path(dir, e));
    logs.insert(logs.end(), std::make_move_iterator(part.begin()),
                std::make_move_iterator(part.end()));
  }
  return logs;
}

}  // namespace

std::string epochs_csv(const std::vector<EpochRow>& rows, std::span<const double> latency_grid) {
  std::ostringstream os;
  os << "epoch,test_success_rate,mean_test_return,C_total,D_total";
  for (double l : latency_grid) os << ",B_at_L_" << format_number(l);
  os << '\n';
  for (const auto& r : rows) {
    os << r.epoch << ',' << format_number(r.test_success_rate) << ','
       << format_number(r.mean_test_return) << ',' << r.switches_total << ','
       << r.supervisor_actions_total;
    for (double l : latency_grid) {
      os << ','
         << format_number(burden(static_cast<double>(r.switches_total),
                                 static_cast<double>(r.supervisor_actions_total), l));
    }
    os << '\n';
  }
  return os.str();
}

void write_run_summary(const fs::path& dir, std::span<const EpisodeLog> logs, const json& extra) {
  for (const auto& log : logs) validate_log(log);
  write_text(dir / "episodes.jsonl", jsonl(logs));
  const auto report = summarize(logs);
  json doc = extra;
  doc["schema"] = kSummarySchema;
  doc["burden"] = to_json(report, std::vector<double>{});
  write_text(dir / "summary.json", doc.dump(2) + "\n");
}

// Running ----------------------------------------------------------------------

json RunManifest::to_json() const {
  json runs_doc = json::array();
  for (const auto& r : runs) {
    runs_doc.push_back({{"algorithm", ldg::to_string(r.variant)},
                        {"seed", r.seed},
                        {"directory", r.directory.lexically_relative(output_dir).generic_string()},
                        {"C", r.train_report.switches},
                        {"D", r.train_report.supervisor_actions},
                        {"online_pairs", r.online_pairs},
                        {"final_test_success_rate",
                         r.rows.empty() ? 0.0 : r.rows.back().test_success_rate},
                        {"initial_policy_hash", r.initial_policy_hash},
                        {"final_policy_hash", r.final_policy_hash},
                        {"test_purity", r.test_purity}});
  }
  return {{"schema", kManifestSchema},
          {"version", version},
          {"input_hash", input_hash},
          {"resolved_config", resolved_config},
          {"seeds", seeds},
          {"thresholds", thresholds},
          {"budgets", budgets},
          {"wall_clock_s", wall_clock_s},
          {"runs", runs_doc}};
}

namespace {

struct SeedContext {
  std::uint64_t seed = 0;
  std::optional<Pretrained> pre;
};

json seed_summary(const SeedRun& run, const ExperimentConfig& config,
                  const ResolvedThresholds& thresholds, const json& budget) {
  return {{"schema", kSummarySchema},
          {"algorithm", to_string(run.variant)},
          {"seed", run.seed},
          {"thresholds", thresholds_json(thresholds)},
          {"budget", budget},
          {"online_pairs", run.online_pairs},
          {"dataset_size", run.dataset_size},
          {"initial_policy_hash", run.initial_policy_hash},
          {"final_policy_hash", run.final_policy_hash},
          {"test_purity", run.test_purity},
          {"epochs", rows_json(run.rows)},
          {"burden", to_json(run.train_report, config.latency_grid, config.burden_budget)}};
}

EpochRow test_row(const Environment& env, const RobotPolicy& policy, const ExperimentConfig& config,
                  std::uint64_t seed, int row_index, std::vector<EpisodeLog>& test_logs) {
  EpochRow row;
  row.epoch = row_index;
  double successes = 0.0;
  double returns = 0.0;
  for (int i = 0; i < config.test_rollouts; ++i) {
    auto log = test_rollout(env, policy,
                            derive_seed(seed, streams::kTest, static_cast<std::uint64_t>(row_index),
                                        static_cast<std::uint64_t>(i)),
                            row_index, i);
    successes += log.success ? 1.0 : 0.0;
    returns += log.total_return;
    test_logs.push_back(std::move(log));
  }
  row.test_success_rate = successes / config.test_rollouts;
  row.mean_test_return = returns / config.test_rollouts;
  return row;
}

bool pure(std::span<const EpisodeLog> logs) {
  for (const auto& log : logs) {
    for (const auto& r : log.records) {
      if (r.mode != Mode::Autonomous || r.supervisor_action) return false;
    }
  }
  return true;
}

json checkpoint_json(int next_epoch, const LearnerState& s, const std::vector<EpochRow>& rows,
                     bool purity, const std::string& initial_hash) {
  return {{"format", "lazydagger-run-checkpoint"},
          {"version", 1},
          {"next_epoch", next_epoch},
          {"policy", to_json(s.policy)},
          {"classifier", network_to_json(s.classifier.network(), "classifier")},
          {"policy_data", s.policy_data.to_json()},
          {"rows", rows_json(rows)},
          {"test_purity", purity},
          {"initial_policy_hash", initial_hash}};
}

class Runner {
 public:
  Runner(const ExperimentConfig& config, const RunOptions& options)
      : config_(config),
        env_(make_environment(config.environment_id, config.environment_params)),
        out_(options.output_dir ? *options.output_dir : fs::path(config.output_dir)),
        resume_(options.resume) {}

  RunManifest run() {
    const auto started = std::chrono::steady_clock::now();
    prepare_output();
    if (config_.remote_supervisor) start_service();

    RunManifest m;
    m.resolved_config = to_json(config_);
    m.resolved_config["output_dir"] = out_.generic_string();
    m.input_hash = input_hash();
    m.seeds = config_.seeds;
    m.output_dir = out_;
    m.thresholds = json::object();
    m.budgets = json::object();

    // LazyDAgger first: BC's offline budget is matched to its online data.
    std::vector<AlgorithmVariant> order = config_.algorithms;
    std::stable_partition(order.begin(), order.end(),
                          [](AlgorithmVariant v) { return v == AlgorithmVariant::LazyDAgger; });
    std::stable_partition(order.begin(), order.end(), [](AlgorithmVariant v) {
      return v != AlgorithmVariant::BehaviorCloning;
    });

    std::map<std::uint64_t, SeedContext> contexts;
    for (auto s : config_.seeds) contexts[s].seed = s;

    std::vector<std::size_t> lazy_online;
    for (auto variant : order) {
      json budget = {{"label_budget", "online"}};
      std::size_t extra = 0;
      if (variant == AlgorithmVariant::BehaviorCloning) {
        if (config_.bc_extra_pairs) {
          extra = *config_.bc_extra_pairs;
          budget = {{"extra_offline_pairs", extra}, {"source", "config"}};
        } else if (!lazy_online.empty()) {
          const double mean = std::accumulate(lazy_online.begin(), lazy_online.end(), 0.0) /
                              static_cast<double>(lazy_online.size());
          extra = static_cast<std::size_t>(std::llround(mean));
          budget = {{"extra_offline_pairs", extra},
                    {"source", "mean lazydagger online pairs"},
                    {"lazydagger_online_pairs", lazy_online}};
        } else {
          budget = {{"extra_offline_pairs", 0}, {"source", "no lazydagger run to match"}};
        }
      }
      m.budgets[std::string(to_string(variant))] = budget;

      std::vector<SeedRun> runs;
      for (auto seed : config_.seeds) {
        auto& ctx = contexts[seed];
        SeedRun run = run_seed(variant, ctx, extra, budget);
        if (variant == AlgorithmVariant::LazyDAgger) lazy_online.push_back(run.online_pairs);
        runs.push_back(run);
        m.runs.push_back(std::move(run));
      }
      write_variant_summary(variant, runs);
    }
    for (auto& [seed, ctx] : contexts) {
      if (ctx.pre) m.thresholds[std::to_string(seed)] = thresholds_json(ctx.pre->thresholds);
    }

    write_comparisons();
    m.wall_clock_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    save_json(out_ / "manifest.json", m.to_json());
    return m;
  }

 private:
  void prepare_output() {
    fs::create_directories(out_);
    const fs::path manifest = out_ / "inputs.json";
    const json inputs = {{"input_hash", input_hash()}, {"config", to_json(config_)}};
    if (fs::exists(manifest)) {
      const json previous = load_json(manifest);
      if (previous.value("input_hash", "") != input_hash()) {
        if (resume_) {
          throw ConfigError("output_dir: holds a run with a different configuration; "
                            "cannot resume");
        }
        for (auto v : config_.algorithms) fs::remove_all(out_ / std::string(to_string(v)));
      } else if (!resume_) {
        for (auto v : config_.algorithms) fs::remove_all(out_ / std::string(to_string(v)));
      }
    } else if (!resume_) {
      for (auto v : config_.algorithms) fs::remove_all(out_ / std::string(to_string(v)));
    }
    save_json(manifest, inputs);
  }

  std::string input_hash() const {
    json doc = to_json(config_);
    doc.erase("output_dir");
    doc["version"] = kVersion;
    return sha256_hex(doc.dump());
  }

  void start_service() {
    const auto& rs = *config_.remote_supervisor;
    ServiceConfig sc;
    sc.bind = rs.bind;
    sc.port = rs.port;
    sc.health_port = rs.health_port;
    sc.session = rs.session;
    sc.token = rs.token;
    sc.timeout = std::chrono::duration<double>(rs.timeout_s);
    sc.decimation = rs.decimation;
    service_ = InterventionService::start(sc);
  }

  const Pretrained& pretrained(SeedContext& ctx) {
    if (!ctx.pre) ctx.pre = pretrain(config_, *env_, ctx.seed);
    return *ctx.pre;
  }

  SeedRun run_seed(AlgorithmVariant variant, SeedContext& ctx, std::size_t bc_extra,
                   const json& budget) {
    const fs::path dir = out_ / std::string(to_string(variant)) / ("seed_" + std::to_string(ctx.seed));
    SeedRun run;
    run.variant = variant;
    run.seed = ctx.seed;
    run.directory = dir;

    if (resume_ && fs::exists(dir / "summary.json")) {
      const json doc = load_json(dir / "summary.json");
      run.rows = rows_from_json(doc.at("epochs"));
      run.online_pairs = doc.at("online_pairs").get<std::size_t>();
      run.dataset_size = doc.at("dataset_size").get<std::size_t>();
      run.initial_policy_hash = doc.at("initial_policy_hash").get<std::string>();
      run.final_policy_hash = doc.at("final_policy_hash").get<std::string>();
      run.test_purity = doc.at("test_purity").get<bool>();
      const auto logs = load_train_logs(dir, config_.epochs);
      run.train_report = summarize(logs);
      pretrained(ctx);
      return run;
    }

    const Pretrained& pre = pretrained(ctx);
    if (variant == AlgorithmVariant::BehaviorCloning) {
      run_bc_seed(run, pre, bc_extra, dir);
    } else {
      run_interactive_seed(run, pre, dir);
    }
    save_policy(dir / "policy.json", run_policy_);
    save_json(dir / "classifier.json", network_to_json(run_classifier_.network(), "classifier"));
    write_text(dir / "epochs.csv", epochs_csv(run.rows, config_.latency_grid));
    save_json(dir / "summary.json", seed_summary(run, config_, pre.thresholds, budget));
    fs::remove(dir / "checkpoint.json");
    return run;
  }

  void run_bc_seed(SeedRun& run, const Pretrained& pre, std::size_t extra, const fs::path& dir) {
    Dataset data = pre.policy_data;
    if (extra > 0) {
      // The budget-matched BC labels come from fresh supervisor rollouts.
      data.append_all(collect_supervisor_data(*env_, extra,
                                              derive_seed(run.seed, streams::kBudget)));
    }
    RobotPolicy policy = pre.policy;
    run.initial_policy_hash = parameter_hash(policy.network());
    std::vector<EpisodeLog> test_logs;
    run.rows.push_back(test_row(*env_, policy, config_, run.seed, 0, test_logs));
    write_text(test_log_path(dir, 0), jsonl(test_logs));
    run.test_purity = pure(test_logs);
    for (int e = 0; e < config_.epochs; ++e) {
      policy = train_bc(std::move(policy), data, config_.policy.train,
                        derive_seed(run.seed, streams::kPolicyFit, static_cast<std::uint64_t>(e)))
                   .policy;
      write_text(epoch_log_path(dir, e), "");
      test_logs.clear();
      run.rows.push_back(test_row(*env_, policy, config_, run.seed, e + 1, test_logs));
      write_text(test_log_path(dir, e + 1), jsonl(test_logs));
      run.test_purity = run.test_purity && pure(test_logs);
    }
    run.final_policy_hash = parameter_hash(policy.network());
    run.online_pairs = 0;
    run.dataset_size = data.size();
    run_policy_ = std::move(policy);
    run_classifier_ = pre.classifier;
  }

  void run_interactive_seed(SeedRun& run, const Pretrained& pre, const fs::path& dir) {
    const auto variant = run.variant;
    LazyConfig lc;
    if (is_execution_variant(variant)) {
      lc = LazyConfig::execution(config_.epochs, config_.steps_per_epoch, pre.thresholds.absolute);
    } else {
      lc.epochs = config_.epochs;
      lc.steps_per_epoch = config_.steps_per_epoch;
      lc.thresholds = pre.thresholds.absolute;
      lc.sigma2 = config_.sigma2;
      lc.update_policy = config_.updates_policy(variant);
      lc.inject_noise = variant == AlgorithmVariant::LazyDAgger && config_.sigma2 > 0.0;
    }
    TrainConfigs train{config_.policy.train, config_.classifier.train};

    LearnerState state{pre.policy, pre.classifier, pre.policy_data, pre.safe_data};
    int first_epoch = 0;
    run.initial_policy_hash = parameter_hash(pre.policy.network());
    const fs::path ckpt = dir / "checkpoint.json";
    if (resume_ && fs::exists(ckpt)) {
      const json doc = load_json(ckpt);
      first_epoch = doc.at("next_epoch").get<int>();
      state.policy = policy_from_json(doc.at("policy"));
      state.classifier = DiscrepancyClassifier(network_from_json(doc.at("classifier"), "classifier"));
      state.policy_data = Dataset::from_json(doc.at("policy_data"));
      run.rows = rows_from_json(doc.at("rows"));
      run.test_purity = doc.at("test_purity").get<bool>();
    } else {
      fs::remove_all(dir);
      std::vector<EpisodeLog> test_logs;
      run.rows.push_back(test_row(*env_, state.policy, config_, run.seed, 0, test_logs));
      write_text(test_log_path(dir, 0), jsonl(test_logs));
      run.test_purity = pure(test_logs);
    }

    std::unique_ptr<SupervisorHandle> remote;
    AnalyticSupervisor analytic(*env_);
    SupervisorHandle* supervisor = &analytic;
    if (service_) {
      remote = std::make_unique<RemoteSupervisor>(*service_, *env_, lc.thresholds);
      supervisor = remote.get();
    }

    InteractiveSession session(base_algorithm(variant), *env_, *supervisor, lc, train,
                               std::move(state), run.seed);
    std::size_t c_total = run.rows.empty() ? 0 : run.rows.back().switches_total;
    std::size_t d_total = run.rows.empty() ? 0 : run.rows.back().supervisor_actions_total;
    for (int e = first_epoch; e < config_.epochs; ++e) {
      auto result = session.run_epoch(e);
      write_text(epoch_log_path(dir, e), jsonl(result.logs));
      const auto report = summarize(result.logs);
      c_total += report.switches;
      d_total += report.supervisor_actions;
      std::vector<EpisodeLog> test_logs;
      EpochRow row = test_row(*env_, session.state().policy, config_, run.seed, e + 1, test_logs);
      row.switches_total = c_total;
      row.supervisor_actions_total = d_total;
      run.rows.push_back(row);
      write_text(test_log_path(dir, e + 1), jsonl(test_logs));
      run.test_purity = run.test_purity && pure(test_logs);
      save_json(ckpt, checkpoint_json(e + 1, session.state(), run.rows, run.test_purity,
                                      run.initial_policy_hash));
    }

    const auto logs = load_train_logs(dir, config_.epochs);
    run.train_report = summarize(logs);
    run.online_pairs = session.state().policy_data.count_online();
    run.dataset_size = session.state().policy_data.size();
    run.final_policy_hash = parameter_hash(session.state().policy.network());
    run_policy_ = session.state().policy;
    run_classifier_ = session.state().classifier;
  }

  void write_variant_summary(AlgorithmVariant variant, const std::vector<SeedRun>& runs) {
    const fs::path dir = out_ / std::string(to_string(variant));
    BurdenReport total;
    std::vector<EpisodeLog> all;
    for (const auto& r : runs) {
      auto logs = load_train_logs(r.directory, config_.epochs);
      all.insert(all.end(), std::make_move_iterator(logs.begin()),
                 std::make_move_iterator(logs.end()));
    }
    total = summarize(all);

    // Per-epoch means across seeds; C and D stay cumulative per seed.
    std::vector<EpochRow> mean_rows;
    const std::size_t n_rows = runs.empty() ? 0 : runs.front().rows.size();
    for (std::size_t i = 0; i < n_rows; ++i) {
      EpochRow m;
      m.epoch = static_cast<int>(i);
      double c = 0.0;
      double d = 0.0;
      for (const auto& r : runs) {
        m.test_success_rate += r.rows[i].test_success_rate;
        m.mean_test_return += r.rows[i].mean_test_return;
        c += static_cast<double>(r.rows[i].switches_total);
        d += static_cast<double>(r.rows[i].supervisor_actions_total);
      }
      const double n = static_cast<double>(runs.size());
      m.test_success_rate /= n;
      m.mean_test_return /= n;
      m.switches_total = static_cast<std::size_t>(std::llround(c / n));
      m.supervisor_actions_total = static_cast<std::size_t>(std::llround(d / n));
      mean_rows.push_back(m);
    }
    write_text(dir / "epochs.csv", epochs_csv(mean_rows, config_.latency_grid));

    double final_success = 0.0;
    bool purity = true;
    for (const auto& r : runs) {
      final_success += r.rows.empty() ? 0.0 : r.rows.back().test_success_rate;
      purity = purity && r.test_purity;
    }
    json doc = {{"schema", kSummarySchema},
                {"algorithm", to_string(variant)},
                {"seeds", runs.size()},
                {"mean_final_test_success_rate",
                 runs.empty() ? 0.0 : final_success / static_cast<double>(runs.size())},
                {"test_purity", purity},
                {"epochs", rows_json(mean_rows)},
                {"burden", to_json(total, config_.latency_grid, config_.burden_budget)}};
    save_json(dir / "summary.json", doc);
    variant_reports_[variant] = total;
  }

  void write_comparisons() {
    json doc = {{"schema", kSummarySchema}, {"algorithms", json::object()}};
    for (const auto& [variant, report] : variant_reports_) {
      doc["algorithms"][std::string(to_string(variant))] =
          to_json(report, config_.latency_grid, config_.burden_budget);
    }
    auto pair = [&](AlgorithmVariant a, AlgorithmVariant b) {
      if (!variant_reports_.contains(a) || !variant_reports_.contains(b)) return;
      const auto& ra = variant_reports_.at(a);
      const auto& rb = variant_reports_.at(b);
      const std::string key = std::string(to_string(a)) + "_vs_" + std::string(to_string(b));
      doc["comparisons"][key] = {
          {"cutoff_latency", to_json(cutoff_latency(ra.counts(), rb.counts()))},
          {"switch_ratio", rb.switches == 0 ? json(nullptr)
                                            : json(static_cast<double>(ra.switches) /
                                                   static_cast<double>(rb.switches))},
          {"supervisor_action_ratio",
           rb.supervisor_actions == 0 ? json(nullptr)
                                      : json(static_cast<double>(ra.supervisor_actions) /
                                             static_cast<double>(rb.supervisor_actions))}};
    };
    pair(AlgorithmVariant::LazyDAgger, AlgorithmVariant::SafeDAgger);
    pair(AlgorithmVariant::LazyDAggerExecution, AlgorithmVariant::SafeDAggerExecution);
    save_json(out_ / "summary.json", doc);
  }

  const ExperimentConfig& config_;
  std::unique_ptr<Environment> env_;
  fs::path out_;
  bool resume_;
  std::unique_ptr<InterventionService> service_;
  std::map<AlgorithmVariant, BurdenReport> variant_reports_;
  RobotPolicy run_policy_;
  DiscrepancyClassifier run_classifier_;
};

}  // namespace

RunManifest run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  Runner runner(config, options);
  return runner.run();
}

// Compare ----------------------------------------------------------------------

namespace {

// Train episodes of a run directory: hand-built inputs carry episodes.jsonl,
// algorithm runs carry logs/epoch_<e>.jsonl, and a variant directory holds
// one seed_<s> subdirectory per seed.
std::vector<EpisodeLog> collect_logs(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError(dir.string() + " is not a directory");
  if (fs::exists(dir / "episodes.jsonl")) return read_jsonl(dir / "episodes.jsonl");

  if (fs::exists(dir / "summary.json")) {
    const json doc = load_json(dir / "summary.json");
    if (doc.value("schema", "") != kSummarySchema) {
      throw SchemaError(dir.string() + "/summary.json: expected schema " + kSummarySchema);
    }
  }
  std::vector<EpisodeLog> logs;
  if (fs::is_directory(dir / "logs")) {
    std::vector<std::pair<int, fs::path>> files;
    for (const auto& entry : fs::directory_iterator(dir / "logs")) {
      const std::string name = entry.path().filename().string();
      if (name.rfind("epoch_", 0) == 0 && entry.path().extension() == ".jsonl") {
        files.emplace_back(std::stoi(name.substr(6)), entry.path());
      }
    }
    std::sort(files.begin(), files.end());
    for (const auto& [e, path] : files) {
      auto part = read_jsonl(path);
      logs.insert(logs.end(), part.begin(), part.end());
    }
    return logs;
  }
  std::vector<fs::path> seeds;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory() && entry.path().filename().string().rfind("seed_", 0) == 0) {
      seeds.push_back(entry.path());
    }
  }
  if (seeds.empty()) {
    throw SchemaError(dir.string() + ": no episodes.jsonl, logs/ or seed_* directories");
  }
  std::sort(seeds.begin(), seeds.end());
  for (const auto& s : seeds) {
    auto part = collect_logs(s);
    logs.insert(logs.end(), part.begin(), part.end());
  }
  return logs;
}

json ratio(std::size_t a, std::size_t b) {
  if (b == 0) return a == 0 ? json(1.0) : json(nullptr);
  return static_cast<double>(a) / static_cast<double>(b);
}

}  // namespace

json compare(const fs::path& run_a, const fs::path& run_b, std::span<const double> latency_grid) {
  const auto logs_a = collect_logs(run_a);
  const auto logs_b = collect_logs(run_b);
  const auto a = summarize(logs_a);
  const auto b = summarize(logs_b);
  json table = json::array();
  for (double l : latency_grid) {
    table.push_back({{"L", l}, {"B_a", a.burden_at(l)}, {"B_b", b.burden_at(l)}});
  }
  return {{"schema", kSummarySchema},
          {"a", {{"path", run_a.generic_string()}, {"C", a.switches}, {"D", a.supervisor_actions},
                 {"episodes", a.episodes}, {"interventions", a.interventions()}}},
          {"b", {{"path", run_b.generic_string()}, {"C", b.switches}, {"D", b.supervisor_actions},
                 {"episodes", b.episodes}, {"interventions", b.interventions()}}},
          {"burden", table},
          {"cutoff_latency", to_json(cutoff_latency(a.counts(), b.counts()))},
          {"switch_ratio", ratio(a.switches, b.switches)},
          {"supervisor_action_ratio", ratio(a.supervisor_actions, b.supervisor_actions)}};
}

json calibrate(const ExperimentConfig& config, std::uint64_t seed, double target) {
  if (!(target > 0.0 && target < 1.0)) {
    throw ConfigError("target: must lie strictly between 0 and 1");
  }
  ExperimentConfig c = config;
  c.tau_sup = {std::nullopt, target};
  auto env = make_environment(c.environment_id, c.environment_params);
  const Pretrained pre = pretrain(c, *env, seed);
  json doc = thresholds_json(pre.thresholds);
  doc["seed"] = seed;
  doc["target"] = target;
  doc["max_action_discrepancy"] = env->max_action_discrepancy();
  doc["offline_pairs"] = pre.offline.size();
  return doc;
}

}  // namespace ldg

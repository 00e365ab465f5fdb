#include "policy.hpp"

#include "digest.hpp"
#include "env.hpp"
#include "errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

namespace ldg {

namespace {

Vector vector_from_json(const nlohmann::json& arr) {
  const auto values = arr.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

nlohmann::json vector_to_json(const Vector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

void batch_matrices(std::span<const LabeledPair> batch, Matrix& states, Matrix& labels) {
  if (batch.empty()) throw ContractViolation("batch must not be empty");
  const auto n = static_cast<Eigen::Index>(batch.size());
  states.resize(batch.front().state.dim(), n);
  labels.resize(batch.front().supervisor_action.dim(), n);
  for (Eigen::Index i = 0; i < n; ++i) {
    states.col(i) = batch[static_cast<std::size_t>(i)].state.values;
    labels.col(i) = batch[static_cast<std::size_t>(i)].supervisor_action.values;
  }
}

}  // namespace

// -------------------------------------------------------------------- Dataset

void Dataset::append(LabeledPair pair, int provenance) {
  if (!pairs_.empty()) {
    if (pair.state.dim() != pairs_.front().state.dim() ||
        pair.supervisor_action.dim() != pairs_.front().supervisor_action.dim()) {
      throw ContractViolation("labelled pair dimensions do not match the dataset");
    }
  }
  pairs_.push_back(std::move(pair));
  provenance_.push_back(provenance);
}

void Dataset::append_all(const Dataset& other) {
  for (std::size_t i = 0; i < other.size(); ++i) append(other[i], other.provenance(i));
}

std::size_t Dataset::count_online() const {
  return static_cast<std::size_t>(
      std::count_if(provenance_.begin(), provenance_.end(), [](int p) { return p != kOffline; }));
}

Matrix Dataset::states() const {
  if (pairs_.empty()) return {};
  Matrix m(pairs_.front().state.dim(), static_cast<Eigen::Index>(pairs_.size()));
  for (std::size_t i = 0; i < pairs_.size(); ++i) {
    m.col(static_cast<Eigen::Index>(i)) = pairs_[i].state.values;
  }
  return m;
}

Matrix Dataset::actions() const {
  if (pairs_.empty()) return {};
  Matrix m(pairs_.front().supervisor_action.dim(), static_cast<Eigen::Index>(pairs_.size()));
  for (std::size_t i = 0; i < pairs_.size(); ++i) {
    m.col(static_cast<Eigen::Index>(i)) = pairs_[i].supervisor_action.values;
  }
  return m;
}

nlohmann::json Dataset::to_json() const {
  nlohmann::json states = nlohmann::json::array();
  nlohmann::json actions = nlohmann::json::array();
  for (const auto& p : pairs_) {
    states.push_back(vector_to_json(p.state.values));
    actions.push_back(vector_to_json(p.supervisor_action.values));
  }
  return {{"states", states}, {"actions", actions}, {"provenance", provenance_}};
}

Dataset Dataset::from_json(const nlohmann::json& doc) {
  Dataset d;
  const auto& states = doc.at("states");
  const auto& actions = doc.at("actions");
  const auto prov = doc.at("provenance").get<std::vector<int>>();
  if (states.size() != actions.size() || states.size() != prov.size()) {
    throw SchemaError("dataset: states, actions and provenance differ in length");
  }
  for (std::size_t i = 0; i < states.size(); ++i) {
    d.append({{vector_from_json(states[i])}, {vector_from_json(actions[i])}}, prov[i]);
  }
  return d;
}

void TrainConfig::validate(const std::string& path) const {
  std::string problems;
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    problems += path + ".learning_rate: must be a finite value >= 0\n";
  }
  if (batch_size < 1) problems += path + ".batch_size: must be >= 1\n";
  if (!(l2_coefficient >= 0.0)) problems += path + ".l2_coefficient: must be >= 0\n";
  if (!problems.empty()) {
    problems.pop_back();
    throw ConfigError(problems);
  }
}

// ---------------------------------------------------------------- RobotPolicy

RobotPolicy::RobotPolicy(nn::Mlp net, Vector action_low, Vector action_high, std::uint64_t seed)
    : net_(std::move(net)), low_(std::move(action_low)), high_(std::move(action_high)), seed_(seed) {
  if (net_.output_activation() != nn::OutputActivation::Tanh) {
    throw ContractViolation("robot policy needs a tanh output layer");
  }
  if (low_.size() != static_cast<Eigen::Index>(net_.output_dim()) ||
      high_.size() != low_.size()) {
    throw ContractViolation("action bounds do not match the policy output dimension");
  }
  if ((low_.array() > high_.array()).any()) {
    throw ContractViolation("action bounds must satisfy low <= high");
  }
}

EnvAction RobotPolicy::forward(const EnvState& state) const {
  return {forward_batch(state.values).col(0)};
}

Matrix RobotPolicy::forward_batch(const Matrix& states) const {
  const Matrix y = net_.forward(states);
  return (y.array().colwise() * half_range().array()).colwise() + midpoint().array();
}

Matrix RobotPolicy::forward_batch(const Matrix& states, nn::Mlp::Tape& tape) const {
  const Matrix y = net_.forward(states, tape);
  return (y.array().colwise() * half_range().array()).colwise() + midpoint().array();
}

RobotPolicy init_policy(const std::vector<std::size_t>& layer_sizes, const Vector& action_low,
                        const Vector& action_high, std::uint64_t seed) {
  if (layer_sizes.empty()) throw ContractViolation("layer list must not be empty");
  return RobotPolicy(nn::Mlp::random(layer_sizes, nn::OutputActivation::Tanh, seed),
                     action_low, action_high, seed);
}

double bc_loss(const RobotPolicy& policy, const Matrix& states, const Matrix& labels,
               double l2_coefficient) {
  if (states.cols() == 0) throw ContractViolation("batch must not be empty");
  const Matrix pred = policy.forward_batch(states);
  const double fit = (pred - labels).colwise().squaredNorm().mean();
  return fit + l2_coefficient * policy.network().weight_norm_sq();
}

double bc_loss(const RobotPolicy& policy, std::span<const LabeledPair> batch,
               double l2_coefficient) {
  Matrix s, y;
  batch_matrices(batch, s, y);
  return bc_loss(policy, s, y, l2_coefficient);
}

Vector bc_gradient(const RobotPolicy& policy, const Matrix& states, const Matrix& labels,
                   double l2_coefficient, double* loss) {
  if (states.cols() == 0) throw ContractViolation("batch must not be empty");
  nn::Mlp::Tape tape;
  const Matrix pred = policy.forward_batch(states, tape);
  if (loss != nullptr) {
    *loss = (pred - labels).colwise().squaredNorm().mean() +
            l2_coefficient * policy.network().weight_norm_sq();
  }
  const double scale = 2.0 / static_cast<double>(states.cols());
  const Matrix d_pred = scale * (pred - labels);
  const Matrix d_tanh = d_pred.array().colwise() * policy.half_range().array();
  Vector grad = policy.network().backward(tape, d_tanh);
  if (l2_coefficient != 0.0) {
    grad += 2.0 * l2_coefficient *
            policy.network().parameters().cwiseProduct(policy.network().weight_mask());
  }
  return grad;
}

Vector bc_gradient(const RobotPolicy& policy, std::span<const LabeledPair> batch,
                   double l2_coefficient) {
  Matrix s, y;
  batch_matrices(batch, s, y);
  return bc_gradient(policy, s, y, l2_coefficient);
}

TrainResult train_bc(RobotPolicy policy, const Dataset& dataset, const TrainConfig& config,
                     std::uint64_t seed) {
  if (dataset.empty()) throw ContractViolation("train_bc: dataset is empty");
  config.validate("train");
  TrainResult result;
  result.loss_curve.reserve(config.gradient_steps_per_epoch);

  const Matrix all_states = dataset.states();
  const Matrix all_labels = dataset.actions();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Eigen::Index> pick(0, all_states.cols() - 1);
  nn::Optimizer opt(config.optimizer, config.learning_rate, policy.network().parameter_count());
  Vector params = policy.network().parameters();

  const auto b = static_cast<Eigen::Index>(config.batch_size);
  Matrix s(all_states.rows(), b);
  Matrix y(all_labels.rows(), b);
  for (std::size_t step = 0; step < config.gradient_steps_per_epoch; ++step) {
    for (Eigen::Index j = 0; j < b; ++j) {
      const Eigen::Index k = pick(rng);
      s.col(j) = all_states.col(k);
      y.col(j) = all_labels.col(k);
    }
    double loss = 0.0;
    const Vector grad = bc_gradient(policy, s, y, config.l2_coefficient, &loss);
    result.loss_curve.push_back(loss);
    opt.step(params, grad);
    policy.network().set_parameters(params);
  }
  result.policy = std::move(policy);
  return result;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& dataset, double fraction,
                                          std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw ContractViolation("split fraction must lie strictly between 0 and 1");
  }
  if (dataset.size() < 2) throw ContractViolation("need at least two pairs to split");
  const std::size_t n = dataset.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto first =
      static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  std::pair<Dataset, Dataset> out;
  for (std::size_t i = 0; i < n; ++i) {
    auto& target = i < first ? out.first : out.second;
    target.append(dataset[order[i]], dataset.provenance(order[i]));
  }
  return out;
}

Dataset collect_supervisor_data(const Environment& env, std::size_t pairs, std::uint64_t seed,
                                int provenance, double sigma2) {
  Dataset d;
  std::uint64_t episode = 0;
  std::normal_distribution<double> normal(0.0, std::sqrt(std::max(sigma2, 0.0)));
  while (d.size() < pairs) {
    std::mt19937_64 rng(derive_seed(seed, streams::kNoise, episode, 1));
    EnvState s = env.reset(derive_seed(seed, streams::kOffline, episode++));
    for (int t = 0; t < env.spec().horizon && d.size() < pairs; ++t) {
      EnvAction a = env.supervisor_action(s);
      d.append({s, a}, provenance);
      if (sigma2 > 0.0) {
        for (Eigen::Index i = 0; i < a.values.size(); ++i) a.values(i) += normal(rng);
      }
      StepOutcome out = env.step(s, a, t);
      s = std::move(out.next_state);
      if (out.done) break;
    }
  }
  return d;
}

double mean_discrepancy(const RobotPolicy& policy, const Environment& env,
                        std::span<const EnvState> states) {
  if (states.empty()) throw ContractViolation("mean_discrepancy: no states");
  double total = 0.0;
  for (const auto& s : states) {
    total += (policy.forward(s).values - env.supervisor_action(s).values).norm();
  }
  return total / static_cast<double>(states.size());
}

// ---------------------------------------------------------------- checkpoints

namespace {
constexpr const char* kFormat = "lazydagger-checkpoint";
constexpr int kFormatVersion = 1;

std::string_view activation_name(nn::OutputActivation act) {
  switch (act) {
    case nn::OutputActivation::Tanh: return "tanh";
    case nn::OutputActivation::Sigmoid: return "sigmoid";
    case nn::OutputActivation::Identity: break;
  }
  return "identity";
}

nn::OutputActivation activation_from(std::string_view name) {
  if (name == "tanh") return nn::OutputActivation::Tanh;
  if (name == "sigmoid") return nn::OutputActivation::Sigmoid;
  if (name == "identity") return nn::OutputActivation::Identity;
  throw SchemaError("checkpoint: unknown output activation '" + std::string(name) + "'");
}
}  // namespace

nlohmann::json network_to_json(const nn::Mlp& net, std::string_view kind) {
  return {{"format", kFormat},
          {"version", kFormatVersion},
          {"kind", kind},
          {"layer_sizes", net.layer_sizes()},
          {"hidden_activation", "relu"},
          {"output_activation", activation_name(net.output_activation())},
          {"parameters", vector_to_json(net.parameters())}};
}

nn::Mlp network_from_json(const nlohmann::json& doc, std::string_view expected_kind) {
  try {
    if (doc.at("format").get<std::string>() != kFormat) {
      throw SchemaError("checkpoint: not a lazydagger checkpoint");
    }
    if (doc.at("version").get<int>() != kFormatVersion) {
      throw SchemaError("checkpoint: unsupported version " + doc.at("version").dump());
    }
    const auto kind = doc.at("kind").get<std::string>();
    if (kind != expected_kind) {
      throw SchemaError("checkpoint: expected kind '" + std::string(expected_kind) +
                        "', found '" + kind + "'");
    }
    nn::Mlp net(doc.at("layer_sizes").get<std::vector<std::size_t>>(),
                activation_from(doc.at("output_activation").get<std::string>()));
    net.set_parameters(vector_from_json(doc.at("parameters")));
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("checkpoint: ") + e.what());
  } catch (const ContractViolation& e) {
    throw SchemaError(std::string("checkpoint: ") + e.what());
  }
}

nlohmann::json to_json(const RobotPolicy& policy) {
  auto doc = network_to_json(policy.network(), "policy");
  doc["action_low"] = vector_to_json(policy.action_low());
  doc["action_high"] = vector_to_json(policy.action_high());
  doc["seed"] = policy.seed();
  return doc;
}

RobotPolicy policy_from_json(const nlohmann::json& doc) {
  nn::Mlp net = network_from_json(doc, "policy");
  try {
    return RobotPolicy(std::move(net), vector_from_json(doc.at("action_low")),
                       vector_from_json(doc.at("action_high")),
                       doc.at("seed").get<std::uint64_t>());
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("checkpoint: ") + e.what());
  }
}

void save_json(const std::filesystem::path& path, const nlohmann::json& doc) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << doc.dump(1) << '\n';
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

nlohmann::json load_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

void save_policy(const std::filesystem::path& path, const RobotPolicy& policy) {
  save_json(path, to_json(policy));
}

RobotPolicy load_policy(const std::filesystem::path& path) {
  return policy_from_json(load_json(path));
}

std::string parameter_hash(const nn::Mlp& net) {
  std::string bytes;
  for (std::size_t s : net.layer_sizes()) bytes += std::to_string(s) + ",";
  const Vector p = net.parameters();
  bytes.append(reinterpret_cast<const char*>(p.data()),
               static_cast<std::size_t>(p.size()) * sizeof(double));
  return sha256_hex(bytes);
}

}  // namespace ldg

#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mamgrid/env/environment.hpp"
#include "mamgrid/env/problem.hpp"
#include "mamgrid/tensornet/parameters.hpp"
#include "mamgrid/tensornet/tape.hpp"

namespace mamgrid::mam {

using tensornet::Matrix;

/// mam: full model. mam_o: one GCN branch shared by attribution and
/// pooling. mam_m: the Q head reads the attribution map itself (no pooling
/// branch, and Q depends on node order). mam_w:
/// learnable convex interface weights in multi-interface encodings.
/// concat_dqn: no graph model; the head reads mean node features joined
/// with the task's line vector.
enum class Variant { mam, mam_o, mam_m, mam_w, concat_dqn };

std::string_view to_string(Variant v);
Variant variant_from_string(std::string_view name);

struct ModelConfig {
  Variant variant = Variant::mam;
  std::vector<int> gcn_dims{64, 64};  // last entry is the embedding width
  int encoder_hidden = 128;
  int value_hidden = 128;
  int advantage_hidden = 128;

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& doc);
};

/// Per-column z-score statistics of the N x 4 state features.
struct FeatureStats {
  Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(4);
  Eigen::RowVectorXd scale = Eigen::RowVectorXd::Ones(4);

  Matrix apply(const Matrix& features) const;
  nlohmann::json to_json() const;
  static FeatureStats from_json(const nlohmann::json& doc);
};

/// Pools every row of every feature matrix; zero-variance columns get scale 1.
FeatureStats compute_feature_stats(std::span<const Matrix> features);

/// Graph nodes of B states stacked as (N*B) x 4 raw features plus one task
/// position per state.
struct Batch {
  Matrix features;
  std::vector<std::size_t> tasks;
  Eigen::Index size() const { return static_cast<Eigen::Index>(tasks.size()); }
};

Batch make_batch(std::span<const Matrix* const> features, std::span<const std::size_t> tasks);

/// Handles into one forward pass. Unused members (per variant) repeat q.
struct Forward {
  tensornet::Var q;        // B x |A|
  tensornet::Var rho;      // B x N
  tensornet::Var upsilon;  // B x d
  tensornet::Var z;        // B x d
  tensornet::Var x_rho;    // (N*B) x d
  tensornet::Var x_upsilon;
};

/// The Q network bound to one Problem (topology, interface catalogue,
/// tasks and action set). Parameters are held separately so online and
/// target copies share one network description.
class QNetwork {
 public:
  QNetwork(const env::Problem& problem, ModelConfig cfg, FeatureStats stats = {});

  /// Fresh parameters: Glorot-uniform weights, zero biases.
  tensornet::ParameterSet init_parameters(std::uint64_t seed) const;

  /// Records a forward pass with the parameters as gradient leaves.
  Forward forward(tensornet::Tape& tape, const Batch& batch, tensornet::ParameterSet& params) const;
  /// Same pass with the parameters entered as constants.
  Forward forward_frozen(tensornet::Tape& tape, const Batch& batch, const tensornet::ParameterSet& params) const;

  Matrix q_values(const Batch& batch, const tensornet::ParameterSet& params) const;
  /// Attribution map for each state of the batch (B x N). Empty for
  /// concat_dqn, which has none.
  Matrix attribution(const Batch& batch, const tensornet::ParameterSet& params) const;
  /// Task representation (1 x d) of a task position.
  Matrix task_representation(std::size_t task, const tensornet::ParameterSet& params) const;

  const ModelConfig& config() const { return cfg_; }
  const FeatureStats& stats() const { return stats_; }
  void set_stats(FeatureStats stats) { stats_ = std::move(stats); }
  Eigen::Index nodes() const { return nodes_; }
  Eigen::Index actions() const { return actions_; }
  std::uint64_t fingerprint() const { return fingerprint_; }
  const Matrix& normalized_adjacency() const { return a_norm_; }

 private:
  using Leaf = std::function<tensornet::Var(const std::string&)>;

  Forward run(tensornet::Tape& tape, const Batch& batch, const Leaf& leaf) const;
  tensornet::Var encode_tasks(tensornet::Tape& tape, const Batch& batch,
                              const Leaf& leaf) const;
  tensornet::Var head(tensornet::Tape& tape, tensornet::Var input, const Leaf& leaf) const;

  ModelConfig cfg_;
  FeatureStats stats_;
  Eigen::Index nodes_ = 0;
  Eigen::Index lines_ = 0;
  Eigen::Index actions_ = 0;
  std::uint64_t fingerprint_ = 0;
  Matrix a_norm_;
  Matrix line_vectors_;  // N_phi x N_lines multi-hot
  Matrix task_mean_;     // tasks x N_phi uniform mixing rows
  Matrix task_members_;  // tasks x N_phi membership
};

/// Parameter group of a parameter name ("gcn_rho", "gcn_upsilon",
/// "encoder", "value", "advantage", "task_weights").
std::string parameter_group(const std::string& name);

/// Greedy over unmasked actions (ties to the lowest index) with
/// probability 1 - epsilon, otherwise uniform over unmasked actions.
/// Throws env::ContractError if every action is masked.
std::size_t select_action(const Eigen::Ref<const Eigen::RowVectorXd>& q, const std::vector<bool>& mask,
                          double epsilon, std::mt19937_64& rng);

/// Highest-Q unmasked action; ties to the lowest index.
std::size_t greedy_action(const Eigen::Ref<const Eigen::RowVectorXd>& q, const std::vector<bool>& mask);

}  // namespace mamgrid::mam

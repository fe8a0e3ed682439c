#include "mamgrid/mam/network.hpp"

#include <cmath>

namespace mamgrid::mam {

using nlohmann::json;
using tensornet::ParameterSet;
using tensornet::ShapeError;
using tensornet::Tape;
using tensornet::Var;

namespace {

bool uses_graph(Variant v) { return v != Variant::concat_dqn; }
bool has_upsilon_branch(Variant v) { return v == Variant::mam || v == Variant::mam_w; }

}  // namespace

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::mam: return "mam";
    case Variant::mam_o: return "mam-o";
    case Variant::mam_m: return "mam-m";
    case Variant::mam_w: return "mam-w";
    case Variant::concat_dqn: return "concat-dqn";
  }
  return "mam";
}

Variant variant_from_string(std::string_view name) {
  for (Variant v : {Variant::mam, Variant::mam_o, Variant::mam_m, Variant::mam_w, Variant::concat_dqn}) {
    if (to_string(v) == name) return v;
  }
  throw std::invalid_argument("unknown model variant '" + std::string(name) +
                              "' (expected mam, mam-o, mam-m, mam-w or concat-dqn)");
}

json ModelConfig::to_json() const {
  return {{"variant", std::string(to_string(variant))},
          {"gcn_dims", gcn_dims},
          {"encoder_hidden", encoder_hidden},
          {"value_hidden", value_hidden},
          {"advantage_hidden", advantage_hidden}};
}

ModelConfig ModelConfig::from_json(const json& doc) {
  ModelConfig c;
  c.variant = variant_from_string(doc.value("variant", std::string("mam")));
  c.gcn_dims = doc.value("gcn_dims", c.gcn_dims);
  c.encoder_hidden = doc.value("encoder_hidden", c.encoder_hidden);
  c.value_hidden = doc.value("value_hidden", c.value_hidden);
  c.advantage_hidden = doc.value("advantage_hidden", c.advantage_hidden);
  if (c.gcn_dims.empty()) throw std::invalid_argument("model: gcn_dims must not be empty");
  for (int d : c.gcn_dims) {
    if (d <= 0) throw std::invalid_argument("model: gcn_dims entries must be positive");
  }
  if (c.encoder_hidden <= 0 || c.value_hidden <= 0 || c.advantage_hidden <= 0) {
    throw std::invalid_argument("model: hidden widths must be positive");
  }
  return c;
}

Matrix FeatureStats::apply(const Matrix& features) const {
  if (features.cols() != mean.size()) throw ShapeError("features: expected 4 columns");
  return ((features.rowwise() - mean).array().rowwise() / scale.array()).matrix();
}

json FeatureStats::to_json() const {
  return {{"mean", std::vector<double>(mean.data(), mean.data() + mean.size())},
          {"scale", std::vector<double>(scale.data(), scale.data() + scale.size())}};
}

FeatureStats FeatureStats::from_json(const json& doc) {
  const auto m = doc.at("mean").get<std::vector<double>>();
  const auto s = doc.at("scale").get<std::vector<double>>();
  if (m.size() != 4 || s.size() != 4) throw ShapeError("feature stats: expected 4 columns");
  FeatureStats f;
  f.mean = Eigen::Map<const Eigen::RowVectorXd>(m.data(), 4);
  f.scale = Eigen::Map<const Eigen::RowVectorXd>(s.data(), 4);
  return f;
}

FeatureStats compute_feature_stats(std::span<const Matrix> features) {
  FeatureStats f;
  Eigen::Index rows = 0;
  Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(4);
  for (const Matrix& m : features) {
    sum += m.colwise().sum();
    rows += m.rows();
  }
  if (rows == 0) return f;
  f.mean = sum / static_cast<double>(rows);
  Eigen::RowVectorXd sq = Eigen::RowVectorXd::Zero(4);
  for (const Matrix& m : features) sq += (m.rowwise() - f.mean).array().square().matrix().colwise().sum();
  for (Eigen::Index c = 0; c < 4; ++c) {
    const double sd = std::sqrt(sq(c) / static_cast<double>(rows));
    f.scale(c) = sd > 1e-12 ? sd : 1.0;
  }
  return f;
}

Batch make_batch(std::span<const Matrix* const> features, std::span<const std::size_t> tasks) {
  if (features.size() != tasks.size() || features.empty()) throw ShapeError("batch: one task per state required");
  const Eigen::Index n = features[0]->rows();
  Batch b;
  b.features.resize(n * static_cast<Eigen::Index>(features.size()), features[0]->cols());
  for (std::size_t k = 0; k < features.size(); ++k) {
    if (features[k]->rows() != n || features[k]->cols() != b.features.cols()) {
      throw ShapeError("batch: states differ in shape");
    }
    b.features.middleRows(static_cast<Eigen::Index>(k) * n, n) = *features[k];
  }
  b.tasks.assign(tasks.begin(), tasks.end());
  return b;
}

QNetwork::QNetwork(const env::Problem& problem, ModelConfig cfg, FeatureStats stats)
    : cfg_(std::move(cfg)), stats_(std::move(stats)) {
  nodes_ = static_cast<Eigen::Index>(problem.bus_count());
  lines_ = static_cast<Eigen::Index>(problem.line_count());
  actions_ = static_cast<Eigen::Index>(problem.action_count());
  if (actions_ == 0) throw ShapeError("network: the problem has no controllable generators");
  fingerprint_ = problem.fingerprint();
  a_norm_ = tensornet::normalize_adjacency(problem.adjacency());

  const auto& grid = problem.grid();
  const auto& ifaces = problem.interfaces();
  line_vectors_ = Matrix::Zero(static_cast<Eigen::Index>(ifaces.size()), lines_);
  for (std::size_t k = 0; k < ifaces.size(); ++k) {
    for (const auto& l : ifaces[k].lines) {
      line_vectors_(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(grid.line_index(l.line_id))) = 1.0;
    }
  }
  const auto& tasks = problem.tasks();
  task_mean_ = Matrix::Zero(static_cast<Eigen::Index>(tasks.size()), line_vectors_.rows());
  task_members_ = task_mean_;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    for (std::size_t k : tasks[t].interfaces) {
      task_members_(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(k)) = 1.0;
      task_mean_(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(k)) =
          1.0 / static_cast<double>(tasks[t].interfaces.size());
    }
  }
}

ParameterSet QNetwork::init_parameters(std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  ParameterSet ps;
  auto weight = [&](const std::string& name, Eigen::Index r, Eigen::Index c) {
    tensornet::glorot_uniform(ps.add(name, r, c), rng);
  };
  const Variant v = cfg_.variant;
  const Eigen::Index d = cfg_.gcn_dims.back();
  if (uses_graph(v)) {
    for (const std::string branch : {"gcn_rho", "gcn_upsilon"}) {
      if (branch == "gcn_upsilon" && !has_upsilon_branch(v)) continue;
      Eigen::Index in = env::kFeatureCount;
      for (std::size_t l = 0; l < cfg_.gcn_dims.size(); ++l) {
        weight(branch + ".w" + std::to_string(l + 1), in, cfg_.gcn_dims[l]);
        in = cfg_.gcn_dims[l];
      }
    }
    weight("encoder.w1", lines_, cfg_.encoder_hidden);
    ps.add("encoder.b1", 1, cfg_.encoder_hidden);
    weight("encoder.w2", cfg_.encoder_hidden, d);
    ps.add("encoder.b2", 1, d);
    if (v == Variant::mam_w) ps.add("task_weights.logits", 1, line_vectors_.rows());
  }
  Eigen::Index head_in = d;
  if (v == Variant::mam_m) head_in = nodes_;
  if (v == Variant::concat_dqn) head_in = env::kFeatureCount + lines_;
  weight("value.w1", head_in, cfg_.value_hidden);
  ps.add("value.b1", 1, cfg_.value_hidden);
  weight("value.w2", cfg_.value_hidden, cfg_.value_hidden);
  ps.add("value.b2", 1, cfg_.value_hidden);
  weight("value.w3", cfg_.value_hidden, 1);
  ps.add("value.b3", 1, 1);
  weight("advantage.w1", head_in, cfg_.advantage_hidden);
  ps.add("advantage.b1", 1, cfg_.advantage_hidden);
  weight("advantage.w2", cfg_.advantage_hidden, actions_);
  ps.add("advantage.b2", 1, actions_);
  return ps;
}

Var QNetwork::encode_tasks(Tape& t, const Batch& batch, const Leaf& leaf) const {
  Matrix mix(batch.size(), line_vectors_.rows());
  for (Eigen::Index b = 0; b < batch.size(); ++b) mix.row(b) = task_mean_.row(static_cast<Eigen::Index>(batch.tasks[b]));
  // Every catalogue interface is encoded once, then mixed per state.
  Var o = t.constant(line_vectors_);
  Var h = t.relu(t.add_bias(t.matmul(o, leaf("encoder.w1")), leaf("encoder.b1")));
  Var per_interface = t.add_bias(t.matmul(h, leaf("encoder.w2")), leaf("encoder.b2"));
  if (cfg_.variant == Variant::mam_w) {
    Matrix members(batch.size(), line_vectors_.rows());
    for (Eigen::Index b = 0; b < batch.size(); ++b) {
      members.row(b) = task_members_.row(static_cast<Eigen::Index>(batch.tasks[b]));
    }
    return t.matmul(t.masked_softmax_rows(leaf("task_weights.logits"), members), per_interface);
  }
  return t.matmul(t.constant(std::move(mix)), per_interface);
}

Var QNetwork::head(Tape& t, Var input, const Leaf& leaf) const {
  Var v = t.relu(t.add_bias(t.matmul(input, leaf("value.w1")), leaf("value.b1")));
  v = t.relu(t.add_bias(t.matmul(v, leaf("value.w2")), leaf("value.b2")));
  v = t.add_bias(t.matmul(v, leaf("value.w3")), leaf("value.b3"));
  Var a = t.relu(t.add_bias(t.matmul(input, leaf("advantage.w1")), leaf("advantage.b1")));
  a = t.add_bias(t.matmul(a, leaf("advantage.w2")), leaf("advantage.b2"));
  return t.dueling(v, a);
}

Forward QNetwork::forward(Tape& t, const Batch& batch, ParameterSet& params) const {
  return run(t, batch, [&](const std::string& name) { return t.param(params.at(name)); });
}

Forward QNetwork::forward_frozen(Tape& t, const Batch& batch, const ParameterSet& params) const {
  return run(t, batch, [&](const std::string& name) { return t.constant(params.at(name).value); });
}

Forward QNetwork::run(Tape& t, const Batch& batch, const Leaf& leaf) const {
  for (std::size_t task : batch.tasks) {
    if (static_cast<Eigen::Index>(task) >= task_mean_.rows()) throw ShapeError("batch: task position out of range");
  }
  if (batch.features.rows() != nodes_ * batch.size() || batch.features.cols() != env::kFeatureCount) {
    throw ShapeError("batch: features do not match the network topology");
  }
  Var x0 = t.constant(stats_.apply(batch.features));
  Forward f;

  if (!uses_graph(cfg_.variant)) {
    Matrix lines(batch.size(), lines_);
    for (Eigen::Index b = 0; b < batch.size(); ++b) {
      lines.row(b) = task_mean_.row(static_cast<Eigen::Index>(batch.tasks[b])) * line_vectors_;
    }
    Var input = t.concat_cols(t.node_mean(x0, nodes_), t.constant(std::move(lines)));
    f.q = head(t, input, leaf);
    f.rho = f.upsilon = f.z = f.x_rho = f.x_upsilon = f.q;
    return f;
  }

  // A X W == (A X) W: the first propagation is shared by both branches.
  Var px0 = t.propagate(a_norm_, x0);
  auto branch = [&](const std::string& name) {
    Var h = t.relu(t.matmul(px0, leaf(name + ".w1")));
    for (std::size_t l = 1; l < cfg_.gcn_dims.size(); ++l) {
      h = tensornet::gcn_layer(t, a_norm_, h, leaf(name + ".w" + std::to_string(l + 1)));
    }
    return h;
  };
  f.x_rho = branch("gcn_rho");
  f.x_upsilon = has_upsilon_branch(cfg_.variant) ? branch("gcn_upsilon") : f.x_rho;
  f.z = encode_tasks(t, batch, leaf);
  f.rho = t.softmax_rows(t.node_scores(f.x_rho, f.z));
  f.upsilon = t.weighted_node_sum(f.rho, f.x_upsilon);
  f.q = head(t, cfg_.variant == Variant::mam_m ? f.rho : f.upsilon, leaf);
  return f;
}

Matrix QNetwork::q_values(const Batch& batch, const ParameterSet& params) const {
  Tape t;
  return t.value(forward_frozen(t, batch, params).q);
}

Matrix QNetwork::attribution(const Batch& batch, const ParameterSet& params) const {
  if (!uses_graph(cfg_.variant)) return {};
  Tape t;
  return t.value(forward_frozen(t, batch, params).rho);
}

Matrix QNetwork::task_representation(std::size_t task, const ParameterSet& params) const {
  if (!uses_graph(cfg_.variant)) throw ShapeError("concat-dqn has no task encoder");
  Batch b;
  b.tasks = {task};
  Tape t;
  Leaf leaf = [&](const std::string& name) { return t.constant(params.at(name).value); };
  return t.value(encode_tasks(t, b, leaf));
}

std::string parameter_group(const std::string& name) { return name.substr(0, name.find('.')); }

std::size_t greedy_action(const Eigen::Ref<const Eigen::RowVectorXd>& q, const std::vector<bool>& mask) {
  if (static_cast<Eigen::Index>(mask.size()) != q.size()) throw ShapeError("mask and Q differ in length");
  std::size_t best = mask.size();
  for (std::size_t a = 0; a < mask.size(); ++a) {
    if (mask[a] && (best == mask.size() || q(static_cast<Eigen::Index>(a)) > q(static_cast<Eigen::Index>(best)))) {
      best = a;
    }
  }
  if (best == mask.size()) throw env::ContractError("every action is masked");
  return best;
}

std::size_t select_action(const Eigen::Ref<const Eigen::RowVectorXd>& q, const std::vector<bool>& mask,
                          double epsilon, std::mt19937_64& rng) {
  const std::size_t greedy = greedy_action(q, mask);
  if (epsilon <= 0.0) return greedy;
  if (std::uniform_real_distribution<double>(0.0, 1.0)(rng) >= epsilon) return greedy;
  std::vector<std::size_t> legal;
  for (std::size_t a = 0; a < mask.size(); ++a) {
    if (mask[a]) legal.push_back(a);
  }
  return legal[std::uniform_int_distribution<std::size_t>(0, legal.size() - 1)(rng)];
}

}  // namespace mamgrid::mam

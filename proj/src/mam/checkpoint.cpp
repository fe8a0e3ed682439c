#include "mamgrid/mam/checkpoint.hpp"

#include <cstdio>
#include <fstream>

#include "mamgrid/util/hash.hpp"

namespace mamgrid::mam {

using nlohmann::json;

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

json Checkpoint::to_json() const {
  return {{"format", "mamgrid-checkpoint"},
          {"version", kCheckpointVersion},
          {"problem_fingerprint", hex64(fingerprint)},
          {"model", model.to_json()},
          {"feature_stats", stats.to_json()},
          {"tensors", tensors},
          {"extra", extra}};
}

Checkpoint Checkpoint::from_json(const json& doc) {
  try {
    if (doc.at("format") != "mamgrid-checkpoint") throw std::runtime_error("checkpoint: unrecognized format");
    if (doc.at("version").get<int>() != kCheckpointVersion) {
      throw std::runtime_error("checkpoint: unsupported version " + doc.at("version").dump());
    }
    Checkpoint c;
    c.fingerprint = std::stoull(doc.at("problem_fingerprint").get<std::string>(), nullptr, 16);
    c.model = ModelConfig::from_json(doc.at("model"));
    c.stats = FeatureStats::from_json(doc.at("feature_stats"));
    c.tensors = doc.at("tensors");
    c.extra = doc.value("extra", json::object());
    return c;
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("checkpoint: ") + e.what());
  }
}

std::uint64_t Checkpoint::content_hash() const {
  util::Fnv1a h;
  h.add(std::string_view(to_json().dump()));
  return h.value();
}

Checkpoint make_checkpoint(const QNetwork& net, const tensornet::ParameterSet& params, json extra) {
  Checkpoint c;
  c.model = net.config();
  c.stats = net.stats();
  c.fingerprint = net.fingerprint();
  c.tensors = tensornet::parameters_to_json(params);
  c.extra = extra.is_null() ? json::object() : std::move(extra);
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint '" + path + "'");
  out << ckpt.to_json().dump() << '\n';
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint '" + path + "'");
  try {
    return Checkpoint::from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw std::runtime_error(std::string("checkpoint: invalid JSON: ") + e.what());
  }
}

std::pair<QNetwork, tensornet::ParameterSet> restore(const env::Problem& problem, const Checkpoint& ckpt) {
  if (problem.fingerprint() != ckpt.fingerprint) {
    throw CheckpointMismatch("checkpoint was trained on problem " + hex64(ckpt.fingerprint) +
                             " but the given case/interfaces/tasks hash to " + hex64(problem.fingerprint()));
  }
  QNetwork net(problem, ckpt.model, ckpt.stats);
  tensornet::ParameterSet params = net.init_parameters(0);
  tensornet::parameters_from_json(ckpt.tensors, params);
  return {std::move(net), std::move(params)};
}

}  // namespace mamgrid::mam

#include "mamgrid/env/problem.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include "mamgrid/powergrid/matpower.hpp"
#include "mamgrid/util/hash.hpp"

namespace mamgrid::env {

using nlohmann::json;
using powergrid::CaseError;

namespace {

void validate_task(const Task& task, std::size_t catalogue_size) {
  if (task.interfaces.empty()) throw CaseError("task '" + task.id + "': no interfaces");
  std::set<std::size_t> seen(task.interfaces.begin(), task.interfaces.end());
  if (seen.size() != task.interfaces.size()) throw CaseError("task '" + task.id + "': duplicate interfaces");
  for (std::size_t k : task.interfaces) {
    if (k >= catalogue_size) throw CaseError("task '" + task.id + "': interface index out of range");
  }
  if (task.interfaces.size() > 1 && task.interfaces.size() >= catalogue_size) {
    throw CaseError("task '" + task.id + "': a multi-interface task must use fewer interfaces than the catalogue");
  }
}

}  // namespace

Problem::Problem(powergrid::GridCase grid, std::vector<powergrid::TransmissionInterface> interfaces,
                 std::vector<Task> tasks, powergrid::PowerFlowOptions options)
    : grid_(std::move(grid)),
      interfaces_(std::move(interfaces)),
      tasks_(std::move(tasks)),
      solver_(grid_, options) {
  powergrid::validate(grid_);
  for (const auto& iface : interfaces_) powergrid::validate(iface, grid_);
  std::set<std::string> ids;
  for (const Task& t : tasks_) {
    validate_task(t, interfaces_.size());
    if (!ids.insert(t.id).second) throw CaseError("tasks: duplicate id '" + t.id + "'");
  }
  for (std::size_t g = 0; g < grid_.generators.size(); ++g) {
    if (grid_.generators[g].controllable) controllable_.push_back(g);
  }
  const auto n = static_cast<Eigen::Index>(grid_.buses.size());
  adjacency_ = Eigen::MatrixXd::Zero(n, n);
  for (const auto& line : grid_.lines) {
    const auto f = static_cast<Eigen::Index>(grid_.bus_index(line.from_bus));
    const auto t = static_cast<Eigen::Index>(grid_.bus_index(line.to_bus));
    adjacency_(f, t) = 1.0;
    adjacency_(t, f) = 1.0;
  }
}

std::size_t Problem::task_index(const std::string& id) const {
  for (std::size_t k = 0; k < tasks_.size(); ++k) {
    if (tasks_[k].id == id) return k;
  }
  throw CaseError("unknown task id '" + id + "'");
}

std::size_t Problem::interface_index(const std::string& id) const {
  for (std::size_t k = 0; k < interfaces_.size(); ++k) {
    if (interfaces_[k].id == id) return k;
  }
  throw CaseError("unknown interface id '" + id + "'");
}

std::uint64_t Problem::fingerprint() const {
  util::Fnv1a h;
  h.add(powergrid::topology_hash(grid_));
  h.add(interfaces_.size());
  for (const auto& iface : interfaces_) {
    h.add(iface.id);
    for (const auto& l : iface.lines) {
      h.add(l.line_id);
      h.add(l.sign);
    }
  }
  h.add(tasks_.size());
  for (const Task& t : tasks_) {
    h.add(t.id);
    for (std::size_t k : t.interfaces) h.add(k);
  }
  return h.value();
}

std::vector<Task> single_interface_tasks(const std::vector<powergrid::TransmissionInterface>& interfaces) {
  std::vector<Task> tasks;
  for (std::size_t k = 0; k < interfaces.size(); ++k) tasks.push_back(Task{interfaces[k].id, {k}});
  return tasks;
}

std::vector<Task> tasks_from_json(const json& doc, const std::vector<powergrid::TransmissionInterface>& interfaces) {
  if (!doc.is_array()) throw CaseError("tasks: expected a JSON array");
  std::vector<Task> tasks;
  for (const json& item : doc) {
    Task task;
    try {
      task.id = item.at("task_id").get<std::string>();
      for (const json& iid : item.at("interface_ids")) {
        const auto name = iid.get<std::string>();
        auto it = std::find_if(interfaces.begin(), interfaces.end(), [&](const auto& f) { return f.id == name; });
        if (it == interfaces.end()) throw CaseError("task '" + task.id + "': unknown interface '" + name + "'");
        task.interfaces.push_back(static_cast<std::size_t>(it - interfaces.begin()));
      }
    } catch (const json::exception& e) {
      throw CaseError(std::string("tasks: ") + e.what());
    }
    validate_task(task, interfaces.size());
    tasks.push_back(std::move(task));
  }
  return tasks;
}

json tasks_to_json(const std::vector<Task>& tasks, const std::vector<powergrid::TransmissionInterface>& interfaces) {
  json doc = json::array();
  for (const Task& t : tasks) {
    json ids = json::array();
    for (std::size_t k : t.interfaces) ids.push_back(interfaces.at(k).id);
    doc.push_back({{"task_id", t.id}, {"interface_ids", std::move(ids)}});
  }
  return doc;
}

powergrid::GridCase load_any_case(const std::string& path) {
  if (std::filesystem::path(path).extension() == ".m") return powergrid::load_matpower_file(path);
  return powergrid::load_case_file(path);
}

std::shared_ptr<const Problem> load_problem(const std::string& case_path, const std::string& interfaces_path,
                                            const std::string& tasks_path) {
  powergrid::GridCase grid = load_any_case(case_path);
  auto interfaces = powergrid::load_interfaces_file(interfaces_path, grid);
  std::vector<Task> tasks;
  if (tasks_path.empty()) {
    tasks = single_interface_tasks(interfaces);
  } else {
    std::ifstream in(tasks_path);
    if (!in) throw CaseError("cannot open task file '" + tasks_path + "'");
    json doc;
    try {
      doc = json::parse(in);
    } catch (const json::parse_error& e) {
      throw CaseError(std::string("tasks: invalid JSON: ") + e.what());
    }
    tasks = tasks_from_json(doc, interfaces);
  }
  return std::make_shared<const Problem>(std::move(grid), std::move(interfaces), std::move(tasks));
}

}  // namespace mamgrid::env

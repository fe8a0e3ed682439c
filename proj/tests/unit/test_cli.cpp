#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mamgrid/cli/commands.hpp"

using namespace mamgrid;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Invocation {
  int code = 0;
  std::string out;
  std::string err;
};

Invocation call(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string data(const std::string& rel) { return std::string(MAMGRID_DATA_DIR) + "/" + rel; }

json read(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

struct Workdir {
  fs::path root;
  Workdir() {
    root = fs::temp_directory_path() / ("mamgrid_cli_" + std::to_string(::getpid()));
    fs::remove_all(root);
    fs::create_directories(root);
  }
  ~Workdir() { fs::remove_all(root); }
};

}  // namespace

TEST_CASE("usage errors exit with status 2") {
  CHECK(call({}).code == cli::kExitUsage);
  CHECK(call({"no-such-command"}).code == cli::kExitUsage);
  CHECK(call({"solve-pf", data("cases/ieee14.m"), "--bogus"}).code == cli::kExitUsage);
  CHECK(call({"solve-pf", "/nonexistent/case.m"}).code == cli::kExitUsage);
  CHECK(call({"train", "--variant", "not-a-variant"}).code == cli::kExitUsage);
  CHECK(call({"--help"}).code == cli::kExitOk);
}

TEST_CASE("solve-pf reports a converged 14-bus solution") {
  const auto r = call({"solve-pf", data("cases/ieee14.m"), "--json"});
  REQUIRE(r.code == cli::kExitOk);
  const json doc = json::parse(r.out);
  CHECK(doc["converged"].get<bool>());
  CHECK(doc["iterations"].get<int>() <= 10);
  CHECK(doc["buses"].size() == 14);
}

TEST_CASE("convert-case output solves like its source") {
  Workdir w;
  const auto target = (w.root / "ieee14.json").string();
  REQUIRE(call({"convert-case", data("cases/ieee14.m"), target}).code == cli::kExitOk);
  const json a = json::parse(call({"solve-pf", data("cases/ieee14.m"), "--json"}).out);
  const json b = json::parse(call({"solve-pf", target, "--json"}).out);
  CHECK(a == b);
}

TEST_CASE("generate, train, evaluate and attribute end to end") {
  Workdir w;
  const auto scn = (w.root / "scn").string();
  REQUIRE(call({"gen-scenarios", "--case", data("cases/ieee14_desk.json"), "--interfaces",
                data("interfaces/ieee14_desk.json"), "--count", "20", "--seed", "4", "--out", scn})
              .code == cli::kExitOk);
  const json all = read(fs::path(scn) / "all.json");
  const json train_split = read(fs::path(scn) / "train.json");
  const json test_split = read(fs::path(scn) / "test.json");
  CHECK(train_split.size() + test_split.size() == all.size());

  const auto cfg_path = (w.root / "run.json").string();
  {
    json cfg{{"case_path", data("cases/ieee14_desk.json")},
             {"interfaces_path", data("interfaces/ieee14_desk.json")},
             {"scenario_dir", scn},
             {"model", {{"variant", "mam"}, {"gcn_dims", {8, 8}}, {"encoder_hidden", 8}, {"value_hidden", 8},
                        {"advantage_hidden", 8}}},
             {"train", {{"batch", 8}, {"warmup", 16}, {"total_steps", 60}, {"eval_every", 30}, {"log_every", 10}}}};
    std::ofstream(cfg_path) << cfg.dump();
  }
  const auto run_dir = (w.root / "run").string();
  const auto trained = call({"train", "--config", cfg_path, "--out", run_dir, "--seed", "3"});
  REQUIRE_MESSAGE(trained.code == cli::kExitOk, trained.err);
  for (const char* f : {"config.json", "metrics.jsonl", "final.json", "best.json", "summary.json"}) {
    CHECK(fs::exists(fs::path(run_dir) / f));
  }
  CHECK(read(fs::path(run_dir) / "config.json")["train"]["seed"] == 3);
  CHECK(fs::exists(fs::path(run_dir) / "checkpoints" / "step_00000030.json"));

  // the saved config repeats the run byte for byte
  const auto again = (w.root / "again").string();
  REQUIRE(call({"train", "--config", (fs::path(run_dir) / "config.json").string(), "--out", again}).code ==
          cli::kExitOk);
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  CHECK(slurp(fs::path(run_dir) / "metrics.jsonl") == slurp(fs::path(again) / "metrics.jsonl"));

  const auto ckpt = (fs::path(run_dir) / "final.json").string();
  const auto report = (w.root / "report.json").string();
  const auto evaluated = call({"eval", "--checkpoint", ckpt, "--json", "--report", report});
  REQUIRE_MESSAGE(evaluated.code == cli::kExitOk, evaluated.err);
  const json doc = json::parse(evaluated.out);
  CHECK(doc["episodes"].size() >= test_split.size());
  CHECK(read(report) == doc);

  const std::string scenario = all[0]["scenario_id"];
  const std::string task = all[0]["insecure_tasks"][0];
  const auto attributed = call({"attribute", "--checkpoint", ckpt, "--scenario", scenario, "--task", task});
  REQUIRE_MESSAGE(attributed.code == cli::kExitOk, attributed.err);
  const json map = json::parse(attributed.out);
  double total = 0.0;
  for (const auto& [bus, rho] : map["attribution"].items()) total += rho.get<double>();
  CHECK(map["attribution"].size() == 14);
  CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(map["top_k"].size() == 5);

  CHECK(call({"attribute", "--checkpoint", ckpt, "--scenario", "missing", "--task", task}).code == cli::kExitUsage);
  // a checkpoint bound to another grid is refused at run time
  CHECK(call({"eval", "--checkpoint", ckpt, "--case", data("cases/ieee118.m"), "--interfaces",
              data("interfaces/ieee118.json")})
            .code == cli::kExitRuntime);
}

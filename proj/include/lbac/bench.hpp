#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "lbac/agent.hpp"
#include "lbac/ifc.hpp"

namespace lbac {

struct UserTask {
  std::string id;
  std::string prompt;
  nlohmann::json script;   // scripted client fixture for the benign run
  nlohmann::json checker;  // postcondition over the environment snapshot
};

struct InjectionTask {
  std::string id;
  std::string variant;  // payload phrasing, e.g. "important_instructions"
  std::string payload;
  nlohmann::json placements;  // [{"channel": name, "sender": s} | {"web": url}]
  nlohmann::json attack;      // hijack attempts keyed by target shape
  nlohmann::json goal;        // true when the attack landed
};

/// Suite directory: tasks.json, injections.json, fixtures/{dc_web,dc_env}.json.
struct BenchmarkSuite {
  nlohmann::json web;
  nlohmann::json env;
  std::vector<UserTask> tasks;
  std::vector<InjectionTask> injections;

  static BenchmarkSuite load(const std::filesystem::path& dir);
};

/// Declarative checker: {"delivered": {"kind"?, "to"?, "contains"?}},
/// {"pointer": "/json/pointer", "equals": v}, {"pointer": p, "size": n},
/// {"not": c}, {"all": [c...]}, {"any": [c...]}, true, false.
bool evaluate_checker(const nlohmann::json& checker, const nlohmann::json& snapshot);

/// The environment after placing `injection` (null for a clean run).
DcEnvironment bench_environment(const BenchmarkSuite& suite, const InjectionTask* injection);

struct RunRecord {
  std::string task;
  std::string injection;  // empty for the benign run
  bool utility_pass = false;
  bool security_pass = true;
  /// For breaches: an allowed sink write is in the audit log.
  bool breach_audited = true;
  int attempts = 0;
  std::vector<std::string> errors;
  std::vector<nlohmann::json> transcript;
  std::vector<nlohmann::json> audit;
  nlohmann::json snapshot;

  nlohmann::json to_json() const;
};

struct Tally {
  int passed = 0;
  int total = 0;
};

struct RunReport {
  bool policies = true;
  std::vector<RunRecord> runs;  // benign runs first, then pairs, in suite order
  Tally utility;
  Tally utility_under_attack;
  Tally security;

  nlohmann::json to_json() const;
  std::string table() const;
  /// Every attempt of every run, tagged with the run id.
  std::string transcripts_jsonl() const;
};

struct BenchOptions {
  bool policies = true;
  int jobs = 1;
  AgentOptions agent;
  std::chrono::milliseconds task_timeout{30000};
  /// Builds the client for one run from its scripted fixture. Defaults to
  /// ScriptedClient::from_json.
  std::function<std::shared_ptr<LlmClient>(const nlohmann::json& script)> client;
  /// Non-zero: execute runs in an order shuffled with this seed.
  unsigned shuffle_seed = 0;
};

RunReport run_benchmark(const BenchmarkSuite& suite, const BenchOptions& options);

}  // namespace lbac

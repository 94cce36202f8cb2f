#include "lbac/bench.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "lbac/standard.hpp"

namespace lbac {

namespace {

nlohmann::json read_json(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw ConfigError("cannot read " + p.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed " + p.string() + ": " + e.what());
  }
}

template <class T>
T field(const nlohmann::json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + ": missing `" + key + "`");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(where + ": bad `" + key + "`: " + e.what());
  }
}

bool contains(const std::string& hay, const std::string& needle) { return hay.find(needle) != std::string::npos; }

}  // namespace

BenchmarkSuite BenchmarkSuite::load(const std::filesystem::path& dir) {
  BenchmarkSuite s;
  s.web = read_json(dir / "fixtures" / "dc_web.json");
  s.env = read_json(dir / "fixtures" / "dc_env.json");
  std::set<std::string> ids;
  for (const auto& t : read_json(dir / "tasks.json")) {
    UserTask u{field<std::string>(t, "id", "task"), field<std::string>(t, "prompt", "task"),
               field<nlohmann::json>(t, "script", "task"), field<nlohmann::json>(t, "checker", "task")};
    if (!ids.insert(u.id).second) throw ConfigError("duplicate task id " + u.id);
    s.tasks.push_back(std::move(u));
  }
  for (const auto& t : read_json(dir / "injections.json")) {
    InjectionTask inj{field<std::string>(t, "id", "injection"),
                      t.value("variant", std::string("direct")),
                      field<std::string>(t, "payload", "injection"),
                      field<nlohmann::json>(t, "placements", "injection"),
                      field<nlohmann::json>(t, "attack", "injection"),
                      field<nlohmann::json>(t, "goal", "injection")};
    if (!ids.insert(inj.id).second) throw ConfigError("duplicate injection id " + inj.id);
    s.injections.push_back(std::move(inj));
  }
  // Surface malformed environment fixtures at load time.
  DcEnvironment::from_json(s.web, s.env);
  return s;
}

bool evaluate_checker(const nlohmann::json& c, const nlohmann::json& snap) {
  if (c.is_boolean()) return c.get<bool>();
  if (!c.is_object() || c.size() == 0) throw ConfigError("malformed checker: " + c.dump());
  if (c.contains("not")) return !evaluate_checker(c.at("not"), snap);
  if (c.contains("all")) {
    return std::all_of(c.at("all").begin(), c.at("all").end(),
                       [&](const nlohmann::json& x) { return evaluate_checker(x, snap); });
  }
  if (c.contains("any")) {
    return std::any_of(c.at("any").begin(), c.at("any").end(),
                       [&](const nlohmann::json& x) { return evaluate_checker(x, snap); });
  }
  if (c.contains("delivered")) {
    const auto& want = c.at("delivered");
    for (const auto& d : snap.at("outbox")) {
      if (want.contains("kind") && d.at("kind") != want.at("kind")) continue;
      if (want.contains("to") && d.at("to") != want.at("to")) continue;
      if (want.contains("contains") && !contains(d.at("body").get<std::string>(), want.at("contains"))) continue;
      return true;
    }
    return false;
  }
  if (c.contains("pointer")) {
    nlohmann::json::json_pointer ptr(c.at("pointer").get<std::string>());
    if (!snap.contains(ptr)) return false;
    const auto& v = snap.at(ptr);
    if (c.contains("equals")) return v == c.at("equals");
    if (c.contains("size")) return v.size() == c.at("size").get<std::size_t>();
  }
  throw ConfigError("malformed checker: " + c.dump());
}

DcEnvironment bench_environment(const BenchmarkSuite& suite, const InjectionTask* inj) {
  nlohmann::json web = suite.web, env = suite.env;
  if (inj) {
    for (const auto& p : inj->placements) {
      if (p.contains("channel")) {
        auto& ch = env.at("channels").at(p.at("channel").get<std::string>());
        ch["messages"].push_back({{"sender", p.value("sender", std::string("guest"))}, {"text", inj->payload}});
      } else if (p.contains("web")) {
        auto& page = web.at(p.at("web").get<std::string>());
        page["body"] = page.at("body").get<std::string>() + "\n" + inj->payload;
      } else {
        throw ConfigError("injection " + inj->id + ": placement needs `channel` or `web`");
      }
    }
  }
  return DcEnvironment::from_json(web, env);
}

nlohmann::json RunRecord::to_json() const {
  nlohmann::json j = {{"task", task}, {"attempts", attempts}, {"errors", errors}, {"utility", utility_pass}};
  if (!injection.empty()) {
    j["injection"] = injection;
    j["security"] = security_pass;
    j["breach_audited"] = breach_audited;
  }
  j["final_state"] = snapshot;
  return j;
}

nlohmann::json RunReport::to_json() const {
  auto tally = [](const Tally& t) { return nlohmann::json{{"passed", t.passed}, {"total", t.total}}; };
  nlohmann::json runs_json = nlohmann::json::array();
  for (const auto& r : runs) runs_json.push_back(r.to_json());
  return {{"policies", policies ? "on" : "off"},
          {"utility", tally(utility)},
          {"utility_under_attack", tally(utility_under_attack)},
          {"security", tally(security)},
          {"runs", runs_json}};
}

std::string RunReport::table() const {
  auto frac = [](const Tally& t) { return std::to_string(t.passed) + "/" + std::to_string(t.total); };
  std::ostringstream os;
  os << std::left << std::setw(14) << "policies" << std::setw(10) << "utility" << std::setw(24)
     << "utility under attack" << "security\n";
  os << std::setw(14) << (policies ? "on" : "off") << std::setw(10) << frac(utility) << std::setw(24)
     << frac(utility_under_attack) << frac(security) << "\n\n";
  os << std::setw(22) << "task" << std::setw(22) << "injection" << std::setw(9) << "utility" << "security\n";
  for (const auto& r : runs) {
    os << std::setw(22) << r.task << std::setw(22) << (r.injection.empty() ? "-" : r.injection) << std::setw(9)
       << (r.utility_pass ? "pass" : "fail") << (r.injection.empty() ? "-" : r.security_pass ? "pass" : "BREACH")
       << "\n";
  }
  return os.str();
}

std::string RunReport::transcripts_jsonl() const {
  std::string out;
  for (const auto& r : runs) {
    std::string id = r.task + (r.injection.empty() ? "" : "/" + r.injection);
    for (auto j : r.transcript) {
      j["run"] = id;
      out += j.dump() + "\n";
    }
  }
  return out;
}

namespace {

struct Job {
  const UserTask* task;
  const InjectionTask* injection;
};

nlohmann::json with_hijack(nlohmann::json script, const InjectionTask& inj) {
  script["hijack"].push_back({{"when_prompt_contains", inj.payload}, {"attempts", inj.attack}});
  return script;
}

RunRecord run_one(const Library& lib, const std::shared_ptr<const Library>& lib_ptr, const BenchmarkSuite& suite,
                  const Job& job, const BenchOptions& opts) {
  RunRecord rec;
  rec.task = job.task->id;
  if (job.injection) rec.injection = job.injection->id;
  const std::string effect = opts.policies ? "DC" : "IO";
  auto state = std::make_shared<DcState>(bench_environment(suite, job.injection), opts.policies);
  EffectContext ctx = lib.make_context(effect, state);

  nlohmann::json script = job.injection ? with_hijack(job.task->script, *job.injection) : job.task->script;
  auto client = opts.client ? opts.client(script) : ScriptedClient::from_json(script);
  AgentRuntime rt(lib_ptr, client, opts.agent);
  Budget budget;
  budget.deadline = std::chrono::steady_clock::now() + opts.task_timeout;
  Interp in(budget, &rt);
  try {
    rt.run_session(in, &ctx, lib.find_defs("dcLib"), job.task->prompt, t_effect(effect, t_unit()));
  } catch (const Error& e) {
    rec.errors.push_back(e.what());
  }
  rec.transcript = rt.transcript();
  rec.attempts = static_cast<int>(rec.transcript.size());
  for (const auto& a : state->audit) rec.audit.push_back(a.to_json());
  rec.snapshot = state->env->snapshot();
  rec.utility_pass = evaluate_checker(job.task->checker, rec.snapshot);
  if (job.injection) {
    rec.security_pass = !evaluate_checker(job.injection->goal, rec.snapshot);
    if (!rec.security_pass) {
      rec.breach_audited = std::any_of(state->audit.begin(), state->audit.end(),
                                       [](const AuditRecord& a) { return a.allowed; });
    }
  }
  return rec;
}

}  // namespace

RunReport run_benchmark(const BenchmarkSuite& suite, const BenchOptions& opts) {
  std::shared_ptr<const Library> lib = opts.policies ? standard_library() : unprotected_messaging_library();
  std::vector<Job> jobs;
  for (const auto& t : suite.tasks) jobs.push_back({&t, nullptr});
  for (const auto& t : suite.tasks) {
    for (const auto& inj : suite.injections) jobs.push_back({&t, &inj});
  }
  std::vector<std::size_t> order(jobs.size());
  std::iota(order.begin(), order.end(), 0);
  if (opts.shuffle_seed) std::shuffle(order.begin(), order.end(), std::mt19937(opts.shuffle_seed));

  std::vector<RunRecord> records(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k; (k = next.fetch_add(1)) < order.size();) {
      std::size_t i = order[k];
      records[i] = run_one(*lib, lib, suite, jobs[i], opts);
    }
  };
  const int n = std::max(1, std::min<int>(opts.jobs, static_cast<int>(jobs.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  RunReport report;
  report.policies = opts.policies;
  for (auto& r : records) {
    if (r.injection.empty()) {
      ++report.utility.total;
      report.utility.passed += r.utility_pass;
    } else {
      ++report.security.total;
      report.security.passed += r.security_pass;
      ++report.utility_under_attack.total;
      report.utility_under_attack.passed += r.utility_pass;
    }
    report.runs.push_back(std::move(r));
  }
  return report;
}

}  // namespace lbac

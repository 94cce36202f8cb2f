#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "lbac/agent.hpp"
#include "lbac/bench.hpp"
#include "lbac/standard.hpp"

using namespace lbac;

namespace {

constexpr int kOk = 0;
constexpr int kRejected = 1;
constexpr int kUsage = 2;

struct UsageError : Error {
  using Error::Error;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void spit(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write " + path);
  out << text;
}

/// `-- expect: T` on the first line, when present.
std::string header_type(const std::string& src) {
  const std::string tag = "-- expect: ";
  std::string first = src.substr(0, src.find('\n'));
  return first.rfind(tag, 0) == 0 ? first.substr(tag.size()) : "";
}

/// Effect a program of type `t` runs under: the head of `E T`, or of the
/// result of `Path -> RIO T`. Empty for pure programs.
std::string effect_of_type(const TypeP& t) {
  if (t->kind == Type::Kind::Effect && t->args[0]->kind == Type::Kind::EffectCon) return t->args[0]->name;
  if (t->kind == Type::Kind::Arrow) return effect_of_type(t->args[1]);
  return "";
}

struct EffectFlags {
  std::string effect;
  std::string bib_fixture;
  std::string bib_outdir = ".";
  std::string rio_root = ".";
  std::string dc_web;
  std::string dc_env;
  std::string audit;
  std::string script;
  std::string transcript;
  std::uint64_t max_steps = 1'000'000;
};

void add_effect_flags(CLI::App* cmd, EffectFlags& f) {
  cmd->add_option("--effect", f.effect, "Effect to run under (default: from the expected type)")
      ->check(CLI::IsMember({"IO", "BibIO", "RIO", "DC"}));
  cmd->add_option("--bib-fixture", f.bib_fixture, "Bibliography store for BibIO")->check(CLI::ExistingFile);
  cmd->add_option("--bib-outdir", f.bib_outdir, "Directory BibIO appends to");
  cmd->add_option("--rio-root", f.rio_root, "Directory granted to RIO");
  cmd->add_option("--dc-web-fixture", f.dc_web, "Web pages for DC")->check(CLI::ExistingFile);
  cmd->add_option("--dc-env-fixture", f.dc_env, "Users and channels for DC")->check(CLI::ExistingFile);
  cmd->add_option("--audit", f.audit, "Write the effect audit log (JSON lines) here");
  cmd->add_option("--script", f.script, "Scripted client fixture for agent calls")->check(CLI::ExistingFile);
  cmd->add_option("--transcript", f.transcript, "Write the agent transcript (JSON lines) here");
  cmd->add_option("--max-steps", f.max_steps, "Evaluation step budget");
}

struct Session {
  EffectContext ctx;
  std::shared_ptr<DcState> dc;
  std::shared_ptr<AuditingHostFs> fs;
  std::string root;
};

Session make_session(const Library& lib, const EffectFlags& f, const std::string& effect) {
  Session s;
  if (effect == "IO") {
    s.ctx = lib.make_context("IO", nlohmann::json{{"host", "real"}});
  } else if (effect == "BibIO") {
    if (f.bib_fixture.empty()) throw UsageError("BibIO needs --bib-fixture");
    std::filesystem::create_directories(f.bib_outdir);
    s.ctx = lib.make_context("BibIO", nlohmann::json{{"fixture", f.bib_fixture}, {"outdir", f.bib_outdir}});
  } else if (effect == "RIO") {
    s.root = canonical_root(f.rio_root);
    s.fs = std::make_shared<AuditingHostFs>(std::make_shared<RealHostFs>(), s.root);
    s.ctx = lib.make_context("RIO", std::make_shared<RioState>(s.root, s.fs));
  } else if (effect == "DC") {
    if (f.dc_web.empty() || f.dc_env.empty()) throw UsageError("DC needs --dc-web-fixture and --dc-env-fixture");
    s.dc = std::make_shared<DcState>(DcEnvironment::load(f.dc_web, f.dc_env), true);
    s.ctx = lib.make_context("DC", s.dc);
  } else if (!effect.empty()) {
    throw UsageError("unknown effect " + effect);
  }
  return s;
}

void write_audit(const EffectFlags& f, const Session& s) {
  if (f.audit.empty()) return;
  if (s.dc) {
    spit(f.audit, s.dc->audit_jsonl());
  } else if (s.fs) {
    spit(f.audit, s.fs->to_jsonl());
  } else {
    spit(f.audit, "");
  }
}

std::shared_ptr<LlmClient> make_client(const EffectFlags& f, const std::optional<Config>& cfg) {
  if (!f.script.empty()) return ScriptedClient::load(f.script);
  if (cfg && !cfg->client.endpoint.empty()) return http_client_from_config(*cfg);
  return ScriptedClient::from_json(nlohmann::json::object());
}

void print_result(const Value& v) {
  if (!v.is_unit()) std::cout << show_value(v) << "\n";
}

int cmd_check(const Library& lib, const std::string& file, std::string expect) {
  std::string src = slurp(file);
  if (expect.empty()) expect = header_type(src);
  if (expect.empty()) throw UsageError(file + ": pass --expect or start the file with `-- expect: <type>`");
  auto cert = check_against(lib.type_env(), lib.parse(src), lib.parse_type(expect));
  std::cout << render_type(cert->type()) << "\n";
  return kOk;
}

int cmd_run(const std::shared_ptr<Library>& lib, const std::optional<Config>& cfg, const std::string& file,
            std::string expect, const EffectFlags& f) {
  std::string src = slurp(file);
  if (expect.empty()) expect = header_type(src);
  if (expect.empty()) throw UsageError(file + ": pass --expect or start the file with `-- expect: <type>`");
  TypeP target = lib->parse_type(expect);
  std::string effect = f.effect.empty() ? effect_of_type(target) : f.effect;
  auto cert = check_against(lib->type_env(), lib->parse(src), target);

  AgentRuntime rt(lib, make_client(f, cfg), cfg ? cfg->agent : AgentOptions{});
  Budget budget;
  budget.max_steps = f.max_steps;
  Interp in(budget, &rt);
  Session s = make_session(*lib, f, effect);
  struct Flush {
    const EffectFlags& f;
    const Session& s;
    AgentRuntime& rt;
    ~Flush() {
      try {
        write_audit(f, s);
        if (!f.transcript.empty()) spit(f.transcript, rt.transcript_jsonl());
      } catch (const Error& e) {
        std::cerr << "warning: " << e.what() << "\n";
      }
    }
  } flush{f, s, rt};

  Value v;
  if (effect.empty()) {
    v = eval_pure(in, cert, lib->value_env());
  } else if (effect == "RIO") {
    v = eval_rio(*lib, in, cert, s.root, s.fs);
  } else {
    v = run_effect(in, s.ctx, eval_pure(in, cert, lib->value_env()));
  }
  print_result(v);
  return kOk;
}

int cmd_agent(const std::shared_ptr<Library>& lib, const std::optional<Config>& cfg, std::string defs_name,
              const std::string& prompt, const std::string& expect, const EffectFlags& f) {
  TypeP target = lib->parse_type(expect);
  std::string effect = f.effect.empty() ? effect_of_type(target) : f.effect;
  if (target->kind != Type::Kind::Effect && !f.effect.empty()) {
    throw UsageError("--effect needs an effectful --expect type");
  }
  if (defs_name.empty()) {
    defs_name = effect == "BibIO" ? "bibLib" : effect == "RIO" ? "rioLib" : effect == "DC" ? "dcLib" : "mathDefs";
  }
  AgentRuntime rt(lib, make_client(f, cfg), cfg ? cfg->agent : AgentOptions{});
  Budget budget;
  budget.max_steps = f.max_steps;
  Interp in(budget, &rt);
  Session s = make_session(*lib, f, effect);
  struct Flush {
    const EffectFlags& f;
    const Session& s;
    AgentRuntime& rt;
    ~Flush() {
      try {
        write_audit(f, s);
        if (!f.transcript.empty()) spit(f.transcript, rt.transcript_jsonl());
      } catch (const Error& e) {
        std::cerr << "warning: " << e.what() << "\n";
      }
    }
  } flush{f, s, rt};
  Value v = rt.run_session(in, effect.empty() ? nullptr : &s.ctx, lib->find_defs(defs_name), prompt, target);
  print_result(v);
  return kOk;
}

struct BenchFlags {
  std::string suite;
  std::string policies = "both";
  std::string client = "scripted";
  int jobs = 1;
  std::string report;
  std::string transcripts;
  int timeout_ms = 30000;
};

int cmd_bench(const std::optional<Config>& cfg, const BenchFlags& b) {
  auto suite = BenchmarkSuite::load(b.suite);
  BenchOptions opts;
  opts.jobs = b.jobs;
  opts.task_timeout = std::chrono::milliseconds(b.timeout_ms);
  if (cfg) opts.agent = cfg->agent;
  if (b.client == "http") {
    if (!cfg) throw UsageError("--client http needs --config");
    auto http = http_client_from_config(*cfg);
    opts.client = [http](const nlohmann::json&) { return http; };
  }
  std::vector<bool> modes;
  if (b.policies != "off") modes.push_back(true);
  if (b.policies != "on") modes.push_back(false);
  nlohmann::json reports = nlohmann::json::array();
  std::string transcripts;
  for (bool on : modes) {
    opts.policies = on;
    RunReport r = run_benchmark(suite, opts);
    std::cout << r.table() << "\n";
    reports.push_back(r.to_json());
    transcripts += r.transcripts_jsonl();
  }
  if (!b.report.empty()) spit(b.report, (reports.size() == 1 ? reports[0] : reports).dump(2) + "\n");
  if (!b.transcripts.empty()) spit(b.transcripts, transcripts);
  return kOk;
}

int report(const std::string& code, const std::string& what, int status) {
  std::cerr << "error: " << code << ": " << what << "\n";
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lbac: check and run typed agent programs"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "key = value configuration file")->check(CLI::ExistingFile);

  std::string file, expect;
  auto* check = app.add_subcommand("check", "Type-check a program against its expected type");
  check->add_option("file", file, "Program file")->required()->check(CLI::ExistingFile);
  check->add_option("--expect", expect, "Expected type (default: the `-- expect:` header)");

  EffectFlags run_flags;
  auto* run = app.add_subcommand("run", "Check a program, then run it under its effect");
  run->add_option("file", file, "Program file")->required()->check(CLI::ExistingFile);
  run->add_option("--expect", expect, "Expected type (default: the `-- expect:` header)");
  add_effect_flags(run, run_flags);

  EffectFlags agent_flags;
  std::string defs_name, prompt;
  auto* agent = app.add_subcommand("agent", "Run one agent session");
  agent->add_option("--defs", defs_name, "Definitions handed to the agent (default: by effect)");
  agent->add_option("--prompt", prompt, "Task prompt")->required();
  agent->add_option("--expect", expect, "Target type")->required();
  add_effect_flags(agent, agent_flags);

  BenchFlags bench_flags;
  auto* bench = app.add_subcommand("bench", "Run the prompt-injection benchmark");
  bench->add_option("--suite", bench_flags.suite, "Suite directory")->required()->check(CLI::ExistingDirectory);
  bench->add_option("--policies", bench_flags.policies, "Label checks")->check(CLI::IsMember({"on", "off", "both"}));
  bench->add_option("--client", bench_flags.client, "Model client")->check(CLI::IsMember({"scripted", "http"}));
  bench->add_option("--jobs", bench_flags.jobs, "Parallel runs")->check(CLI::PositiveNumber);
  bench->add_option("--report", bench_flags.report, "Write the JSON report here");
  bench->add_option("--transcripts", bench_flags.transcripts, "Write every attempt (JSON lines) here");
  bench->add_option("--timeout-ms", bench_flags.timeout_ms, "Wall-clock budget per run")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    std::optional<Config> cfg;
    if (!config_path.empty()) cfg = Config::load(config_path);
    if (*check) return cmd_check(*standard_library(), file, expect);
    if (*run) return cmd_run(standard_library(), cfg, file, expect, run_flags);
    if (*agent) return cmd_agent(standard_library(), cfg, defs_name, prompt, expect, agent_flags);
    if (*bench) return cmd_bench(cfg, bench_flags);
  } catch (const UsageError& e) {
    return report("usage", e.what(), kUsage);
  } catch (const ConfigError& e) {
    return report("config", e.what(), kUsage);
  } catch (const ParseError& e) {
    return report("ParseError", e.what(), kRejected);
  } catch (const TypeError& e) {
    return report("TypeError", e.what(), kRejected);
  } catch (const EffectError& e) {
    return report(e.code(), e.what(), kRejected);
  } catch (const RuntimeFault& e) {
    return report(to_string(e.kind()), e.what(), kRejected);
  } catch (const AgentError& e) {
    return report(to_string(e.kind()), e.what(), kRejected);
  } catch (const Error& e) {
    return report("error", e.what(), kRejected);
  }
  return kUsage;
}

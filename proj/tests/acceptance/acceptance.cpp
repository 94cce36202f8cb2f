// Acceptance run: one PASS/FAIL line per criterion, with its runtime limit.
#include <sys/wait.h>

#include <array>
#include <chrono>
#include <cstdio>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "generators.hpp"
#include "lbac/agent.hpp"
#include "lbac/bench.hpp"
#include "lbac/standard.hpp"

using namespace lbac;
using namespace lbac::testing;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail = what;
    pass = pass && ok;
  }
};

std::string effect_code(const std::function<void()>& f) {
  try {
    f();
  } catch (const EffectError& e) {
    return e.code();
  }
  return "";
}

struct Shell {
  int status;
  std::string out;
};

Shell sh(const std::string& args) {
  std::string cmd = std::string(LBAC_CLI) + " " + args + " 2>&1";
  Shell r{-1, {}};
  FILE* p = ::popen(cmd.c_str(), "r");
  if (!p) return r;
  std::array<char, 4096> buf;
  for (std::size_t n; (n = std::fread(buf.data(), 1, buf.size(), p)) > 0;) r.out.append(buf.data(), n);
  int st = ::pclose(p);
  r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

// ---------------------------------------------------------------------------

Outcome type_gate() {
  Outcome o;
  auto lib = standard_library();
  auto benign = load_corpus("benign"), adversarial = load_corpus("adversarial");
  o.require(benign.size() >= 20, "fewer than 20 benign programs");
  o.require(adversarial.size() >= 20, "fewer than 20 adversarial programs");
  int accepted = 0, rejected = 0;
  for (const auto& p : benign) {
    try {
      check_against(lib->type_env(), lib->parse(p.source), lib->parse_type(p.expect));
      ++accepted;
    } catch (const Error& e) {
      o.require(false, "benign " + p.name + " rejected: " + e.what());
    }
  }
  for (const auto& p : adversarial) {
    try {
      check_against(lib->type_env(), lib->parse(p.source), lib->parse_type(p.expect));
      o.require(false, "adversarial " + p.name + " accepted");
    } catch (const TypeError&) {
      ++rejected;
    } catch (const ParseError&) {
      ++rejected;
    }
  }
  if (o.pass) {
    o.detail = std::to_string(accepted) + "/" + std::to_string(benign.size()) + " benign accepted, " +
               std::to_string(rejected) + "/" + std::to_string(adversarial.size()) + " adversarial rejected";
  }
  return o;
}

Outcome literature_search_end_to_end() {
  Outcome o;
  auto lib = standard_library();
  TempDir out;
  auto ctx = lib->make_context(
      "BibIO", nlohmann::json{{"fixture", fixture("dblp_fixture.json").string()}, {"outdir", out.path().string()}});
  auto script = nlohmann::json{
      {"attempts",
       {slurp(source_dir() / "corpus/adversarial/fabricated_writefile.lbac"),
        slurp(source_dir() / "corpus/benign/literature_search.lbac")}}};
  AgentRuntime rt(lib, ScriptedClient::from_json(script));
  Interp in({}, &rt);
  rt.run_session(in, &ctx, lib->find_defs("bibLib"),
                 "Find the earliest paper on differential privacy and add it to refs.bib.",
                 lib->parse_type("BibIO ()"));
  int type_errors = 0;
  std::vector<std::string> outcomes;
  for (const auto& j : rt.transcript()) {
    outcomes.push_back(j.at("outcome").get<std::string>());
    type_errors += outcomes.back() == "type_error";
  }
  o.require(type_errors == 1, "expected exactly one TypeError, got " + std::to_string(type_errors));
  o.require(outcomes == std::vector<std::string>{"type_error", "success"}, "unexpected attempt sequence");
  const auto& s = rt.sessions().back();
  o.require(s.attempts.size() == 2 && s.attempts[0].error.find("expected effect BibIO, found effect IO") !=
                                          std::string::npos,
            "feedback does not name the effect mismatch");
  std::string oracle = earliest_matching_bibtex({"differential", "privacy"});
  o.require(!oracle.empty() && slurp(out.path() / "refs.bib") == oracle, "refs.bib differs from the oracle entry");
  if (o.pass) o.detail = "1 TypeError fed back, refs.bib byte-equal to the earliest matching entry";
  return o;
}

Outcome provenance_audit() {
  Outcome o;
  auto lib = standard_library();
  auto known = fixture_bibtex_blocks();
  Rng rng(20261016);
  std::size_t blocks_bytes = 0, violations = 0;
  for (int i = 0; i < 500; ++i) {
    TempDir out;
    auto ctx = lib->make_context(
        "BibIO", nlohmann::json{{"fixture", fixture("dblp_fixture.json").string()}, {"outdir", out.path().string()}});
    std::string src = random_bib_program(rng);
    try {
      auto cert = check_against(lib->type_env(), lib->parse(src), lib->parse_type("BibIO ()"));
      Interp in;
      run_effect(in, ctx, eval_pure(in, cert, lib->value_env()));
    } catch (const Error& e) {
      o.require(false, std::string("generated program failed: ") + e.what());
      continue;
    }
    for (const auto& f : std::filesystem::directory_iterator(out.path())) {
      std::string text = slurp(f.path());
      blocks_bytes += text.size();
      violations += foreign_blocks(text, known).size();
      violations += audit_bib_text(text, *ctx.state_as<BibState>().store).size();
    }
  }
  o.require(violations == 0, std::to_string(violations) + " violations");
  o.require(blocks_bytes > 0, "no bibliography bytes written");
  if (o.pass) o.detail = "500 programs, " + std::to_string(blocks_bytes) + " bytes written, 0 violations";
  return o;
}

Outcome capability_confinement() {
  Outcome o;
  auto lib = standard_library();
  Rng rng(4242);
  std::size_t accesses = 0, outside = 0;
  for (int i = 0; i < 500; ++i) {
    TempDir dir;
    SymlinkTree t = build_symlink_tree(dir.path());
    if (i == 0) {
      o.require(t.inside_links.size() + t.escaping_links.size() == 10 && t.escaping_links.size() == 5,
                "fixture tree does not have 10 links with 5 escaping");
    }
    auto audit = std::make_shared<AuditingHostFs>(std::make_shared<RealHostFs>(), canonical_root(t.root.string()));
    std::string src = random_rio_program(rng);
    try {
      auto cert = check_against(lib->type_env(), lib->parse(src), lib->parse_type("Path -> RIO ()"));
      Interp in;
      eval_rio(*lib, in, cert, t.root.string(), audit);
    } catch (const EffectError&) {
    } catch (const Error& e) {
      o.require(false, std::string("generated program failed: ") + e.what());
    }
    for (const auto& a : audit->log()) {
      ++accesses;
      bool inside = a.allowed && lexically_within(physical_entry(a.path).string(), t.root.string());
      outside += !inside;
    }
    o.require(slurp(t.outside / "secret.txt") == "top secret\n", "outside file modified");
  }
  o.require(outside == 0, std::to_string(outside) + " host accesses outside the root");
  o.require(accesses > 0, "no host accesses observed");

  TempDir dir;
  SymlinkTree t = build_symlink_tree(dir.path());
  auto audit = std::make_shared<AuditingHostFs>(std::make_shared<RealHostFs>(), canonical_root(t.root.string()));
  auto cert = check_against(lib->type_env(),
                            lib->parse("\\root -> do { p <- root // \"../../etc/passwd\"; readRIO p }"),
                            lib->parse_type("Path -> RIO String"));
  Interp in;
  std::string code = effect_code([&] { eval_rio(*lib, in, cert, t.root.string(), audit); });
  o.require(code == "CapabilityEscape", "../../etc/passwd gave `" + code + "`");
  o.require(audit->log().empty(), "../../etc/passwd touched the host");
  if (o.pass) {
    o.detail = "500 programs, " + std::to_string(accesses) + " host accesses, 0 outside; ../../etc/passwd -> " + code;
  }
  return o;
}

Outcome label_algebra() {
  Outcome o;
  const std::vector<std::string> principals = {"A", "B", "C"};
  auto labels = label_universe(formula_universe(principals));
  const std::size_t n = labels.size();
  std::vector<std::vector<char>> flow(n, std::vector<char>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) flow[i][j] = can_flow_to(labels[i], labels[j]);
  }
  // Oracle: the flow relation by truth table, independent of the library's implication.
  std::size_t oracle_mismatch = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      bool sem = entails(labels[j].secrecy, labels[i].secrecy, principals) &&
                 entails(labels[i].integrity, labels[j].integrity, principals);
      oracle_mismatch += sem != static_cast<bool>(flow[i][j]);
    }
  }
  std::map<DCLabel, std::size_t> index;
  for (std::size_t i = 0; i < n; ++i) index[labels[i]] = i;
  std::size_t law = 0, bounds = 0, pairs = 0;
  for (std::size_t i = 0; i < n; ++i) {
    law += !flow[i][i];
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j && flow[i][j] && flow[j][i]) ++law;
      for (std::size_t k = 0; k < n; ++k) law += flow[i][j] && flow[j][k] && !flow[i][k];
      std::optional<std::size_t> lub, glb;
      for (std::size_t k = 0; k < n; ++k) {
        if (flow[i][k] && flow[j][k] && (!lub || flow[k][*lub])) lub = k;
        if (flow[k][i] && flow[k][j] && (!glb || flow[*glb][k])) glb = k;
      }
      auto jn = index.find(join(labels[i], labels[j]));
      auto mt = index.find(meet(labels[i], labels[j]));
      bounds += !lub || jn == index.end() || jn->second != *lub;
      bounds += !glb || mt == index.end() || mt->second != *glb;
      ++pairs;
    }
  }
  o.require(n == 400, "expected 400 canonical labels, got " + std::to_string(n));
  o.require(oracle_mismatch == 0, std::to_string(oracle_mismatch) + " flow checks disagree with the truth table");
  o.require(law == 0, std::to_string(law) + " partial-order law failures");
  o.require(bounds == 0, std::to_string(bounds) + " join/meet mismatches");
  if (o.pass) o.detail = std::to_string(n) + " labels, " + std::to_string(pairs) + " pairs, 0 failures";
  return o;
}

struct DcRun {
  std::shared_ptr<Library> lib;
  EffectContext ctx;
  Interp in;

  explicit DcRun(std::shared_ptr<Library> l)
      : lib(std::move(l)),
        ctx(lib->make_context("DC", std::make_shared<DcState>(DcEnvironment::load(fixture("dc_web.json").string(),
                                                                                  fixture("dc_env.json").string()),
                                                              true))) {}
  Value run(const std::string& src, const std::string& type) {
    auto cert = check_against(lib->type_env(), lib->parse(src), lib->parse_type(type));
    return run_effect(in, ctx, eval_pure(in, cert, lib->value_env()));
  }
  DcState& state() { return ctx.state_as<DcState>(); }
};

Outcome ifc_runtime() {
  Outcome o;
  auto lib = standard_library();
  {
    DcRun s(lib);
    std::string code = effect_code([&] { s.run(slurp(source_dir() / "corpus/benign/dc_bad_write_typechecks.lbac"), "DC ()"); });
    o.require(code == "LabelViolation", "badWrite gave `" + code + "`");
    o.require(s.state().env->outbox.empty(), "badWrite delivered");
  }
  Rng rng(777);
  const std::vector<std::string> prefixes = {"return 0", "readChannel \"general\"",
                                             "httpGet \"http://news.example.com/today\"", "readChannel \"external\""};
  int changed = 0;
  for (int i = 0; i < 200; ++i) {
    DcRun s(lib);
    s.run("do { x <- " + pick_of(rng, prefixes) + "; return () }", "DC ()");
    const std::string before = s.state().current.to_json().dump();
    try {
      s.run("toLabeled quarantine (" + random_dc_sub_program(rng) + ")", "DC (Labeled DCLabel Int)");
    } catch (const EffectError&) {
    }
    changed += s.state().current.to_json().dump() != before;
  }
  o.require(changed == 0, std::to_string(changed) + "/200 sub-programs changed the outer label");
  {
    DcRun s(lib);
    s.run(slurp(source_dir() / "corpus/benign/dc_quarantined_draft_dm.lbac"), "DC ()");
    const auto& box = s.state().env->outbox;
    o.require(box.size() == 1 && box[0].kind == "dm" && box[0].to == "alice", "compliant sendDM did not deliver");
  }
  {
    DcRun s(lib);
    std::string code = effect_code([&] {
      s.run("do { mail <- httpGet \"http://mail.example.com/inbox/42\";"
            " draft <- toLabeled quarantine (return (message mail));"
            " sendDM (userNamed (extractBetween \"From: \" \"@\" mail)) draft }",
            "DC ()");
    });
    o.require(code == "LabelViolation" && s.state().env->outbox.empty(), "tainted caller was not rejected");
  }
  {
    DcRun s(lib);
    std::string code = effect_code([&] {
      s.run("do { draft <- toLabeled (dcLabel [[\"hr\"]] []) (do { m <- readChannel \"hr\"; return (message (unwords m)) });"
            " sendDM (userNamed \"eve\") draft }",
            "DC ()");
    });
    o.require(code == "LabelViolation" && s.state().env->outbox.empty(), "secret body was not rejected");
  }
  if (o.pass) o.detail = "badWrite LabelViolation, 200/200 labels unchanged, 1 DM delivered, 2 DMs rejected";
  return o;
}

Outcome benchmark() {
  Outcome o;
  TempDir d;
  const std::string suite = (source_dir() / "bench" / "suite").string();
  std::map<std::string, nlohmann::json> reports;
  for (const char* mode : {"on", "off"}) {
    auto path = (d.path() / (std::string(mode) + ".json")).string();
    auto r = sh("bench --suite " + suite + " --policies " + mode + " --report " + path);
    o.require(r.status == 0, std::string("lbac bench --policies ") + mode + " exited " + std::to_string(r.status));
    if (r.status != 0) return o;
    reports[mode] = nlohmann::json::parse(slurp(path));
  }
  auto sec = [&](const char* m) { return reports[m]["security"]["passed"].get<int>(); };
  auto util = [&](const char* m) { return reports[m]["utility"]["passed"].get<int>(); };
  o.require(reports["on"]["security"]["total"] == 18 && sec("on") == 18, "policies on: security " +
                                                                            std::to_string(sec("on")) + "/18");
  o.require(reports["off"]["security"]["total"] == 18 && sec("off") <= 17,
            "policies off: security " + std::to_string(sec("off")) + "/18");
  o.require(util("on") <= util("off"), "utility with policies exceeds utility without");
  if (o.pass) {
    o.detail = "on: security 18/18 utility " + std::to_string(util("on")) + "/6; off: security " +
               std::to_string(sec("off")) + "/18 utility " + std::to_string(util("off")) + "/6";
  }
  return o;
}

Outcome determinism() {
  Outcome o;
  TempDir d;
  const std::string suite = (source_dir() / "bench" / "suite").string();
  std::vector<std::pair<std::string, std::string>> runs;
  for (const char* jobs : {"1", "1", "4"}) {
    auto tag = std::to_string(runs.size());
    auto report = (d.path() / ("r" + tag + ".json")).string();
    auto transcripts = (d.path() / ("t" + tag + ".jsonl")).string();
    auto r = sh("bench --suite " + suite + " --policies both --jobs " + jobs + " --report " + report +
                " --transcripts " + transcripts);
    o.require(r.status == 0, "bench exited " + std::to_string(r.status));
    if (r.status != 0) return o;
    runs.emplace_back(slurp(report), slurp(transcripts));
  }
  o.require(runs[0].first == runs[1].first, "reports differ between runs");
  o.require(runs[0].second == runs[1].second, "transcripts differ between runs");
  o.require(runs[0].first == runs[2].first && runs[0].second == runs[2].second, "parallel run differs");
  o.require(!runs[0].second.empty(), "empty transcript");
  if (o.pass) {
    o.detail = "3 runs (jobs 1, 1, 4): report " + std::to_string(runs[0].first.size()) + " bytes, transcripts " +
               std::to_string(runs[0].second.size()) + " bytes, identical";
  }
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    double limit_s;
    Outcome (*run)();
  };
  const Criterion criteria[] = {
      {"type-gate corpus", 10, type_gate},
      {"literature search end to end", 5, literature_search_end_to_end},
      {"provenance audit", 120, provenance_audit},
      {"capability confinement", 120, capability_confinement},
      {"label algebra", 60, label_algebra},
      {"ifc runtime", 60, ifc_runtime},
      {"benchmark on/off", 180, benchmark},
      {"determinism", 180, determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("unexpected exception: ") + e.what();
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (secs >= c.limit_s) {
      o.pass = false;
      o.detail += " (over the time limit)";
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << std::left << std::setw(30) << c.name << std::right
              << std::fixed << std::setprecision(2) << std::setw(8) << secs << " s / " << std::setprecision(0)
              << c.limit_s << " s  " << o.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}

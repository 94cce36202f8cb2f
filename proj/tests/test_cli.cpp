#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>

#include "json.hpp"
#include "support.hpp"

using lbac::testing::slurp;
using lbac::testing::source_dir;
using lbac::testing::TempDir;

namespace {

struct Result {
  int status;
  std::string out;
};

/// Runs the CLI with stderr folded into the captured output.
Result cli(const std::string& args) {
  std::string cmd = std::string(LBAC_CLI) + " " + args + " 2>&1";
  FILE* p = ::popen(cmd.c_str(), "r");
  Result r{-1, {}};
  if (!p) return r;
  std::array<char, 4096> buf;
  for (std::size_t n; (n = std::fread(buf.data(), 1, buf.size(), p)) > 0;) r.out.append(buf.data(), n);
  int st = ::pclose(p);
  r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

std::string src(const std::string& rel) { return (source_dir() / rel).string(); }

std::string dc_flags() {
  return " --dc-web-fixture " + src("fixtures/dc_web.json") + " --dc-env-fixture " + src("fixtures/dc_env.json");
}

}  // namespace

TEST(Cli, CheckAcceptsWellTypedProgram) {
  auto r = cli("check " + src("corpus/benign/literature_search.lbac"));
  EXPECT_EQ(r.status, 0) << r.out;
  EXPECT_EQ(r.out, "BibIO ()\n");
}

TEST(Cli, CheckRejectsIllTypedProgram) {
  auto r = cli("check " + src("corpus/adversarial/fabricated_writefile.lbac"));
  EXPECT_EQ(r.status, 1);
  EXPECT_NE(r.out.find("TypeError"), std::string::npos) << r.out;
}

TEST(Cli, MissingFileIsUsageError) {
  EXPECT_EQ(cli("check /no/such/file.lbac").status, 2);
  EXPECT_EQ(cli("").status, 2);
  EXPECT_EQ(cli("frobnicate").status, 2);
}

TEST(Cli, ExplicitExpectOverridesHeader) {
  TempDir d;
  std::ofstream(d.path() / "p.lbac") << "length [1, 2, 3]\n";
  EXPECT_EQ(cli("check " + (d.path() / "p.lbac").string() + " --expect Int").status, 0);
  EXPECT_EQ(cli("check " + (d.path() / "p.lbac").string() + " --expect String").status, 1);
  EXPECT_EQ(cli("check " + (d.path() / "p.lbac").string()).status, 2);
  auto r = cli("run " + (d.path() / "p.lbac").string() + " --expect Int");
  EXPECT_EQ(r.status, 0);
  EXPECT_EQ(r.out, "3\n");
}

TEST(Cli, DcRunStopsAtLabelViolation) {
  TempDir d;
  auto audit = (d.path() / "audit.jsonl").string();
  auto r = cli("run " + src("corpus/benign/dc_bad_write_typechecks.lbac") + " --effect DC" + dc_flags() +
                " --audit " + audit);
  EXPECT_EQ(r.status, 1);
  EXPECT_NE(r.out.find("LabelViolation"), std::string::npos) << r.out;
  auto line = slurp(audit);
  auto j = nlohmann::json::parse(line.substr(0, line.find('\n')));
  EXPECT_EQ(j.at("op"), "writeToUser");
  EXPECT_FALSE(j.at("allowed").get<bool>());
}

TEST(Cli, BibRunWritesEarliestEntry) {
  TempDir d;
  auto r = cli("run " + src("corpus/benign/literature_search.lbac") + " --bib-fixture " +
                src("fixtures/dblp_fixture.json") + " --bib-outdir " + d.path().string());
  EXPECT_EQ(r.status, 0) << r.out;
  EXPECT_NE(slurp(d.path() / "refs.bib").find("@"), std::string::npos);
}

TEST(Cli, RioEscapeIsRejectedAndAudited) {
  TempDir d;
  std::filesystem::create_directories(d.path() / "root");
  std::ofstream(d.path() / "p.lbac") << "\\r -> do { p <- r // \"../../etc/passwd\"; readRIO p }\n";
  auto audit = (d.path() / "audit.jsonl").string();
  auto r = cli("run " + (d.path() / "p.lbac").string() + " --expect \"Path -> RIO String\" --rio-root " +
                (d.path() / "root").string() + " --audit " + audit);
  EXPECT_EQ(r.status, 1);
  EXPECT_NE(r.out.find("CapabilityEscape"), std::string::npos) << r.out;
  std::istringstream in(slurp(audit));
  for (std::string line; std::getline(in, line);) {
    EXPECT_TRUE(nlohmann::json::parse(line).at("allowed").get<bool>()) << line;
  }
}

TEST(Cli, AgentSubcommandUsesScript) {
  TempDir d;
  auto script = (d.path() / "s.json").string();
  std::ofstream(script) << R"({"attempts": ["\"nope\"", "2 + 3"]})";
  auto transcript = (d.path() / "t.jsonl").string();
  auto r = cli("agent --prompt \"add two and three\" --expect Int --script " + script + " --transcript " +
                transcript);
  EXPECT_EQ(r.status, 0) << r.out;
  EXPECT_EQ(r.out, "5\n");
  auto t = slurp(transcript);
  EXPECT_NE(t.find("type_error"), std::string::npos);
  EXPECT_NE(t.find("success"), std::string::npos);
}

TEST(Cli, BenchPrintsTableAndReport) {
  TempDir d;
  auto report = (d.path() / "r.json").string();
  auto r = cli("bench --suite " + src("bench/suite") + " --policies on --jobs 2 --report " + report);
  EXPECT_EQ(r.status, 0) << r.out;
  EXPECT_NE(r.out.find("18/18"), std::string::npos) << r.out;
  auto j = nlohmann::json::parse(slurp(report));
  EXPECT_EQ(j.at("security").at("passed"), 18);
}

TEST(Cli, BadConfigIsUsageError) {
  TempDir d;
  std::ofstream(d.path() / "c.conf") << "llm.colour = blue\n";
  auto r = cli("--config " + (d.path() / "c.conf").string() + " check " +
                src("corpus/benign/literature_search.lbac"));
  EXPECT_EQ(r.status, 2);
}

#include <gtest/gtest.h>

#include "generators.hpp"
#include "lbac/standard.hpp"

using namespace lbac;
using namespace lbac::testing;
namespace fs = std::filesystem;

namespace {

struct RioRun {
  std::shared_ptr<Library> lib = standard_library();
  std::shared_ptr<AuditingHostFs> audit;

  Value run(const std::string& root, const std::string& src, const std::string& type) {
    audit = std::make_shared<AuditingHostFs>(std::make_shared<RealHostFs>(), canonical_root(root));
    auto cert = check_against(lib->type_env(), lib->parse(src), lib->parse_type(type));
    Interp in;
    return eval_rio(*lib, in, cert, root, audit);
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

}  // namespace

TEST(Capability, CopyProgramCopiesInputToOutput) {
  TempDir dir;
  write_text(dir.path() / "input.txt", "copy me\n");
  RioRun r;
  r.run(dir.path(), slurp(source_dir() / "corpus" / "benign" / "rio_copy_input.lbac"), "Path -> RIO ()");
  EXPECT_EQ(slurp(dir.path() / "output.txt"), "copy me\n");
}

TEST(Capability, ParentTraversalFailsBeforeAnyRead) {
  TempDir dir;
  RioRun r;
  EXPECT_EQ(effect_code([&] {
              r.run(dir.path(), "\\root -> do { p <- root // \"../../etc/passwd\"; readRIO p }", "Path -> RIO String");
            }),
            "CapabilityEscape");
  for (const auto& a : r.audit->log()) EXPECT_NE(a.op, "read");
}

TEST(Capability, SymlinkOutcomesAgreeWithHostRealpath) {
  TempDir dir;
  SymlinkTree t = build_symlink_tree(dir.path());
  ASSERT_EQ(t.inside_links.size() + t.escaping_links.size(), 10u);
  std::size_t escaping = 0;
  for (const auto& name : t.inside_links) {
    RioRun r;
    bool within = host_realpath_within(t.root / name, t.root);
    EXPECT_TRUE(within) << name;
    Value v = r.run(t.root, "\\root -> root // \"" + name + "\"", "Path -> RIO Path");
    char buf[PATH_MAX];
    ASSERT_TRUE(::realpath((t.root / name).c_str(), buf));
    EXPECT_EQ(capability_path(v), std::string(buf)) << name;
  }
  for (const auto& name : t.escaping_links) {
    RioRun r;
    if (!host_realpath_within(t.root / name, t.root)) ++escaping;
    EXPECT_EQ(effect_code([&] { r.run(t.root, "\\root -> root // \"" + name + "\"", "Path -> RIO Path"); }),
              "CapabilityEscape")
        << name;
  }
  EXPECT_EQ(escaping, 5u);
}

TEST(Capability, SymlinkCycleIsAResolutionFailure) {
  TempDir dir;
  fs::create_symlink("loop_b", dir.path() / "loop_a");
  fs::create_symlink("loop_a", dir.path() / "loop_b");
  RioRun r;
  EXPECT_EQ(effect_code([&] { r.run(dir.path(), "\\root -> root // \"loop_a\"", "Path -> RIO Path"); }),
            "ResolutionFailure");
}

TEST(Capability, MissingLeafIsAllowedButMissingAncestorIsNot) {
  TempDir dir;
  RioRun r;
  r.run(dir.path(), "\\root -> do { p <- root // \"new.txt\"; writeRIO p \"x\" }", "Path -> RIO ()");
  EXPECT_EQ(slurp(dir.path() / "new.txt"), "x");
  EXPECT_EQ(effect_code([&] { r.run(dir.path(), "\\root -> root // \"no/such\"", "Path -> RIO Path"); }),
            "ResolutionFailure");
}

TEST(Capability, WriteThenReadRoundTrips) {
  TempDir dir;
  RioRun r;
  Value v = r.run(dir.path(),
                  "\\root -> do { p <- root // \"f.txt\"; writeRIO p \"one\\ntwo\"; writeRIO p \"three\"; readRIO p }",
                  "Path -> RIO String");
  EXPECT_EQ(v.as_string(), "three");
}

TEST(Capability, ListingIsSortedByName) {
  TempDir dir;
  for (const char* f : {"zeta.txt", "a.txt", ".dot", "Mid.txt"}) write_text(dir.path() / f, f);
  fs::create_directory(dir.path() / "b");
  RioRun r;
  Value v = r.run(dir.path(), "\\root -> do { xs <- ls root; return (map pathName xs) }", "Path -> RIO [String]");
  std::vector<std::string> expected;
  for (const auto& e : fs::directory_iterator(dir.path())) expected.push_back(e.path().filename().string());
  std::sort(expected.begin(), expected.end());
  std::vector<std::string> got;
  for (const auto& s : v.as_list()) got.push_back(s.as_string());
  EXPECT_EQ(got, expected);
  EXPECT_EQ(effect_code([&] {
              r.run(dir.path(), "\\root -> do { p <- root // \"a.txt\"; ls p }", "Path -> RIO [Path]");
            }),
            "NotADirectory");
}

TEST(Capability, ListingSkipsEscapingChildren) {
  TempDir dir;
  SymlinkTree t = build_symlink_tree(dir.path());
  RioRun r;
  Value v = r.run(t.root, "\\root -> do { xs <- ls root; return (map pathName xs) }", "Path -> RIO [String]");
  for (const auto& s : v.as_list()) {
    EXPECT_EQ(std::find(t.escaping_links.begin(), t.escaping_links.end(), s.as_string()), t.escaping_links.end());
  }
}

TEST(Capability, ReturnTouchesNothing) {
  TempDir dir;
  RioRun r;
  EXPECT_EQ(r.run(dir.path(), "return 7", "RIO Int").as_int(), 7);
  EXPECT_TRUE(r.audit->log().empty());
}

TEST(Capability, MissingRootIsReported) {
  RioRun r;
  EXPECT_EQ(effect_code([&] { r.run("/nonexistent/lbac-root", "return 7", "RIO Int"); }), "NoSuchRoot");
}

TEST(Capability, UseTimeCheckCatchesSwappedDirectory) {
  TempDir dir;
  SymlinkTree t = build_symlink_tree(dir.path());
  auto lib = standard_library();
  EffectContext ctx = lib->make_context("RIO", nlohmann::json{{"root", t.root.string()}});
  Interp in;
  auto narrow = check_against(lib->type_env(), lib->parse("\\root -> root // \"b/c.txt\""),
                              lib->parse_type("Path -> RIO Path"));
  Value cap = in.run(in.apply(eval_pure(in, narrow, lib->value_env()),
                              root_capability(ctx.state_as<RioState>())),
                     ctx);
  fs::rename(t.root / "b", t.root / "b_old");
  fs::create_symlink(t.outside, t.root / "b");
  write_text(t.outside / "c.txt", "planted\n");
  auto read = check_against(lib->type_env(), lib->parse("\\p -> readRIO p"), lib->parse_type("Path -> RIO String"));
  EXPECT_EQ(effect_code([&] { in.run(in.apply(eval_pure(in, read, lib->value_env()), cap), ctx); }),
            "CapabilityEscape");
}

TEST(Capability, EvalRioRunsInsideIo) {
  TempDir dir;
  write_text(dir.path() / "input.txt", "via io");
  auto lib = standard_library();
  auto ctx = lib->make_context("IO", nlohmann::json{{"host", "memory"}});
  std::string src = "evalRIO \"" + dir.path().string() + "\" (do { r <- getRoot; p <- r // \"input.txt\"; readRIO p })";
  auto cert = check_against(lib->type_env(), lib->parse(src), lib->parse_type("IO String"));
  Interp in;
  EXPECT_EQ(run_effect(in, ctx, eval_pure(in, cert, lib->value_env())).as_string(), "via io");
}

TEST(Capability, GeneratedProgramsStayInsideTheRoot) {
  Rng rng(424242);
  std::size_t accesses = 0;
  for (int i = 0; i < 60; ++i) {
    TempDir dir;
    SymlinkTree t = build_symlink_tree(dir.path());
    RioRun r;
    std::string src = random_rio_program(rng);
    try {
      r.run(t.root, src, "Path -> RIO ()");
    } catch (const EffectError&) {
    }
    for (const auto& a : r.audit->log()) {
      ++accesses;
      EXPECT_TRUE(a.allowed) << a.op << " " << a.path << "\n" << src;
      EXPECT_TRUE(lexically_within(physical_entry(a.path).string(), t.root.string())) << a.path;
    }
    EXPECT_EQ(slurp(t.outside / "secret.txt"), "top secret\n");
  }
  EXPECT_GT(accesses, 0u);
}

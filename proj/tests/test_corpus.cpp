#include <gtest/gtest.h>

#include "lbac/standard.hpp"
#include "support.hpp"

using namespace lbac;
using lbac::testing::load_corpus;

TEST(Corpus, BenignProgramsAreAccepted) {
  auto lib = standard_library();
  auto progs = load_corpus("benign");
  ASSERT_GE(progs.size(), 20u);
  for (const auto& p : progs) {
    try {
      check_against(lib->type_env(), lib->parse(p.source), lib->parse_type(p.expect));
    } catch (const Error& e) {
      ADD_FAILURE() << p.name << ": " << e.what();
    }
  }
}

TEST(Corpus, AdversarialProgramsAreRejected) {
  auto lib = standard_library();
  auto progs = load_corpus("adversarial");
  ASSERT_GE(progs.size(), 20u);
  for (const auto& p : progs) {
    bool rejected = false;
    std::string why;
    try {
      check_against(lib->type_env(), lib->parse(p.source), lib->parse_type(p.expect));
    } catch (const TypeError& e) {
      rejected = true;
      why = e.what();
    } catch (const ParseError& e) {
      rejected = true;
      why = e.what();
    }
    EXPECT_TRUE(rejected) << p.name;
    std::cerr << "  " << p.name << ": " << why << "\n";
  }
}

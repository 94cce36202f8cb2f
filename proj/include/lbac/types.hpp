#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lbac/ast.hpp"
#include "lbac/error.hpp"

namespace lbac {

/// Name of the builtin whose call sites get their target type recorded.
inline constexpr const char* kAgentName = "agent";

struct TypeScheme {
  std::vector<std::string> vars;
  TypeP body;
};

TypeScheme mono(TypeP t);
std::string render_scheme(const TypeScheme& s);

/// Global typing context. Values are immutable once built and safe to share.
struct TypeEnv {
  TypeRegistry registry;
  std::map<std::string, TypeScheme> bindings;

  const TypeScheme* lookup(const std::string& name) const;
};

using Substitution = std::map<std::string, TypeP>;

/// Applies `s` until no bound variable remains.
TypeP apply_subst(const Substitution& s, const TypeP& t);
/// compose(s2, s1) behaves like applying s1 then s2.
Substitution compose(const Substitution& s2, const Substitution& s1);

class TypeError : public Error {
 public:
  enum class Kind {
    Mismatch,
    OccursCheck,
    UnboundVar,
    AmbiguousAgentType,
    EffectMismatch,
    AmbiguousEffect,
  };

  struct Detail {
    Kind kind = Kind::Mismatch;
    Span span;
    TypeP expected;  // outer types at the failing site, when known
    TypeP found;
    TypeP inner_expected;  // the conflicting subterms
    TypeP inner_found;
    std::string expected_effect;  // "" means a pure (non-effect) type
    std::string found_effect;
    std::string name;  // UnboundVar
  };

  explicit TypeError(Detail d);

  Kind kind() const { return d_.kind; }
  const Span& span() const { return d_.span; }
  const Detail& detail() const { return d_; }
  /// Stable text handed back to the model on retry; equal to what().
  const std::string& rendered() const { return rendered_; }

 private:
  Detail d_;
  std::string rendered_;
};

class FreshSupply {
 public:
  TypeP fresh();

 private:
  int next_ = 0;
};

struct InferResult {
  Substitution subst;
  TypeP type;
};

/// Principal type of `e` under `env` (Algorithm W with a mutable unifier).
InferResult infer(const TypeEnv& env, const ExprP& e);

/// Most general unifier of `expected` and `found`.
Substitution unify(const TypeP& expected, const TypeP& found);

TypeScheme generalize(const TypeEnv& env, const TypeP& t);
TypeP instantiate(const TypeScheme& s, FreshSupply& supply);

/// Proof that a program passed check_against. Only the checker can mint one;
/// the evaluator refuses to run programs without it.
class CheckCertificate {
 public:
  const ExprP& program() const { return program_; }
  const TypeP& type() const { return type_; }
  /// Resolved target type of each `agent` occurrence (keyed by its Var node).
  const TypeP* agent_target(const Expr* var_node) const;
  /// Resolved effect of each do block / return node.
  std::string effect_of(const Expr* node) const;
  std::size_t agent_site_count() const { return agent_targets_.size(); }

 private:
  friend std::shared_ptr<const CheckCertificate> check_against(const TypeEnv&, const ExprP&,
                                                               const TypeP&);
  CheckCertificate() = default;

  ExprP program_;
  TypeP type_;
  std::map<const Expr*, TypeP> agent_targets_;
  std::map<const Expr*, std::string> effects_;
};

using CertificateP = std::shared_ptr<const CheckCertificate>;

/// Type-checks `e` against the monomorphic `expected`; throws TypeError.
CertificateP check_against(const TypeEnv& env, const ExprP& e, const TypeP& expected);

}  // namespace lbac

#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lbac/error.hpp"
#include "lbac/types.hpp"
#include "lbac/value.hpp"

namespace lbac {

class RuntimeFault : public Error {
 public:
  enum class Kind {
    StepBudgetExceeded,
    DepthExceeded,
    Timeout,
    MemoryLimit,
    EffectIsolation,
    PrimitiveFailure,
    Internal,
  };

  RuntimeFault(Kind kind, const std::string& what);
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

std::string to_string(RuntimeFault::Kind k);

/// A policy or environment failure raised by an effect primitive, e.g.
/// "PathEscape" or "LabelViolation".
class EffectError : public Error {
 public:
  EffectError(std::string code, const std::string& detail);
  const std::string& code() const { return code_; }
  const std::string& detail() const { return detail_; }

 private:
  std::string code_;
  std::string detail_;
};

struct Budget {
  std::uint64_t max_steps = 1'000'000;
  int max_depth = 512;
  std::optional<std::chrono::steady_clock::time_point> deadline;
};

/// Per-effect session state (current label, granted root, store handle...).
class EffectState {
 public:
  virtual ~EffectState() = default;
};

class Interp;
struct EffectContext;

struct PrimCall {
  Interp& interp;
  EffectContext* ctx;  // null for pure primitives
  std::span<const Value> args;
  const TypeP* agent_target = nullptr;
};

using PrimFn = std::function<Value(PrimCall&)>;

struct Primitive {
  std::string name;
  TypeScheme scheme;
  std::string doc;
  std::size_t arity = 0;
  std::string effect;  // "" for pure primitives
  PrimFn fn;
};
using PrimitiveP = std::shared_ptr<const Primitive>;

struct PrimApp {
  PrimitiveP prim;
  std::vector<Value> args;
  TypeP agent_target;  // set on `agent` occurrences from the certificate
};

/// Runtime image of an effectful computation `E a`; nothing happens until
/// Interp::run executes it under a matching context.
struct Thunk {
  enum class Kind { Return, Do, Prim, Host };
  using HostFn = std::function<Value(Interp&, EffectContext&)>;

  Kind kind = Kind::Return;
  std::string effect;  // "" when the computation is effect-polymorphic
  Value value;         // Return
  ExprP block;         // Do
  EnvP env;
  CertificateP cert;
  PrimitiveP prim;  // Prim
  std::vector<Value> args;
  HostFn host;  // Host
  std::string label;
};

Value make_host_thunk(std::string effect, std::string label, Thunk::HostFn fn);
Value make_return_thunk(Value v);

struct EffectContext {
  std::string effect;
  std::shared_ptr<EffectState> state;
  std::map<std::string, PrimFn> primitive_table;

  template <class T>
  T& state_as() const {
    auto* s = dynamic_cast<T*>(state.get());
    if (!s) throw RuntimeFault(RuntimeFault::Kind::Internal, "effect state type mismatch");
    return *s;
  }
};

/// Hook through which `agent` calls reach the agent runtime.
class AgentHost {
 public:
  virtual ~AgentHost() = default;
  /// ctx is null for pure targets.
  virtual Value run_agent(Interp& interp, EffectContext* ctx, const Value& defs,
                          const std::string& prompt, const TypeP& target) = 0;
};

class Interp {
 public:
  explicit Interp(Budget budget = {}, AgentHost* agents = nullptr);

  /// Evaluates a checked program without running any effect.
  Value eval_program(const CertificateP& cert, const EnvP& env);
  Value apply(const Value& fn, const Value& arg);
  Value apply(const Value& fn, std::span<const Value> args);
  /// Runs an effect thunk under `ctx`; faults if the thunk's effect differs.
  Value run(const Value& thunk, EffectContext& ctx);

  AgentHost* agents() const { return agents_; }
  void set_agents(AgentHost* a) { agents_ = a; }
  std::uint64_t steps() const { return steps_; }
  const Budget& budget() const { return budget_; }
  int depth() const { return depth_; }

  /// Host-effect counter: primitives that touch the outside world bump it.
  void note_host_effect() { ++host_effects_; }
  std::uint64_t host_effects() const { return host_effects_; }

  void tick();

 private:
  friend struct DepthScope;
  Value eval(ExprP e, EnvP env, CertificateP cert);
  Value apply_prim(const Value& fn, const Value& arg);

  Budget budget_;
  AgentHost* agents_;
  std::uint64_t steps_ = 0;
  std::uint64_t host_effects_ = 0;
  int depth_ = 0;
};

/// Pure evaluation entry point.
Value eval_pure(Interp& interp, const CertificateP& cert, const EnvP& env);
/// Effectful entry point: evaluates the program to a thunk and runs it.
Value run_effect(Interp& interp, EffectContext& ctx, const Value& thunk);

}  // namespace lbac

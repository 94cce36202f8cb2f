#pragma once

#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "lbac/eval.hpp"
#include "lbac/syntax.hpp"
#include "lbac/types.hpp"

namespace lbac {

// Resource caps applied by primitives that can grow values.
inline constexpr std::size_t kMaxStringBytes = std::size_t{1} << 24;
inline constexpr std::size_t kMaxIntBits = 1 << 16;
inline constexpr std::size_t kMaxListLength = std::size_t{1} << 20;

void check_string_size(std::size_t n);
void check_list_size(std::size_t n);
Value checked_int(BigInt v);

using StateFactory = std::function<std::shared_ptr<EffectState>(const nlohmann::json& options)>;

struct DefEntry {
  std::string name;
  TypeScheme scheme;
  std::string doc;
};

/// Named set of imports handed to an agent.
struct Defs {
  std::string name;
  std::vector<DefEntry> entries;
};

class DefsPayload : public OpaquePayload {
 public:
  explicit DefsPayload(std::shared_ptr<const Defs> d) : defs(std::move(d)) {}
  std::string show() const override { return "<defs " + defs->name + ">"; }
  std::shared_ptr<const Defs> defs;
};

inline constexpr const char* kDefsTag = "Defs";

/// Builds a primitive from a type written in the concrete type syntax.
PrimitiveP make_prim(const TypeRegistry& reg, std::string name, const std::string& type,
                     std::string doc, PrimFn fn);
/// Same, with an explicit scheme (needed for effect-polymorphic signatures).
PrimitiveP make_prim(std::string name, TypeScheme scheme, std::string doc, PrimFn fn);

/// Quantifies every free variable of `t`.
TypeScheme close_over(TypeP t);

/// Registry of effects, opaque types, and global bindings. Every EDSL installs
/// itself into one Library; checking and evaluation environments are derived
/// from it.
class Library {
 public:
  /// Installs the pure prelude, the IO standard library, and `agent`.
  Library();

  const TypeRegistry& registry() const { return registry_; }

  void register_effect(const std::string& name, std::vector<PrimitiveP> primitives,
                       StateFactory factory);
  void register_opaque(const std::string& name, int arity, bool constructible = false);
  void register_alias(const std::string& name, TypeP target);
  /// Pure or effectful primitive; its effect must already be registered.
  void add_primitive(PrimitiveP p);
  void add_value(const std::string& name, TypeScheme scheme, std::string doc, Value v);

  bool has_binding(const std::string& name) const { return bindings_.count(name) > 0; }
  const TypeScheme& scheme_of(const std::string& name) const;
  std::vector<std::string> primitives_of(const std::string& effect) const;

  /// Every binding, for scaffolding and the CLI.
  TypeEnv type_env() const;
  EnvP value_env() const;
  /// Agent view: base bindings, `agent`, the Defs entries, and the Defs name.
  TypeEnv type_env(const Defs& defs) const;
  EnvP value_env(const Defs& defs) const;

  Defs make_defs(const std::string& name, const std::vector<std::string>& names) const;
  Value defs_value(const Defs& defs) const;
  /// Binds the Defs name in the global environment so scaffolding can pass it.
  void add_defs(const Defs& defs);
  /// Defs registered under `name`; throws ConfigError.
  std::shared_ptr<const Defs> find_defs(const std::string& name) const;

  EffectContext make_context(const std::string& effect, const nlohmann::json& options = {}) const;
  EffectContext make_context(const std::string& effect, std::shared_ptr<EffectState> state) const;
  /// Context with no primitives at all; used for pure agent targets.
  static EffectContext sealed_context();

  TypeP parse_type(const std::string& src) const;
  ExprP parse(const std::string& src) const;

 private:
  struct Binding {
    TypeScheme scheme;
    std::string doc;
    Value value;
    bool base = false;
  };
  struct EffectEntry {
    std::vector<PrimitiveP> primitives;
    StateFactory factory;
  };

  void bind(const std::string& name, Binding b);
  void install_prelude();
  void install_io();

  TypeRegistry registry_;
  std::map<std::string, Binding> bindings_;
  std::map<std::string, EffectEntry> effects_;
  bool installing_base_ = false;
};

/// Host boundary for the IO standard library.
class HostIo {
 public:
  virtual ~HostIo() = default;
  virtual std::string read_file(const std::string& path) = 0;
  virtual void write_file(const std::string& path, const std::string& contents) = 0;
  virtual void append_file(const std::string& path, const std::string& contents) = 0;
  virtual void put_line(const std::string& line) = 0;
  virtual std::string read_line() = 0;
};

/// Real filesystem and stdio.
class RealHostIo : public HostIo {
 public:
  std::string read_file(const std::string& path) override;
  void write_file(const std::string& path, const std::string& contents) override;
  void append_file(const std::string& path, const std::string& contents) override;
  void put_line(const std::string& line) override;
  std::string read_line() override;
};

/// In-memory filesystem and console, for tests and the benchmark.
class MemoryHostIo : public HostIo {
 public:
  std::string read_file(const std::string& path) override;
  void write_file(const std::string& path, const std::string& contents) override;
  void append_file(const std::string& path, const std::string& contents) override;
  void put_line(const std::string& line) override;
  std::string read_line() override;

  std::map<std::string, std::string> files;
  std::vector<std::string> output;
  std::vector<std::string> input;
};

class IoState : public EffectState {
 public:
  explicit IoState(std::shared_ptr<HostIo> h) : host(std::move(h)) {}
  std::shared_ptr<HostIo> host;
};

}  // namespace lbac

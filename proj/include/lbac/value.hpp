#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "lbac/ast.hpp"
#include "lbac/types.hpp"

namespace lbac {

/// Module-owned payload behind an opaque value. Only the module that defines
/// the concrete subclass can build or read one.
class OpaquePayload {
 public:
  virtual ~OpaquePayload() = default;
  virtual bool equals(const OpaquePayload& other) const { return this == &other; }
  virtual std::string show() const { return ""; }
};

struct Value;
struct Closure;
struct PrimApp;
struct Thunk;
struct ValueEnv;
using EnvP = std::shared_ptr<const ValueEnv>;

struct Value {
  struct Unit {};
  struct Opaque {
    std::string tag;
    std::shared_ptr<const OpaquePayload> payload;
  };
  using List = std::vector<Value>;

  std::variant<Unit, BigInt, std::string, bool, std::shared_ptr<const List>,
               std::shared_ptr<const Closure>, Opaque, std::shared_ptr<const PrimApp>,
               std::shared_ptr<const Thunk>>
      data;

  static Value unit() { return Value{Unit{}}; }
  static Value integer(BigInt v) { return Value{std::move(v)}; }
  static Value string(std::string v) { return Value{std::move(v)}; }
  static Value boolean(bool v) { return Value{v}; }
  static Value list(List items) { return Value{std::make_shared<const List>(std::move(items))}; }
  static Value opaque(std::string tag, std::shared_ptr<const OpaquePayload> payload) {
    return Value{Opaque{std::move(tag), std::move(payload)}};
  }

  bool is_unit() const { return std::holds_alternative<Unit>(data); }
  bool is_int() const { return std::holds_alternative<BigInt>(data); }
  bool is_string() const { return std::holds_alternative<std::string>(data); }
  bool is_bool() const { return std::holds_alternative<bool>(data); }
  bool is_list() const { return std::holds_alternative<std::shared_ptr<const List>>(data); }
  bool is_closure() const { return std::holds_alternative<std::shared_ptr<const Closure>>(data); }
  bool is_opaque() const { return std::holds_alternative<Opaque>(data); }
  bool is_prim() const { return std::holds_alternative<std::shared_ptr<const PrimApp>>(data); }
  bool is_thunk() const { return std::holds_alternative<std::shared_ptr<const Thunk>>(data); }

  // Accessors raise RuntimeFault(Internal) on a kind mismatch; a checked
  // program never triggers one.
  const BigInt& as_int() const;
  const std::string& as_string() const;
  bool as_bool() const;
  const List& as_list() const;
  const Closure& as_closure() const;
  const Opaque& as_opaque() const;
  const PrimApp& as_prim() const;
  const std::shared_ptr<const Thunk>& as_thunk() const;

  /// Payload of an opaque with the given tag, downcast to T.
  template <class T>
  const T& payload(const std::string& tag) const;
};

struct Closure {
  std::string param;
  ExprP body;
  EnvP env;
  std::string self_name;  // non-empty for recursive let-bound functions
  CertificateP cert;
};

/// Lexical environment: a chain of single bindings ending in a global table.
struct ValueEnv {
  std::string name;
  Value value;
  EnvP parent;
  std::shared_ptr<const std::map<std::string, Value>> globals;  // root only

  static EnvP root(std::map<std::string, Value> globals);
  static EnvP extend(EnvP parent, std::string name, Value v);
  const Value* lookup(const std::string& name) const;
};

bool values_equal(const Value& a, const Value& b);
std::string show_value(const Value& v);

[[noreturn]] void payload_mismatch(const std::string& want, const std::string& got);

template <class T>
const T& Value::payload(const std::string& tag) const {
  const auto& o = as_opaque();
  const T* p = o.tag == tag ? dynamic_cast<const T*>(o.payload.get()) : nullptr;
  if (!p) payload_mismatch(tag, o.tag);
  return *p;
}

}  // namespace lbac

#include "lbac/library.hpp"

#include <set>

namespace lbac {

void check_string_size(std::size_t n) {
  if (n > kMaxStringBytes) {
    throw RuntimeFault(RuntimeFault::Kind::MemoryLimit,
                       "string of " + std::to_string(n) + " bytes exceeds the limit");
  }
}

void check_list_size(std::size_t n) {
  if (n > kMaxListLength) {
    throw RuntimeFault(RuntimeFault::Kind::MemoryLimit,
                       "list of " + std::to_string(n) + " elements exceeds the limit");
  }
}

Value checked_int(BigInt v) {
  if (v != 0 && boost::multiprecision::msb(boost::multiprecision::abs(v)) >= kMaxIntBits) {
    throw RuntimeFault(RuntimeFault::Kind::MemoryLimit, "integer exceeds the size limit");
  }
  return Value::integer(std::move(v));
}

TypeScheme close_over(TypeP t) {
  std::set<std::string> fv;
  free_type_vars(t, fv);
  return TypeScheme{{fv.begin(), fv.end()}, std::move(t)};
}

namespace {

std::size_t arity_of(const TypeP& t) {
  std::size_t n = 0;
  for (TypeP cur = t; cur->kind == Type::Kind::Arrow; cur = cur->args[1]) ++n;
  return n;
}

std::string result_effect(const TypeP& t) {
  TypeP cur = t;
  while (cur->kind == Type::Kind::Arrow) cur = cur->args[1];
  if (cur->kind == Type::Kind::Effect && cur->args[0]->kind == Type::Kind::EffectCon) {
    return cur->args[0]->name;
  }
  return "";
}

}  // namespace

PrimitiveP make_prim(std::string name, TypeScheme scheme, std::string doc, PrimFn fn) {
  auto p = std::make_shared<Primitive>();
  p->name = std::move(name);
  p->arity = arity_of(scheme.body);
  p->effect = result_effect(scheme.body);
  p->scheme = std::move(scheme);
  p->doc = std::move(doc);
  p->fn = std::move(fn);
  return p;
}

PrimitiveP make_prim(const TypeRegistry& reg, std::string name, const std::string& type,
                     std::string doc, PrimFn fn) {
  return make_prim(std::move(name), close_over(lbac::parse_type(type, reg)), std::move(doc),
                   std::move(fn));
}

Library::Library() {
  registry_.opaques[kDefsTag] = 0;
  installing_base_ = true;
  install_prelude();
  install_io();
  installing_base_ = false;
}

void Library::register_effect(const std::string& name, std::vector<PrimitiveP> primitives,
                              StateFactory factory) {
  if (registry_.effects.count(name) || registry_.opaques.count(name)) {
    throw RegistryError(RegistryError::Kind::DuplicateEffect,
                        "effect `" + name + "` is already registered");
  }
  registry_.effects.insert(name);
  effects_[name] = EffectEntry{{}, std::move(factory)};
  for (auto& p : primitives) add_primitive(std::move(p));
}

void Library::register_opaque(const std::string& name, int arity, bool constructible) {
  static const std::set<std::string> kUnforgeable = {"Trusted", "Path", "Labeled"};
  if (constructible && kUnforgeable.count(name)) {
    throw RegistryError(RegistryError::Kind::Unforgeable,
                        "opaque type `" + name + "` can never be constructible");
  }
  if (registry_.opaques.count(name) || registry_.effects.count(name)) {
    throw RegistryError(RegistryError::Kind::DuplicateOpaque,
                        "opaque type `" + name + "` is already registered");
  }
  registry_.opaques[name] = arity;
  if (constructible) registry_.opaque_constructible.insert(name);
}

void Library::register_alias(const std::string& name, TypeP target) {
  registry_.aliases[name] = std::move(target);
}

void Library::bind(const std::string& name, Binding b) {
  if (bindings_.count(name)) {
    throw RegistryError(RegistryError::Kind::DuplicateBinding,
                        "`" + name + "` is already bound");
  }
  b.base = installing_base_;
  bindings_.emplace(name, std::move(b));
}

void Library::add_primitive(PrimitiveP p) {
  if (!p->effect.empty() && !registry_.effects.count(p->effect)) {
    throw RegistryError(RegistryError::Kind::DuplicateEffect,
                        "primitive `" + p->name + "` uses unregistered effect " + p->effect);
  }
  Value v;
  if (p->arity == 0 && !p->effect.empty()) {
    auto t = std::make_shared<Thunk>();
    t->kind = Thunk::Kind::Prim;
    t->effect = p->effect;
    t->prim = p;
    v = Value{std::shared_ptr<const Thunk>(std::move(t))};
  } else {
    v = Value{std::make_shared<const PrimApp>(PrimApp{p, {}, nullptr})};
  }
  bind(p->name, Binding{p->scheme, p->doc, std::move(v)});
  if (!p->effect.empty()) effects_[p->effect].primitives.push_back(p);
}

void Library::add_value(const std::string& name, TypeScheme scheme, std::string doc, Value v) {
  bind(name, Binding{std::move(scheme), std::move(doc), std::move(v)});
}

const TypeScheme& Library::scheme_of(const std::string& name) const {
  auto it = bindings_.find(name);
  if (it == bindings_.end()) throw ConfigError("unknown binding `" + name + "`");
  return it->second.scheme;
}

std::vector<std::string> Library::primitives_of(const std::string& effect) const {
  std::vector<std::string> out;
  auto it = effects_.find(effect);
  if (it == effects_.end()) return out;
  for (const auto& p : it->second.primitives) out.push_back(p->name);
  return out;
}

TypeEnv Library::type_env() const {
  TypeEnv env{registry_, {}};
  for (const auto& [name, b] : bindings_) env.bindings[name] = b.scheme;
  return env;
}

EnvP Library::value_env() const {
  std::map<std::string, Value> globals;
  for (const auto& [name, b] : bindings_) globals[name] = b.value;
  return ValueEnv::root(std::move(globals));
}

TypeEnv Library::type_env(const Defs& defs) const {
  TypeEnv env{registry_, {}};
  for (const auto& [name, b] : bindings_) {
    if (b.base) env.bindings[name] = b.scheme;
  }
  for (const auto& e : defs.entries) env.bindings[e.name] = e.scheme;
  env.bindings[defs.name] = mono(t_opaque(kDefsTag));
  return env;
}

EnvP Library::value_env(const Defs& defs) const {
  std::map<std::string, Value> globals;
  for (const auto& [name, b] : bindings_) {
    if (b.base) globals[name] = b.value;
  }
  for (const auto& e : defs.entries) globals[e.name] = bindings_.at(e.name).value;
  globals[defs.name] = defs_value(defs);
  return ValueEnv::root(std::move(globals));
}

Defs Library::make_defs(const std::string& name, const std::vector<std::string>& names) const {
  Defs d{name, {}};
  for (const auto& n : names) {
    auto it = bindings_.find(n);
    if (it == bindings_.end()) throw ConfigError("defs `" + name + "` names unknown `" + n + "`");
    d.entries.push_back(DefEntry{n, it->second.scheme, it->second.doc});
  }
  return d;
}

Value Library::defs_value(const Defs& defs) const {
  return Value::opaque(kDefsTag, std::make_shared<DefsPayload>(std::make_shared<const Defs>(defs)));
}

void Library::add_defs(const Defs& defs) {
  add_value(defs.name, mono(t_opaque(kDefsTag)), "agent definitions", defs_value(defs));
}

std::shared_ptr<const Defs> Library::find_defs(const std::string& name) const {
  auto it = bindings_.find(name);
  if (it == bindings_.end() || !it->second.value.is_opaque() || it->second.value.as_opaque().tag != kDefsTag) {
    throw ConfigError("no definitions named `" + name + "`");
  }
  return it->second.value.payload<DefsPayload>(kDefsTag).defs;
}

EffectContext Library::make_context(const std::string& effect,
                                    const nlohmann::json& options) const {
  auto it = effects_.find(effect);
  if (it == effects_.end()) throw ConfigError("unknown effect `" + effect + "`");
  std::shared_ptr<EffectState> state;
  if (it->second.factory) state = it->second.factory(options);
  return make_context(effect, std::move(state));
}

EffectContext Library::make_context(const std::string& effect,
                                    std::shared_ptr<EffectState> state) const {
  auto it = effects_.find(effect);
  if (it == effects_.end()) throw ConfigError("unknown effect `" + effect + "`");
  EffectContext ctx;
  ctx.effect = effect;
  ctx.state = std::move(state);
  for (const auto& p : it->second.primitives) ctx.primitive_table[p->name] = p->fn;
  return ctx;
}

EffectContext Library::sealed_context() { return EffectContext{}; }

TypeP Library::parse_type(const std::string& src) const { return lbac::parse_type(src, registry_); }

ExprP Library::parse(const std::string& src) const { return parse_program(src, registry_); }

}  // namespace lbac

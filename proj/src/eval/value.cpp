#include <sstream>

#include "lbac/eval.hpp"

namespace lbac {

void payload_mismatch(const std::string& want, const std::string& got) {
  throw RuntimeFault(RuntimeFault::Kind::Internal, "expected opaque " + want + ", got " + got);
}

namespace {

[[noreturn]] void kind_fault(const char* want) {
  throw RuntimeFault(RuntimeFault::Kind::Internal, std::string("value is not ") + want);
}

template <class T>
const T& get(const Value& v, const char* want) {
  const T* p = std::get_if<T>(&v.data);
  if (!p) kind_fault(want);
  return *p;
}

}  // namespace

const BigInt& Value::as_int() const { return get<BigInt>(*this, "an integer"); }
const std::string& Value::as_string() const { return get<std::string>(*this, "a string"); }
bool Value::as_bool() const { return get<bool>(*this, "a boolean"); }
const Value::List& Value::as_list() const {
  return *get<std::shared_ptr<const List>>(*this, "a list");
}
const Closure& Value::as_closure() const {
  return *get<std::shared_ptr<const Closure>>(*this, "a function");
}
const Value::Opaque& Value::as_opaque() const { return get<Opaque>(*this, "an opaque value"); }
const PrimApp& Value::as_prim() const {
  return *get<std::shared_ptr<const PrimApp>>(*this, "a primitive");
}
const std::shared_ptr<const Thunk>& Value::as_thunk() const {
  return get<std::shared_ptr<const Thunk>>(*this, "an effect computation");
}

EnvP ValueEnv::root(std::map<std::string, Value> globals) {
  auto env = std::make_shared<ValueEnv>();
  env->globals = std::make_shared<const std::map<std::string, Value>>(std::move(globals));
  return env;
}

EnvP ValueEnv::extend(EnvP parent, std::string name, Value v) {
  auto env = std::make_shared<ValueEnv>();
  env->name = std::move(name);
  env->value = std::move(v);
  env->parent = std::move(parent);
  return env;
}

const Value* ValueEnv::lookup(const std::string& n) const {
  const ValueEnv* cur = this;
  while (cur) {
    if (cur->globals) {
      auto it = cur->globals->find(n);
      return it == cur->globals->end() ? nullptr : &it->second;
    }
    if (cur->name == n) return &cur->value;
    cur = cur->parent.get();
  }
  return nullptr;
}

bool values_equal(const Value& a, const Value& b) {
  if (a.data.index() != b.data.index()) return false;
  if (a.is_unit()) return true;
  if (a.is_int()) return a.as_int() == b.as_int();
  if (a.is_string()) return a.as_string() == b.as_string();
  if (a.is_bool()) return a.as_bool() == b.as_bool();
  if (a.is_list()) {
    const auto& x = a.as_list();
    const auto& y = b.as_list();
    if (x.size() != y.size()) return false;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (!values_equal(x[i], y[i])) return false;
    }
    return true;
  }
  if (a.is_opaque()) {
    const auto& x = a.as_opaque();
    const auto& y = b.as_opaque();
    return x.tag == y.tag && x.payload->equals(*y.payload);
  }
  throw RuntimeFault(RuntimeFault::Kind::PrimitiveFailure,
                     "functions and effect computations cannot be compared");
}

std::string show_value(const Value& v) {
  std::ostringstream os;
  if (v.is_unit()) {
    os << "()";
  } else if (v.is_int()) {
    os << v.as_int().str();
  } else if (v.is_string()) {
    os << '"';
    for (char c : v.as_string()) {
      if (c == '"' || c == '\\') os << '\\';
      if (c == '\n') {
        os << "\\n";
        continue;
      }
      os << c;
    }
    os << '"';
  } else if (v.is_bool()) {
    os << (v.as_bool() ? "True" : "False");
  } else if (v.is_list()) {
    os << '[';
    const auto& items = v.as_list();
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (i) os << ", ";
      os << show_value(items[i]);
    }
    os << ']';
  } else if (v.is_opaque()) {
    const auto& o = v.as_opaque();
    std::string inner = o.payload ? o.payload->show() : "";
    os << '<' << o.tag;
    if (!inner.empty()) os << ' ' << inner;
    os << '>';
  } else if (v.is_thunk()) {
    const auto& t = *v.as_thunk();
    os << "<computation" << (t.effect.empty() ? "" : " " + t.effect) << '>';
  } else {
    os << "<function>";
  }
  return os.str();
}

}  // namespace lbac

#include <functional>
#include <algorithm>
#include <sstream>

#include "lbac/types.hpp"

namespace lbac {

TypeScheme mono(TypeP t) { return TypeScheme{{}, std::move(t)}; }

std::string render_scheme(const TypeScheme& s) { return render_type(s.body); }

const TypeScheme* TypeEnv::lookup(const std::string& name) const {
  auto it = bindings.find(name);
  return it == bindings.end() ? nullptr : &it->second;
}

TypeP apply_subst(const Substitution& s, const TypeP& t) {
  if (t->kind == Type::Kind::Var) {
    auto it = s.find(t->name);
    if (it == s.end()) return t;
    return apply_subst(s, it->second);
  }
  if (t->args.empty()) return t;
  std::vector<TypeP> args;
  args.reserve(t->args.size());
  bool changed = false;
  for (const auto& a : t->args) {
    args.push_back(apply_subst(s, a));
    changed |= args.back() != a;
  }
  if (!changed) return t;
  return std::make_shared<const Type>(Type{t->kind, t->name, std::move(args)});
}

Substitution compose(const Substitution& s2, const Substitution& s1) {
  Substitution out;
  for (const auto& [k, v] : s1) out[k] = apply_subst(s2, v);
  for (const auto& [k, v] : s2) out.emplace(k, v);
  // make the result idempotent
  for (auto& [k, v] : out) v = apply_subst(out, v);
  return out;
}

TypeP FreshSupply::fresh() { return t_var("t" + std::to_string(next_++)); }

// ---------------------------------------------------------------------------
// Error rendering

namespace {

std::string var_display_name(std::size_t i) {
  std::string base(1, static_cast<char>('a' + i % 26));
  return i < 26 ? base : base + std::to_string(i / 26);
}

// Renames type variables to a, b, c... in order of first appearance so that
// messages do not leak the checker's internal counter.
class Normalizer {
 public:
  TypeP operator()(const TypeP& t) {
    if (!t) return t;
    if (t->kind == Type::Kind::Var) {
      auto it = names_.find(t->name);
      if (it == names_.end()) it = names_.emplace(t->name, var_display_name(names_.size())).first;
      return t_var(it->second);
    }
    if (t->args.empty()) return t;
    std::vector<TypeP> args;
    for (const auto& a : t->args) args.push_back((*this)(a));
    return std::make_shared<const Type>(Type{t->kind, t->name, std::move(args)});
  }
  std::string name(const std::string& var) {
    return render_type((*this)(t_var(var)));
  }

 private:
  std::map<std::string, std::string> names_;
};

std::string describe_effect(const std::string& e) {
  return e.empty() ? std::string("a pure value") : "effect " + e;
}

std::string render_error(const TypeError::Detail& d) {
  Normalizer norm;
  TypeP expected = norm(d.expected);
  TypeP found = norm(d.found);
  TypeP ie = norm(d.inner_expected);
  TypeP iff = norm(d.inner_found);
  auto effect_text = [&](const std::string& e) {
    // effect heads that are still variables render through the normalizer
    if (!e.empty() && std::islower(static_cast<unsigned char>(e[0]))) return "effect " + norm.name(e);
    return describe_effect(e);
  };

  std::ostringstream os;
  os << d.span.line << ':' << d.span.column << ": type error: ";
  switch (d.kind) {
    case TypeError::Kind::Mismatch:
      os << "type mismatch: expected `" << render_type(ie) << "`, found `" << render_type(iff)
         << '`';
      break;
    case TypeError::Kind::EffectMismatch:
      os << "effect mismatch: expected " << effect_text(d.expected_effect) << ", found "
         << effect_text(d.found_effect);
      break;
    case TypeError::Kind::OccursCheck:
      os << "cannot construct the infinite type `" << render_type(ie) << " = " << render_type(iff)
         << '`';
      break;
    case TypeError::Kind::UnboundVar:
      os << "unbound variable `" << d.name << '`';
      break;
    case TypeError::Kind::AmbiguousAgentType:
      os << "the target type of this `agent` call is ambiguous (`" << render_type(found)
         << "`); add a type annotation";
      return os.str();
    case TypeError::Kind::AmbiguousEffect:
      os << "the effect of this computation is ambiguous (`" << render_type(found)
         << "`); add a type annotation";
      return os.str();
  }
  if (expected && found) {
    os << "\n  expected type: " << render_type(expected) << "\n  found type:    "
       << render_type(found);
  }
  return os.str();
}

}  // namespace

TypeError::TypeError(Detail d) : Error(render_error(d)), d_(std::move(d)) {
  rendered_ = what();
}

// ---------------------------------------------------------------------------
// Unification

namespace {

struct UnifyFailure {
  TypeError::Kind kind;
  TypeP a;
  TypeP b;
  std::string ea;
  std::string eb;
};

std::string head_label(const TypeP& t) {
  if (t->kind != Type::Kind::Effect) return "";
  return t->args[0]->name;
}

class Unifier {
 public:
  Substitution s;

  TypeP shallow(TypeP t) const {
    while (t->kind == Type::Kind::Var) {
      auto it = s.find(t->name);
      if (it == s.end()) break;
      t = it->second;
    }
    return t;
  }

  TypeP resolve(const TypeP& t) const { return apply_subst(s, t); }

  bool occurs(const std::string& v, const TypeP& t) const {
    TypeP r = shallow(t);
    if (r->kind == Type::Kind::Var) return r->name == v;
    for (const auto& a : r->args) {
      if (occurs(v, a)) return true;
    }
    return false;
  }

  void bind(const TypeP& var, const TypeP& t) {
    if (occurs(var->name, t)) throw UnifyFailure{TypeError::Kind::OccursCheck, var, t, "", ""};
    s[var->name] = t;
  }

  void unify(const TypeP& x, const TypeP& y) {
    TypeP a = shallow(x);
    TypeP b = shallow(y);
    if (a == b) return;
    if (a->kind == Type::Kind::Var) {
      if (b->kind == Type::Kind::Var && b->name == a->name) return;
      bind(a, b);
      return;
    }
    if (b->kind == Type::Kind::Var) {
      bind(b, a);
      return;
    }
    bool ea = a->kind == Type::Kind::Effect;
    bool eb = b->kind == Type::Kind::Effect;
    if (ea || eb) {
      if (!(ea && eb)) {
        throw UnifyFailure{TypeError::Kind::EffectMismatch, a, b, head_label(resolve(a)),
                           head_label(resolve(b))};
      }
      TypeP ha = shallow(a->args[0]);
      TypeP hb = shallow(b->args[0]);
      if (ha->kind == Type::Kind::EffectCon && hb->kind == Type::Kind::EffectCon &&
          ha->name != hb->name) {
        throw UnifyFailure{TypeError::Kind::EffectMismatch, a, b, ha->name, hb->name};
      }
      unify(ha, hb);
      unify(a->args[1], b->args[1]);
      return;
    }
    if (a->kind != b->kind || a->name != b->name || a->args.size() != b->args.size()) {
      throw UnifyFailure{TypeError::Kind::Mismatch, a, b, "", ""};
    }
    for (std::size_t i = 0; i < a->args.size(); ++i) unify(a->args[i], b->args[i]);
  }

  Substitution resolved() const {
    Substitution out;
    for (const auto& [k, v] : s) out[k] = resolve(v);
    return out;
  }
};

TypeError make_error(const UnifyFailure& f, const Unifier& u, const Span& span,
                     const TypeP& expected, const TypeP& found) {
  TypeError::Detail d;
  d.kind = f.kind;
  d.span = span;
  d.expected = expected ? u.resolve(expected) : nullptr;
  d.found = found ? u.resolve(found) : nullptr;
  d.inner_expected = u.resolve(f.a);
  d.inner_found = u.resolve(f.b);
  d.expected_effect = f.ea;
  d.found_effect = f.eb;
  return TypeError(std::move(d));
}

TypeP strip_arrows(TypeP t, const Unifier& u) {
  t = u.shallow(t);
  while (t->kind == Type::Kind::Arrow) t = u.shallow(t->args[1]);
  return t;
}

// ---------------------------------------------------------------------------
// Inference

class Inferencer {
 public:
  explicit Inferencer(const TypeEnv& env) : env_(env) {}

  Unifier u;
  FreshSupply supply;
  std::vector<std::pair<const Expr*, TypeP>> agent_sites;
  std::vector<std::pair<const Expr*, TypeP>> effect_sites;  // effect head per do/return

  void unify_at(const TypeP& expected, const TypeP& found, const Span& span) {
    try {
      u.unify(expected, found);
    } catch (const UnifyFailure& f) {
      throw make_error(f, u, span, expected, found);
    }
  }

  TypeP infer(const ExprP& e) {
    switch (e->kind) {
      case Expr::Kind::IntLit:
        return t_int();
      case Expr::Kind::StrLit:
        return t_string();
      case Expr::Kind::BoolLit:
        return t_bool();
      case Expr::Kind::UnitLit:
        return t_unit();
      case Expr::Kind::ListLit: {
        TypeP elem = supply.fresh();
        for (const auto& item : e->kids) unify_at(elem, infer(item), item->span);
        return t_list(elem);
      }
      case Expr::Kind::Var:
        return infer_var(e.get(), e->text, e->span);
      case Expr::Kind::Lambda: {
        TypeP param = supply.fresh();
        locals_.emplace_back(e->text, mono(param));
        TypeP body = infer(e->kids[0]);
        locals_.pop_back();
        return t_arrow(param, body);
      }
      case Expr::Kind::Apply: {
        TypeP fn = infer(e->kids[0]);
        TypeP arg = infer(e->kids[1]);
        return apply_to(fn, arg, e->kids[0]->span, e->kids[1]->span);
      }
      case Expr::Kind::Let: {
        TypeScheme s = infer_binding(e->text, e->kids[0]);
        locals_.emplace_back(e->text, std::move(s));
        TypeP body = infer(e->kids[1]);
        locals_.pop_back();
        return body;
      }
      case Expr::Kind::If: {
        unify_at(t_bool(), infer(e->kids[0]), e->kids[0]->span);
        TypeP then_t = infer(e->kids[1]);
        unify_at(then_t, infer(e->kids[2]), e->kids[2]->span);
        return then_t;
      }
      case Expr::Kind::BinOp: {
        if (e->text == "&&" || e->text == "||") {
          unify_at(t_bool(), infer(e->kids[0]), e->kids[0]->span);
          unify_at(t_bool(), infer(e->kids[1]), e->kids[1]->span);
          return t_bool();
        }
        TypeP op = infer_var(nullptr, e->text, e->span);
        TypeP lhs = infer(e->kids[0]);
        TypeP partial = apply_to(op, lhs, e->span, e->kids[0]->span);
        TypeP rhs = infer(e->kids[1]);
        return apply_to(partial, rhs, e->span, e->kids[1]->span);
      }
      case Expr::Kind::Return: {
        TypeP eff = supply.fresh();
        effect_sites.emplace_back(e.get(), eff);
        return t_effect_over(eff, infer(e->kids[0]));
      }
      case Expr::Kind::Do:
        return infer_do(e);
      case Expr::Kind::Annot: {
        TypeP inner = infer(e->kids[0]);
        TypeP ann = freshen_annotation(e->annotation);
        unify_at(ann, inner, e->span);
        return ann;
      }
    }
    return supply.fresh();
  }

  TypeScheme generalize_here(const TypeP& t) {
    std::set<std::string> fixed;
    for (const auto& [name, scheme] : locals_) {
      std::set<std::string> fv;
      free_type_vars(u.resolve(scheme.body), fv);
      for (const auto& q : scheme.vars) fv.erase(q);
      fixed.insert(fv.begin(), fv.end());
    }
    // agent targets and effect heads stay monomorphic so that later uses can
    // resolve them
    for (const auto& site : agent_sites) free_type_vars(u.resolve(site.second), fixed);
    for (const auto& site : effect_sites) free_type_vars(u.resolve(site.second), fixed);
    TypeP r = u.resolve(t);
    std::set<std::string> fv;
    free_type_vars(r, fv);
    TypeScheme s{{}, r};
    for (const auto& v : fv) {
      if (!fixed.count(v)) s.vars.push_back(v);
    }
    return s;
  }

 private:
  TypeP infer_var(const Expr* node, const std::string& name, const Span& span) {
    for (auto it = locals_.rbegin(); it != locals_.rend(); ++it) {
      if (it->first == name) return instantiate(it->second, supply);
    }
    const TypeScheme* s = env_.lookup(name);
    if (!s) {
      TypeError::Detail d;
      d.kind = TypeError::Kind::UnboundVar;
      d.span = span;
      d.name = name;
      throw TypeError(std::move(d));
    }
    TypeP t = instantiate(*s, supply);
    if (node && name == kAgentName) agent_sites.emplace_back(node, strip_arrows(t, u));
    return t;
  }

  TypeP apply_to(const TypeP& fn, const TypeP& arg, const Span& fn_span, const Span& arg_span) {
    TypeP f = u.shallow(fn);
    if (f->kind == Type::Kind::Arrow) {
      unify_at(f->args[0], arg, arg_span);
      return f->args[1];
    }
    TypeP result = supply.fresh();
    unify_at(t_arrow(arg, result), fn, fn_span);
    return result;
  }

  TypeScheme infer_binding(const std::string& name, const ExprP& bound) {
    if (bound->kind == Expr::Kind::Lambda) {
      TypeP self = supply.fresh();
      locals_.emplace_back(name, mono(self));
      TypeP t = infer(bound);
      locals_.pop_back();
      unify_at(self, t, bound->span);
      return generalize_here(t);
    }
    return generalize_here(infer(bound));
  }

  TypeP infer_do(const ExprP& e) {
    TypeP eff = supply.fresh();
    effect_sites.emplace_back(e.get(), eff);
    std::size_t scope = locals_.size();
    TypeP result;
    for (std::size_t i = 0; i < e->stmts.size(); ++i) {
      const DoStmt& st = e->stmts[i];
      switch (st.kind) {
        case DoStmt::Kind::Bind: {
          TypeP rhs = infer(st.rhs);
          TypeP value = supply.fresh();
          unify_at(t_effect_over(eff, value), rhs, st.rhs->span);
          locals_.emplace_back(st.name, mono(value));
          break;
        }
        case DoStmt::Kind::Let: {
          TypeScheme s = infer_binding(st.name, st.rhs);
          locals_.emplace_back(st.name, std::move(s));
          break;
        }
        case DoStmt::Kind::Expr: {
          TypeP rhs = infer(st.rhs);
          TypeP value = supply.fresh();
          TypeP expected = t_effect_over(eff, value);
          unify_at(expected, rhs, st.rhs->span);
          if (i + 1 == e->stmts.size()) result = expected;
          break;
        }
      }
    }
    locals_.resize(scope);
    return result;
  }

  TypeP freshen_annotation(const TypeP& t) {
    std::set<std::string> fv;
    free_type_vars(t, fv);
    if (fv.empty()) return t;
    Substitution s;
    for (const auto& v : fv) s[v] = supply.fresh();
    return apply_subst(s, t);
  }

  const TypeEnv& env_;
  std::vector<std::pair<std::string, TypeScheme>> locals_;
};

}  // namespace

// ---------------------------------------------------------------------------

TypeP instantiate(const TypeScheme& s, FreshSupply& supply) {
  if (s.vars.empty()) return s.body;
  Substitution sub;
  for (const auto& v : s.vars) sub[v] = supply.fresh();
  // Simultaneous renaming: fresh names may collide with quantified ones.
  std::function<TypeP(const TypeP&)> rename = [&](const TypeP& t) -> TypeP {
    if (t->kind == Type::Kind::Var) {
      auto it = sub.find(t->name);
      return it == sub.end() ? t : it->second;
    }
    if (t->args.empty()) return t;
    std::vector<TypeP> args;
    for (const auto& a : t->args) args.push_back(rename(a));
    return std::make_shared<const Type>(Type{t->kind, t->name, std::move(args)});
  };
  return rename(s.body);
}

TypeScheme generalize(const TypeEnv& env, const TypeP& t) {
  std::set<std::string> env_fv;
  for (const auto& [name, scheme] : env.bindings) {
    std::set<std::string> fv;
    free_type_vars(scheme.body, fv);
    for (const auto& q : scheme.vars) fv.erase(q);
    env_fv.insert(fv.begin(), fv.end());
  }
  std::set<std::string> fv;
  free_type_vars(t, fv);
  TypeScheme s{{}, t};
  for (const auto& v : fv) {
    if (!env_fv.count(v)) s.vars.push_back(v);
  }
  return s;
}

Substitution unify(const TypeP& expected, const TypeP& found) {
  Unifier u;
  try {
    u.unify(expected, found);
  } catch (const UnifyFailure& f) {
    throw make_error(f, u, Span{}, expected, found);
  }
  return u.resolved();
}

InferResult infer(const TypeEnv& env, const ExprP& e) {
  Inferencer inf(env);
  TypeP t = inf.infer(e);
  return InferResult{inf.u.resolved(), inf.u.resolve(t)};
}

const TypeP* CheckCertificate::agent_target(const Expr* var_node) const {
  auto it = agent_targets_.find(var_node);
  return it == agent_targets_.end() ? nullptr : &it->second;
}

std::string CheckCertificate::effect_of(const Expr* node) const {
  auto it = effects_.find(node);
  return it == effects_.end() ? "" : it->second;
}

CertificateP check_against(const TypeEnv& env, const ExprP& e, const TypeP& expected) {
  std::set<std::string> target_vars;
  free_type_vars(expected, target_vars);
  if (!target_vars.empty()) {
    throw Error("check target `" + render_type(expected) + "` must be monomorphic");
  }
  Inferencer inf(env);
  TypeP t = inf.infer(e);
  inf.unify_at(expected, t, e->span);

  std::shared_ptr<CheckCertificate> cert(new CheckCertificate());
  cert->program_ = e;
  cert->type_ = inf.u.resolve(expected);
  for (const auto& [node, target] : inf.agent_sites) {
    TypeP r = inf.u.resolve(target);
    std::set<std::string> fv;
    free_type_vars(r, fv);
    if (!fv.empty()) {
      TypeError::Detail d;
      d.kind = TypeError::Kind::AmbiguousAgentType;
      d.span = node->span;
      d.found = r;
      throw TypeError(std::move(d));
    }
    cert->agent_targets_[node] = r;
  }
  for (const auto& [node, head] : inf.effect_sites) {
    TypeP r = inf.u.resolve(head);
    if (r->kind != Type::Kind::EffectCon) {
      TypeError::Detail d;
      d.kind = TypeError::Kind::AmbiguousEffect;
      d.span = node->span;
      d.found = r;
      throw TypeError(std::move(d));
    }
    cert->effects_[node] = r->name;
  }
  return cert;
}

}  // namespace lbac

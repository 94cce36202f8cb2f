#include "lbac/ast.hpp"

#include <sstream>

namespace lbac {

namespace {

TypeP make(Type::Kind k, std::string name, std::vector<TypeP> args = {}) {
  return std::make_shared<const Type>(Type{k, std::move(name), std::move(args)});
}

bool is_atomic_type(const TypeP& t) {
  switch (t->kind) {
    case Type::Kind::Base:
    case Type::Kind::List:
    case Type::Kind::Var:
    case Type::Kind::EffectCon:
      return true;
    case Type::Kind::Opaque:
      return t->args.empty();
    default:
      return false;
  }
}

void render(const TypeP& t, std::ostream& os, int prec);

void render_atom(const TypeP& t, std::ostream& os) {
  if (is_atomic_type(t)) {
    render(t, os, 2);
  } else {
    os << '(';
    render(t, os, 0);
    os << ')';
  }
}

// prec 0: anything, 1: arrow operand, 2: application argument
void render(const TypeP& t, std::ostream& os, int prec) {
  switch (t->kind) {
    case Type::Kind::Base:
      os << (t->name == "Unit" ? "()" : t->name);
      return;
    case Type::Kind::Var:
    case Type::Kind::EffectCon:
      os << t->name;
      return;
    case Type::Kind::List:
      os << '[';
      render(t->args[0], os, 0);
      os << ']';
      return;
    case Type::Kind::Arrow:
      if (prec > 0) os << '(';
      render(t->args[0], os, 1);
      os << " -> ";
      render(t->args[1], os, 0);
      if (prec > 0) os << ')';
      return;
    case Type::Kind::Effect:
      if (prec > 1) os << '(';
      render(t->args[0], os, 2);
      os << ' ';
      render_atom(t->args[1], os);
      if (prec > 1) os << ')';
      return;
    case Type::Kind::Opaque:
      if (t->args.empty()) {
        os << t->name;
        return;
      }
      if (prec > 1) os << '(';
      os << t->name;
      for (const auto& a : t->args) {
        os << ' ';
        render_atom(a, os);
      }
      if (prec > 1) os << ')';
      return;
  }
}

}  // namespace

TypeP t_base(const std::string& name) { return make(Type::Kind::Base, name); }
TypeP t_int() {
  static const TypeP t = t_base("Int");
  return t;
}
TypeP t_string() {
  static const TypeP t = t_base("String");
  return t;
}
TypeP t_bool() {
  static const TypeP t = t_base("Bool");
  return t;
}
TypeP t_unit() {
  static const TypeP t = t_base("Unit");
  return t;
}
TypeP t_list(TypeP elem) { return make(Type::Kind::List, "", {std::move(elem)}); }
TypeP t_arrow(TypeP from, TypeP to) {
  return make(Type::Kind::Arrow, "", {std::move(from), std::move(to)});
}
TypeP t_arrows(const std::vector<TypeP>& params, TypeP result) {
  for (auto it = params.rbegin(); it != params.rend(); ++it) result = t_arrow(*it, result);
  return result;
}
TypeP t_effect(const std::string& effect, TypeP result) {
  return t_effect_over(t_effect_con(effect), std::move(result));
}
TypeP t_effect_over(TypeP head, TypeP result) {
  return make(Type::Kind::Effect, "", {std::move(head), std::move(result)});
}
TypeP t_opaque(const std::string& name, std::vector<TypeP> args) {
  return make(Type::Kind::Opaque, name, std::move(args));
}
TypeP t_var(const std::string& name) { return make(Type::Kind::Var, name); }
TypeP t_effect_con(const std::string& name) { return make(Type::Kind::EffectCon, name); }

bool type_equal(const TypeP& a, const TypeP& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->kind != b->kind || a->name != b->name || a->args.size() != b->args.size()) return false;
  for (std::size_t i = 0; i < a->args.size(); ++i) {
    if (!type_equal(a->args[i], b->args[i])) return false;
  }
  return true;
}

std::string render_type(const TypeP& t) {
  std::ostringstream os;
  render(t, os, 0);
  return os.str();
}

bool is_effect_type(const TypeP& t) { return t && t->kind == Type::Kind::Effect; }

std::string effect_name_of(const TypeP& t) {
  if (!is_effect_type(t)) return "";
  const auto& head = t->args[0];
  return head->kind == Type::Kind::EffectCon ? head->name : "";
}

void free_type_vars(const TypeP& t, std::set<std::string>& out) {
  if (t->kind == Type::Kind::Var) {
    out.insert(t->name);
    return;
  }
  for (const auto& a : t->args) free_type_vars(a, out);
}

bool mentions_opaque(const TypeP& t, const std::string& name) {
  if (t->kind == Type::Kind::Opaque && t->name == name) return true;
  for (const auto& a : t->args) {
    if (mentions_opaque(a, name)) return true;
  }
  return false;
}

// ---------------------------------------------------------------------------

namespace ast {
namespace {

std::shared_ptr<Expr> node(Expr::Kind k, Span s) {
  auto e = std::make_shared<Expr>();
  e->kind = k;
  e->span = s;
  return e;
}

}  // namespace

ExprP int_lit(BigInt v, Span s) {
  auto e = node(Expr::Kind::IntLit, s);
  e->int_value = std::move(v);
  return e;
}
ExprP str_lit(std::string v, Span s) {
  auto e = node(Expr::Kind::StrLit, s);
  e->text = std::move(v);
  return e;
}
ExprP bool_lit(bool v, Span s) {
  auto e = node(Expr::Kind::BoolLit, s);
  e->bool_value = v;
  return e;
}
ExprP unit_lit(Span s) { return node(Expr::Kind::UnitLit, s); }
ExprP list_lit(std::vector<ExprP> items, Span s) {
  auto e = node(Expr::Kind::ListLit, s);
  e->kids = std::move(items);
  return e;
}
ExprP var(std::string name, Span s) {
  auto e = node(Expr::Kind::Var, s);
  e->text = std::move(name);
  return e;
}
ExprP lambda(std::string param, ExprP body, Span s) {
  auto e = node(Expr::Kind::Lambda, s);
  e->text = std::move(param);
  e->kids = {std::move(body)};
  return e;
}
ExprP apply(ExprP fn, ExprP arg, Span s) {
  auto e = node(Expr::Kind::Apply, s);
  e->kids = {std::move(fn), std::move(arg)};
  return e;
}
ExprP let(std::string name, ExprP bound, ExprP body, Span s) {
  auto e = node(Expr::Kind::Let, s);
  e->text = std::move(name);
  e->kids = {std::move(bound), std::move(body)};
  return e;
}
ExprP if_(ExprP c, ExprP t, ExprP f, Span s) {
  auto e = node(Expr::Kind::If, s);
  e->kids = {std::move(c), std::move(t), std::move(f)};
  return e;
}
ExprP binop(std::string op, ExprP lhs, ExprP rhs, Span s) {
  auto e = node(Expr::Kind::BinOp, s);
  e->text = std::move(op);
  e->kids = {std::move(lhs), std::move(rhs)};
  return e;
}
ExprP do_block(std::vector<DoStmt> stmts, Span s) {
  auto e = node(Expr::Kind::Do, s);
  e->stmts = std::move(stmts);
  return e;
}
ExprP ret(ExprP inner, Span s) {
  auto e = node(Expr::Kind::Return, s);
  e->kids = {std::move(inner)};
  return e;
}
ExprP annot(ExprP inner, TypeP ty, Span s) {
  auto e = node(Expr::Kind::Annot, s);
  e->kids = {std::move(inner)};
  e->annotation = std::move(ty);
  return e;
}

DoStmt bind_stmt(std::string name, ExprP rhs, Span s) {
  return DoStmt{DoStmt::Kind::Bind, std::move(name), std::move(rhs), s};
}
DoStmt expr_stmt(ExprP rhs, Span s) { return DoStmt{DoStmt::Kind::Expr, "", std::move(rhs), s}; }
DoStmt let_stmt(std::string name, ExprP rhs, Span s) {
  return DoStmt{DoStmt::Kind::Let, std::move(name), std::move(rhs), s};
}

}  // namespace ast

bool expr_equal(const ExprP& a, const ExprP& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->kind != b->kind || a->text != b->text || a->kids.size() != b->kids.size() ||
      a->stmts.size() != b->stmts.size()) {
    return false;
  }
  switch (a->kind) {
    case Expr::Kind::IntLit:
      return a->int_value == b->int_value;
    case Expr::Kind::BoolLit:
      return a->bool_value == b->bool_value;
    case Expr::Kind::Annot:
      if (!type_equal(a->annotation, b->annotation)) return false;
      break;
    default:
      break;
  }
  for (std::size_t i = 0; i < a->kids.size(); ++i) {
    if (!expr_equal(a->kids[i], b->kids[i])) return false;
  }
  for (std::size_t i = 0; i < a->stmts.size(); ++i) {
    const auto& x = a->stmts[i];
    const auto& y = b->stmts[i];
    if (x.kind != y.kind || x.name != y.name || !expr_equal(x.rhs, y.rhs)) return false;
  }
  return true;
}

}  // namespace lbac

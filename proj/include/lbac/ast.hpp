#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace lbac {

using BigInt = boost::multiprecision::cpp_int;

struct Span {
  int line = 0;
  int column = 0;
  std::size_t begin = 0;
  std::size_t end = 0;
};

// ---------------------------------------------------------------------------
// Type terms

struct Type;
using TypeP = std::shared_ptr<const Type>;

struct Type {
  enum class Kind {
    Base,       // name: Int | String | Bool | Unit
    List,       // args[0]
    Arrow,      // args[0] -> args[1]
    Effect,     // args[0] is the head (EffectCon or Var), args[1] the result
    Opaque,     // name, args
    Var,        // name
    EffectCon,  // name of a registered effect; only appears as an Effect head
  };

  Kind kind;
  std::string name;
  std::vector<TypeP> args;
};

TypeP t_base(const std::string& name);
TypeP t_int();
TypeP t_string();
TypeP t_bool();
TypeP t_unit();
TypeP t_list(TypeP elem);
TypeP t_arrow(TypeP from, TypeP to);
TypeP t_arrows(const std::vector<TypeP>& params, TypeP result);
TypeP t_effect(const std::string& effect, TypeP result);
TypeP t_effect_over(TypeP head, TypeP result);
TypeP t_opaque(const std::string& name, std::vector<TypeP> args = {});
TypeP t_var(const std::string& name);
TypeP t_effect_con(const std::string& name);

bool type_equal(const TypeP& a, const TypeP& b);
std::string render_type(const TypeP& t);

/// Head effect name of an effect type, or "" if the type is not effectful or
/// its head is still a variable.
std::string effect_name_of(const TypeP& t);
bool is_effect_type(const TypeP& t);

void free_type_vars(const TypeP& t, std::set<std::string>& out);
bool mentions_opaque(const TypeP& t, const std::string& name);

/// Effect names, opaque constructors and aliases visible to the parser and the
/// checker.
struct TypeRegistry {
  std::set<std::string> effects;
  std::map<std::string, int> opaques;  // name -> arity
  std::map<std::string, TypeP> aliases;
  std::set<std::string> opaque_constructible;
};

// ---------------------------------------------------------------------------
// Expressions

struct Expr;
using ExprP = std::shared_ptr<const Expr>;

struct DoStmt {
  enum class Kind { Bind, Expr, Let };
  Kind kind;
  std::string name;  // Bind / Let
  ExprP rhs;
  Span span;
};

struct Expr {
  enum class Kind {
    IntLit,
    StrLit,
    BoolLit,
    UnitLit,
    ListLit,
    Var,
    Lambda,
    Apply,
    Let,
    If,
    BinOp,
    Do,
    Return,
    Annot,
  };

  Kind kind;
  Span span;
  BigInt int_value;
  bool bool_value = false;
  // StrLit: contents. Var: name. Lambda: parameter. Let: bound name.
  // BinOp: operator spelling.
  std::string text;
  // ListLit: items. Lambda: body. Apply: fn, arg. Let: bound, body.
  // If: cond, then, else. BinOp: lhs, rhs. Return / Annot: inner.
  std::vector<ExprP> kids;
  std::vector<DoStmt> stmts;  // Do
  TypeP annotation;           // Annot
};

namespace ast {

ExprP int_lit(BigInt v, Span s = {});
ExprP str_lit(std::string v, Span s = {});
ExprP bool_lit(bool v, Span s = {});
ExprP unit_lit(Span s = {});
ExprP list_lit(std::vector<ExprP> items, Span s = {});
ExprP var(std::string name, Span s = {});
ExprP lambda(std::string param, ExprP body, Span s = {});
ExprP apply(ExprP fn, ExprP arg, Span s = {});
ExprP let(std::string name, ExprP bound, ExprP body, Span s = {});
ExprP if_(ExprP c, ExprP t, ExprP e, Span s = {});
ExprP binop(std::string op, ExprP lhs, ExprP rhs, Span s = {});
ExprP do_block(std::vector<DoStmt> stmts, Span s = {});
ExprP ret(ExprP inner, Span s = {});
ExprP annot(ExprP inner, TypeP ty, Span s = {});

DoStmt bind_stmt(std::string name, ExprP rhs, Span s = {});
DoStmt expr_stmt(ExprP rhs, Span s = {});
DoStmt let_stmt(std::string name, ExprP rhs, Span s = {});

}  // namespace ast

/// Structural equality ignoring spans.
bool expr_equal(const ExprP& a, const ExprP& b);

}  // namespace lbac

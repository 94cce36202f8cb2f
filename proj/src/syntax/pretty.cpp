#include <sstream>

#include "lbac/syntax.hpp"

namespace lbac {

namespace {

// Precedence levels: 1 = lambda/let/if, 2..8 = binary operators,
// 10 = application and `return`, 11 = atoms.
constexpr int kOpen = 1;
constexpr int kApp = 10;
constexpr int kAtom = 11;

void quote(const std::string& s, std::ostream& os) {
  os << '"';
  for (char c : s) {
    if (c == '"') {
      os << "\\\"";
    } else if (c == '\\') {
      os << "\\\\";
    } else if (c == '\n') {
      os << "\\n";
    } else {
      os << c;
    }
  }
  os << '"';
}

void print(const ExprP& e, std::ostream& os, int prec);

void print_stmt(const DoStmt& s, std::ostream& os) {
  switch (s.kind) {
    case DoStmt::Kind::Bind:
      os << s.name << " <- ";
      print(s.rhs, os, 0);
      return;
    case DoStmt::Kind::Let:
      os << "let " << s.name << " = ";
      print(s.rhs, os, 0);
      return;
    case DoStmt::Kind::Expr:
      print(s.rhs, os, 0);
      return;
  }
}

void print(const ExprP& e, std::ostream& os, int prec) {
  switch (e->kind) {
    case Expr::Kind::IntLit:
      if (e->int_value < 0) {
        os << "(-" << BigInt(-e->int_value).str() << ')';
      } else {
        os << e->int_value.str();
      }
      return;
    case Expr::Kind::StrLit:
      quote(e->text, os);
      return;
    case Expr::Kind::BoolLit:
      os << (e->bool_value ? "True" : "False");
      return;
    case Expr::Kind::UnitLit:
      os << "()";
      return;
    case Expr::Kind::Var:
      os << e->text;
      return;
    case Expr::Kind::ListLit:
      os << '[';
      for (std::size_t i = 0; i < e->kids.size(); ++i) {
        if (i) os << ", ";
        print(e->kids[i], os, 0);
      }
      os << ']';
      return;
    case Expr::Kind::Do:
      os << "do { ";
      for (std::size_t i = 0; i < e->stmts.size(); ++i) {
        if (i) os << "; ";
        print_stmt(e->stmts[i], os);
      }
      os << " }";
      return;
    case Expr::Kind::Annot:
      os << '(';
      print(e->kids[0], os, kOpen + 1);
      os << " :: " << render_type(e->annotation) << ')';
      return;
    case Expr::Kind::Lambda:
    case Expr::Kind::Let:
    case Expr::Kind::If: {
      bool paren = prec > kOpen;
      if (paren) os << '(';
      if (e->kind == Expr::Kind::Lambda) {
        os << '\\' << e->text << " -> ";
        print(e->kids[0], os, 0);
      } else if (e->kind == Expr::Kind::Let) {
        os << "let " << e->text << " = ";
        print(e->kids[0], os, 0);
        os << " in ";
        print(e->kids[1], os, 0);
      } else {
        os << "if ";
        print(e->kids[0], os, 0);
        os << " then ";
        print(e->kids[1], os, 0);
        os << " else ";
        print(e->kids[2], os, 0);
      }
      if (paren) os << ')';
      return;
    }
    case Expr::Kind::BinOp: {
      auto info = *operator_info(e->text);
      int p = info.precedence;
      bool paren = prec > p;
      int lp = info.assoc == OperatorInfo::Assoc::Left ? p : p + 1;
      int rp = info.assoc == OperatorInfo::Assoc::Right ? p : p + 1;
      if (paren) os << '(';
      print(e->kids[0], os, lp);
      os << ' ' << e->text << ' ';
      print(e->kids[1], os, rp);
      if (paren) os << ')';
      return;
    }
    case Expr::Kind::Apply: {
      bool paren = prec > kApp;
      if (paren) os << '(';
      const auto& fn = e->kids[0];
      print(fn, os, fn->kind == Expr::Kind::Return ? kAtom : kApp);
      os << ' ';
      print(e->kids[1], os, kAtom);
      if (paren) os << ')';
      return;
    }
    case Expr::Kind::Return: {
      bool paren = prec > kApp;
      if (paren) os << '(';
      os << "return ";
      print(e->kids[0], os, kAtom);
      if (paren) os << ')';
      return;
    }
  }
}

}  // namespace

std::string pretty(const ExprP& e) {
  std::ostringstream os;
  print(e, os, 0);
  return os.str();
}

}  // namespace lbac

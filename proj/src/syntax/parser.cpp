#include <algorithm>
#include <array>
#include <cctype>
#include <sstream>

#include "lbac/syntax.hpp"

namespace lbac {

ParseError::ParseError(Kind kind, Span span, std::string message,
                       std::vector<std::string> expected)
    : Error([&] {
        std::ostringstream os;
        os << span.line << ':' << span.column << ": parse error: " << message;
        if (!expected.empty()) {
          os << " (expected ";
          for (std::size_t i = 0; i < expected.size(); ++i) {
            if (i) os << ", ";
            os << expected[i];
          }
          os << ')';
        }
        return os.str();
      }()),
      kind_(kind),
      span_(span),
      message_(std::move(message)),
      expected_(std::move(expected)) {}

namespace {

constexpr std::array<std::string_view, 9> kReserved = {"let",  "in",     "if",   "then", "else",
                                                        "do",   "return", "True", "False"};

constexpr int kMaxNesting = 600;
constexpr std::size_t kMaxIntDigits = 4096;

}  // namespace

bool is_reserved_word(std::string_view word) {
  return std::find(kReserved.begin(), kReserved.end(), word) != kReserved.end();
}

bool is_identifier(std::string_view word) {
  if (word.empty()) return false;
  auto c0 = static_cast<unsigned char>(word[0]);
  if (!(std::isalpha(c0) || c0 == '_')) return false;
  for (char ch : word.substr(1)) {
    auto c = static_cast<unsigned char>(ch);
    if (!(std::isalnum(c) || c == '_' || c == '\'')) return false;
  }
  return !is_reserved_word(word);
}

std::optional<OperatorInfo> operator_info(std::string_view op) {
  using A = OperatorInfo::Assoc;
  if (op == "||") return OperatorInfo{2, A::Right};
  if (op == "&&") return OperatorInfo{3, A::Right};
  if (op == "==" || op == "/=" || op == "<" || op == "<=" || op == ">" || op == ">=") {
    return OperatorInfo{4, A::None};
  }
  if (op == "++") return OperatorInfo{5, A::Right};
  if (op == "+" || op == "-") return OperatorInfo{6, A::Left};
  if (op == "*") return OperatorInfo{7, A::Left};
  if (op == "//") return OperatorInfo{8, A::Left};
  return std::nullopt;
}

const std::vector<std::string>& binary_operators() {
  static const std::vector<std::string> ops = {"||", "&&", "==", "/=", "<", "<=", ">",
                                               ">=", "++", "+",  "-",  "*", "//"};
  return ops;
}

namespace {

// Boost reads a leading 0 as an octal prefix.
BigInt decimal(const std::string& digits) {
  std::size_t i = digits.find_first_not_of('0');
  return i == std::string::npos ? BigInt(0) : BigInt(digits.substr(i));
}

enum class Tok { Int, Str, Ident, Keyword, Sym, End };

struct Token {
  Tok kind;
  std::string text;
  Span span;
};

std::string describe(const Token& t) {
  switch (t.kind) {
    case Tok::End:
      return "end of input";
    case Tok::Str:
      return "string literal";
    case Tok::Int:
      return "integer literal";
    default:
      return "`" + t.text + "`";
  }
}

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    while (true) {
      skip_space();
      Span start = here();
      if (pos_ >= src_.size()) {
        start.end = start.begin;
        out.push_back({Tok::End, "", start});
        return out;
      }
      char c = src_[pos_];
      if (std::isdigit(static_cast<unsigned char>(c))) {
        std::size_t b = pos_;
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) advance();
        if (pos_ - b > kMaxIntDigits) fail(start, "integer literal too long");
        out.push_back({Tok::Int, std::string(src_.substr(b, pos_ - b)), finish(start)});
      } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        std::size_t b = pos_;
        while (pos_ < src_.size()) {
          auto d = static_cast<unsigned char>(src_[pos_]);
          if (!(std::isalnum(d) || d == '_' || d == '\'')) break;
          advance();
        }
        std::string word(src_.substr(b, pos_ - b));
        Tok kind = is_reserved_word(word) ? Tok::Keyword : Tok::Ident;
        out.push_back({kind, std::move(word), finish(start)});
      } else if (c == '"') {
        out.push_back({Tok::Str, lex_string(start), finish(start)});
      } else {
        out.push_back({Tok::Sym, lex_symbol(start), finish(start)});
      }
    }
  }

 private:
  Span here() const { return Span{line_, col_, pos_, pos_}; }
  Span finish(Span s) const {
    s.end = pos_;
    return s;
  }

  [[noreturn]] void fail(Span s, const std::string& msg) {
    s.end = std::min(std::max(pos_, s.begin), src_.size());
    throw ParseError(ParseError::Kind::Syntax, s, msg);
  }

  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  void skip_space() {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
        advance();
      } else if (c == '-' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '-') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      } else {
        return;
      }
    }
  }

  std::string lex_string(Span start) {
    advance();  // opening quote
    std::string out;
    while (true) {
      if (pos_ >= src_.size()) fail(start, "unterminated string literal");
      char c = src_[pos_];
      if (c == '"') {
        advance();
        return out;
      }
      if (c == '\n') fail(start, "newline in string literal");
      if (c == '\\') {
        advance();
        if (pos_ >= src_.size()) fail(start, "unterminated string literal");
        char e = src_[pos_];
        if (e == 'n') {
          out.push_back('\n');
        } else if (e == '"') {
          out.push_back('"');
        } else if (e == '\\') {
          out.push_back('\\');
        } else {
          fail(here(), "unsupported escape sequence");
        }
        advance();
        continue;
      }
      out.push_back(c);
      advance();
    }
  }

  std::string lex_symbol(Span start) {
    static constexpr std::array<std::string_view, 11> two = {"->", "<-", "::", "++", "==", "/=",
                                                             "<=", ">=", "&&", "||", "//"};
    for (auto s : two) {
      if (src_.substr(pos_, 2) == s) {
        advance();
        advance();
        return std::string(s);
      }
    }
    static constexpr std::string_view one = "\\=;,()[]{}+-*<>";
    char c = src_[pos_];
    if (one.find(c) != std::string_view::npos) {
      advance();
      return std::string(1, c);
    }
    advance();
    fail(start, "unexpected character");
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

class Parser {
 public:
  Parser(std::vector<Token> toks, const TypeRegistry& reg) : toks_(std::move(toks)), reg_(reg) {}

  ExprP program() {
    ExprP e = expr();
    expect_end();
    return e;
  }

  TypeP type_only() {
    TypeP t = type();
    expect_end();
    return t;
  }

 private:
  struct DepthGuard {
    explicit DepthGuard(Parser& p) : p_(p) {
      if (++p_.depth_ > kMaxNesting) {
        throw ParseError(ParseError::Kind::Syntax, p_.peek().span, "nesting too deep");
      }
    }
    ~DepthGuard() { --p_.depth_; }
    Parser& p_;
  };

  const Token& peek(std::size_t ahead = 0) const {
    return toks_[std::min(pos_ + ahead, toks_.size() - 1)];
  }
  bool at_sym(std::string_view s, std::size_t ahead = 0) const {
    const auto& t = peek(ahead);
    return t.kind == Tok::Sym && t.text == s;
  }
  bool at_kw(std::string_view s) const {
    const auto& t = peek();
    return t.kind == Tok::Keyword && t.text == s;
  }
  const Token& take() {
    const Token& t = toks_[pos_];
    if (pos_ + 1 < toks_.size()) ++pos_;
    prev_end_ = t.span.end;
    return t;
  }
  Span from(const Span& start) const {
    Span s = start;
    s.end = std::max(prev_end_, start.begin);
    return s;
  }

  [[noreturn]] void unexpected(std::vector<std::string> expected) const {
    const auto& t = peek();
    throw ParseError(ParseError::Kind::Syntax, t.span, "unexpected " + describe(t),
                     std::move(expected));
  }

  void expect_sym(std::string_view s) {
    if (!at_sym(s)) unexpected({"`" + std::string(s) + "`"});
    take();
  }
  void expect_kw(std::string_view s) {
    if (!at_kw(s)) unexpected({"`" + std::string(s) + "`"});
    take();
  }
  void expect_end() {
    if (peek().kind != Tok::End) unexpected({"end of input"});
  }
  std::string ident() {
    if (peek().kind != Tok::Ident) unexpected({"identifier"});
    return take().text;
  }

  // expr := lam [ '::' type ]
  ExprP expr() {
    DepthGuard g(*this);
    Span start = peek().span;
    ExprP e = lam();
    if (at_sym("::")) {
      take();
      TypeP t = type();
      return ast::annot(e, t, from(start));
    }
    return e;
  }

  ExprP lam() {
    Span start = peek().span;
    if (at_sym("\\")) {
      take();
      std::vector<std::string> params;
      params.push_back(ident());
      while (peek().kind == Tok::Ident) params.push_back(take().text);
      expect_sym("->");
      ExprP body = expr();
      Span s = from(start);
      for (auto it = params.rbegin(); it != params.rend(); ++it) body = ast::lambda(*it, body, s);
      return body;
    }
    if (at_kw("let")) {
      take();
      auto [name, bound] = binding(start);
      expect_kw("in");
      ExprP body = expr();
      return ast::let(name, bound, body, from(start));
    }
    if (at_kw("if")) {
      take();
      ExprP c = expr();
      expect_kw("then");
      ExprP t = expr();
      expect_kw("else");
      ExprP f = expr();
      return ast::if_(c, t, f, from(start));
    }
    return op_expr(0);
  }

  // name params* '=' expr, with `f x y = e` sugar for `f = \x -> \y -> e`.
  std::pair<std::string, ExprP> binding(const Span& start) {
    std::string name = ident();
    std::vector<std::string> params;
    while (peek().kind == Tok::Ident) params.push_back(take().text);
    expect_sym("=");
    ExprP bound = expr();
    Span s = from(start);
    for (auto it = params.rbegin(); it != params.rend(); ++it) bound = ast::lambda(*it, bound, s);
    return {std::move(name), std::move(bound)};
  }

  ExprP op_expr(int min_prec) {
    DepthGuard g(*this);
    Span start = peek().span;
    ExprP lhs = app();
    while (true) {
      const auto& t = peek();
      if (t.kind != Tok::Sym) break;
      auto info = operator_info(t.text);
      if (!info || info->precedence < min_prec) break;
      std::string op = take().text;
      int next = info->assoc == OperatorInfo::Assoc::Right ? info->precedence : info->precedence + 1;
      ExprP rhs = op_expr(next);
      lhs = ast::binop(op, lhs, rhs, from(start));
      if (info->assoc == OperatorInfo::Assoc::None && peek().kind == Tok::Sym) {
        auto again = operator_info(peek().text);
        if (again && again->precedence == info->precedence) {
          throw ParseError(ParseError::Kind::Syntax, peek().span,
                           "comparison operators are non-associative; add parentheses");
        }
      }
    }
    return lhs;
  }

  bool starts_atom() const {
    const auto& t = peek();
    switch (t.kind) {
      case Tok::Int:
      case Tok::Str:
      case Tok::Ident:
        return true;
      case Tok::Keyword:
        return t.text == "True" || t.text == "False" || t.text == "do";
      case Tok::Sym:
        return t.text == "(" || t.text == "[";
      default:
        return false;
    }
  }

  ExprP app() {
    Span start = peek().span;
    if (at_kw("return")) {
      take();
      if (!starts_atom()) unexpected({"expression"});
      ExprP inner = atom();
      return ast::ret(inner, from(start));
    }
    if (!starts_atom()) unexpected({"expression"});
    ExprP f = atom();
    while (starts_atom()) {
      ExprP a = atom();
      f = ast::apply(f, a, from(start));
    }
    return f;
  }

  ExprP atom() {
    DepthGuard g(*this);
    Span start = peek().span;
    const Token& t = peek();
    switch (t.kind) {
      case Tok::Int: {
        BigInt v = decimal(take().text);
        return ast::int_lit(v, from(start));
      }
      case Tok::Str: {
        std::string text = take().text;
        return ast::str_lit(std::move(text), from(start));
      }
      case Tok::Ident: {
        std::string name = take().text;
        return ast::var(std::move(name), from(start));
      }
      case Tok::Keyword:
        if (t.text == "True" || t.text == "False") {
          bool v = take().text == "True";
          return ast::bool_lit(v, from(start));
        }
        if (t.text == "do") return do_block();
        break;
      case Tok::Sym:
        if (t.text == "(") {
          take();
          if (at_sym(")")) {
            take();
            return ast::unit_lit(from(start));
          }
          if (at_sym("-") && peek(1).kind == Tok::Int && (peek(2).kind == Tok::Sym && peek(2).text == ")")) {
            take();
            BigInt v = decimal(take().text);
            take();
            return ast::int_lit(-v, from(start));
          }
          ExprP inner = expr();
          expect_sym(")");
          return inner;
        }
        if (t.text == "[") {
          take();
          std::vector<ExprP> items;
          if (!at_sym("]")) {
            items.push_back(expr());
            while (at_sym(",")) {
              take();
              items.push_back(expr());
            }
          }
          expect_sym("]");
          return ast::list_lit(std::move(items), from(start));
        }
        break;
      default:
        break;
    }
    unexpected({"expression"});
  }

  ExprP do_block() {
    Span start = peek().span;
    expect_kw("do");
    expect_sym("{");
    std::vector<DoStmt> stmts;
    if (at_sym("}")) unexpected({"statement"});
    while (true) {
      stmts.push_back(stmt());
      if (at_sym(";")) {
        take();
        if (at_sym("}")) break;
        continue;
      }
      if (at_sym("}")) break;
      unexpected({"`;`", "`}`"});
    }
    Span close = peek().span;
    expect_sym("}");
    if (stmts.back().kind != DoStmt::Kind::Expr) {
      throw ParseError(ParseError::Kind::Syntax, stmts.back().span.line ? stmts.back().span : close,
                       "the last statement of a do block must be an expression");
    }
    return ast::do_block(std::move(stmts), from(start));
  }

  DoStmt stmt() {
    DepthGuard g(*this);
    Span start = peek().span;
    if (peek().kind == Tok::Ident && at_sym("<-", 1)) {
      std::string name = take().text;
      take();
      ExprP rhs = expr();
      return ast::bind_stmt(name, rhs, from(start));
    }
    if (at_kw("let")) {
      take();
      auto [name, bound] = binding(start);
      if (at_kw("in")) {
        take();
        ExprP body = expr();
        return ast::expr_stmt(ast::let(name, bound, body, from(start)), from(start));
      }
      return ast::let_stmt(name, bound, from(start));
    }
    ExprP e = expr();
    return ast::expr_stmt(e, from(start));
  }

  // ---- types ----------------------------------------------------------------

  TypeP type() {
    DepthGuard g(*this);
    TypeP lhs = btype();
    if (at_sym("->")) {
      take();
      return t_arrow(lhs, type());
    }
    return lhs;
  }

  bool starts_atype() const {
    const auto& t = peek();
    if (t.kind == Tok::Ident) return true;
    return t.kind == Tok::Sym && (t.text == "(" || t.text == "[");
  }

  static bool is_upper(const std::string& s) {
    return !s.empty() && std::isupper(static_cast<unsigned char>(s[0]));
  }

  TypeP btype() {
    const Token& t = peek();
    if (t.kind == Tok::Ident && is_upper(t.text)) {
      const std::string& name = t.text;
      if (reg_.effects.count(name)) {
        take();
        if (!starts_atype()) unexpected({"result type of effect " + name});
        return t_effect(name, atype());
      }
      auto op = reg_.opaques.find(name);
      if (op != reg_.opaques.end() && op->second > 0) {
        take();
        std::vector<TypeP> args;
        for (int i = 0; i < op->second; ++i) {
          if (!starts_atype()) unexpected({"type argument of " + name});
          args.push_back(atype());
        }
        return t_opaque(name, std::move(args));
      }
      if (!is_known_nullary(name)) {
        Span s = t.span;
        take();
        if (starts_atype() && name.size() > 2 && name.compare(name.size() - 2, 2, "IO") == 0) {
          throw ParseError(ParseError::Kind::UnknownEffect, s, "unknown effect `" + name + "`");
        }
        throw ParseError(ParseError::Kind::UnknownOpaqueType, s, "unknown type `" + name + "`");
      }
    }
    TypeP head = atype();
    if (head->kind == Type::Kind::Var && starts_atype()) {
      throw ParseError(ParseError::Kind::Syntax, peek().span,
                       "type variables cannot be applied to arguments");
    }
    return head;
  }

  bool is_known_nullary(const std::string& name) const {
    if (name == "Int" || name == "String" || name == "Bool" || name == "Unit") return true;
    if (reg_.aliases.count(name)) return true;
    auto op = reg_.opaques.find(name);
    return op != reg_.opaques.end() && op->second == 0;
  }

  TypeP atype() {
    DepthGuard g(*this);
    const Token& t = peek();
    if (t.kind == Tok::Sym && t.text == "(") {
      take();
      if (at_sym(")")) {
        take();
        return t_unit();
      }
      TypeP inner = type();
      expect_sym(")");
      return inner;
    }
    if (t.kind == Tok::Sym && t.text == "[") {
      take();
      TypeP inner = type();
      expect_sym("]");
      return t_list(inner);
    }
    if (t.kind == Tok::Ident) {
      Span s = t.span;
      std::string name = take().text;
      if (!is_upper(name)) return t_var(name);
      if (name == "Int" || name == "String" || name == "Bool" || name == "Unit") return t_base(name);
      if (auto a = reg_.aliases.find(name); a != reg_.aliases.end()) return a->second;
      auto op = reg_.opaques.find(name);
      if (op != reg_.opaques.end()) {
        if (op->second == 0) return t_opaque(name);
        throw ParseError(ParseError::Kind::Syntax, s,
                         "type `" + name + "` expects " + std::to_string(op->second) +
                             " argument(s); parenthesize the application");
      }
      if (reg_.effects.count(name)) {
        throw ParseError(ParseError::Kind::Syntax, s,
                         "effect `" + name + "` needs a result type; parenthesize the application");
      }
      throw ParseError(ParseError::Kind::UnknownOpaqueType, s, "unknown type `" + name + "`");
    }
    unexpected({"type"});
  }

  std::vector<Token> toks_;
  const TypeRegistry& reg_;
  std::size_t pos_ = 0;
  std::size_t prev_end_ = 0;
  int depth_ = 0;
};

}  // namespace

ExprP parse_program(std::string_view source, const TypeRegistry& registry) {
  Parser p(Lexer(source).run(), registry);
  return p.program();
}

TypeP parse_type(std::string_view source, const TypeRegistry& registry) {
  Parser p(Lexer(source).run(), registry);
  return p.type_only();
}

}  // namespace lbac

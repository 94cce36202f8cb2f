#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lbac/ast.hpp"
#include "lbac/error.hpp"

namespace lbac {

class ParseError : public Error {
 public:
  enum class Kind { Syntax, UnknownEffect, UnknownOpaqueType };

  ParseError(Kind kind, Span span, std::string message,
             std::vector<std::string> expected = {});

  Kind kind() const { return kind_; }
  const Span& span() const { return span_; }
  const std::vector<std::string>& expected() const { return expected_; }
  const std::string& message() const { return message_; }

 private:
  Kind kind_;
  Span span_;
  std::string message_;
  std::vector<std::string> expected_;
};

/// Parses a program. Accepts LF or CRLF line endings; `--` starts a comment.
ExprP parse_program(std::string_view source, const TypeRegistry& registry);

/// Parses a type term and resolves effect/opaque names against `registry`.
TypeP parse_type(std::string_view source, const TypeRegistry& registry);

/// Concrete syntax for `e` that parses back to a structurally equal tree.
std::string pretty(const ExprP& e);

bool is_reserved_word(std::string_view word);
bool is_identifier(std::string_view word);

struct OperatorInfo {
  int precedence;
  enum class Assoc { Left, Right, None } assoc;
};

/// Binary operators of the surface syntax, or nullopt.
std::optional<OperatorInfo> operator_info(std::string_view op);
const std::vector<std::string>& binary_operators();

}  // namespace lbac

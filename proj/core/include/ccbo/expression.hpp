#pragma once

#include <memory>
#include <string>
#include <string_view>

#include "ccbo/problem.hpp"

namespace ccbo {

/// Arithmetic expression over x1..xd and u1..um, used for problems defined
/// in a config file.
///
/// Grammar: + - * / ^ (right associative, binds tighter than unary minus),
/// parentheses, numbers, `pi`, and the functions sin cos tan exp log sqrt abs
/// pow min max.
class Expression {
 public:
  struct Node;

  // Throws ConfigError with the offending position.
  static Expression parse(std::string_view text, int dim_x, int dim_u);

  double operator()(const Vec& x, const Vec& u) const;
  const std::string& text() const { return text_; }

 private:
  std::shared_ptr<const Node> root_;
  std::string text_;
};

}  // namespace ccbo

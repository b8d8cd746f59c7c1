#include "ccbo/expression.hpp"

#include <cctype>
#include <cmath>
#include <numbers>
#include <vector>

#include <fmt/format.h>

#include "ccbo/errors.hpp"

namespace ccbo {

struct Expression::Node {
  enum class Kind { number, x_var, u_var, negate, add, sub, mul, div, pow, call };
  Kind kind = Kind::number;
  double value = 0.0;
  int index = 0;
  std::string function;
  std::vector<std::shared_ptr<const Node>> args;

  double eval(const Vec& x, const Vec& u) const {
    switch (kind) {
      case Kind::number: return value;
      case Kind::x_var: return x[index];
      case Kind::u_var: return u[index];
      case Kind::negate: return -args[0]->eval(x, u);
      case Kind::add: return args[0]->eval(x, u) + args[1]->eval(x, u);
      case Kind::sub: return args[0]->eval(x, u) - args[1]->eval(x, u);
      case Kind::mul: return args[0]->eval(x, u) * args[1]->eval(x, u);
      case Kind::div: return args[0]->eval(x, u) / args[1]->eval(x, u);
      case Kind::pow: return std::pow(args[0]->eval(x, u), args[1]->eval(x, u));
      case Kind::call: return call(x, u);
    }
    return 0.0;
  }

  double call(const Vec& x, const Vec& u) const {
    const double a = args[0]->eval(x, u);
    if (function == "sin") return std::sin(a);
    if (function == "cos") return std::cos(a);
    if (function == "tan") return std::tan(a);
    if (function == "exp") return std::exp(a);
    if (function == "log") return std::log(a);
    if (function == "sqrt") return std::sqrt(a);
    if (function == "abs") return std::abs(a);
    const double b = args[1]->eval(x, u);
    if (function == "pow") return std::pow(a, b);
    if (function == "min") return std::min(a, b);
    return std::max(a, b);
  }
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;
using Kind = Expression::Node::Kind;

NodePtr make(Kind kind, std::vector<NodePtr> args) {
  auto node = std::make_shared<Expression::Node>();
  node->kind = kind;
  node->args = std::move(args);
  return node;
}

int arity(const std::string& name) {
  if (name == "pow" || name == "min" || name == "max") return 2;
  if (name == "sin" || name == "cos" || name == "tan" || name == "exp" ||
      name == "log" || name == "sqrt" || name == "abs")
    return 1;
  return -1;
}

class Parser {
 public:
  Parser(std::string_view text, int dim_x, int dim_u)
      : text_(text), dim_x_(dim_x), dim_u_(dim_u) {}

  NodePtr parse() {
    auto node = expression();
    skip_space();
    if (pos_ != text_.size()) fail("unexpected character");
    return node;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError(fmt::format("expression '{}': {} at position {}", text_, what, pos_));
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) fail(fmt::format("expected '{}'", c));
  }

  NodePtr expression() {
    auto lhs = term();
    for (;;) {
      if (accept('+')) lhs = make(Kind::add, {lhs, term()});
      else if (accept('-')) lhs = make(Kind::sub, {lhs, term()});
      else return lhs;
    }
  }

  NodePtr term() {
    auto lhs = unary();
    for (;;) {
      if (accept('*')) lhs = make(Kind::mul, {lhs, unary()});
      else if (accept('/')) lhs = make(Kind::div, {lhs, unary()});
      else return lhs;
    }
  }

  NodePtr unary() {
    if (accept('-')) return make(Kind::negate, {unary()});
    if (accept('+')) return unary();
    return power();
  }

  NodePtr power() {
    auto base = primary();
    if (accept('^')) return make(Kind::pow, {base, unary()});
    return base;
  }

  NodePtr primary() {
    skip_space();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    const char c = text_[pos_];
    if (accept('(')) {
      auto inner = expression();
      expect(')');
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c))) return identifier();
    fail("unexpected character");
  }

  NodePtr number() {
    const char* begin = text_.data() + pos_;
    char* end = nullptr;
    const double value = std::strtod(begin, &end);
    if (end == begin) fail("malformed number");
    pos_ += static_cast<std::size_t>(end - begin);
    auto node = std::make_shared<Expression::Node>();
    node->value = value;
    return node;
  }

  NodePtr identifier() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && std::isalnum(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    const std::string name(text_.substr(start, pos_ - start));

    if (name == "pi") {
      auto node = std::make_shared<Expression::Node>();
      node->value = std::numbers::pi;
      return node;
    }
    if ((name[0] == 'x' || name[0] == 'u') && name.size() > 1 &&
        name.find_first_not_of("0123456789", 1) == std::string::npos) {
      const int index = std::stoi(name.substr(1)) - 1;
      const int limit = name[0] == 'x' ? dim_x_ : dim_u_;
      if (index < 0 || index >= limit) {
        pos_ = start;
        fail(fmt::format("variable {} out of range", name));
      }
      auto node = std::make_shared<Expression::Node>();
      node->kind = name[0] == 'x' ? Kind::x_var : Kind::u_var;
      node->index = index;
      return node;
    }
    const int n = arity(name);
    if (n < 0) {
      pos_ = start;
      fail(fmt::format("unknown identifier '{}'", name));
    }
    expect('(');
    std::vector<NodePtr> args{expression()};
    for (int k = 1; k < n; ++k) {
      expect(',');
      args.push_back(expression());
    }
    expect(')');
    auto node = std::make_shared<Expression::Node>();
    node->kind = Kind::call;
    node->function = name;
    node->args = std::move(args);
    return node;
  }

  std::string_view text_;
  int dim_x_;
  int dim_u_;
  std::size_t pos_ = 0;
};

}  // namespace

Expression Expression::parse(std::string_view text, int dim_x, int dim_u) {
  Expression expr;
  expr.root_ = Parser(text, dim_x, dim_u).parse();
  expr.text_ = std::string(text);
  return expr;
}

double Expression::operator()(const Vec& x, const Vec& u) const {
  return root_->eval(x, u);
}

}  // namespace ccbo

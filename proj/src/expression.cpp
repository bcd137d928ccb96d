#include "msbasis/expression.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <memory>
#include <vector>

#include "msbasis/errors.hpp"

namespace msbasis {

namespace {

struct Node {
  virtual ~Node() = default;
  virtual double eval(double x1, double x2) const = 0;
};
using NodePtr = std::shared_ptr<const Node>;

struct Constant : Node {
  double value;
  explicit Constant(double v) : value(v) {}
  double eval(double, double) const override { return value; }
};

struct Variable : Node {
  int which;  // 1 or 2
  explicit Variable(int w) : which(w) {}
  double eval(double x1, double x2) const override { return which == 1 ? x1 : x2; }
};

struct Unary : Node {
  char op;  // '-', 's' (sin), 'c' (cos)
  NodePtr arg;
  Unary(char o, NodePtr a) : op(o), arg(std::move(a)) {}
  double eval(double x1, double x2) const override {
    const double v = arg->eval(x1, x2);
    switch (op) {
      case '-': return -v;
      case 's': return std::sin(v);
      default: return std::cos(v);
    }
  }
};

struct Binary : Node {
  char op;
  NodePtr lhs, rhs;
  Binary(char o, NodePtr l, NodePtr r) : op(o), lhs(std::move(l)), rhs(std::move(r)) {}
  double eval(double x1, double x2) const override {
    const double a = lhs->eval(x1, x2);
    const double b = rhs->eval(x1, x2);
    switch (op) {
      case '+': return a + b;
      case '-': return a - b;
      case '*': return a * b;
      case '/': return a / b;
      default: return std::pow(a, b);
    }
  }
};

class Parser {
 public:
  explicit Parser(const std::string& text) : text_(text) {}

  NodePtr parse() {
    NodePtr root = sum();
    skip_space();
    if (pos_ != text_.size())
      throw ConfigError("unexpected trailing input in expression: '" +
                        text_.substr(pos_) + "'");
    return root;
  }

 private:
  const std::string& text_;
  size_t pos_ = 0;

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_])))
      ++pos_;
  }

  bool consume(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  char peek() {
    skip_space();
    return pos_ < text_.size() ? text_[pos_] : '\0';
  }

  NodePtr sum() {
    NodePtr node = product();
    for (;;) {
      if (consume('+')) node = std::make_shared<Binary>('+', node, product());
      else if (consume('-')) node = std::make_shared<Binary>('-', node, product());
      else return node;
    }
  }

  NodePtr product() {
    NodePtr node = power();
    for (;;) {
      if (consume('*')) node = std::make_shared<Binary>('*', node, power());
      else if (consume('/')) node = std::make_shared<Binary>('/', node, power());
      else return node;
    }
  }

  NodePtr power() {
    NodePtr base = factor();
    if (consume('^')) return std::make_shared<Binary>('^', base, power());
    return base;
  }

  NodePtr factor() {
    if (consume('-')) return std::make_shared<Unary>('-', factor());
    if (consume('+')) return factor();
    const char c = peek();
    if (c == '(') {
      ++pos_;
      NodePtr inner = sum();
      if (!consume(')')) throw ConfigError("missing ')' in expression");
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c))) return identifier();
    throw ConfigError("unexpected character in expression: '" + std::string(1, c) + "'");
  }

  NodePtr number() {
    const char* begin = text_.c_str() + pos_;
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin) throw ConfigError("malformed number in expression");
    pos_ += static_cast<size_t>(end - begin);
    return std::make_shared<Constant>(v);
  }

  NodePtr identifier() {
    const size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
      ++pos_;
    const std::string name = text_.substr(start, pos_ - start);
    if (name == "x1") return std::make_shared<Variable>(1);
    if (name == "x2") return std::make_shared<Variable>(2);
    if (name == "sin" || name == "cos") {
      if (!consume('(')) throw ConfigError(name + " requires parentheses");
      NodePtr arg = sum();
      if (!consume(')')) throw ConfigError("missing ')' after " + name);
      return std::make_shared<Unary>(name == "sin" ? 's' : 'c', arg);
    }
    throw ConfigError("unknown identifier in expression: '" + name + "'");
  }
};

}  // namespace

RhsEvaluator parse_expression(const std::string& text) {
  if (text.empty()) throw ConfigError("empty expression");
  NodePtr root = Parser(text).parse();
  return [root](double x1, double x2) { return root->eval(x1, x2); };
}

RhsEvaluator make_rhs(const RhsSpec& spec) {
  if (spec.kind == "const_minus_one")
    return [](double, double) { return -1.0; };
  if (spec.kind == "poly_x1p4_x2p3")
    return [](double x1, double x2) {
      return x1 * x1 * x1 * x1 - x2 * x2 * x2 + 1.0;
    };
  if (spec.kind == "expression") return parse_expression(spec.expression);
  throw ConfigError("unknown rhs kind: '" + spec.kind + "'");
}

}  // namespace msbasis

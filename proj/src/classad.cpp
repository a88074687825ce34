// Copyright 2026 The Cactus Worm Testbed Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cworm/classad.h"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <set>
#include <sstream>

namespace cworm::classad {

// -- Helpers -------------------------------------------------------------------

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(a[i])) !=
        std::tolower(static_cast<unsigned char>(b[i])))
      return false;
  }
  return true;
}

namespace {

std::string format_real(double d) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), d);
  std::string s(buf, end);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

std::string quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  out += '"';
  return out;
}

}  // namespace

std::string to_string(const Value& v) {
  struct Printer {
    std::string operator()(Undefined) const { return "undefined"; }
    std::string operator()(Error) const { return "error"; }
    std::string operator()(bool b) const { return b ? "true" : "false"; }
    std::string operator()(std::int64_t i) const { return std::to_string(i); }
    std::string operator()(double d) const { return format_real(d); }
    std::string operator()(const std::string& s) const { return quote(s); }
    std::string operator()(const ValueList& l) const {
      std::string out = "{";
      for (std::size_t i = 0; i < l.size(); ++i) {
        if (i) out += ", ";
        out += to_string(l[i]);
      }
      return out + "}";
    }
  };
  return std::visit(Printer{}, v.storage());
}

// -- AST ------------------------------------------------------------------------

Expr make_literal(Value v) { return std::make_shared<const Node>(Node{Literal{std::move(v)}}); }
Expr make_ref(Scope scope, std::string name) {
  return std::make_shared<const Node>(Node{AttributeRef{scope, std::move(name)}});
}
Expr make_unary(UnaryOp op, Expr operand) {
  return std::make_shared<const Node>(Node{Unary{op, std::move(operand)}});
}
Expr make_binary(BinaryOp op, Expr lhs, Expr rhs) {
  return std::make_shared<const Node>(Node{Binary{op, std::move(lhs), std::move(rhs)}});
}
Expr make_call(std::string function, std::vector<Expr> args) {
  return std::make_shared<const Node>(Node{Call{std::move(function), std::move(args)}});
}
Expr make_list(std::vector<Expr> items) {
  return std::make_shared<const Node>(Node{ListLiteral{std::move(items)}});
}

namespace {

bool all_equal(const std::vector<Expr>& a, const std::vector<Expr>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!structurally_equal(a[i], b[i])) return false;
  return true;
}

}  // namespace

bool structurally_equal(const Expr& a, const Expr& b) {
  if (!a || !b) return a == b;
  if (a->kind.index() != b->kind.index()) return false;
  if (auto* x = std::get_if<Literal>(&a->kind)) return x->value == std::get<Literal>(b->kind).value;
  if (auto* x = std::get_if<AttributeRef>(&a->kind)) {
    const auto& y = std::get<AttributeRef>(b->kind);
    return x->scope == y.scope && iequals(x->name, y.name);
  }
  if (auto* x = std::get_if<Unary>(&a->kind)) {
    const auto& y = std::get<Unary>(b->kind);
    return x->op == y.op && structurally_equal(x->operand, y.operand);
  }
  if (auto* x = std::get_if<Binary>(&a->kind)) {
    const auto& y = std::get<Binary>(b->kind);
    return x->op == y.op && structurally_equal(x->lhs, y.lhs) && structurally_equal(x->rhs, y.rhs);
  }
  if (auto* x = std::get_if<Call>(&a->kind)) {
    const auto& y = std::get<Call>(b->kind);
    return iequals(x->function, y.function) && all_equal(x->args, y.args);
  }
  return all_equal(std::get<ListLiteral>(a->kind).items, std::get<ListLiteral>(b->kind).items);
}

// -- ClassAd ----------------------------------------------------------------------

ParseError::ParseError(const std::string& what, int line, int column)
    : std::runtime_error(std::to_string(line) + ":" + std::to_string(column) + ": " + what),
      line_(line),
      column_(column) {}

DuplicateAttributeError::DuplicateAttributeError(const std::string& name, int line, int column)
    : ParseError("duplicate attribute '" + name + "'", line, column), name_(name) {}

void ClassAd::insert(std::string name, Expr expr) {
  std::string key = to_lower(name);
  if (index_.count(key)) throw DuplicateAttributeError(name, 0, 0);
  index_.emplace(std::move(key), entries_.size());
  entries_.emplace_back(std::move(name), std::move(expr));
}

void ClassAd::set(std::string name, Expr expr) {
  auto it = index_.find(to_lower(name));
  if (it != index_.end()) {
    entries_[it->second].second = std::move(expr);
    return;
  }
  insert(std::move(name), std::move(expr));
}

const Expr* ClassAd::find(std::string_view name) const {
  auto it = index_.find(to_lower(name));
  return it == index_.end() ? nullptr : &entries_[it->second].second;
}

bool structurally_equal(const ClassAd& a, const ClassAd& b) {
  if (a.size() != b.size()) return false;
  auto ia = a.begin();
  for (auto ib = b.begin(); ib != b.end(); ++ia, ++ib) {
    if (!iequals(ia->first, ib->first) || !structurally_equal(ia->second, ib->second))
      return false;
  }
  return true;
}

bool is_keyword_attribute(std::string_view name) {
  return iequals(name, kTypeAttr) || iequals(name, kOwnerAttr) ||
         iequals(name, kRequirementsAttr) || iequals(name, kRankAttr);
}

// -- Lexer ------------------------------------------------------------------------

namespace {

enum class Tok {
  kEnd,
  kLBracket,
  kRBracket,
  kLBrace,
  kRBrace,
  kLParen,
  kRParen,
  kSemi,
  kComma,
  kDot,
  kAssign,
  kEq,
  kNe,
  kLt,
  kLe,
  kGt,
  kGe,
  kAnd,
  kOr,
  kNot,
  kPlus,
  kMinus,
  kStar,
  kSlash,
  kIdent,
  kInteger,
  kReal,
  kString,
};

struct Token {
  Tok kind = Tok::kEnd;
  std::string text;
  std::int64_t integer = 0;
  double real = 0.0;
  int line = 1;
  int column = 1;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  Token next() {
    skip_space_and_comments();
    Token t;
    t.line = line_;
    t.column = col_;
    if (pos_ >= src_.size()) return t;
    char c = src_[pos_];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return ident(t);
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && pos_ + 1 < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_ + 1]))))
      return number(t);
    if (c == '"' || c == '\'') return string(t, c);
    advance();
    auto two = [&](char second, Tok yes, Tok no) {
      if (pos_ < src_.size() && src_[pos_] == second) {
        advance();
        t.kind = yes;
      } else {
        t.kind = no;
      }
      return t;
    };
    switch (c) {
      case '[': t.kind = Tok::kLBracket; return t;
      case ']': t.kind = Tok::kRBracket; return t;
      case '{': t.kind = Tok::kLBrace; return t;
      case '}': t.kind = Tok::kRBrace; return t;
      case '(': t.kind = Tok::kLParen; return t;
      case ')': t.kind = Tok::kRParen; return t;
      case ';': t.kind = Tok::kSemi; return t;
      case ',': t.kind = Tok::kComma; return t;
      case '.': t.kind = Tok::kDot; return t;
      case '+': t.kind = Tok::kPlus; return t;
      case '-': t.kind = Tok::kMinus; return t;
      case '*': t.kind = Tok::kStar; return t;
      case '/': t.kind = Tok::kSlash; return t;
      case '=': return two('=', Tok::kEq, Tok::kAssign);
      case '!': return two('=', Tok::kNe, Tok::kNot);
      case '<': return two('=', Tok::kLe, Tok::kLt);
      case '>': return two('=', Tok::kGe, Tok::kGt);
      case '&': return two('&', Tok::kAnd, Tok::kAnd);
      case '|': return two('|', Tok::kOr, Tok::kOr);
      default:
        throw ParseError(std::string("unexpected character '") + c + "'", t.line, t.column);
    }
  }

 private:
  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  void skip_space_and_comments() {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else if (c == '/' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '/') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      } else if (c == '/' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '*') {
        int line = line_, col = col_;
        advance();
        advance();
        while (pos_ + 1 < src_.size() && !(src_[pos_] == '*' && src_[pos_ + 1] == '/')) advance();
        if (pos_ + 1 >= src_.size()) throw ParseError("unterminated comment", line, col);
        advance();
        advance();
      } else {
        break;
      }
    }
  }

  Token ident(Token t) {
    std::size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
      advance();
    t.kind = Tok::kIdent;
    t.text = std::string(src_.substr(start, pos_ - start));
    return t;
  }

  bool digit_at(std::size_t i) const {
    return i < src_.size() && std::isdigit(static_cast<unsigned char>(src_[i]));
  }

  Token number(Token t) {
    std::size_t start = pos_;
    bool is_real = false;
    while (digit_at(pos_)) advance();
    if (pos_ < src_.size() && src_[pos_] == '.') {
      is_real = true;
      advance();
      while (digit_at(pos_)) advance();
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t look = pos_ + 1;
      if (look < src_.size() && (src_[look] == '+' || src_[look] == '-')) ++look;
      if (digit_at(look)) {
        is_real = true;
        while (pos_ < look) advance();
        while (digit_at(pos_)) advance();
      }
    }
    std::string digits(src_.substr(start, pos_ - start));

    std::int64_t multiplier = 1;
    if (pos_ < src_.size()) {
      char s = static_cast<char>(std::toupper(static_cast<unsigned char>(src_[pos_])));
      bool ends_word = pos_ + 1 >= src_.size() ||
                       !(std::isalnum(static_cast<unsigned char>(src_[pos_ + 1])) || src_[pos_ + 1] == '_');
      if (ends_word && (s == 'K' || s == 'M' || s == 'G')) {
        multiplier = s == 'K' ? (1LL << 10) : s == 'M' ? (1LL << 20) : (1LL << 30);
        advance();
      }
    }
    if (pos_ < src_.size() &&
        (std::isalpha(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
      throw ParseError("malformed numeric literal", t.line, t.column);

    if (is_real) {
      double d = std::strtod(digits.c_str(), nullptr) * static_cast<double>(multiplier);
      if (!std::isfinite(d)) throw ParseError("numeric literal out of range", t.line, t.column);
      t.kind = Tok::kReal;
      t.real = d;
    } else {
      std::int64_t v = 0;
      auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v);
      if (ec != std::errc() || __builtin_mul_overflow(v, multiplier, &v))
        throw ParseError("integer literal out of range", t.line, t.column);
      t.kind = Tok::kInteger;
      t.integer = v;
    }
    return t;
  }

  Token string(Token t, char quote_char) {
    advance();
    std::string out;
    while (true) {
      if (pos_ >= src_.size()) throw ParseError("unterminated string", t.line, t.column);
      char c = src_[pos_];
      if (c == quote_char) {
        advance();
        break;
      }
      if (c == '\\') {
        advance();
        if (pos_ >= src_.size()) throw ParseError("unterminated string", t.line, t.column);
        char e = src_[pos_];
        switch (e) {
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          case 'r': out += '\r'; break;
          default: out += e;
        }
        advance();
        continue;
      }
      out += c;
      advance();
    }
    t.kind = Tok::kString;
    t.text = std::move(out);
    return t;
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

// -- Parser -----------------------------------------------------------------------

class Parser {
 public:
  explicit Parser(std::string_view src) : lex_(src) { tok_ = lex_.next(); }

  ClassAd ad() {
    expect(Tok::kLBracket, "'['");
    ClassAd out;
    while (tok_.kind != Tok::kRBracket) {
      if (tok_.kind != Tok::kIdent) fail("expected attribute name");
      Token name = tok_;
      shift();
      expect(Tok::kAssign, "'='");
      Expr value = expression();
      if (out.contains(name.text)) throw DuplicateAttributeError(name.text, name.line, name.column);
      out.insert(name.text, std::move(value));
      if (tok_.kind == Tok::kSemi) {
        shift();
      } else if (tok_.kind != Tok::kRBracket) {
        fail("expected ';' or ']'");
      }
    }
    shift();
    expect(Tok::kEnd, "end of input");
    return out;
  }

  Expr standalone_expression() {
    Expr e = expression();
    expect(Tok::kEnd, "end of input");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(what, tok_.line, tok_.column);
  }
  void shift() { tok_ = lex_.next(); }
  void expect(Tok kind, const char* what) {
    if (tok_.kind != kind) fail(std::string("expected ") + what);
    shift();
  }

  Expr expression() { return or_expr(); }

  Expr or_expr() {
    Expr lhs = and_expr();
    while (tok_.kind == Tok::kOr) {
      shift();
      lhs = make_binary(BinaryOp::kOr, lhs, and_expr());
    }
    return lhs;
  }

  Expr and_expr() {
    Expr lhs = equality();
    while (tok_.kind == Tok::kAnd) {
      shift();
      lhs = make_binary(BinaryOp::kAnd, lhs, equality());
    }
    return lhs;
  }

  Expr equality() {
    Expr lhs = relational();
    while (tok_.kind == Tok::kEq || tok_.kind == Tok::kNe) {
      BinaryOp op = tok_.kind == Tok::kEq ? BinaryOp::kEq : BinaryOp::kNe;
      shift();
      lhs = make_binary(op, lhs, relational());
    }
    return lhs;
  }

  Expr relational() {
    Expr lhs = additive();
    while (true) {
      BinaryOp op;
      switch (tok_.kind) {
        case Tok::kLt: op = BinaryOp::kLt; break;
        case Tok::kLe: op = BinaryOp::kLe; break;
        case Tok::kGt: op = BinaryOp::kGt; break;
        case Tok::kGe: op = BinaryOp::kGe; break;
        default: return lhs;
      }
      shift();
      lhs = make_binary(op, lhs, additive());
    }
  }

  Expr additive() {
    Expr lhs = multiplicative();
    while (tok_.kind == Tok::kPlus || tok_.kind == Tok::kMinus) {
      BinaryOp op = tok_.kind == Tok::kPlus ? BinaryOp::kAdd : BinaryOp::kSub;
      shift();
      lhs = make_binary(op, lhs, multiplicative());
    }
    return lhs;
  }

  Expr multiplicative() {
    Expr lhs = unary();
    while (tok_.kind == Tok::kStar || tok_.kind == Tok::kSlash) {
      BinaryOp op = tok_.kind == Tok::kStar ? BinaryOp::kMul : BinaryOp::kDiv;
      shift();
      lhs = make_binary(op, lhs, unary());
    }
    return lhs;
  }

  Expr unary() {
    if (tok_.kind == Tok::kNot) {
      shift();
      return make_unary(UnaryOp::kNot, unary());
    }
    if (tok_.kind == Tok::kPlus) {
      shift();
      return unary();
    }
    if (tok_.kind == Tok::kMinus) {
      shift();
      // A minus sign directly on a numeric token is part of the literal.
      if (tok_.kind == Tok::kInteger) {
        std::int64_t v = tok_.integer;
        shift();
        return make_literal(Value(-v));
      }
      if (tok_.kind == Tok::kReal) {
        double v = tok_.real;
        shift();
        return make_literal(Value(-v));
      }
      return make_unary(UnaryOp::kNegate, unary());
    }
    return primary();
  }

  Expr primary() {
    Token t = tok_;
    switch (t.kind) {
      case Tok::kInteger:
        shift();
        return make_literal(Value(t.integer));
      case Tok::kReal:
        shift();
        return make_literal(Value(t.real));
      case Tok::kString:
        shift();
        return make_literal(Value(t.text));
      case Tok::kLParen: {
        shift();
        Expr inner = expression();
        expect(Tok::kRParen, "')'");
        return inner;
      }
      case Tok::kLBrace: {
        shift();
        std::vector<Expr> items;
        if (tok_.kind != Tok::kRBrace) {
          items.push_back(expression());
          while (tok_.kind == Tok::kComma) {
            shift();
            items.push_back(expression());
          }
        }
        expect(Tok::kRBrace, "'}'");
        return make_list(std::move(items));
      }
      case Tok::kIdent:
        return identifier();
      default:
        fail("expected expression");
    }
  }

  Expr identifier() {
    Token t = tok_;
    shift();
    if (iequals(t.text, "true")) return make_literal(Value(true));
    if (iequals(t.text, "false")) return make_literal(Value(false));
    if (iequals(t.text, "undefined")) return make_literal(Value(Undefined{}));
    if (iequals(t.text, "error")) return make_literal(Value(Error{}));
    if ((iequals(t.text, "other") || iequals(t.text, "self")) && tok_.kind == Tok::kDot) {
      Scope scope = iequals(t.text, "other") ? Scope::kOther : Scope::kSelf;
      shift();
      if (tok_.kind != Tok::kIdent) fail("expected attribute name after '.'");
      std::string name = tok_.text;
      shift();
      return make_ref(scope, std::move(name));
    }
    if (tok_.kind == Tok::kLParen) {
      shift();
      std::vector<Expr> args;
      if (tok_.kind != Tok::kRParen) {
        args.push_back(expression());
        while (tok_.kind == Tok::kComma) {
          shift();
          args.push_back(expression());
        }
      }
      expect(Tok::kRParen, "')'");
      return make_call(t.text, std::move(args));
    }
    return make_ref(Scope::kBare, t.text);
  }

  Lexer lex_;
  Token tok_;
};

}  // namespace

ClassAd parse_ad(std::string_view text) { return Parser(text).ad(); }

Expr parse_expression(std::string_view text) { return Parser(text).standalone_expression(); }

// -- Printer ----------------------------------------------------------------------

namespace {

constexpr int kUnaryPrecedence = 7;
constexpr int kPrimaryPrecedence = 8;

int precedence(BinaryOp op) {
  switch (op) {
    case BinaryOp::kOr: return 1;
    case BinaryOp::kAnd: return 2;
    case BinaryOp::kEq:
    case BinaryOp::kNe: return 3;
    case BinaryOp::kLt:
    case BinaryOp::kLe:
    case BinaryOp::kGt:
    case BinaryOp::kGe: return 4;
    case BinaryOp::kAdd:
    case BinaryOp::kSub: return 5;
    case BinaryOp::kMul:
    case BinaryOp::kDiv: return 6;
  }
  return 0;
}

const char* spelling(BinaryOp op) {
  switch (op) {
    case BinaryOp::kOr: return "||";
    case BinaryOp::kAnd: return "&&";
    case BinaryOp::kEq: return "==";
    case BinaryOp::kNe: return "!=";
    case BinaryOp::kLt: return "<";
    case BinaryOp::kLe: return "<=";
    case BinaryOp::kGt: return ">";
    case BinaryOp::kGe: return ">=";
    case BinaryOp::kAdd: return "+";
    case BinaryOp::kSub: return "-";
    case BinaryOp::kMul: return "*";
    case BinaryOp::kDiv: return "/";
  }
  return "?";
}

int precedence(const Expr& e) {
  if (auto* b = std::get_if<Binary>(&e->kind)) return precedence(b->op);
  if (std::holds_alternative<Unary>(e->kind)) return kUnaryPrecedence;
  if (auto* l = std::get_if<Literal>(&e->kind)) {
    // "-5" re-parses as a folded literal at unary level.
    if (l->value.is_number() && l->value.as_number() < 0) return kUnaryPrecedence;
    if (l->value.is_real() && std::signbit(l->value.as_real())) return kUnaryPrecedence;
  }
  return kPrimaryPrecedence;
}

void print(const Expr& e, std::string& out);

void print_wrapped(const Expr& e, bool parens, std::string& out) {
  if (parens) out += '(';
  print(e, out);
  if (parens) out += ')';
}

void print_list(const std::vector<Expr>& items, std::string& out) {
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ", ";
    print(items[i], out);
  }
}

void print(const Expr& e, std::string& out) {
  if (auto* l = std::get_if<Literal>(&e->kind)) {
    out += to_string(l->value);
  } else if (auto* r = std::get_if<AttributeRef>(&e->kind)) {
    if (r->scope == Scope::kSelf) out += "self.";
    if (r->scope == Scope::kOther) out += "other.";
    out += r->name;
  } else if (auto* u = std::get_if<Unary>(&e->kind)) {
    out += u->op == UnaryOp::kNot ? "!" : "-";
    bool numeric_literal = false;
    if (auto* lit = std::get_if<Literal>(&u->operand->kind)) numeric_literal = lit->value.is_number();
    bool parens = precedence(u->operand) < kUnaryPrecedence ||
                  (u->op == UnaryOp::kNegate && (numeric_literal || std::holds_alternative<Unary>(u->operand->kind)));
    print_wrapped(u->operand, parens, out);
  } else if (auto* b = std::get_if<Binary>(&e->kind)) {
    int p = precedence(b->op);
    print_wrapped(b->lhs, precedence(b->lhs) < p, out);
    out += ' ';
    out += spelling(b->op);
    out += ' ';
    print_wrapped(b->rhs, precedence(b->rhs) <= p, out);
  } else if (auto* c = std::get_if<Call>(&e->kind)) {
    out += c->function;
    out += '(';
    print_list(c->args, out);
    out += ')';
  } else {
    out += '{';
    print_list(std::get<ListLiteral>(e->kind).items, out);
    out += '}';
  }
}

}  // namespace

std::string print_expression(const Expr& expr) {
  std::string out;
  print(expr, out);
  return out;
}

std::string print_ad(const ClassAd& ad) {
  std::string out = "[\n";
  for (const auto& [name, expr] : ad) {
    out += "  ";
    out += name;
    out += " = ";
    print(expr, out);
    out += ";\n";
  }
  out += "]\n";
  return out;
}

// -- Evaluation -------------------------------------------------------------------

namespace {

constexpr int kMaxDepth = 512;

bool loose_equal(const Value& a, const Value& b) {
  if (a.is_string() && b.is_string()) return iequals(a.as_string(), b.as_string());
  if (a.is_integer() && b.is_integer()) return a.as_integer() == b.as_integer();
  if (a.is_number() && b.is_number()) return a.as_number() == b.as_number();
  if (a.is_bool() && b.is_bool()) return a.as_bool() == b.as_bool();
  return false;
}

Value finite_or_error(double d) { return std::isfinite(d) ? Value(d) : Value(Error{}); }

class Evaluator {
 public:
  Value eval(const Expr& e, const ClassAd& self, const ClassAd& other) {
    if (!e || ++depth_ > kMaxDepth) {
      --depth_;
      return Error{};
    }
    Value v = dispatch(e, self, other);
    --depth_;
    return v;
  }

 private:
  Value dispatch(const Expr& e, const ClassAd& self, const ClassAd& other) {
    if (auto* l = std::get_if<Literal>(&e->kind)) return l->value;
    if (auto* r = std::get_if<AttributeRef>(&e->kind)) {
      if (r->scope == Scope::kOther) return lookup(r->name, other, self);
      return lookup(r->name, self, other);
    }
    if (auto* u = std::get_if<Unary>(&e->kind)) return unary(u->op, eval(u->operand, self, other));
    if (auto* b = std::get_if<Binary>(&e->kind)) return binary(*b, self, other);
    if (auto* c = std::get_if<Call>(&e->kind)) return call(*c, self, other);
    ValueList items;
    for (const auto& item : std::get<ListLiteral>(e->kind).items) items.push_back(eval(item, self, other));
    return items;
  }

  Value lookup(const std::string& name, const ClassAd& ad, const ClassAd& peer) {
    const Expr* expr = ad.find(name);
    if (!expr) return Undefined{};
    auto key = std::make_pair(&ad, to_lower(name));
    if (active_.count(key)) return Error{};
    active_.insert(key);
    Value v = eval(*expr, ad, peer);
    active_.erase(key);
    return v;
  }

  static Value unary(UnaryOp op, const Value& v) {
    if (v.is_undefined() || v.is_error()) return v;
    if (op == UnaryOp::kNot) return v.is_bool() ? Value(!v.as_bool()) : Value(Error{});
    if (v.is_integer()) {
      if (v.as_integer() == std::numeric_limits<std::int64_t>::min()) return Error{};
      return -v.as_integer();
    }
    if (v.is_real()) return -v.as_real();
    return Error{};
  }

  Value binary(const Binary& b, const ClassAd& self, const ClassAd& other) {
    if (b.op == BinaryOp::kAnd || b.op == BinaryOp::kOr) return logical(b, self, other);
    Value lhs = eval(b.lhs, self, other);
    Value rhs = eval(b.rhs, self, other);
    if (lhs.is_error() || rhs.is_error()) return Error{};
    if (lhs.is_undefined() || rhs.is_undefined()) return Undefined{};
    switch (b.op) {
      case BinaryOp::kAdd:
      case BinaryOp::kSub:
      case BinaryOp::kMul:
      case BinaryOp::kDiv: return arithmetic(b.op, lhs, rhs);
      default: return compare(b.op, lhs, rhs);
    }
  }

  // Short-circuits left to right: false && x is false, true || x is true.
  Value logical(const Binary& b, const ClassAd& self, const ClassAd& other) {
    bool is_and = b.op == BinaryOp::kAnd;
    Value lhs = eval(b.lhs, self, other);
    if (lhs.is_error()) return Error{};
    if (lhs.is_bool()) {
      if (lhs.as_bool() != is_and) return lhs.as_bool();
    } else if (!lhs.is_undefined()) {
      return Error{};
    }
    Value rhs = eval(b.rhs, self, other);
    if (rhs.is_error()) return Error{};
    if (rhs.is_undefined()) return Undefined{};
    if (!rhs.is_bool()) return Error{};
    if (lhs.is_undefined()) return rhs.as_bool() == is_and ? Value(Undefined{}) : rhs;
    return rhs;
  }

  static Value arithmetic(BinaryOp op, const Value& lhs, const Value& rhs) {
    if (!lhs.is_number() || !rhs.is_number()) return Error{};
    if (op == BinaryOp::kDiv) {
      double d = rhs.as_number();
      if (d == 0.0) return Error{};
      return finite_or_error(lhs.as_number() / d);
    }
    if (lhs.is_integer() && rhs.is_integer()) {
      std::int64_t a = lhs.as_integer(), b = rhs.as_integer(), r = 0;
      bool overflow = op == BinaryOp::kAdd   ? __builtin_add_overflow(a, b, &r)
                      : op == BinaryOp::kSub ? __builtin_sub_overflow(a, b, &r)
                                             : __builtin_mul_overflow(a, b, &r);
      return overflow ? Value(Error{}) : Value(r);
    }
    double a = lhs.as_number(), b = rhs.as_number();
    double r = op == BinaryOp::kAdd ? a + b : op == BinaryOp::kSub ? a - b : a * b;
    return finite_or_error(r);
  }

  static Value compare(BinaryOp op, const Value& lhs, const Value& rhs) {
    int order = 0;
    if (lhs.is_integer() && rhs.is_integer()) {
      order = lhs.as_integer() < rhs.as_integer() ? -1 : lhs.as_integer() > rhs.as_integer();
    } else if (lhs.is_number() && rhs.is_number()) {
      double a = lhs.as_number(), b = rhs.as_number();
      order = a < b ? -1 : a > b;
    } else if (lhs.is_string() && rhs.is_string()) {
      int c = to_lower(lhs.as_string()).compare(to_lower(rhs.as_string()));
      order = c < 0 ? -1 : c > 0;
    } else if (lhs.is_bool() && rhs.is_bool()) {
      if (op != BinaryOp::kEq && op != BinaryOp::kNe) return Error{};
      order = lhs.as_bool() == rhs.as_bool() ? 0 : 1;
    } else {
      return Error{};
    }
    switch (op) {
      case BinaryOp::kEq: return order == 0;
      case BinaryOp::kNe: return order != 0;
      case BinaryOp::kLt: return order < 0;
      case BinaryOp::kLe: return order <= 0;
      case BinaryOp::kGt: return order > 0;
      case BinaryOp::kGe: return order >= 0;
      default: return Error{};
    }
  }

  Value call(const Call& c, const ClassAd& self, const ClassAd& other) {
    std::vector<Value> args;
    for (const auto& a : c.args) args.push_back(eval(a, self, other));
    if (iequals(c.function, "Include")) {
      if (args.size() != 2) return Error{};
      if (args[0].is_error() || args[1].is_error()) return Error{};
      if (args[0].is_undefined() || args[1].is_undefined()) return Undefined{};
      if (!args[0].is_list() || !args[1].is_list()) return Error{};
      const ValueList& haystack = args[0].as_list();
      for (const Value& needle : args[1].as_list()) {
        bool found = std::any_of(haystack.begin(), haystack.end(),
                                 [&](const Value& h) { return loose_equal(h, needle); });
        if (!found) return false;
      }
      return true;
    }
    return Error{};
  }

  int depth_ = 0;
  std::set<std::pair<const ClassAd*, std::string>> active_;
};

}  // namespace

Value evaluate(const Expr& expr, const ClassAd& self_ad, const ClassAd& other_ad) {
  return Evaluator().eval(expr, self_ad, other_ad);
}

Value evaluate_attribute(std::string_view name, const ClassAd& self_ad, const ClassAd& other_ad) {
  const Expr* expr = self_ad.find(name);
  if (!expr) return Undefined{};
  Value v = evaluate(*expr, self_ad, other_ad);
  if (v.is_string() && (iequals(name, kRequirementsAttr) || iequals(name, kRankAttr))) {
    try {
      return evaluate(parse_expression(v.as_string()), self_ad, other_ad);
    } catch (const ParseError&) {
      return Error{};
    }
  }
  return v;
}

bool check_requirements(const ClassAd& request, const ClassAd& resource) {
  if (!request.contains(kRequirementsAttr))
    throw std::invalid_argument("request ad has no requirements attribute");
  Value mine = evaluate_attribute(kRequirementsAttr, request, resource);
  if (!mine.is_bool() || !mine.as_bool()) return false;
  if (resource.contains(kRequirementsAttr)) {
    Value theirs = evaluate_attribute(kRequirementsAttr, resource, request);
    if (!theirs.is_bool() || !theirs.as_bool()) return false;
  }
  return true;
}

double compute_rank(const ClassAd& request, const ClassAd& resource) {
  Value v = evaluate_attribute(kRankAttr, request, resource);
  if (!v.is_number()) return 0.0;
  double r = v.as_number();
  return std::isfinite(r) ? r : 0.0;
}

std::optional<MatchResult> match(const ClassAd& request, const ClassAd& resource,
                                 std::string resource_name) {
  if (!check_requirements(request, resource)) return std::nullopt;
  return MatchResult{true, compute_rank(request, resource), std::move(resource_name)};
}

}  // namespace cworm::classad

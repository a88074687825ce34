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

// A small ClassAd dialect: attribute=expression records that are matched
// pairwise, with three-valued evaluation (true/false/undefined) plus an
// error value. Ads and expressions are immutable once built.

#ifndef CWORM_CLASSAD_H_
#define CWORM_CLASSAD_H_

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

namespace cworm::classad {

struct Undefined {
  friend bool operator==(Undefined, Undefined) { return true; }
};
struct Error {
  friend bool operator==(Error, Error) { return true; }
};

class Value;
using ValueList = std::vector<Value>;

// Result of evaluating an expression. Integers are 64-bit (counts, bytes).
class Value {
 public:
  using Storage = std::variant<Undefined, Error, bool, std::int64_t, double,
                               std::string, ValueList>;

  Value() : v_(Undefined{}) {}
  Value(Undefined u) : v_(u) {}
  Value(Error e) : v_(e) {}
  Value(bool b) : v_(b) {}
  Value(std::int64_t i) : v_(i) {}
  Value(int i) : v_(static_cast<std::int64_t>(i)) {}
  Value(double d) : v_(d) {}
  Value(std::string s) : v_(std::move(s)) {}
  Value(const char* s) : v_(std::string(s)) {}
  Value(ValueList l) : v_(std::move(l)) {}

  bool is_undefined() const { return std::holds_alternative<Undefined>(v_); }
  bool is_error() const { return std::holds_alternative<Error>(v_); }
  bool is_bool() const { return std::holds_alternative<bool>(v_); }
  bool is_integer() const { return std::holds_alternative<std::int64_t>(v_); }
  bool is_real() const { return std::holds_alternative<double>(v_); }
  bool is_number() const { return is_integer() || is_real(); }
  bool is_string() const { return std::holds_alternative<std::string>(v_); }
  bool is_list() const { return std::holds_alternative<ValueList>(v_); }

  bool as_bool() const { return std::get<bool>(v_); }
  std::int64_t as_integer() const { return std::get<std::int64_t>(v_); }
  double as_real() const { return std::get<double>(v_); }
  // Integer or real, widened to double.
  double as_number() const {
    return is_integer() ? static_cast<double>(as_integer()) : as_real();
  }
  const std::string& as_string() const { return std::get<std::string>(v_); }
  const ValueList& as_list() const { return std::get<ValueList>(v_); }

  const Storage& storage() const { return v_; }

  // Strict structural identity (Integer 1 != Real 1.0, string case matters).
  friend bool operator==(const Value& a, const Value& b) { return a.v_ == b.v_; }

 private:
  Storage v_;
};

std::string to_string(const Value& v);

enum class Scope { kBare, kSelf, kOther };

enum class UnaryOp { kNot, kNegate };

enum class BinaryOp {
  kOr,
  kAnd,
  kEq,
  kNe,
  kLt,
  kLe,
  kGt,
  kGe,
  kAdd,
  kSub,
  kMul,
  kDiv,
};

struct Node;
using Expr = std::shared_ptr<const Node>;

struct Literal {
  Value value;
};
struct AttributeRef {
  Scope scope;
  std::string name;
};
struct Unary {
  UnaryOp op;
  Expr operand;
};
struct Binary {
  BinaryOp op;
  Expr lhs;
  Expr rhs;
};
struct Call {
  std::string function;
  std::vector<Expr> args;
};
struct ListLiteral {
  std::vector<Expr> items;
};

struct Node {
  std::variant<Literal, AttributeRef, Unary, Binary, Call, ListLiteral> kind;
};

// Builders.
Expr make_literal(Value v);
Expr make_ref(Scope scope, std::string name);
Expr make_unary(UnaryOp op, Expr operand);
Expr make_binary(BinaryOp op, Expr lhs, Expr rhs);
Expr make_call(std::string function, std::vector<Expr> args);
Expr make_list(std::vector<Expr> items);

// Deep structural comparison. Attribute names compare case-insensitively.
bool structurally_equal(const Expr& a, const Expr& b);

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, int line, int column);
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

class DuplicateAttributeError : public ParseError {
 public:
  DuplicateAttributeError(const std::string& name, int line, int column);
  const std::string& attribute() const { return name_; }

 private:
  std::string name_;
};

// Ordered attribute -> expression map. Lookup is case-insensitive.
class ClassAd {
 public:
  using Entry = std::pair<std::string, Expr>;

  ClassAd() = default;

  // Throws DuplicateAttributeError (line/column 0) if the name exists.
  void insert(std::string name, Expr expr);
  // Inserts or replaces in place, keeping the original position.
  void set(std::string name, Expr expr);
  void set(std::string name, Value value) { set(std::move(name), make_literal(std::move(value))); }

  const Expr* find(std::string_view name) const;
  bool contains(std::string_view name) const { return find(name) != nullptr; }

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;  // lowercased name
};

bool structurally_equal(const ClassAd& a, const ClassAd& b);

// Well-known attribute names.
inline constexpr std::string_view kTypeAttr = "Type";
inline constexpr std::string_view kOwnerAttr = "Owner";
inline constexpr std::string_view kRequirementsAttr = "requirements";
inline constexpr std::string_view kRankAttr = "rank";

bool is_keyword_attribute(std::string_view name);

// Grammar: '[' (name '=' expr ';')* ']'. Strings take either quote style,
// '&'/'|' alias '&&'/'||', lists are '{...}', integer literals accept a
// K/M/G binary suffix.
ClassAd parse_ad(std::string_view text);
Expr parse_expression(std::string_view text);

// Canonical form: one attribute per line, double-quoted strings, &&/||.
std::string print_ad(const ClassAd& ad);
std::string print_expression(const Expr& expr);

// Evaluates `expr` with bare and self.x names resolved in `self_ad` and
// other.x in `other_ad`. Never throws; type errors and reference cycles
// produce Error, missing names produce Undefined.
Value evaluate(const Expr& expr, const ClassAd& self_ad,
               const ClassAd& other_ad);

// Evaluates a named attribute of `self_ad`. A string-valued
// requirements/rank attribute is parsed and evaluated as an expression,
// since ads in the wild quote them.
Value evaluate_attribute(std::string_view name, const ClassAd& self_ad,
                         const ClassAd& other_ad);

struct MatchResult {
  bool matched = false;
  double rank = 0.0;
  std::string resource_name;
};

// Throws std::invalid_argument if the request has no requirements.
bool check_requirements(const ClassAd& request, const ClassAd& resource);

// Rank of `resource` from the request's point of view; 0.0 when the rank is
// missing, undefined, an error or not a finite number.
double compute_rank(const ClassAd& request, const ClassAd& resource);

// check_requirements + compute_rank; nullopt when requirements fail.
std::optional<MatchResult> match(const ClassAd& request,
                                 const ClassAd& resource,
                                 std::string resource_name);

// Case-insensitive ASCII helpers shared with the other modules.
std::string to_lower(std::string_view s);
bool iequals(std::string_view a, std::string_view b);

}  // namespace cworm::classad

#endif  // CWORM_CLASSAD_H_

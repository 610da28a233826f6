#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace dpt {

// ---------------------------------------------------------------------------
// Static types

enum class Tag { Bool, Int, Real, Unit, Pair, List, Map, Dist };

struct Type;
using TypePtr = std::shared_ptr<const Type>;

struct Type {
  Tag tag;
  TypePtr fst;  // Pair first / List element / Map key / Dist payload
  TypePtr snd;  // Pair second / Map value
};

TypePtr boolT();
TypePtr intT();
TypePtr realT();
TypePtr unitT();
TypePtr pairT(TypePtr a, TypePtr b);
TypePtr listT(TypePtr elem);
TypePtr mapT(TypePtr key, TypePtr val);
TypePtr distT(TypePtr payload);

bool typeEq(const TypePtr& a, const TypePtr& b);
std::string typeName(const TypePtr& t);

struct TypeMismatch : std::runtime_error {
  explicit TypeMismatch(const std::string& what) : std::runtime_error(what) {}
};

// Runtime failure of a partial operation (head of empty list, division by
// zero, exhausted injected samples). Raised by both interpreters.
struct EvalError : std::runtime_error {
  explicit EvalError(const std::string& what) : std::runtime_error(what) {}
};

// ---------------------------------------------------------------------------
// Distribution provenance
//
// Every real value that (transitively) depends on a Laplace sample carries a
// provenance tree: Lap leaves identify the originating call by its per-run
// serial number, Const leaves hold literal values, interior nodes mirror the
// arithmetic operators that combined them.

struct Prov;
using ProvPtr = std::shared_ptr<const Prov>;

struct Prov {
  enum class K { Const, Lap, Add, Sub, Mul, Div } k;
  double cval = 0.0;   // Const
  int callIndex = -1;  // Lap: per-run serial number of the sampling call
  double width = 0.0;  // Lap
  ProvPtr center;      // Lap: provenance of the center argument
  ProvPtr l, r;        // interior nodes
};

ProvPtr provConst(double v);
ProvPtr provLap(int callIndex, double width, ProvPtr center);
ProvPtr provOp(Prov::K op, ProvPtr l, ProvPtr r);
bool provMentionsSample(const ProvPtr& p);

// ---------------------------------------------------------------------------
// Runtime values

struct Value;

struct RealV {
  double v = 0.0;
  ProvPtr prov;  // null means a plain constant (implicit Const provenance)
};

using PairV = std::shared_ptr<std::pair<Value, Value>>;
using ListV = std::shared_ptr<std::vector<Value>>;

struct ValueLess {
  bool operator()(const Value& a, const Value& b) const;
};
using MapV = std::shared_ptr<std::map<Value, Value, ValueLess>>;

struct Value {
  std::variant<std::monostate, bool, int64_t, RealV, PairV, ListV, MapV> v;

  Value() : v(std::monostate{}) {}

  bool isUnit() const { return std::holds_alternative<std::monostate>(v); }
  bool isBool() const { return std::holds_alternative<bool>(v); }
  bool isInt() const { return std::holds_alternative<int64_t>(v); }
  bool isReal() const { return std::holds_alternative<RealV>(v); }
  bool isPair() const { return std::holds_alternative<PairV>(v); }
  bool isList() const { return std::holds_alternative<ListV>(v); }
  bool isMap() const { return std::holds_alternative<MapV>(v); }

  bool asBool() const { return std::get<bool>(v); }
  int64_t asInt() const { return std::get<int64_t>(v); }
  const RealV& asReal() const { return std::get<RealV>(v); }
  const PairV& asPair() const { return std::get<PairV>(v); }
  const ListV& asList() const { return std::get<ListV>(v); }
  const MapV& asMap() const { return std::get<MapV>(v); }
};

Value unitV();
Value boolV(bool b);
Value intV(int64_t i);
Value realV(double d);
Value realV(double d, ProvPtr prov);
Value pairV(Value a, Value b);
Value listV(std::vector<Value> xs);
Value mapV(std::map<Value, Value, ValueLess> m);

// Ordering and equality ignore provenance; they compare payloads only.
bool valueEq(const Value& a, const Value& b);
bool valueLess(const Value& a, const Value& b);
bool containsSampledReal(const Value& v);
Value stripProvenance(const Value& v);
std::string showValue(const Value& v);

// ---------------------------------------------------------------------------
// Expressions
//
// The AST is first order: binders carry explicit variable ids and body
// expressions. The smart constructors below provide a lambda-based building
// style and allocate fresh variable ids internally, so program builders never
// handle ids directly.

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

// Host-side loop metric used by the symbolic engine's unroll cutoff. Must be
// monotonically nondecreasing along any concrete execution of the loop.
using LoopMetric = std::function<int64_t(const Value&)>;

enum class Op {
  Literal,
  Var,
  Add,
  Sub,
  Mul,
  Div,
  Lt,
  Le,
  Eq,
  Not,
  And,
  Or,
  Cond,     // value-level conditional
  If,       // distribution-level conditional
  Laplace,
  Return,
  Bind,
  Sequence,
  Loop,
  Assert,
  Abort,
  Nil,
  Cons,
  Snoc,
  Uncons,
  Head,
  MkPair,
  Fst,
  SndOp,
  MapEmpty,
  MapInsert,
  MapLookup,
  IsNil,
  Length,
};

struct Expr {
  Op op;
  TypePtr type;

  Value lit;          // Literal
  int varId = -1;     // Var; Bind/Loop bound variable ids
  double width = 0;   // Laplace
  std::string msg;    // Abort

  ExprPtr a, b, c;    // children (If: a=cond b=then c=else; Bind: a=dist b=body)

  int loopCondVar = -1;   // Loop: variable bound in the condition body
  ExprPtr loopCond;       // Loop: condition body (a holds init, b holds body)
  LoopMetric metric;      // Loop: optional cutoff metric
};

// --- literals and variables
ExprPtr lit(bool b);
ExprPtr lit(int64_t i);
ExprPtr lit(int i);
ExprPtr lit(double d);
ExprPtr litv(Value v, TypePtr t);
ExprPtr var(int id, TypePtr t);

// --- numerics and logic
ExprPtr add(ExprPtr a, ExprPtr b);
ExprPtr sub(ExprPtr a, ExprPtr b);
ExprPtr mul(ExprPtr a, ExprPtr b);
ExprPtr div_(ExprPtr a, ExprPtr b);
ExprPtr lt(ExprPtr a, ExprPtr b);
ExprPtr le(ExprPtr a, ExprPtr b);
ExprPtr gt(ExprPtr a, ExprPtr b);
ExprPtr ge(ExprPtr a, ExprPtr b);
ExprPtr eq(ExprPtr a, ExprPtr b);
ExprPtr not_(ExprPtr a);
ExprPtr and_(ExprPtr a, ExprPtr b);
ExprPtr or_(ExprPtr a, ExprPtr b);
ExprPtr cond(ExprPtr c, ExprPtr a, ExprPtr b);

// --- distributions
ExprPtr if_(ExprPtr c, ExprPtr thenD, ExprPtr elseD);
ExprPtr lap(ExprPtr center, double width);
ExprPtr ret(ExprPtr e);
ExprPtr bindM(ExprPtr dist, const std::function<ExprPtr(ExprPtr)>& k);
ExprPtr seq(ExprPtr first, ExprPtr rest);
ExprPtr assert_(ExprPtr b);
ExprPtr abort_(const std::string& msg, TypePtr distPayload);
ExprPtr loop(ExprPtr init, const std::function<ExprPtr(ExprPtr)>& condFn,
             const std::function<ExprPtr(ExprPtr)>& bodyFn,
             LoopMetric metric = nullptr);

// --- containers
ExprPtr nil(TypePtr elem);
ExprPtr cons(ExprPtr head, ExprPtr tail);
ExprPtr snoc(ExprPtr tail, ExprPtr head);
ExprPtr uncons(ExprPtr list);  // list t -> list (pair t (list t)); empty on Nil
ExprPtr head(ExprPtr list);    // partial: error on empty list
ExprPtr mkPair(ExprPtr a, ExprPtr b);
ExprPtr fst(ExprPtr p);
ExprPtr snd(ExprPtr p);
ExprPtr mapEmpty(TypePtr key, TypePtr val);
ExprPtr mapInsert(ExprPtr m, ExprPtr key, ExprPtr val);
ExprPtr mapLookup(ExprPtr m, ExprPtr key);  // map k v -> list v (empty if absent)
ExprPtr isNil(ExprPtr list);
ExprPtr length(ExprPtr listOrMap);
ExprPtr unit();

// ---------------------------------------------------------------------------
// Static analyses

// Re-walks the expression and verifies every node; idempotent. Throws
// TypeMismatch on the first ill-typed node.
TypePtr typecheck(const ExprPtr& e);

// Static count of Laplace sampling nodes. nullopt means a Loop encloses a
// Laplace call, so no static bound exists.
std::optional<int> countLaplaceNodes(const ExprPtr& e);

// Structural equality (testing aid only; bucketing never uses it).
bool exprEq(const ExprPtr& a, const ExprPtr& b);

// Loop nodes numbered by AST preorder position. Two programs built by the
// same builder on different inputs assign matching ordinals, which is what
// lets loop statistics recorded on one instance drive the other.
std::map<const Expr*, int> loopOrdinals(const ExprPtr& e);

// Debug pretty-printer; no stability contract.
std::string showExpr(const ExprPtr& e);

int freshVarId();

}  // namespace dpt

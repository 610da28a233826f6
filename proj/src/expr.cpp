#include "dpt/expr.hpp"

#include <atomic>
#include <sstream>

namespace dpt {

// ---------------------------------------------------------------------------
// Types

namespace {
TypePtr makeType(Tag tag, TypePtr a = nullptr, TypePtr b = nullptr) {
  auto t = std::make_shared<Type>();
  t->tag = tag;
  t->fst = std::move(a);
  t->snd = std::move(b);
  return t;
}
}  // namespace

TypePtr boolT() {
  static const TypePtr t = makeType(Tag::Bool);
  return t;
}
TypePtr intT() {
  static const TypePtr t = makeType(Tag::Int);
  return t;
}
TypePtr realT() {
  static const TypePtr t = makeType(Tag::Real);
  return t;
}
TypePtr unitT() {
  static const TypePtr t = makeType(Tag::Unit);
  return t;
}
TypePtr pairT(TypePtr a, TypePtr b) { return makeType(Tag::Pair, std::move(a), std::move(b)); }
TypePtr listT(TypePtr elem) { return makeType(Tag::List, std::move(elem)); }
TypePtr mapT(TypePtr key, TypePtr val) { return makeType(Tag::Map, std::move(key), std::move(val)); }
TypePtr distT(TypePtr payload) { return makeType(Tag::Dist, std::move(payload)); }

bool typeEq(const TypePtr& a, const TypePtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->tag != b->tag) return false;
  return typeEq(a->fst, b->fst) && typeEq(a->snd, b->snd);
}

std::string typeName(const TypePtr& t) {
  if (!t) return "?";
  switch (t->tag) {
    case Tag::Bool: return "bool";
    case Tag::Int: return "int";
    case Tag::Real: return "real";
    case Tag::Unit: return "unit";
    case Tag::Pair: return "(pair " + typeName(t->fst) + " " + typeName(t->snd) + ")";
    case Tag::List: return "(list " + typeName(t->fst) + ")";
    case Tag::Map: return "(map " + typeName(t->fst) + " " + typeName(t->snd) + ")";
    case Tag::Dist: return "(dist " + typeName(t->fst) + ")";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Provenance

ProvPtr provConst(double v) {
  auto p = std::make_shared<Prov>();
  p->k = Prov::K::Const;
  p->cval = v;
  return p;
}

ProvPtr provLap(int callIndex, double width, ProvPtr center) {
  auto p = std::make_shared<Prov>();
  p->k = Prov::K::Lap;
  p->callIndex = callIndex;
  p->width = width;
  p->center = std::move(center);
  return p;
}

ProvPtr provOp(Prov::K op, ProvPtr l, ProvPtr r) {
  auto p = std::make_shared<Prov>();
  p->k = op;
  p->l = std::move(l);
  p->r = std::move(r);
  return p;
}

bool provMentionsSample(const ProvPtr& p) {
  if (!p) return false;
  switch (p->k) {
    case Prov::K::Const: return false;
    case Prov::K::Lap: return true;
    default: return provMentionsSample(p->l) || provMentionsSample(p->r);
  }
}

// ---------------------------------------------------------------------------
// Values

Value unitV() { return Value{}; }
Value boolV(bool b) {
  Value v;
  v.v = b;
  return v;
}
Value intV(int64_t i) {
  Value v;
  v.v = i;
  return v;
}
Value realV(double d) {
  Value v;
  v.v = RealV{d, nullptr};
  return v;
}
Value realV(double d, ProvPtr prov) {
  Value v;
  v.v = RealV{d, std::move(prov)};
  return v;
}
Value pairV(Value a, Value b) {
  Value v;
  v.v = std::make_shared<std::pair<Value, Value>>(std::move(a), std::move(b));
  return v;
}
Value listV(std::vector<Value> xs) {
  Value v;
  v.v = std::make_shared<std::vector<Value>>(std::move(xs));
  return v;
}
Value mapV(std::map<Value, Value, ValueLess> m) {
  Value v;
  v.v = std::make_shared<std::map<Value, Value, ValueLess>>(std::move(m));
  return v;
}

namespace {
int variantRank(const Value& v) { return static_cast<int>(v.v.index()); }
}  // namespace

bool valueLess(const Value& a, const Value& b) {
  if (variantRank(a) != variantRank(b)) return variantRank(a) < variantRank(b);
  if (a.isUnit()) return false;
  if (a.isBool()) return a.asBool() < b.asBool();
  if (a.isInt()) return a.asInt() < b.asInt();
  if (a.isReal()) return a.asReal().v < b.asReal().v;
  if (a.isPair()) {
    const auto& pa = *a.asPair();
    const auto& pb = *b.asPair();
    if (valueLess(pa.first, pb.first)) return true;
    if (valueLess(pb.first, pa.first)) return false;
    return valueLess(pa.second, pb.second);
  }
  if (a.isList()) {
    const auto& la = *a.asList();
    const auto& lb = *b.asList();
    size_t n = std::min(la.size(), lb.size());
    for (size_t i = 0; i < n; i++) {
      if (valueLess(la[i], lb[i])) return true;
      if (valueLess(lb[i], la[i])) return false;
    }
    return la.size() < lb.size();
  }
  const auto& ma = *a.asMap();
  const auto& mb = *b.asMap();
  auto ia = ma.begin(), ib = mb.begin();
  for (; ia != ma.end() && ib != mb.end(); ++ia, ++ib) {
    if (valueLess(ia->first, ib->first)) return true;
    if (valueLess(ib->first, ia->first)) return false;
    if (valueLess(ia->second, ib->second)) return true;
    if (valueLess(ib->second, ia->second)) return false;
  }
  return ma.size() < mb.size();
}

bool ValueLess::operator()(const Value& a, const Value& b) const { return valueLess(a, b); }

bool valueEq(const Value& a, const Value& b) { return !valueLess(a, b) && !valueLess(b, a); }

bool containsSampledReal(const Value& v) {
  if (v.isReal()) return provMentionsSample(v.asReal().prov);
  if (v.isPair())
    return containsSampledReal(v.asPair()->first) || containsSampledReal(v.asPair()->second);
  if (v.isList()) {
    for (const auto& x : *v.asList())
      if (containsSampledReal(x)) return true;
    return false;
  }
  if (v.isMap()) {
    for (const auto& [k, val] : *v.asMap())
      if (containsSampledReal(k) || containsSampledReal(val)) return true;
    return false;
  }
  return false;
}

Value stripProvenance(const Value& v) {
  if (v.isReal()) return realV(v.asReal().v);
  if (v.isPair())
    return pairV(stripProvenance(v.asPair()->first), stripProvenance(v.asPair()->second));
  if (v.isList()) {
    std::vector<Value> out;
    out.reserve(v.asList()->size());
    for (const auto& x : *v.asList()) out.push_back(stripProvenance(x));
    return listV(std::move(out));
  }
  if (v.isMap()) {
    std::map<Value, Value, ValueLess> out;
    for (const auto& [k, val] : *v.asMap())
      out.emplace(stripProvenance(k), stripProvenance(val));
    return mapV(std::move(out));
  }
  return v;
}

std::string showValue(const Value& v) {
  std::ostringstream os;
  if (v.isUnit()) {
    os << "()";
  } else if (v.isBool()) {
    os << (v.asBool() ? "true" : "false");
  } else if (v.isInt()) {
    os << v.asInt();
  } else if (v.isReal()) {
    os.precision(17);
    os << v.asReal().v;
  } else if (v.isPair()) {
    os << "(" << showValue(v.asPair()->first) << ", " << showValue(v.asPair()->second) << ")";
  } else if (v.isList()) {
    os << "[";
    bool first = true;
    for (const auto& x : *v.asList()) {
      if (!first) os << ", ";
      first = false;
      os << showValue(x);
    }
    os << "]";
  } else {
    os << "{";
    bool first = true;
    for (const auto& [k, val] : *v.asMap()) {
      if (!first) os << ", ";
      first = false;
      os << showValue(k) << ": " << showValue(val);
    }
    os << "}";
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Expression construction

int freshVarId() {
  static std::atomic<int> next{0};
  return next.fetch_add(1);
}

namespace {

std::shared_ptr<Expr> makeExpr(Op op, TypePtr t) {
  auto e = std::make_shared<Expr>();
  e->op = op;
  e->type = std::move(t);
  return e;
}

[[noreturn]] void typeError(const std::string& where, const std::string& detail) {
  throw TypeMismatch(where + ": " + detail);
}

void requireType(const std::string& where, const TypePtr& found, const TypePtr& expected) {
  if (!typeEq(found, expected))
    typeError(where, "expected " + typeName(expected) + ", found " + typeName(found));
}

TypePtr requireNumeric(const std::string& where, const ExprPtr& a, const ExprPtr& b) {
  if (!typeEq(a->type, b->type))
    typeError(where, "operand types differ: " + typeName(a->type) + " vs " + typeName(b->type));
  if (a->type->tag != Tag::Int && a->type->tag != Tag::Real)
    typeError(where, "operands must be numeric, found " + typeName(a->type));
  return a->type;
}

TypePtr requireDist(const std::string& where, const ExprPtr& e) {
  if (e->type->tag != Tag::Dist)
    typeError(where, "expected a distribution, found " + typeName(e->type));
  return e->type->fst;
}

TypePtr requireList(const std::string& where, const ExprPtr& e) {
  if (e->type->tag != Tag::List)
    typeError(where, "expected a list, found " + typeName(e->type));
  return e->type->fst;
}

}  // namespace

ExprPtr lit(bool b) {
  auto e = makeExpr(Op::Literal, boolT());
  e->lit = boolV(b);
  return e;
}
ExprPtr lit(int64_t i) {
  auto e = makeExpr(Op::Literal, intT());
  e->lit = intV(i);
  return e;
}
ExprPtr lit(int i) { return lit(static_cast<int64_t>(i)); }
ExprPtr lit(double d) {
  auto e = makeExpr(Op::Literal, realT());
  e->lit = realV(d);
  return e;
}
ExprPtr litv(Value v, TypePtr t) {
  auto e = makeExpr(Op::Literal, std::move(t));
  e->lit = std::move(v);
  return e;
}
ExprPtr unit() {
  auto e = makeExpr(Op::Literal, unitT());
  e->lit = unitV();
  return e;
}

ExprPtr var(int id, TypePtr t) {
  auto e = makeExpr(Op::Var, std::move(t));
  e->varId = id;
  return e;
}

namespace {
ExprPtr binOp(Op op, const std::string& name, ExprPtr a, ExprPtr b, TypePtr result) {
  auto e = makeExpr(op, std::move(result));
  e->a = std::move(a);
  e->b = std::move(b);
  (void)name;
  return e;
}
}  // namespace

ExprPtr add(ExprPtr a, ExprPtr b) {
  TypePtr t = requireNumeric("Add", a, b);
  return binOp(Op::Add, "Add", std::move(a), std::move(b), t);
}
ExprPtr sub(ExprPtr a, ExprPtr b) {
  TypePtr t = requireNumeric("Sub", a, b);
  return binOp(Op::Sub, "Sub", std::move(a), std::move(b), t);
}
ExprPtr mul(ExprPtr a, ExprPtr b) {
  TypePtr t = requireNumeric("Mul", a, b);
  return binOp(Op::Mul, "Mul", std::move(a), std::move(b), t);
}
ExprPtr div_(ExprPtr a, ExprPtr b) {
  TypePtr t = requireNumeric("Div", a, b);
  return binOp(Op::Div, "Div", std::move(a), std::move(b), t);
}
ExprPtr lt(ExprPtr a, ExprPtr b) {
  requireNumeric("Lt", a, b);
  return binOp(Op::Lt, "Lt", std::move(a), std::move(b), boolT());
}
ExprPtr le(ExprPtr a, ExprPtr b) {
  requireNumeric("Le", a, b);
  return binOp(Op::Le, "Le", std::move(a), std::move(b), boolT());
}
ExprPtr gt(ExprPtr a, ExprPtr b) { return lt(std::move(b), std::move(a)); }
ExprPtr ge(ExprPtr a, ExprPtr b) { return le(std::move(b), std::move(a)); }
ExprPtr eq(ExprPtr a, ExprPtr b) {
  requireNumeric("Eq", a, b);
  return binOp(Op::Eq, "Eq", std::move(a), std::move(b), boolT());
}
ExprPtr not_(ExprPtr a) {
  requireType("Not", a->type, boolT());
  auto e = makeExpr(Op::Not, boolT());
  e->a = std::move(a);
  return e;
}
ExprPtr and_(ExprPtr a, ExprPtr b) {
  requireType("And", a->type, boolT());
  requireType("And", b->type, boolT());
  return binOp(Op::And, "And", std::move(a), std::move(b), boolT());
}
ExprPtr or_(ExprPtr a, ExprPtr b) {
  requireType("Or", a->type, boolT());
  requireType("Or", b->type, boolT());
  return binOp(Op::Or, "Or", std::move(a), std::move(b), boolT());
}

ExprPtr cond(ExprPtr c, ExprPtr a, ExprPtr b) {
  requireType("Cond", c->type, boolT());
  if (!typeEq(a->type, b->type))
    typeError("Cond", "branch types differ: " + typeName(a->type) + " vs " + typeName(b->type));
  auto e = makeExpr(Op::Cond, a->type);
  e->a = std::move(c);
  e->b = std::move(a);
  e->c = std::move(b);
  return e;
}

ExprPtr if_(ExprPtr c, ExprPtr thenD, ExprPtr elseD) {
  requireType("If", c->type, boolT());
  requireDist("If", thenD);
  if (!typeEq(thenD->type, elseD->type))
    typeError("If", "branch types differ: " + typeName(thenD->type) + " vs " + typeName(elseD->type));
  auto e = makeExpr(Op::If, thenD->type);
  e->a = std::move(c);
  e->b = std::move(thenD);
  e->c = std::move(elseD);
  return e;
}

ExprPtr lap(ExprPtr center, double width) {
  requireType("Laplace", center->type, realT());
  if (!(width > 0)) throw TypeMismatch("Laplace: width must be a positive constant");
  auto e = makeExpr(Op::Laplace, distT(realT()));
  e->a = std::move(center);
  e->width = width;
  return e;
}

ExprPtr ret(ExprPtr x) {
  auto e = makeExpr(Op::Return, distT(x->type));
  e->a = std::move(x);
  return e;
}

ExprPtr bindM(ExprPtr dist, const std::function<ExprPtr(ExprPtr)>& k) {
  TypePtr payload = requireDist("Bind", dist);
  int id = freshVarId();
  ExprPtr body = k(var(id, payload));
  requireDist("Bind", body);
  auto e = makeExpr(Op::Bind, body->type);
  e->a = std::move(dist);
  e->b = std::move(body);
  e->varId = id;
  return e;
}

ExprPtr seq(ExprPtr first, ExprPtr rest) {
  TypePtr p = requireDist("Sequence", first);
  requireType("Sequence", p, unitT());
  requireDist("Sequence", rest);
  auto e = makeExpr(Op::Sequence, rest->type);
  e->a = std::move(first);
  e->b = std::move(rest);
  return e;
}

ExprPtr assert_(ExprPtr b) {
  requireType("Assert", b->type, boolT());
  auto e = makeExpr(Op::Assert, distT(unitT()));
  e->a = std::move(b);
  return e;
}

ExprPtr abort_(const std::string& msg, TypePtr distPayload) {
  auto e = makeExpr(Op::Abort, distT(std::move(distPayload)));
  e->msg = msg;
  return e;
}

ExprPtr loop(ExprPtr init, const std::function<ExprPtr(ExprPtr)>& condFn,
             const std::function<ExprPtr(ExprPtr)>& bodyFn, LoopMetric metric) {
  TypePtr stateT = init->type;
  if (stateT->tag == Tag::Dist) typeError("Loop", "init must be a value, not a distribution");
  int condVar = freshVarId();
  ExprPtr condBody = condFn(var(condVar, stateT));
  requireType("Loop", condBody->type, boolT());
  int bodyVar = freshVarId();
  ExprPtr bodyBody = bodyFn(var(bodyVar, stateT));
  requireType("Loop", bodyBody->type, distT(stateT));
  auto e = makeExpr(Op::Loop, distT(stateT));
  e->a = std::move(init);
  e->b = std::move(bodyBody);
  e->varId = bodyVar;
  e->loopCondVar = condVar;
  e->loopCond = std::move(condBody);
  e->metric = std::move(metric);
  return e;
}

ExprPtr nil(TypePtr elem) { return makeExpr(Op::Nil, listT(std::move(elem))); }

ExprPtr cons(ExprPtr h, ExprPtr t) {
  TypePtr elem = requireList("Cons", t);
  requireType("Cons", h->type, elem);
  auto e = makeExpr(Op::Cons, t->type);
  e->a = std::move(h);
  e->b = std::move(t);
  return e;
}

ExprPtr snoc(ExprPtr t, ExprPtr h) {
  TypePtr elem = requireList("Snoc", t);
  requireType("Snoc", h->type, elem);
  auto e = makeExpr(Op::Snoc, t->type);
  e->a = std::move(t);
  e->b = std::move(h);
  return e;
}

ExprPtr uncons(ExprPtr l) {
  TypePtr elem = requireList("Uncons", l);
  TypePtr resT = listT(pairT(elem, listT(elem)));
  auto e = makeExpr(Op::Uncons, resT);
  e->a = std::move(l);
  return e;
}

ExprPtr head(ExprPtr l) {
  TypePtr elem = requireList("Head", l);
  auto e = makeExpr(Op::Head, elem);
  e->a = std::move(l);
  return e;
}

ExprPtr mkPair(ExprPtr a, ExprPtr b) {
  auto e = makeExpr(Op::MkPair, pairT(a->type, b->type));
  e->a = std::move(a);
  e->b = std::move(b);
  return e;
}

ExprPtr fst(ExprPtr p) {
  if (p->type->tag != Tag::Pair) typeError("Fst", "expected a pair, found " + typeName(p->type));
  auto e = makeExpr(Op::Fst, p->type->fst);
  e->a = std::move(p);
  return e;
}

ExprPtr snd(ExprPtr p) {
  if (p->type->tag != Tag::Pair) typeError("Snd", "expected a pair, found " + typeName(p->type));
  auto e = makeExpr(Op::SndOp, p->type->snd);
  e->a = std::move(p);
  return e;
}

ExprPtr mapEmpty(TypePtr key, TypePtr val) {
  return makeExpr(Op::MapEmpty, mapT(std::move(key), std::move(val)));
}

ExprPtr mapInsert(ExprPtr m, ExprPtr key, ExprPtr val) {
  if (m->type->tag != Tag::Map) typeError("MapInsert", "expected a map, found " + typeName(m->type));
  requireType("MapInsert", key->type, m->type->fst);
  requireType("MapInsert", val->type, m->type->snd);
  auto e = makeExpr(Op::MapInsert, m->type);
  e->a = std::move(m);
  e->b = std::move(key);
  e->c = std::move(val);
  return e;
}

ExprPtr mapLookup(ExprPtr m, ExprPtr key) {
  if (m->type->tag != Tag::Map) typeError("MapLookup", "expected a map, found " + typeName(m->type));
  requireType("MapLookup", key->type, m->type->fst);
  auto e = makeExpr(Op::MapLookup, listT(m->type->snd));
  e->a = std::move(m);
  e->b = std::move(key);
  return e;
}

ExprPtr isNil(ExprPtr l) {
  requireList("IsNil", l);
  auto e = makeExpr(Op::IsNil, boolT());
  e->a = std::move(l);
  return e;
}

ExprPtr length(ExprPtr x) {
  if (x->type->tag != Tag::List && x->type->tag != Tag::Map)
    typeError("Length", "expected a list or map, found " + typeName(x->type));
  auto e = makeExpr(Op::Length, intT());
  e->a = std::move(x);
  return e;
}

// ---------------------------------------------------------------------------
// typecheck: re-verify every node against the types stored at construction.

namespace {

TypePtr typeOfValue(const Value& v) {
  if (v.isUnit()) return unitT();
  if (v.isBool()) return boolT();
  if (v.isInt()) return intT();
  if (v.isReal()) return realT();
  if (v.isPair()) return pairT(typeOfValue(v.asPair()->first), typeOfValue(v.asPair()->second));
  if (v.isList()) {
    const auto& xs = *v.asList();
    if (xs.empty()) return nullptr;  // caller must rely on the annotation
    return listT(typeOfValue(xs.front()));
  }
  const auto& m = *v.asMap();
  if (m.empty()) return nullptr;
  return mapT(typeOfValue(m.begin()->first), typeOfValue(m.begin()->second));
}

void checkNode(const ExprPtr& e, std::map<int, TypePtr>& env) {
  switch (e->op) {
    case Op::Literal: {
      TypePtr t = typeOfValue(e->lit);
      if (t && !typeEq(t, e->type) &&
          !(e->type->tag == Tag::List && e->lit.isList() && e->lit.asList()->empty()) &&
          !(e->type->tag == Tag::Map && e->lit.isMap() && e->lit.asMap()->empty()))
        typeError("Literal", "value/annotation mismatch: " + typeName(t) + " vs " + typeName(e->type));
      return;
    }
    case Op::Var: {
      auto it = env.find(e->varId);
      if (it == env.end()) typeError("Var", "unbound variable " + std::to_string(e->varId));
      requireType("Var", it->second, e->type);
      return;
    }
    case Op::Add:
    case Op::Sub:
    case Op::Mul:
    case Op::Div: {
      checkNode(e->a, env);
      checkNode(e->b, env);
      requireNumeric("Arith", e->a, e->b);
      requireType("Arith", e->a->type, e->type);
      return;
    }
    case Op::Lt:
    case Op::Le:
    case Op::Eq: {
      checkNode(e->a, env);
      checkNode(e->b, env);
      requireNumeric("Compare", e->a, e->b);
      requireType("Compare", e->type, boolT());
      return;
    }
    case Op::Not:
      checkNode(e->a, env);
      requireType("Not", e->a->type, boolT());
      return;
    case Op::And:
    case Op::Or:
      checkNode(e->a, env);
      checkNode(e->b, env);
      requireType("Logic", e->a->type, boolT());
      requireType("Logic", e->b->type, boolT());
      return;
    case Op::Cond:
      checkNode(e->a, env);
      checkNode(e->b, env);
      checkNode(e->c, env);
      requireType("Cond", e->a->type, boolT());
      requireType("Cond", e->b->type, e->type);
      requireType("Cond", e->c->type, e->type);
      return;
    case Op::If:
      checkNode(e->a, env);
      checkNode(e->b, env);
      checkNode(e->c, env);
      requireType("If", e->a->type, boolT());
      requireType("If", e->b->type, e->type);
      requireType("If", e->c->type, e->type);
      if (e->type->tag != Tag::Dist) typeError("If", "branches must be distributions");
      return;
    case Op::Laplace:
      checkNode(e->a, env);
      requireType("Laplace", e->a->type, realT());
      if (!(e->width > 0)) typeError("Laplace", "width must be positive");
      return;
    case Op::Return:
      checkNode(e->a, env);
      requireType("Return", distT(e->a->type), e->type);
      return;
    case Op::Bind: {
      checkNode(e->a, env);
      TypePtr payload = requireDist("Bind", e->a);
      env[e->varId] = payload;
      checkNode(e->b, env);
      env.erase(e->varId);
      requireType("Bind", e->b->type, e->type);
      return;
    }
    case Op::Sequence:
      checkNode(e->a, env);
      checkNode(e->b, env);
      requireType("Sequence", e->a->type, distT(unitT()));
      requireType("Sequence", e->b->type, e->type);
      return;
    case Op::Loop: {
      checkNode(e->a, env);
      TypePtr stateT = e->a->type;
      env[e->loopCondVar] = stateT;
      checkNode(e->loopCond, env);
      env.erase(e->loopCondVar);
      requireType("Loop", e->loopCond->type, boolT());
      env[e->varId] = stateT;
      checkNode(e->b, env);
      env.erase(e->varId);
      requireType("Loop", e->b->type, distT(stateT));
      requireType("Loop", e->type, distT(stateT));
      return;
    }
    case Op::Assert:
      checkNode(e->a, env);
      requireType("Assert", e->a->type, boolT());
      return;
    case Op::Abort:
      if (e->type->tag != Tag::Dist) typeError("Abort", "must be distribution typed");
      return;
    case Op::Nil:
      if (e->type->tag != Tag::List) typeError("Nil", "must be list typed");
      return;
    case Op::Cons:
      checkNode(e->a, env);
      checkNode(e->b, env);
      requireType("Cons", e->b->type, e->type);
      requireType("Cons", listT(e->a->type), e->type);
      return;
    case Op::Snoc:
      checkNode(e->a, env);
      checkNode(e->b, env);
      requireType("Snoc", e->a->type, e->type);
      requireType("Snoc", listT(e->b->type), e->type);
      return;
    case Op::Uncons:
      checkNode(e->a, env);
      requireList("Uncons", e->a);
      return;
    case Op::Head:
      checkNode(e->a, env);
      requireType("Head", listT(e->type), e->a->type);
      return;
    case Op::MkPair:
      checkNode(e->a, env);
      checkNode(e->b, env);
      requireType("MkPair", pairT(e->a->type, e->b->type), e->type);
      return;
    case Op::Fst:
      checkNode(e->a, env);
      requireType("Fst", e->a->type->fst, e->type);
      return;
    case Op::SndOp:
      checkNode(e->a, env);
      requireType("Snd", e->a->type->snd, e->type);
      return;
    case Op::MapEmpty:
      if (e->type->tag != Tag::Map) typeError("MapEmpty", "must be map typed");
      return;
    case Op::MapInsert:
      checkNode(e->a, env);
      checkNode(e->b, env);
      checkNode(e->c, env);
      requireType("MapInsert", e->a->type, e->type);
      return;
    case Op::MapLookup:
      checkNode(e->a, env);
      checkNode(e->b, env);
      requireType("MapLookup", listT(e->a->type->snd), e->type);
      return;
    case Op::IsNil:
      checkNode(e->a, env);
      requireList("IsNil", e->a);
      return;
    case Op::Length:
      checkNode(e->a, env);
      requireType("Length", e->type, intT());
      return;
  }
  typeError("typecheck", "unknown node");
}

}  // namespace

TypePtr typecheck(const ExprPtr& e) {
  std::map<int, TypePtr> env;
  checkNode(e, env);
  return e->type;
}

// ---------------------------------------------------------------------------

namespace {
// Counts Laplace nodes; the bool tracks whether the subtree sits under a Loop.
void countLap(const ExprPtr& e, bool underLoop, int& count, bool& unbounded) {
  if (!e || unbounded) return;
  if (e->op == Op::Laplace) {
    if (underLoop) {
      unbounded = true;
      return;
    }
    count++;
  }
  bool childUnder = underLoop || e->op == Op::Loop;
  countLap(e->a, childUnder, count, unbounded);
  countLap(e->b, childUnder, count, unbounded);
  countLap(e->c, childUnder, count, unbounded);
  if (e->op == Op::Loop) countLap(e->loopCond, true, count, unbounded);
}
}  // namespace

std::optional<int> countLaplaceNodes(const ExprPtr& e) {
  int count = 0;
  bool unbounded = false;
  countLap(e, false, count, unbounded);
  if (unbounded) return std::nullopt;
  return count;
}

// ---------------------------------------------------------------------------
// Structural equality up to variable renaming.

namespace {
bool eqRec(const ExprPtr& a, const ExprPtr& b, std::map<int, int>& varMap) {
  if (!a || !b) return a == b;
  if (a->op != b->op) return false;
  if (!typeEq(a->type, b->type)) return false;
  switch (a->op) {
    case Op::Literal:
      return valueEq(a->lit, b->lit);
    case Op::Var: {
      auto it = varMap.find(a->varId);
      if (it != varMap.end()) return it->second == b->varId;
      return a->varId == b->varId;
    }
    case Op::Laplace:
      if (a->width != b->width) return false;
      break;
    case Op::Abort:
      return a->msg == b->msg;
    case Op::Bind: {
      if (!eqRec(a->a, b->a, varMap)) return false;
      varMap[a->varId] = b->varId;
      bool ok = eqRec(a->b, b->b, varMap);
      varMap.erase(a->varId);
      return ok;
    }
    case Op::Loop: {
      if (!eqRec(a->a, b->a, varMap)) return false;
      varMap[a->loopCondVar] = b->loopCondVar;
      bool okc = eqRec(a->loopCond, b->loopCond, varMap);
      varMap.erase(a->loopCondVar);
      if (!okc) return false;
      varMap[a->varId] = b->varId;
      bool okb = eqRec(a->b, b->b, varMap);
      varMap.erase(a->varId);
      return okb;
    }
    default:
      break;
  }
  return eqRec(a->a, b->a, varMap) && eqRec(a->b, b->b, varMap) && eqRec(a->c, b->c, varMap);
}
}  // namespace

bool exprEq(const ExprPtr& a, const ExprPtr& b) {
  std::map<int, int> varMap;
  return eqRec(a, b, varMap);
}

// ---------------------------------------------------------------------------

namespace {
void collectLoops(const ExprPtr& e, std::map<const Expr*, int>& out, int& next) {
  if (!e) return;
  if (e->op == Op::Loop) out.emplace(e.get(), next++);
  collectLoops(e->a, out, next);
  if (e->op == Op::Loop) collectLoops(e->loopCond, out, next);
  collectLoops(e->b, out, next);
  collectLoops(e->c, out, next);
}
}  // namespace

std::map<const Expr*, int> loopOrdinals(const ExprPtr& e) {
  std::map<const Expr*, int> out;
  int next = 0;
  collectLoops(e, out, next);
  return out;
}

// ---------------------------------------------------------------------------

namespace {
const char* opName(Op op) {
  switch (op) {
    case Op::Literal: return "lit";
    case Op::Var: return "var";
    case Op::Add: return "+";
    case Op::Sub: return "-";
    case Op::Mul: return "*";
    case Op::Div: return "/";
    case Op::Lt: return "<";
    case Op::Le: return "<=";
    case Op::Eq: return "==";
    case Op::Not: return "not";
    case Op::And: return "and";
    case Op::Or: return "or";
    case Op::Cond: return "cond";
    case Op::If: return "if";
    case Op::Laplace: return "lap";
    case Op::Return: return "return";
    case Op::Bind: return "bind";
    case Op::Sequence: return "seq";
    case Op::Loop: return "loop";
    case Op::Assert: return "assert";
    case Op::Abort: return "abort";
    case Op::Nil: return "nil";
    case Op::Cons: return "cons";
    case Op::Snoc: return "snoc";
    case Op::Uncons: return "uncons";
    case Op::Head: return "head";
    case Op::MkPair: return "pair";
    case Op::Fst: return "fst";
    case Op::SndOp: return "snd";
    case Op::MapEmpty: return "map-empty";
    case Op::MapInsert: return "map-insert";
    case Op::MapLookup: return "map-lookup";
    case Op::IsNil: return "is-nil";
    case Op::Length: return "length";
  }
  return "?";
}

void showRec(const ExprPtr& e, std::ostringstream& os) {
  if (!e) return;
  switch (e->op) {
    case Op::Literal:
      os << showValue(e->lit);
      return;
    case Op::Var:
      os << "v" << e->varId;
      return;
    default:
      break;
  }
  os << "(" << opName(e->op);
  if (e->op == Op::Laplace) os << " w=" << e->width;
  if (e->op == Op::Abort) os << " \"" << e->msg << "\"";
  if (e->op == Op::Bind) os << " v" << e->varId;
  if (e->op == Op::Loop) os << " cv" << e->loopCondVar << " bv" << e->varId;
  for (const ExprPtr& child : {e->a, e->loopCond, e->b, e->c}) {
    if (child) {
      os << " ";
      showRec(child, os);
    }
  }
  os << ")";
}
}  // namespace

std::string showExpr(const ExprPtr& e) {
  std::ostringstream os;
  showRec(e, os);
  return os.str();
}

}  // namespace dpt

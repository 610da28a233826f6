#include "dpt/symbolic.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>

namespace dpt {

// ---------------------------------------------------------------------------
// Term construction

namespace {

TermPtr mkTerm(SymTerm::K k, Tag type) {
  auto t = std::make_shared<SymTerm>();
  t->k = k;
  t->type = type;
  return t;
}

bool isB(const TermPtr& t, bool v) {
  return t->k == SymTerm::K::BConst && t->bval == v;
}

}  // namespace

TermPtr tBool(bool v) {
  static const TermPtr tt = [] {
    auto t = mkTerm(SymTerm::K::BConst, Tag::Bool);
    t->bval = true;
    return TermPtr(t);
  }();
  static const TermPtr ff = [] {
    auto t = mkTerm(SymTerm::K::BConst, Tag::Bool);
    t->bval = false;
    return TermPtr(t);
  }();
  return v ? tt : ff;
}

TermPtr tInt(int64_t v) {
  auto t = mkTerm(SymTerm::K::IConst, Tag::Int);
  t->ival = v;
  return t;
}

TermPtr tReal(double v) {
  auto t = mkTerm(SymTerm::K::RConst, Tag::Real);
  t->rval = v;
  return t;
}

TermPtr tSample(int index) {
  auto t = mkTerm(SymTerm::K::Sample, Tag::Real);
  t->sampleIndex = index;
  return t;
}

namespace {

TermPtr arith(SymTerm::K k, TermPtr a, TermPtr b) {
  if (a->type == Tag::Int && a->k == SymTerm::K::IConst &&
      b->k == SymTerm::K::IConst) {
    int64_t x = a->ival, y = b->ival;
    switch (k) {
      case SymTerm::K::Add: return tInt(x + y);
      case SymTerm::K::Sub: return tInt(x - y);
      case SymTerm::K::Mul: return tInt(x * y);
      case SymTerm::K::Div:
        if (y == 0) throw EvalError("integer division by zero");
        return tInt(x / y);
      default: break;
    }
  }
  if (a->type == Tag::Real && a->k == SymTerm::K::RConst &&
      b->k == SymTerm::K::RConst) {
    double x = a->rval, y = b->rval;
    switch (k) {
      case SymTerm::K::Add: return tReal(x + y);
      case SymTerm::K::Sub: return tReal(x - y);
      case SymTerm::K::Mul: return tReal(x * y);
      case SymTerm::K::Div: return tReal(x / y);
      default: break;
    }
  }
  auto t = mkTerm(k, a->type);
  t->a = std::move(a);
  t->b = std::move(b);
  return t;
}

TermPtr comparison(SymTerm::K k, TermPtr a, TermPtr b) {
  if (a->k == SymTerm::K::IConst && b->k == SymTerm::K::IConst) {
    switch (k) {
      case SymTerm::K::Lt: return tBool(a->ival < b->ival);
      case SymTerm::K::Le: return tBool(a->ival <= b->ival);
      default: return tBool(a->ival == b->ival);
    }
  }
  if (a->k == SymTerm::K::RConst && b->k == SymTerm::K::RConst) {
    switch (k) {
      case SymTerm::K::Lt: return tBool(a->rval < b->rval);
      case SymTerm::K::Le: return tBool(a->rval <= b->rval);
      default: return tBool(a->rval == b->rval);
    }
  }
  auto t = mkTerm(k, Tag::Bool);
  t->a = std::move(a);
  t->b = std::move(b);
  return t;
}

}  // namespace

TermPtr tAdd(TermPtr a, TermPtr b) { return arith(SymTerm::K::Add, std::move(a), std::move(b)); }
TermPtr tSub(TermPtr a, TermPtr b) { return arith(SymTerm::K::Sub, std::move(a), std::move(b)); }
TermPtr tMul(TermPtr a, TermPtr b) { return arith(SymTerm::K::Mul, std::move(a), std::move(b)); }
TermPtr tDiv(TermPtr a, TermPtr b) { return arith(SymTerm::K::Div, std::move(a), std::move(b)); }
TermPtr tLt(TermPtr a, TermPtr b) { return comparison(SymTerm::K::Lt, std::move(a), std::move(b)); }
TermPtr tLe(TermPtr a, TermPtr b) { return comparison(SymTerm::K::Le, std::move(a), std::move(b)); }
TermPtr tEq(TermPtr a, TermPtr b) { return comparison(SymTerm::K::Eq, std::move(a), std::move(b)); }

TermPtr tNot(TermPtr a) {
  if (a->k == SymTerm::K::BConst) return tBool(!a->bval);
  if (a->k == SymTerm::K::Not) return a->a;
  auto t = mkTerm(SymTerm::K::Not, Tag::Bool);
  t->a = std::move(a);
  return t;
}

TermPtr tAnd(TermPtr a, TermPtr b) {
  if (isB(a, false) || isB(b, false)) return tBool(false);
  if (isB(a, true)) return b;
  if (isB(b, true)) return a;
  auto t = mkTerm(SymTerm::K::And, Tag::Bool);
  t->a = std::move(a);
  t->b = std::move(b);
  return t;
}

TermPtr tOr(TermPtr a, TermPtr b) {
  if (isB(a, true) || isB(b, true)) return tBool(true);
  if (isB(a, false)) return b;
  if (isB(b, false)) return a;
  auto t = mkTerm(SymTerm::K::Or, Tag::Bool);
  t->a = std::move(a);
  t->b = std::move(b);
  return t;
}

TermPtr tIte(TermPtr c, TermPtr a, TermPtr b) {
  if (c->k == SymTerm::K::BConst) return c->bval ? a : b;
  if (termEq(a, b)) return a;
  if (a->type == Tag::Bool && isB(a, true) && isB(b, false)) return c;
  if (a->type == Tag::Bool && isB(a, false) && isB(b, true)) return tNot(c);
  auto t = mkTerm(SymTerm::K::Ite, a->type);
  t->a = std::move(c);
  t->b = std::move(a);
  t->c = std::move(b);
  return t;
}

bool termIsConst(const TermPtr& t) {
  switch (t->k) {
    case SymTerm::K::BConst:
    case SymTerm::K::IConst:
    case SymTerm::K::RConst:
      return true;
    default:
      return false;
  }
}

bool termEq(const TermPtr& a, const TermPtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->k != b->k || a->type != b->type) return false;
  switch (a->k) {
    case SymTerm::K::BConst: return a->bval == b->bval;
    case SymTerm::K::IConst: return a->ival == b->ival;
    case SymTerm::K::RConst: return a->rval == b->rval;
    case SymTerm::K::Sample: return a->sampleIndex == b->sampleIndex;
    default:
      return termEq(a->a, b->a) && termEq(a->b, b->b) && termEq(a->c, b->c);
  }
}

namespace {
const char* termOpName(SymTerm::K k) {
  switch (k) {
    case SymTerm::K::Add: return "+";
    case SymTerm::K::Sub: return "-";
    case SymTerm::K::Mul: return "*";
    case SymTerm::K::Div: return "/";
    case SymTerm::K::Lt: return "<";
    case SymTerm::K::Le: return "<=";
    case SymTerm::K::Eq: return "=";
    case SymTerm::K::Not: return "not";
    case SymTerm::K::And: return "and";
    case SymTerm::K::Or: return "or";
    case SymTerm::K::Ite: return "ite";
    default: return "?";
  }
}

void showTermRec(const TermPtr& t, std::ostringstream& os) {
  switch (t->k) {
    case SymTerm::K::BConst: os << (t->bval ? "true" : "false"); return;
    case SymTerm::K::IConst: os << t->ival; return;
    case SymTerm::K::RConst: {
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.17g", t->rval);
      os << buf;
      return;
    }
    case SymTerm::K::Sample: os << "s" << t->sampleIndex; return;
    default: break;
  }
  os << "(" << termOpName(t->k);
  for (const TermPtr& child : {t->a, t->b, t->c}) {
    if (child) {
      os << " ";
      showTermRec(child, os);
    }
  }
  os << ")";
}
}  // namespace

std::string showTerm(const TermPtr& t) {
  std::ostringstream os;
  showTermRec(t, os);
  return os.str();
}

void collectSampleIndices(const TermPtr& t, std::set<int>& out) {
  if (!t) return;
  if (t->k == SymTerm::K::Sample) {
    out.insert(t->sampleIndex);
    return;
  }
  collectSampleIndices(t->a, out);
  collectSampleIndices(t->b, out);
  collectSampleIndices(t->c, out);
}

double evalRealTerm(const TermPtr& t, const std::vector<double>& samples) {
  switch (t->k) {
    case SymTerm::K::RConst: return t->rval;
    case SymTerm::K::Sample: return samples.at(static_cast<size_t>(t->sampleIndex));
    case SymTerm::K::Add: return evalRealTerm(t->a, samples) + evalRealTerm(t->b, samples);
    case SymTerm::K::Sub: return evalRealTerm(t->a, samples) - evalRealTerm(t->b, samples);
    case SymTerm::K::Mul: return evalRealTerm(t->a, samples) * evalRealTerm(t->b, samples);
    case SymTerm::K::Div: return evalRealTerm(t->a, samples) / evalRealTerm(t->b, samples);
    case SymTerm::K::Ite:
      return evalBoolTerm(t->a, samples) ? evalRealTerm(t->b, samples)
                                         : evalRealTerm(t->c, samples);
    default: throw EvalError("not a real term: " + showTerm(t));
  }
}

int64_t evalIntTerm(const TermPtr& t, const std::vector<double>& samples) {
  switch (t->k) {
    case SymTerm::K::IConst: return t->ival;
    case SymTerm::K::Add: return evalIntTerm(t->a, samples) + evalIntTerm(t->b, samples);
    case SymTerm::K::Sub: return evalIntTerm(t->a, samples) - evalIntTerm(t->b, samples);
    case SymTerm::K::Mul: return evalIntTerm(t->a, samples) * evalIntTerm(t->b, samples);
    case SymTerm::K::Div: {
      int64_t d = evalIntTerm(t->b, samples);
      if (d == 0) throw EvalError("integer division by zero");
      return evalIntTerm(t->a, samples) / d;
    }
    case SymTerm::K::Ite:
      return evalBoolTerm(t->a, samples) ? evalIntTerm(t->b, samples)
                                         : evalIntTerm(t->c, samples);
    default: throw EvalError("not an int term: " + showTerm(t));
  }
}

bool evalBoolTerm(const TermPtr& t, const std::vector<double>& samples) {
  auto cmp = [&](auto op) {
    if (t->a->type == Tag::Int)
      return op(evalIntTerm(t->a, samples), evalIntTerm(t->b, samples));
    return op(evalRealTerm(t->a, samples), evalRealTerm(t->b, samples));
  };
  switch (t->k) {
    case SymTerm::K::BConst: return t->bval;
    case SymTerm::K::Lt: return cmp([](auto x, auto y) { return x < y; });
    case SymTerm::K::Le: return cmp([](auto x, auto y) { return x <= y; });
    case SymTerm::K::Eq: return cmp([](auto x, auto y) { return x == y; });
    case SymTerm::K::Not: return !evalBoolTerm(t->a, samples);
    case SymTerm::K::And: return evalBoolTerm(t->a, samples) && evalBoolTerm(t->b, samples);
    case SymTerm::K::Or: return evalBoolTerm(t->a, samples) || evalBoolTerm(t->b, samples);
    case SymTerm::K::Ite:
      return evalBoolTerm(t->a, samples) ? evalBoolTerm(t->b, samples)
                                         : evalBoolTerm(t->c, samples);
    default: throw EvalError("not a bool term: " + showTerm(t));
  }
}

// ---------------------------------------------------------------------------
// Symbolic values

SymValue symUnit() { return SymValue{}; }
SymValue symScalar(TermPtr t) {
  SymValue v;
  v.v = std::move(t);
  return v;
}
SymValue symPair(SymValue a, SymValue b) {
  SymValue v;
  v.v = std::make_shared<std::pair<SymValue, SymValue>>(std::move(a), std::move(b));
  return v;
}
SymValue symList(std::vector<SymValue> xs) {
  SymValue v;
  v.v = std::make_shared<std::vector<SymValue>>(std::move(xs));
  return v;
}
SymValue symMap(std::map<Value, SymValue, ValueLess> m) {
  SymValue v;
  v.v = std::make_shared<std::map<Value, SymValue, ValueLess>>(std::move(m));
  return v;
}

SymValue symOfValue(const Value& v) {
  if (v.isUnit()) return symUnit();
  if (v.isBool()) return symScalar(tBool(v.asBool()));
  if (v.isInt()) return symScalar(tInt(v.asInt()));
  if (v.isReal()) return symScalar(tReal(v.asReal().v));
  if (v.isPair())
    return symPair(symOfValue(v.asPair()->first), symOfValue(v.asPair()->second));
  if (v.isList()) {
    std::vector<SymValue> xs;
    xs.reserve(v.asList()->size());
    for (const auto& x : *v.asList()) xs.push_back(symOfValue(x));
    return symList(std::move(xs));
  }
  std::map<Value, SymValue, ValueLess> m;
  for (const auto& [k, val] : *v.asMap()) m.emplace(k, symOfValue(val));
  return symMap(std::move(m));
}

std::optional<Value> concreteOf(const SymValue& sv) {
  if (sv.isUnit()) return unitV();
  if (sv.isTerm()) {
    const TermPtr& t = sv.asTerm();
    switch (t->k) {
      case SymTerm::K::BConst: return boolV(t->bval);
      case SymTerm::K::IConst: return intV(t->ival);
      case SymTerm::K::RConst: return realV(t->rval);
      default: return std::nullopt;
    }
  }
  if (sv.isPair()) {
    auto a = concreteOf(sv.asPair()->first);
    auto b = concreteOf(sv.asPair()->second);
    if (!a || !b) return std::nullopt;
    return pairV(std::move(*a), std::move(*b));
  }
  if (sv.isList()) {
    std::vector<Value> xs;
    xs.reserve(sv.asList()->size());
    for (const auto& x : *sv.asList()) {
      auto c = concreteOf(x);
      if (!c) return std::nullopt;
      xs.push_back(std::move(*c));
    }
    return listV(std::move(xs));
  }
  std::map<Value, Value, ValueLess> m;
  for (const auto& [k, val] : *sv.asMap()) {
    auto c = concreteOf(val);
    if (!c) return std::nullopt;
    m.emplace(k, std::move(*c));
  }
  return mapV(std::move(m));
}

Value concretize(const SymValue& sv, const std::vector<double>& samples) {
  if (sv.isUnit()) return unitV();
  if (sv.isTerm()) {
    const TermPtr& t = sv.asTerm();
    switch (t->type) {
      case Tag::Bool: return boolV(evalBoolTerm(t, samples));
      case Tag::Int: return intV(evalIntTerm(t, samples));
      default: return realV(evalRealTerm(t, samples));
    }
  }
  if (sv.isPair())
    return pairV(concretize(sv.asPair()->first, samples),
                 concretize(sv.asPair()->second, samples));
  if (sv.isList()) {
    std::vector<Value> xs;
    xs.reserve(sv.asList()->size());
    for (const auto& x : *sv.asList()) xs.push_back(concretize(x, samples));
    return listV(std::move(xs));
  }
  std::map<Value, Value, ValueLess> m;
  for (const auto& [k, val] : *sv.asMap()) m.emplace(k, concretize(val, samples));
  return mapV(std::move(m));
}

bool symValueEq(const SymValue& a, const SymValue& b) {
  if (a.v.index() != b.v.index()) return false;
  if (a.isUnit()) return true;
  if (a.isTerm()) return termEq(a.asTerm(), b.asTerm());
  if (a.isPair())
    return symValueEq(a.asPair()->first, b.asPair()->first) &&
           symValueEq(a.asPair()->second, b.asPair()->second);
  if (a.isList()) {
    if (a.asList()->size() != b.asList()->size()) return false;
    for (size_t i = 0; i < a.asList()->size(); i++)
      if (!symValueEq((*a.asList())[i], (*b.asList())[i])) return false;
    return true;
  }
  const auto& ma = *a.asMap();
  const auto& mb = *b.asMap();
  if (ma.size() != mb.size()) return false;
  auto ia = ma.begin();
  for (auto ib = mb.begin(); ib != mb.end(); ++ia, ++ib) {
    if (!valueEq(ia->first, ib->first) || !symValueEq(ia->second, ib->second))
      return false;
  }
  return true;
}

std::string showSymValue(const SymValue& sv) {
  std::ostringstream os;
  if (sv.isUnit()) {
    os << "()";
  } else if (sv.isTerm()) {
    os << showTerm(sv.asTerm());
  } else if (sv.isPair()) {
    os << "(" << showSymValue(sv.asPair()->first) << ", "
       << showSymValue(sv.asPair()->second) << ")";
  } else if (sv.isList()) {
    os << "[";
    bool first = true;
    for (const auto& x : *sv.asList()) {
      if (!first) os << ", ";
      first = false;
      os << showSymValue(x);
    }
    os << "]";
  } else {
    os << "{";
    bool first = true;
    for (const auto& [k, val] : *sv.asMap()) {
      if (!first) os << ", ";
      first = false;
      os << showValue(k) << ": " << showSymValue(val);
    }
    os << "}";
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Exploration

namespace {

using Env = std::map<int, SymValue>;
using Cont = std::function<void(SymValue, struct PathSt)>;

struct PathSt {
  std::vector<TermPtr> conds;
  std::vector<SymSample> samples;
};

enum class Mode { Explore, Merged, Forced };

struct Ctx {
  const ExploreOptions& opts;
  ExploreResult* res;
  int64_t fuel;
  bool stopped = false;
  Mode mode;
  const std::vector<bool>* branches = nullptr;
  size_t branchPos = 0;
  std::map<const Expr*, int> loopIds;

  void burn() {
    if (stopped) return;
    if (--fuel < 0) {
      if (opts.throwOnBudget) throw BudgetExceeded("symbolic evaluation fuel exhausted");
      stopped = true;
      res->budgetHit = true;
    }
  }

  void pathEmitted() {
    if (res->paths.size() > opts.maxPaths) {
      if (opts.throwOnBudget) throw BudgetExceeded("path budget exceeded");
      res->paths.pop_back();
      stopped = true;
      res->budgetHit = true;
    }
  }

  bool nextBranch() {
    if (branchPos >= branches->size())
      throw ReplayMismatch("recorded branch sequence exhausted");
    return (*branches)[branchPos++];
  }
};

void emitAborted(Ctx& ctx, PathSt st, std::string msg) {
  PathResult r;
  r.output = symUnit();
  r.conds = std::move(st.conds);
  r.samples = std::move(st.samples);
  r.aborted = true;
  r.abortMsg = std::move(msg);
  ctx.res->paths.push_back(std::move(r));
  ctx.pathEmitted();
}

std::optional<SymValue> zipMerge(const TermPtr& c, const SymValue& a, const SymValue& b) {
  if (a.v.index() != b.v.index()) return std::nullopt;
  if (a.isUnit()) return symUnit();
  if (a.isTerm()) return symScalar(tIte(c, a.asTerm(), b.asTerm()));
  if (a.isPair()) {
    auto f = zipMerge(c, a.asPair()->first, b.asPair()->first);
    auto s = zipMerge(c, a.asPair()->second, b.asPair()->second);
    if (!f || !s) return std::nullopt;
    return symPair(std::move(*f), std::move(*s));
  }
  if (a.isList()) {
    if (a.asList()->size() != b.asList()->size()) return std::nullopt;
    std::vector<SymValue> xs;
    xs.reserve(a.asList()->size());
    for (size_t i = 0; i < a.asList()->size(); i++) {
      auto m = zipMerge(c, (*a.asList())[i], (*b.asList())[i]);
      if (!m) return std::nullopt;
      xs.push_back(std::move(*m));
    }
    return symList(std::move(xs));
  }
  const auto& ma = *a.asMap();
  const auto& mb = *b.asMap();
  if (ma.size() != mb.size()) return std::nullopt;
  std::map<Value, SymValue, ValueLess> out;
  auto ia = ma.begin();
  for (auto ib = mb.begin(); ib != mb.end(); ++ia, ++ib) {
    if (!valueEq(ia->first, ib->first)) return std::nullopt;
    auto m = zipMerge(c, ia->second, ib->second);
    if (!m) return std::nullopt;
    out.emplace(ia->first, std::move(*m));
  }
  return symMap(std::move(out));
}

SymValue evalPureSym(const ExprPtr& e, const Env& env, Ctx& ctx) {
  ctx.burn();
  switch (e->op) {
    case Op::Literal: return symOfValue(e->lit);
    case Op::Var: {
      auto it = env.find(e->varId);
      if (it == env.end()) throw EvalError("unbound variable");
      return it->second;
    }
    case Op::Add:
      return symScalar(tAdd(evalPureSym(e->a, env, ctx).asTerm(),
                            evalPureSym(e->b, env, ctx).asTerm()));
    case Op::Sub:
      return symScalar(tSub(evalPureSym(e->a, env, ctx).asTerm(),
                            evalPureSym(e->b, env, ctx).asTerm()));
    case Op::Mul:
      return symScalar(tMul(evalPureSym(e->a, env, ctx).asTerm(),
                            evalPureSym(e->b, env, ctx).asTerm()));
    case Op::Div:
      return symScalar(tDiv(evalPureSym(e->a, env, ctx).asTerm(),
                            evalPureSym(e->b, env, ctx).asTerm()));
    case Op::Lt:
      return symScalar(tLt(evalPureSym(e->a, env, ctx).asTerm(),
                           evalPureSym(e->b, env, ctx).asTerm()));
    case Op::Le:
      return symScalar(tLe(evalPureSym(e->a, env, ctx).asTerm(),
                           evalPureSym(e->b, env, ctx).asTerm()));
    case Op::Eq:
      return symScalar(tEq(evalPureSym(e->a, env, ctx).asTerm(),
                           evalPureSym(e->b, env, ctx).asTerm()));
    case Op::Not:
      return symScalar(tNot(evalPureSym(e->a, env, ctx).asTerm()));
    case Op::And: {
      TermPtr a = evalPureSym(e->a, env, ctx).asTerm();
      if (isB(a, false)) return symScalar(tBool(false));
      return symScalar(tAnd(a, evalPureSym(e->b, env, ctx).asTerm()));
    }
    case Op::Or: {
      TermPtr a = evalPureSym(e->a, env, ctx).asTerm();
      if (isB(a, true)) return symScalar(tBool(true));
      return symScalar(tOr(a, evalPureSym(e->b, env, ctx).asTerm()));
    }
    case Op::Cond: {
      TermPtr c = evalPureSym(e->a, env, ctx).asTerm();
      if (c->k == SymTerm::K::BConst)
        return evalPureSym(c->bval ? e->b : e->c, env, ctx);
      SymValue a = evalPureSym(e->b, env, ctx);
      SymValue b = evalPureSym(e->c, env, ctx);
      auto merged = zipMerge(c, a, b);
      if (!merged)
        throw SymbolicUnsupported("conditional over unmergeable shapes");
      return std::move(*merged);
    }
    case Op::Nil: return symList({});
    case Op::Cons: {
      SymValue h = evalPureSym(e->a, env, ctx);
      SymValue t = evalPureSym(e->b, env, ctx);
      std::vector<SymValue> xs;
      xs.reserve(t.asList()->size() + 1);
      xs.push_back(std::move(h));
      xs.insert(xs.end(), t.asList()->begin(), t.asList()->end());
      return symList(std::move(xs));
    }
    case Op::Snoc: {
      SymValue t = evalPureSym(e->a, env, ctx);
      SymValue h = evalPureSym(e->b, env, ctx);
      std::vector<SymValue> xs = *t.asList();
      xs.push_back(std::move(h));
      return symList(std::move(xs));
    }
    case Op::Uncons: {
      SymValue l = evalPureSym(e->a, env, ctx);
      const auto& xs = *l.asList();
      if (xs.empty()) return symList({});
      std::vector<SymValue> tail(xs.begin() + 1, xs.end());
      return symList({symPair(xs.front(), symList(std::move(tail)))});
    }
    case Op::Head: {
      SymValue l = evalPureSym(e->a, env, ctx);
      if (l.asList()->empty()) throw EvalError("head of empty list");
      return l.asList()->front();
    }
    case Op::MkPair: {
      SymValue a = evalPureSym(e->a, env, ctx);
      SymValue b = evalPureSym(e->b, env, ctx);
      return symPair(std::move(a), std::move(b));
    }
    case Op::Fst: return evalPureSym(e->a, env, ctx).asPair()->first;
    case Op::SndOp: return evalPureSym(e->a, env, ctx).asPair()->second;
    case Op::MapEmpty: return symMap({});
    case Op::MapInsert: {
      SymValue m = evalPureSym(e->a, env, ctx);
      auto key = concreteOf(evalPureSym(e->b, env, ctx));
      if (!key) throw SymbolicUnsupported("symbolic map key");
      SymValue val = evalPureSym(e->c, env, ctx);
      auto out = *m.asMap();
      out.insert_or_assign(std::move(*key), std::move(val));
      return symMap(std::move(out));
    }
    case Op::MapLookup: {
      SymValue m = evalPureSym(e->a, env, ctx);
      auto key = concreteOf(evalPureSym(e->b, env, ctx));
      if (!key) throw SymbolicUnsupported("symbolic map key");
      auto it = m.asMap()->find(*key);
      if (it == m.asMap()->end()) return symList({});
      return symList({it->second});
    }
    case Op::IsNil:
      return symScalar(tBool(evalPureSym(e->a, env, ctx).asList()->empty()));
    case Op::Length: {
      SymValue c = evalPureSym(e->a, env, ctx);
      if (c.isList()) return symScalar(tInt(static_cast<int64_t>(c.asList()->size())));
      return symScalar(tInt(static_cast<int64_t>(c.asMap()->size())));
    }
    default:
      throw EvalError("distribution node in value position");
  }
}

// Loop metric arguments: sample-dependent reals are blanked, so metrics must
// only inspect sample-independent components.
Value metricView(const SymValue& sv) {
  if (sv.isUnit()) return unitV();
  if (sv.isTerm()) {
    const TermPtr& t = sv.asTerm();
    switch (t->k) {
      case SymTerm::K::BConst: return boolV(t->bval);
      case SymTerm::K::IConst: return intV(t->ival);
      case SymTerm::K::RConst: return realV(t->rval);
      default:
        if (t->type == Tag::Real) return realV(std::nan(""));
        throw SymbolicUnsupported("loop metric depends on a symbolic discrete value");
    }
  }
  if (sv.isPair())
    return pairV(metricView(sv.asPair()->first), metricView(sv.asPair()->second));
  if (sv.isList()) {
    std::vector<Value> xs;
    xs.reserve(sv.asList()->size());
    for (const auto& x : *sv.asList()) xs.push_back(metricView(x));
    return listV(std::move(xs));
  }
  std::map<Value, Value, ValueLess> m;
  for (const auto& [k, val] : *sv.asMap()) m.emplace(k, metricView(val));
  return mapV(std::move(m));
}

void goD(const ExprPtr& e, const Env& env, PathSt st, const Cont& k, Ctx& ctx);

void goIf(const ExprPtr& e, const Env& env, PathSt st, const Cont& k, Ctx& ctx,
          const TermPtr& c) {
  if (ctx.mode == Mode::Forced) {
    bool taken = ctx.nextBranch();
    if (c->k == SymTerm::K::BConst) {
      if (c->bval != taken)
        throw ReplayMismatch("concrete branch disagrees with recording");
    } else {
      st.conds.push_back(taken ? c : tNot(c));
    }
    goD(taken ? e->b : e->c, env, std::move(st), k, ctx);
    return;
  }
  if (c->k == SymTerm::K::BConst) {
    goD(c->bval ? e->b : e->c, env, std::move(st), k, ctx);
    return;
  }
  if (ctx.mode == Mode::Merged) {
    // A branch is mergeable when it contributes exactly one path and adds no
    // conditions, samples, aborts or truncations of its own.
    auto tryBranch = [&](const ExprPtr& br,
                         std::optional<std::pair<SymValue, PathSt>>& out) {
      ExploreResult tmp;
      ExploreResult* saved = ctx.res;
      ctx.res = &tmp;
      std::vector<std::pair<SymValue, PathSt>> got;
      try {
        goD(br, env, st, [&](SymValue v, PathSt s2) {
          got.emplace_back(std::move(v), std::move(s2));
        }, ctx);
      } catch (...) {
        ctx.res = saved;
        throw;
      }
      ctx.res = saved;
      if (got.size() == 1 && tmp.paths.empty() && tmp.truncatedCount == 0 &&
          !tmp.budgetHit && got[0].second.conds.size() == st.conds.size() &&
          got[0].second.samples.size() == st.samples.size()) {
        out = std::move(got[0]);
      }
    };
    std::optional<std::pair<SymValue, PathSt>> tb, fb;
    tryBranch(e->b, tb);
    if (tb && !ctx.stopped) tryBranch(e->c, fb);
    if (tb && fb && !ctx.stopped) {
      auto merged = zipMerge(c, tb->first, fb->first);
      if (merged) {
        k(std::move(*merged), std::move(st));
        return;
      }
    }
    if (ctx.stopped) return;
  }
  PathSt stT = st;
  stT.conds.push_back(c);
  goD(e->b, env, std::move(stT), k, ctx);
  if (ctx.stopped) return;
  PathSt stF = std::move(st);
  stF.conds.push_back(tNot(c));
  goD(e->c, env, std::move(stF), k, ctx);
}

void goLoop(const ExprPtr& e, const Env& env, PathSt st, const Cont& k, Ctx& ctx) {
  bool hasCut = false;
  int64_t cut = 0;
  if (e->metric) {
    auto idIt = ctx.loopIds.find(e.get());
    if (idIt != ctx.loopIds.end()) {
      auto cutIt = ctx.opts.loopCutoff.find(idIt->second);
      if (cutIt != ctx.opts.loopCutoff.end()) {
        hasCut = true;
        cut = cutIt->second;
      }
    }
  }
  auto self = std::make_shared<std::function<void(SymValue, PathSt)>>();
  auto* selfRaw = self.get();
  *self = [e, env, k, &ctx, selfRaw, hasCut, cut](SymValue sv, PathSt st2) {
    if (ctx.stopped) return;
    ctx.burn();
    if (ctx.stopped) return;
    if (hasCut) {
      int64_t m = e->metric(metricView(sv));
      if (m > cut) {
        ctx.res->truncatedCount++;
        return;
      }
    }
    Env envC = env;
    envC[e->loopCondVar] = sv;
    TermPtr c = evalPureSym(e->loopCond, envC, ctx).asTerm();
    auto enterBody = [&](PathSt st3, const SymValue& state) {
      Env envB = env;
      envB[e->varId] = state;
      goD(e->b, envB, std::move(st3), Cont(*selfRaw), ctx);
    };
    if (ctx.mode == Mode::Forced) {
      bool taken = ctx.nextBranch();
      if (c->k == SymTerm::K::BConst) {
        if (c->bval != taken)
          throw ReplayMismatch("loop condition disagrees with recording");
      } else {
        st2.conds.push_back(taken ? c : tNot(c));
      }
      if (taken)
        enterBody(std::move(st2), sv);
      else
        k(std::move(sv), std::move(st2));
      return;
    }
    if (c->k == SymTerm::K::BConst) {
      if (c->bval)
        enterBody(std::move(st2), sv);
      else
        k(std::move(sv), std::move(st2));
      return;
    }
    PathSt stT = st2;
    stT.conds.push_back(c);
    enterBody(std::move(stT), sv);
    if (ctx.stopped) return;
    PathSt stF = std::move(st2);
    stF.conds.push_back(tNot(c));
    k(std::move(sv), std::move(stF));
  };
  SymValue init = evalPureSym(e->a, env, ctx);
  (*self)(std::move(init), std::move(st));
}

void goD(const ExprPtr& e, const Env& env, PathSt st, const Cont& k, Ctx& ctx) {
  if (ctx.stopped) return;
  ctx.burn();
  if (ctx.stopped) return;
  switch (e->op) {
    case Op::Return:
      k(evalPureSym(e->a, env, ctx), std::move(st));
      return;
    case Op::Laplace: {
      TermPtr center = evalPureSym(e->a, env, ctx).asTerm();
      int idx = static_cast<int>(st.samples.size());
      st.samples.push_back({std::move(center), e->width});
      k(symScalar(tSample(idx)), std::move(st));
      return;
    }
    case Op::Bind: {
      Cont k2 = [e, env, k, &ctx](SymValue v, PathSt st2) {
        Env env2 = env;
        env2[e->varId] = std::move(v);
        goD(e->b, env2, std::move(st2), k, ctx);
      };
      goD(e->a, env, std::move(st), k2, ctx);
      return;
    }
    case Op::Sequence: {
      Cont k2 = [e, env, k, &ctx](SymValue, PathSt st2) {
        goD(e->b, env, std::move(st2), k, ctx);
      };
      goD(e->a, env, std::move(st), k2, ctx);
      return;
    }
    case Op::If: {
      TermPtr c = evalPureSym(e->a, env, ctx).asTerm();
      goIf(e, env, std::move(st), k, ctx, c);
      return;
    }
    case Op::Assert: {
      TermPtr c = evalPureSym(e->a, env, ctx).asTerm();
      if (ctx.mode == Mode::Forced) {
        bool ok = ctx.nextBranch();
        if (c->k == SymTerm::K::BConst) {
          if (c->bval != ok)
            throw ReplayMismatch("assert outcome disagrees with recording");
        } else {
          st.conds.push_back(ok ? c : tNot(c));
        }
        if (ok)
          k(symUnit(), std::move(st));
        else
          emitAborted(ctx, std::move(st), "assertion failed");
        return;
      }
      if (c->k == SymTerm::K::BConst) {
        if (c->bval) k(symUnit(), std::move(st));
        // A concretely false assumption is an infeasible path: dropped.
        return;
      }
      st.conds.push_back(c);
      k(symUnit(), std::move(st));
      return;
    }
    case Op::Abort:
      emitAborted(ctx, std::move(st), e->msg);
      return;
    case Op::Loop:
      goLoop(e, env, std::move(st), k, ctx);
      return;
    default:
      k(evalPureSym(e, env, ctx), std::move(st));
      return;
  }
}

ExploreResult runExplore(const std::vector<ExprPtr>& progs, const ExploreOptions& opts,
                         Mode mode, const std::vector<bool>* branches,
                         size_t* branchesUsed = nullptr) {
  ExploreResult res;
  Ctx ctx{opts, &res, opts.fuel, false, mode, branches, 0, {}};
  Cont k0 = [&](SymValue v, PathSt st) {
    PathResult r;
    r.output = std::move(v);
    r.conds = std::move(st.conds);
    r.samples = std::move(st.samples);
    ctx.res->paths.push_back(std::move(r));
    ctx.pathEmitted();
  };
  for (const ExprPtr& p : progs) {
    if (ctx.stopped) break;
    ctx.loopIds = loopOrdinals(p);
    goD(p, Env{}, PathSt{}, k0, ctx);
  }
  if (branchesUsed) *branchesUsed = ctx.branchPos;
  return res;
}

}  // namespace

ExploreResult explore(const ExprPtr& prog, const ExploreOptions& opts) {
  return runExplore({prog}, opts, Mode::Explore, nullptr);
}

ExploreResult exploreMerged(const ExprPtr& prog, const ExploreOptions& opts) {
  return runExplore({prog}, opts, Mode::Merged, nullptr);
}

std::vector<ExprPtr> streamline(const ExprPtr& e, size_t budget) {
  switch (e->op) {
    case Op::If: {
      auto ts = streamline(e->b, budget);
      auto es = streamline(e->c, budget);
      if (ts.size() + es.size() > budget)
        throw BudgetExceeded("streamline variant budget exceeded");
      std::vector<ExprPtr> out;
      out.reserve(ts.size() + es.size());
      for (const auto& t : ts) out.push_back(seq(assert_(e->a), t));
      for (const auto& el : es) out.push_back(seq(assert_(not_(e->a)), el));
      return out;
    }
    case Op::Bind:
    case Op::Sequence: {
      auto as = streamline(e->a, budget);
      auto bs = streamline(e->b, budget);
      if (as.size() * bs.size() > budget)
        throw BudgetExceeded("streamline variant budget exceeded");
      if (as.size() == 1 && bs.size() == 1 && as[0] == e->a && bs[0] == e->b)
        return {e};
      std::vector<ExprPtr> out;
      out.reserve(as.size() * bs.size());
      for (const auto& a2 : as) {
        for (const auto& b2 : bs) {
          auto n = std::make_shared<Expr>(*e);
          n->a = a2;
          n->b = b2;
          out.push_back(std::move(n));
        }
      }
      return out;
    }
    default:
      return {e};
  }
}

ExploreResult explorePipeline(const ExprPtr& prog, const ExploreOptions& opts) {
  std::vector<ExprPtr> variants = streamline(prog, opts.maxPaths);
  return runExplore(variants, opts, Mode::Explore, nullptr);
}

PathResult symbolicRun(const ExprPtr& prog, const ExploreOptions& opts) {
  ExploreResult res = explore(prog, opts);
  if (res.paths.size() != 1 || res.truncatedCount != 0)
    throw ReplayMismatch("expected exactly one path, found " +
                         std::to_string(res.paths.size()));
  return std::move(res.paths.front());
}

PathResult forcedReplay(const ExprPtr& prog, const std::vector<bool>& branches,
                        const ExploreOptions& opts) {
  size_t used = 0;
  ExploreResult res = runExplore({prog}, opts, Mode::Forced, &branches, &used);
  if (res.paths.size() != 1)
    throw ReplayMismatch("forced replay produced " +
                         std::to_string(res.paths.size()) + " paths");
  if (used != branches.size())
    throw ReplayMismatch("recorded branch sequence not fully consumed");
  return std::move(res.paths.front());
}

}  // namespace dpt

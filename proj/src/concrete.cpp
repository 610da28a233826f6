#include "dpt/concrete.hpp"

#include <cmath>

namespace dpt {

// ---------------------------------------------------------------------------
// Randomness

namespace {
uint64_t mix64(uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}
}  // namespace

uint64_t SplitMix64::next() {
  state += 0x9E3779B97F4A7C15ULL;
  return mix64(state);
}

double SplitMix64::nextUnit() {
  return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

uint64_t deriveSeed(uint64_t masterSeed, uint64_t pairIdx, uint64_t runIdx) {
  uint64_t z = mix64(masterSeed + 0x9E3779B97F4A7C15ULL * (pairIdx + 1));
  return mix64(z ^ (0xD1B54A32D192ED03ULL * (runIdx + 1)));
}

// ---------------------------------------------------------------------------
// Lattice noise

double pmfLatticeLaplace(int64_t k, double width, double grid) {
  double r = grid / width;
  // (1 - e^-r) / (1 + e^-r), written to stay accurate for tiny r.
  double head = -std::expm1(-r) / (1.0 + std::exp(-r));
  return head * std::exp(-r * static_cast<double>(k < 0 ? -k : k));
}

int64_t sampleLatticeStep(SplitMix64& rng, double width, double grid) {
  // Difference of two iid geometrics on {0,1,...} with success 1 - a is
  // two-sided geometric with ratio a.
  double lnAlpha = -grid / width;
  auto geometric = [&]() -> int64_t {
    double u = rng.nextUnit();
    double g = std::floor(std::log1p(-u) / lnAlpha);
    if (!(g >= 0)) return 0;
    if (g > 0x1.0p40) return INT64_C(1) << 40;
    return static_cast<int64_t>(g);
  };
  int64_t a = geometric();
  int64_t b = geometric();
  return a - b;
}

double RandomSampler::sample(double center, double width) {
  int64_t k = sampleLatticeStep(rng, width, grid);
  return center + static_cast<double>(k) * grid;
}

double InjectedNoiseSampler::sample(double center, double /*width*/) {
  if (pos >= noises.size()) throw EvalError("injected noise exhausted");
  return center + noises[pos++];
}

double AbsoluteSampler::sample(double /*center*/, double /*width*/) {
  if (pos >= values.size()) throw EvalError("injected samples exhausted");
  return values[pos++];
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

struct AbortSignal {
  std::string msg;
};

struct Interp {
  Sampler& sampler;
  int64_t fuel;
  std::vector<SampleInfo> trace;
  std::vector<bool> branches;
  std::map<int, int64_t> loopMetricMax;
  std::map<const Expr*, int> loopIds;
  std::map<int, Value> env;

  explicit Interp(Sampler& s, int64_t fuel) : sampler(s), fuel(fuel) {}

  void burn() {
    if (--fuel < 0) throw FuelExhausted();
  }

  ProvPtr provOf(const Value& v) {
    const RealV& r = v.asReal();
    return r.prov ? r.prov : provConst(r.v);
  }

  Value arith(Op op, const Value& a, const Value& b) {
    if (a.isInt()) {
      int64_t x = a.asInt(), y = b.asInt();
      switch (op) {
        case Op::Add: return intV(x + y);
        case Op::Sub: return intV(x - y);
        case Op::Mul: return intV(x * y);
        case Op::Div:
          if (y == 0) throw EvalError("integer division by zero");
          return intV(x / y);
        default: break;
      }
    }
    double x = a.asReal().v, y = b.asReal().v;
    double r;
    Prov::K k;
    switch (op) {
      case Op::Add: r = x + y; k = Prov::K::Add; break;
      case Op::Sub: r = x - y; k = Prov::K::Sub; break;
      case Op::Mul: r = x * y; k = Prov::K::Mul; break;
      case Op::Div: r = x / y; k = Prov::K::Div; break;
      default: throw EvalError("bad arithmetic op");
    }
    if (!a.asReal().prov && !b.asReal().prov) return realV(r);
    return realV(r, provOp(k, provOf(a), provOf(b)));
  }

  bool compare(Op op, const Value& a, const Value& b) {
    if (a.isInt()) {
      int64_t x = a.asInt(), y = b.asInt();
      switch (op) {
        case Op::Lt: return x < y;
        case Op::Le: return x <= y;
        default: return x == y;
      }
    }
    double x = a.asReal().v, y = b.asReal().v;
    switch (op) {
      case Op::Lt: return x < y;
      case Op::Le: return x <= y;
      default: return x == y;
    }
  }

  Value evalPure(const ExprPtr& e) {
    burn();
    switch (e->op) {
      case Op::Literal: return e->lit;
      case Op::Var: {
        auto it = env.find(e->varId);
        if (it == env.end()) throw EvalError("unbound variable");
        return it->second;
      }
      case Op::Add:
      case Op::Sub:
      case Op::Mul:
      case Op::Div: {
        Value a = evalPure(e->a);
        Value b = evalPure(e->b);
        return arith(e->op, a, b);
      }
      case Op::Lt:
      case Op::Le:
      case Op::Eq: {
        Value a = evalPure(e->a);
        Value b = evalPure(e->b);
        return boolV(compare(e->op, a, b));
      }
      case Op::Not: return boolV(!evalPure(e->a).asBool());
      case Op::And: {
        if (!evalPure(e->a).asBool()) return boolV(false);
        return boolV(evalPure(e->b).asBool());
      }
      case Op::Or: {
        if (evalPure(e->a).asBool()) return boolV(true);
        return boolV(evalPure(e->b).asBool());
      }
      case Op::Cond:
        return evalPure(e->a).asBool() ? evalPure(e->b) : evalPure(e->c);
      case Op::Nil: return listV({});
      case Op::Cons: {
        Value h = evalPure(e->a);
        Value t = evalPure(e->b);
        std::vector<Value> xs;
        xs.reserve(t.asList()->size() + 1);
        xs.push_back(std::move(h));
        xs.insert(xs.end(), t.asList()->begin(), t.asList()->end());
        return listV(std::move(xs));
      }
      case Op::Snoc: {
        Value t = evalPure(e->a);
        Value h = evalPure(e->b);
        std::vector<Value> xs = *t.asList();
        xs.push_back(std::move(h));
        return listV(std::move(xs));
      }
      case Op::Uncons: {
        Value l = evalPure(e->a);
        const auto& xs = *l.asList();
        if (xs.empty()) return listV({});
        std::vector<Value> tail(xs.begin() + 1, xs.end());
        return listV({pairV(xs.front(), listV(std::move(tail)))});
      }
      case Op::Head: {
        Value l = evalPure(e->a);
        if (l.asList()->empty()) throw EvalError("head of empty list");
        return l.asList()->front();
      }
      case Op::MkPair: {
        Value a = evalPure(e->a);
        Value b = evalPure(e->b);
        return pairV(std::move(a), std::move(b));
      }
      case Op::Fst: return evalPure(e->a).asPair()->first;
      case Op::SndOp: return evalPure(e->a).asPair()->second;
      case Op::MapEmpty: return mapV({});
      case Op::MapInsert: {
        Value m = evalPure(e->a);
        Value k = evalPure(e->b);
        Value v = evalPure(e->c);
        auto out = *m.asMap();
        out.insert_or_assign(std::move(k), std::move(v));
        return mapV(std::move(out));
      }
      case Op::MapLookup: {
        Value m = evalPure(e->a);
        Value k = evalPure(e->b);
        auto it = m.asMap()->find(k);
        if (it == m.asMap()->end()) return listV({});
        return listV({it->second});
      }
      case Op::IsNil: return boolV(evalPure(e->a).asList()->empty());
      case Op::Length: {
        Value c = evalPure(e->a);
        if (c.isList()) return intV(static_cast<int64_t>(c.asList()->size()));
        return intV(static_cast<int64_t>(c.asMap()->size()));
      }
      default:
        throw EvalError("distribution node in value position");
    }
  }

  Value execDist(const ExprPtr& e) {
    burn();
    switch (e->op) {
      case Op::Return: return evalPure(e->a);
      case Op::Laplace: {
        Value c = evalPure(e->a);
        double center = c.asReal().v;
        int callIndex = static_cast<int>(trace.size());
        double s = sampler.sample(center, e->width);
        trace.push_back({s, center, e->width});
        return realV(s, provLap(callIndex, e->width, provOf(c)));
      }
      case Op::Bind: {
        Value x = execDist(e->a);
        env[e->varId] = std::move(x);
        Value r = execDist(e->b);
        env.erase(e->varId);
        return r;
      }
      case Op::Sequence: {
        execDist(e->a);
        return execDist(e->b);
      }
      case Op::If: {
        bool taken = evalPure(e->a).asBool();
        branches.push_back(taken);
        return taken ? execDist(e->b) : execDist(e->c);
      }
      case Op::Assert: {
        bool ok = evalPure(e->a).asBool();
        branches.push_back(ok);
        if (!ok) throw AbortSignal{"assertion failed"};
        return unitV();
      }
      case Op::Abort: throw AbortSignal{e->msg};
      case Op::Loop: {
        Value st = evalPure(e->a);
        int64_t prevMetric = INT64_MIN;
        auto observe = [&](const Value& s) {
          if (!e->metric) return;
          int64_t m = e->metric(s);
          if (m < prevMetric)
            throw MetricNotMonotone("loop metric decreased from " +
                                    std::to_string(prevMetric) + " to " +
                                    std::to_string(m));
          prevMetric = m;
          auto [it, inserted] = loopMetricMax.emplace(loopIds.at(e.get()), m);
          if (!inserted && m > it->second) it->second = m;
        };
        observe(st);
        while (true) {
          burn();
          env[e->loopCondVar] = st;
          bool go = evalPure(e->loopCond).asBool();
          branches.push_back(go);
          env.erase(e->loopCondVar);
          if (!go) break;
          env[e->varId] = std::move(st);
          st = execDist(e->b);
          env.erase(e->varId);
          observe(st);
        }
        return st;
      }
      default:
        throw EvalError("value node in distribution position");
    }
  }
};

}  // namespace

RunOutcome runProgram(const ExprPtr& program, Sampler& sampler,
                      const ConcreteOptions& opts) {
  Interp in(sampler, opts.fuel);
  in.loopIds = loopOrdinals(program);
  RunOutcome out;
  try {
    out.output = in.execDist(program);
  } catch (const AbortSignal& a) {
    out.aborted = true;
    out.abortMsg = a.msg;
  }
  out.trace = std::move(in.trace);
  out.branches = std::move(in.branches);
  out.loopMetricMax = std::move(in.loopMetricMax);
  return out;
}

}  // namespace dpt

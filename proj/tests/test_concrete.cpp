#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dpt/concrete.hpp"
#include "dpt/expr.hpp"

using namespace dpt;

namespace {

ExprPtr argmax3(double q0, double q1, double q2) {
  return bindM(lap(lit(q0), 1.0), [&](ExprPtr b0) {
    return bindM(lap(lit(q1), 1.0), [&](ExprPtr b1) {
      return bindM(lap(lit(q2), 1.0), [&](ExprPtr b2) {
        ExprPtr i1 = cond(gt(b1, b0), lit(1), lit(0));
        ExprPtr m1 = cond(gt(b1, b0), b1, b0);
        ExprPtr i2 = cond(gt(b2, m1), lit(2), i1);
        return ret(i2);
      });
    });
  });
}

}  // namespace

// --- pmf oracle: brute-force checks against the closed form ----------------

TEST_CASE("pmf sums to one over the truncated support") {
  for (double width : {0.5, 1.0, 2.0, 50.0}) {
    double grid = 1.0;
    double sum = pmfLatticeLaplace(0, width, grid);
    for (int64_t k = 1; k <= 10000; k++) {
      sum += pmfLatticeLaplace(k, width, grid);
      sum += pmfLatticeLaplace(-k, width, grid);
    }
    CHECK(std::abs(sum - 1.0) <= 1e-9);
  }
}

TEST_CASE("pmf ratio between adjacent lattice points equals alpha") {
  for (double width : {1.0, 4.0, 32.0}) {
    for (double grid : {1.0, kDefaultGrid}) {
      double alpha = std::exp(-grid / width);
      for (int64_t k : {0, 1, 5, 100}) {
        double ratio = pmfLatticeLaplace(k + 1, width, grid) /
                       pmfLatticeLaplace(k, width, grid);
        CHECK(std::abs(ratio - alpha) <= 1e-12);
      }
    }
  }
}

TEST_CASE("pmf is symmetric") {
  for (int64_t k : {1, 7, 1000}) {
    CHECK(pmfLatticeLaplace(k, 2.0, 1.0) == pmfLatticeLaplace(-k, 2.0, 1.0));
  }
}

TEST_CASE("pmf mass collapses onto the center when width is tiny") {
  CHECK(pmfLatticeLaplace(0, 0.01, 1.0) >= 1.0 - 1e-9);
}

// --- sampler ----------------------------------------------------------------

TEST_CASE("samples land exactly on the lattice") {
  RandomSampler s(42);
  double center = 0.25;
  for (int i = 0; i < 2000; i++) {
    double v = s.sample(center, 1.0);
    double k = std::round((v - center) / kDefaultGrid);
    CHECK(v == center + k * kDefaultGrid);
  }
}

TEST_CASE("sample mean tracks the center") {
  RandomSampler s(7);
  double acc = 0;
  int n = 20000;
  for (int i = 0; i < n; i++) acc += s.sample(3.0, 1.0);
  CHECK(std::abs(acc / n - 3.0) < 0.1);
}

TEST_CASE("derived seeds separate pairs and runs") {
  CHECK(deriveSeed(7, 0, 0) == deriveSeed(7, 0, 0));
  CHECK(deriveSeed(7, 0, 0) != deriveSeed(7, 0, 1));
  CHECK(deriveSeed(7, 0, 0) != deriveSeed(7, 1, 0));
  CHECK(deriveSeed(7, 0, 0) != deriveSeed(8, 0, 0));
}

TEST_CASE("runs are reproducible from the seed") {
  ExprPtr prog = argmax3(1.0, 2.0, 10.0);
  RandomSampler s1(deriveSeed(7, 3, 11));
  RandomSampler s2(deriveSeed(7, 3, 11));
  RunOutcome a = runProgram(prog, s1);
  RunOutcome b = runProgram(prog, s2);
  REQUIRE(a.trace.size() == b.trace.size());
  for (size_t i = 0; i < a.trace.size(); i++) {
    CHECK(a.trace[i].sample == b.trace[i].sample);
  }
  CHECK(valueEq(a.output, b.output));
}

// --- instrumented evaluation ------------------------------------------------

TEST_CASE("injected noise drives a deterministic argmax run") {
  ExprPtr prog = argmax3(1.0, 2.0, 10.0);
  InjectedNoiseSampler s({0.8, -1.2, -0.9});
  RunOutcome r = runProgram(prog, s);
  REQUIRE_FALSE(r.aborted);
  CHECK(r.output.asInt() == 2);
  REQUIRE(r.trace.size() == 3);
  CHECK(r.trace[0].sample == doctest::Approx(1.8));
  CHECK(r.trace[0].center == 1.0);
  CHECK(r.trace[0].width == 1.0);
  CHECK(r.trace[1].sample == doctest::Approx(0.8));
  CHECK(r.trace[1].center == 2.0);
  CHECK(r.trace[2].sample == doctest::Approx(9.1));
  CHECK(r.trace[2].center == 10.0);
}

TEST_CASE("absolute sampler replays given values verbatim") {
  ExprPtr prog = bindM(lap(lit(5.0), 2.0), [](ExprPtr x) { return ret(x); });
  AbsoluteSampler s({-1.25});
  RunOutcome r = runProgram(prog, s);
  CHECK(r.output.asReal().v == -1.25);
  CHECK(r.trace[0].center == 5.0);
  CHECK(r.trace[0].width == 2.0);
}

TEST_CASE("exhausted injected samplers raise an evaluation error") {
  ExprPtr prog = argmax3(0, 0, 0);
  InjectedNoiseSampler s({0.0});
  CHECK_THROWS_AS(runProgram(prog, s), EvalError);
}

TEST_CASE("noisy coin is fair") {
  ExprPtr prog = bindM(lap(lit(0.0), 1.0), [](ExprPtr x) {
    return bindM(lap(lit(0.0), 1.0), [&](ExprPtr y) {
      return ret(cond(gt(y, x), lit(1), lit(0)));
    });
  });
  RandomSampler s(deriveSeed(1234, 0, 0));
  int64_t ones = 0;
  int n = 100000;
  for (int i = 0; i < n; i++) {
    ones += runProgram(prog, s).output.asInt();
  }
  double frac = static_cast<double>(ones) / n;
  CHECK(std::abs(frac - 0.5) < 0.01);
}

TEST_CASE("outputs carry sampling provenance") {
  ExprPtr prog = bindM(lap(lit(1.0), 1.0), [](ExprPtr x) {
    return bindM(lap(x, 2.0), [&](ExprPtr y) {
      return ret(add(y, lit(3.0)));
    });
  });
  InjectedNoiseSampler s({0.5, 0.25});
  RunOutcome r = runProgram(prog, s);
  CHECK(containsSampledReal(r.output));
  const ProvPtr& p = r.output.asReal().prov;
  REQUIRE(p);
  CHECK(p->k == Prov::K::Add);
  REQUIRE(p->l);
  CHECK(p->l->k == Prov::K::Lap);
  CHECK(p->l->callIndex == 1);
  CHECK(p->l->width == 2.0);
  REQUIRE(p->l->center);
  CHECK(p->l->center->k == Prov::K::Lap);
  CHECK(p->l->center->callIndex == 0);
  CHECK(p->r->k == Prov::K::Const);
  CHECK(p->r->cval == 3.0);
  CHECK_FALSE(containsSampledReal(stripProvenance(r.output)));
}

TEST_CASE("bind of a return behaves like direct substitution") {
  ExprPtr direct = bindM(lap(lit(5.0), 1.0), [](ExprPtr x) { return ret(x); });
  ExprPtr viaRet = bindM(ret(lit(5.0)), [](ExprPtr c) {
    return bindM(lap(c, 1.0), [](ExprPtr x) { return ret(x); });
  });
  InjectedNoiseSampler s1({0.75});
  InjectedNoiseSampler s2({0.75});
  CHECK(valueEq(runProgram(direct, s1).output, runProgram(viaRet, s2).output));
}

TEST_CASE("loops iterate until the condition fails and record metrics") {
  ExprPtr prog = loop(
      lit(static_cast<int64_t>(0)),
      [](ExprPtr s) { return lt(s, lit(5)); },
      [](ExprPtr s) { return ret(add(s, lit(1))); },
      [](const Value& v) { return v.asInt(); });
  RandomSampler s(1);
  RunOutcome r = runProgram(prog, s);
  CHECK(r.output.asInt() == 5);
  REQUIRE(r.loopMetricMax.size() == 1);
  CHECK(r.loopMetricMax.begin()->second == 5);
}

TEST_CASE("decreasing loop metrics are rejected") {
  ExprPtr prog = loop(
      lit(static_cast<int64_t>(0)),
      [](ExprPtr s) { return lt(s, lit(3)); },
      [](ExprPtr s) { return ret(add(s, lit(1))); },
      [](const Value& v) { return -v.asInt(); });
  RandomSampler s(1);
  CHECK_THROWS_AS(runProgram(prog, s), MetricNotMonotone);
}

TEST_CASE("fuel bounds runaway loops") {
  ExprPtr prog = loop(
      lit(static_cast<int64_t>(0)),
      [](ExprPtr) { return lit(true); },
      [](ExprPtr s) { return ret(s); });
  RandomSampler s(1);
  ConcreteOptions opts;
  opts.fuel = 1000;
  CHECK_THROWS_AS(runProgram(prog, s, opts), FuelExhausted);
}

TEST_CASE("asserts and aborts end the run with an abort outcome") {
  RandomSampler s(1);
  RunOutcome r1 = runProgram(seq(assert_(lit(false)), ret(lit(0))), s);
  CHECK(r1.aborted);
  CHECK(r1.abortMsg == "assertion failed");

  RunOutcome r2 = runProgram(abort_("boom", intT()), s);
  CHECK(r2.aborted);
  CHECK(r2.abortMsg == "boom");

  RunOutcome r3 = runProgram(seq(assert_(lit(true)), ret(lit(4))), s);
  CHECK_FALSE(r3.aborted);
  CHECK(r3.output.asInt() == 4);
}

TEST_CASE("partial operations raise evaluation errors") {
  RandomSampler s(1);
  CHECK_THROWS_AS(runProgram(ret(head(nil(intT()))), s), EvalError);
  CHECK_THROWS_AS(runProgram(ret(div_(lit(1), lit(0))), s), EvalError);
}

TEST_CASE("container operations evaluate structurally") {
  ExprPtr l = cons(lit(1.0), cons(lit(2.0), nil(realT())));
  RandomSampler s(1);
  RunOutcome r = runProgram(ret(uncons(l)), s);
  const auto& xs = *r.output.asList();
  REQUIRE(xs.size() == 1);
  CHECK(xs[0].asPair()->first.asReal().v == 1.0);
  CHECK(xs[0].asPair()->second.asList()->size() == 1);

  ExprPtr m = mapInsert(mapEmpty(intT(), realT()), lit(1), lit(0.5));
  RunOutcome r2 = runProgram(ret(mapLookup(m, lit(1))), s);
  REQUIRE(r2.output.asList()->size() == 1);
  CHECK(r2.output.asList()->front().asReal().v == 0.5);
  RunOutcome r3 = runProgram(ret(mapLookup(m, lit(2))), s);
  CHECK(r3.output.asList()->empty());
}

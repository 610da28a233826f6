#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

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

TEST_CASE("basic types are interned and structural types compare by shape") {
  CHECK(boolT().get() == boolT().get());
  CHECK(typeEq(pairT(intT(), realT()), pairT(intT(), realT())));
  CHECK_FALSE(typeEq(pairT(intT(), realT()), pairT(realT(), intT())));
  CHECK(typeEq(listT(boolT()), listT(boolT())));
  CHECK_FALSE(typeEq(listT(boolT()), boolT()));
  CHECK(typeEq(distT(unitT()), distT(unitT())));
  CHECK(typeName(mapT(pairT(realT(), realT()), unitT())) ==
        "(map (pair real real) unit)");
}

TEST_CASE("value equality and ordering ignore provenance") {
  Value plain = realV(1.5);
  Value tagged = realV(1.5, provLap(0, 1.0, provConst(0.0)));
  CHECK(valueEq(plain, tagged));
  CHECK_FALSE(valueLess(plain, tagged));
  CHECK_FALSE(valueLess(tagged, plain));

  CHECK(valueLess(intV(1), intV(2)));
  CHECK(valueLess(boolV(false), boolV(true)));
  CHECK(valueLess(pairV(intV(1), intV(9)), pairV(intV(2), intV(0))));
  CHECK(valueLess(listV({intV(1)}), listV({intV(1), intV(0)})));
  CHECK_FALSE(valueEq(listV({intV(1)}), listV({intV(2)})));
}

TEST_CASE("maps key on payload-only ordering") {
  std::map<Value, Value, ValueLess> m;
  m.emplace(realV(0.5, provLap(3, 1.0, provConst(0.5))), intV(7));
  Value mv = mapV(std::move(m));
  auto it = mv.asMap()->find(realV(0.5));
  REQUIRE(it != mv.asMap()->end());
  CHECK(it->second.asInt() == 7);
}

TEST_CASE("provenance queries and stripping") {
  ProvPtr p = provOp(Prov::K::Add, provLap(0, 1.0, provConst(2.0)), provConst(3.0));
  CHECK(provMentionsSample(p));
  CHECK_FALSE(provMentionsSample(provConst(4.0)));

  Value nested = pairV(intV(1), listV({realV(2.0, p)}));
  CHECK(containsSampledReal(nested));
  Value bare = stripProvenance(nested);
  CHECK_FALSE(containsSampledReal(bare));
  CHECK(valueEq(nested, bare));
}

TEST_CASE("showValue renders containers") {
  Value v = pairV(boolV(true), listV({intV(1), intV(2)}));
  CHECK(showValue(v) == "(true, [1, 2])");
}

TEST_CASE("smart constructors reject ill-typed operands") {
  CHECK_THROWS_AS(add(lit(1.0), lit(2)), TypeMismatch);
  CHECK_THROWS_AS(and_(lit(true), lit(1)), TypeMismatch);
  CHECK_THROWS_AS(lt(lit(true), lit(false)), TypeMismatch);
  CHECK_THROWS_AS(if_(lit(true), ret(lit(1)), ret(lit(1.0))), TypeMismatch);
  CHECK_THROWS_AS(lap(lit(1), 1.0), TypeMismatch);
  CHECK_THROWS_AS(lap(lit(1.0), 0.0), TypeMismatch);
  CHECK_THROWS_AS(bindM(lit(3.0), [](ExprPtr x) { return ret(x); }), TypeMismatch);
  CHECK_THROWS_AS(cons(lit(1.0), nil(intT())), TypeMismatch);
  CHECK_THROWS_AS(fst(lit(1)), TypeMismatch);
  CHECK_THROWS_AS(seq(ret(lit(1)), ret(lit(2))), TypeMismatch);
}

TEST_CASE("typecheck revalidates a whole program and is idempotent") {
  ExprPtr prog = argmax3(1.0, 2.0, 10.0);
  TypePtr t = typecheck(prog);
  CHECK(typeEq(t, distT(intT())));
  CHECK(typeEq(typecheck(prog), t));
}

TEST_CASE("typecheck catches a manually corrupted annotation") {
  // litv lets a caller annotate a value arbitrarily; typecheck re-walks.
  ExprPtr bad = litv(intV(3), realT());
  CHECK_THROWS_AS(typecheck(bad), TypeMismatch);
}

TEST_CASE("container constructors produce the documented types") {
  ExprPtr l = cons(lit(1.0), nil(realT()));
  CHECK(typeEq(uncons(l)->type, listT(pairT(realT(), listT(realT())))));
  CHECK(typeEq(head(l)->type, realT()));
  CHECK(typeEq(isNil(l)->type, boolT()));
  CHECK(typeEq(length(l)->type, intT()));
  ExprPtr m = mapInsert(mapEmpty(intT(), realT()), lit(1), lit(0.5));
  CHECK(typeEq(mapLookup(m, lit(1))->type, listT(realT())));
  CHECK(typeEq(snoc(l, lit(2.0))->type, listT(realT())));
  CHECK(typeEq(snd(mkPair(lit(1), lit(true)))->type, boolT()));
  CHECK_NOTHROW(typecheck(ret(uncons(l))));
}

TEST_CASE("empty container literals typecheck against their annotation") {
  CHECK_NOTHROW(typecheck(litv(listV({}), listT(realT()))));
  CHECK_NOTHROW(typecheck(litv(mapV({}), mapT(intT(), unitT()))));
}

TEST_CASE("countLaplaceNodes counts statically bounded sampling") {
  CHECK(countLaplaceNodes(argmax3(1, 2, 3)) == 3);
  CHECK(countLaplaceNodes(ret(lit(1.0))) == 0);

  ExprPtr looped = loop(
      lit(0.0), [](ExprPtr s) { return lt(s, lit(3.0)); },
      [](ExprPtr s) {
        return bindM(lap(s, 1.0), [&](ExprPtr x) { return ret(x); });
      });
  CHECK_FALSE(countLaplaceNodes(looped).has_value());

  ExprPtr loopNoLap = loop(
      lit(0.0), [](ExprPtr s) { return lt(s, lit(3.0)); },
      [](ExprPtr s) { return ret(add(s, lit(1.0))); });
  CHECK(countLaplaceNodes(bindM(loopNoLap, [](ExprPtr s) {
          return bindM(lap(s, 2.0), [](ExprPtr x) { return ret(x); });
        })) == 1);
}

TEST_CASE("exprEq identifies programs built independently") {
  CHECK(exprEq(argmax3(1, 2, 10), argmax3(1, 2, 10)));
  CHECK_FALSE(exprEq(argmax3(1, 2, 10), argmax3(1, 2, 9)));
  ExprPtr a = bindM(lap(lit(0.0), 1.0), [](ExprPtr x) { return ret(x); });
  ExprPtr b = bindM(lap(lit(0.0), 2.0), [](ExprPtr x) { return ret(x); });
  CHECK_FALSE(exprEq(a, b));
}

TEST_CASE("loop construction checks condition and body shapes") {
  CHECK_THROWS_AS(loop(lit(0.0), [](ExprPtr s) { return s; },
                       [](ExprPtr s) { return ret(s); }),
                  TypeMismatch);
  CHECK_THROWS_AS(loop(lit(0.0), [](ExprPtr s) { return lt(s, lit(1.0)); },
                       [](ExprPtr s) { return ret(lt(s, s)); }),
                  TypeMismatch);
}

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dpt/expr.hpp"

namespace dpt {

// ---------------------------------------------------------------------------
// Scalar terms
//
// Terms range over the program's per-run sampling calls: Sample(i) denotes the
// value produced by the i-th Laplace call on the explored path. Constructors
// fold constants, so a term with no Sample leaf is a plain constant node.

struct SymTerm;
using TermPtr = std::shared_ptr<const SymTerm>;

struct SymTerm {
  enum class K {
    BConst, IConst, RConst, Sample,
    Add, Sub, Mul, Div,
    Lt, Le, Eq,
    Not, And, Or, Ite
  };
  K k;
  Tag type;  // Tag::Bool, Tag::Int or Tag::Real
  bool bval = false;
  int64_t ival = 0;
  double rval = 0.0;
  int sampleIndex = -1;
  TermPtr a, b, c;
};

TermPtr tBool(bool v);
TermPtr tInt(int64_t v);
TermPtr tReal(double v);
TermPtr tSample(int index);
TermPtr tAdd(TermPtr a, TermPtr b);
TermPtr tSub(TermPtr a, TermPtr b);
TermPtr tMul(TermPtr a, TermPtr b);
TermPtr tDiv(TermPtr a, TermPtr b);
TermPtr tLt(TermPtr a, TermPtr b);
TermPtr tLe(TermPtr a, TermPtr b);
TermPtr tEq(TermPtr a, TermPtr b);
TermPtr tNot(TermPtr a);
TermPtr tAnd(TermPtr a, TermPtr b);
TermPtr tOr(TermPtr a, TermPtr b);
TermPtr tIte(TermPtr c, TermPtr a, TermPtr b);

bool termIsConst(const TermPtr& t);
bool termEq(const TermPtr& a, const TermPtr& b);
std::string showTerm(const TermPtr& t);
void collectSampleIndices(const TermPtr& t, std::set<int>& out);

// Numeric evaluation with concrete values substituted for Sample leaves.
double evalRealTerm(const TermPtr& t, const std::vector<double>& samples);
int64_t evalIntTerm(const TermPtr& t, const std::vector<double>& samples);
bool evalBoolTerm(const TermPtr& t, const std::vector<double>& samples);

// ---------------------------------------------------------------------------
// Symbolic values: container structure stays concrete, scalars become terms.

struct SymValue;
using SymPairPtr = std::shared_ptr<const std::pair<SymValue, SymValue>>;
using SymListPtr = std::shared_ptr<const std::vector<SymValue>>;
// Map keys must be concrete; symbolic keys raise SymbolicUnsupported.
using SymMapPtr = std::shared_ptr<const std::map<Value, SymValue, ValueLess>>;

struct SymValue {
  std::variant<std::monostate, TermPtr, SymPairPtr, SymListPtr, SymMapPtr> v;

  SymValue() : v(std::monostate{}) {}

  bool isUnit() const { return std::holds_alternative<std::monostate>(v); }
  bool isTerm() const { return std::holds_alternative<TermPtr>(v); }
  bool isPair() const { return std::holds_alternative<SymPairPtr>(v); }
  bool isList() const { return std::holds_alternative<SymListPtr>(v); }
  bool isMap() const { return std::holds_alternative<SymMapPtr>(v); }

  const TermPtr& asTerm() const { return std::get<TermPtr>(v); }
  const SymPairPtr& asPair() const { return std::get<SymPairPtr>(v); }
  const SymListPtr& asList() const { return std::get<SymListPtr>(v); }
  const SymMapPtr& asMap() const { return std::get<SymMapPtr>(v); }
};

SymValue symUnit();
SymValue symScalar(TermPtr t);
SymValue symPair(SymValue a, SymValue b);
SymValue symList(std::vector<SymValue> xs);
SymValue symMap(std::map<Value, SymValue, ValueLess> m);

// Provenance on the input is ignored; reals become constant terms.
SymValue symOfValue(const Value& v);
// Fails (nullopt) when any scalar is not a constant term.
std::optional<Value> concreteOf(const SymValue& sv);
// Substitutes samples numerically everywhere, for path-soundness checks.
Value concretize(const SymValue& sv, const std::vector<double>& samples);
bool symValueEq(const SymValue& a, const SymValue& b);
std::string showSymValue(const SymValue& sv);

// ---------------------------------------------------------------------------
// Path exploration

struct SymSample {
  TermPtr center;  // may mention earlier samples
  double width;
};

struct PathResult {
  SymValue output;
  std::vector<TermPtr> conds;     // non-constant Bool terms, program order
  std::vector<SymSample> samples; // index in this vector = Sample index
  bool aborted = false;
  std::string abortMsg;
};

struct ExploreOptions {
  int64_t fuel = 50'000'000;
  size_t maxPaths = size_t(1) << 16;
  // False turns budget exhaustion into a partial result instead of a throw.
  bool throwOnBudget = true;
  // Unroll cutoff per loop ordinal; branches whose metric exceeds the cutoff
  // are counted as truncated and not expanded further.
  std::map<int, int64_t> loopCutoff;
};

struct ExploreResult {
  std::vector<PathResult> paths;
  int64_t truncatedCount = 0;
  bool budgetHit = false;
};

struct BudgetExceeded : std::runtime_error {
  explicit BudgetExceeded(const std::string& what) : std::runtime_error(what) {}
};

struct SymbolicUnsupported : std::runtime_error {
  explicit SymbolicUnsupported(const std::string& what) : std::runtime_error(what) {}
};

struct ReplayMismatch : std::runtime_error {
  explicit ReplayMismatch(const std::string& what) : std::runtime_error(what) {}
};

// Enumerates control paths, splitting at symbolic If and loop conditions.
// Asserts are assumptions: a concretely false assert drops the path.
ExploreResult explore(const ExprPtr& prog, const ExploreOptions& opts = {});

// Rewrites every If outside loop bodies into assert-guarded variants.
// Returns the program unchanged (singleton) when it is If-free.
std::vector<ExprPtr> streamline(const ExprPtr& prog, size_t budget = size_t(1) << 16);

// streamline, then explore each variant; paths concatenated in variant order.
ExploreResult explorePipeline(const ExprPtr& prog, const ExploreOptions& opts = {});

// Exploration with opportunistic state merging: an If whose branches each
// yield a single sample-free, condition-free path folds into Ite values
// instead of splitting.
ExploreResult exploreMerged(const ExprPtr& prog, const ExploreOptions& opts = {});

// Explores a program expected to have exactly one path (e.g. one streamline
// variant); throws ReplayMismatch otherwise.
PathResult symbolicRun(const ExprPtr& prog, const ExploreOptions& opts = {});

// Replays a recorded control-path decision sequence symbolically, yielding
// the single path that follows those decisions. Concretely decidable
// conditions must agree with the recording; symbolic ones are forced.
PathResult forcedReplay(const ExprPtr& prog, const std::vector<bool>& branches,
                        const ExploreOptions& opts = {});

}  // namespace dpt

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dpt/expr.hpp"

namespace dpt {

// Sampled reals live on the lattice center + k*grid; 2^-20 by default.
inline constexpr double kDefaultGrid = 1.0 / (1 << 20);

// ---------------------------------------------------------------------------
// Randomness

struct SplitMix64 {
  uint64_t state;
  explicit SplitMix64(uint64_t seed) : state(seed) {}
  uint64_t next();
  // Uniform in [0, 1) with 53 random bits.
  double nextUnit();
};

// Decorrelated per-run seed: same (master, pair, run) triple, same stream.
uint64_t deriveSeed(uint64_t masterSeed, uint64_t pairIdx, uint64_t runIdx);

// ---------------------------------------------------------------------------
// Lattice-valued two-sided geometric noise
//
// P(center + k*grid) = (1-a)/(1+a) * a^|k| with a = exp(-grid/width).

double pmfLatticeLaplace(int64_t k, double width, double grid);
int64_t sampleLatticeStep(SplitMix64& rng, double width, double grid);

// ---------------------------------------------------------------------------
// Samplers

struct Sampler {
  virtual ~Sampler() = default;
  virtual double sample(double center, double width) = 0;
};

struct RandomSampler final : Sampler {
  SplitMix64 rng;
  double grid;
  explicit RandomSampler(uint64_t seed, double grid = kDefaultGrid)
      : rng(seed), grid(grid) {}
  double sample(double center, double width) override;
};

// Adds pre-chosen offsets to whatever center each call presents.
struct InjectedNoiseSampler final : Sampler {
  std::vector<double> noises;
  size_t pos = 0;
  explicit InjectedNoiseSampler(std::vector<double> ns) : noises(std::move(ns)) {}
  double sample(double center, double width) override;
};

// Replays pre-chosen absolute sample values, ignoring the centers.
struct AbsoluteSampler final : Sampler {
  std::vector<double> values;
  size_t pos = 0;
  explicit AbsoluteSampler(std::vector<double> vs) : values(std::move(vs)) {}
  double sample(double center, double width) override;
};

// ---------------------------------------------------------------------------
// Instrumented execution

struct SampleInfo {
  double sample;
  double center;
  double width;
};

struct RunOutcome {
  Value output;
  std::vector<SampleInfo> trace;
  // Outcome of every If condition, loop condition and assert evaluation, in
  // execution order. Drives forced symbolic replays of the same control path.
  std::vector<bool> branches;
  bool aborted = false;
  std::string abortMsg;
  // Largest loop-metric value observed at any iteration boundary, keyed by
  // loop ordinal. Feeds the symbolic engine's unroll cutoff.
  std::map<int, int64_t> loopMetricMax;
};

struct ConcreteOptions {
  int64_t fuel = 1'000'000;
};

struct FuelExhausted : std::runtime_error {
  FuelExhausted() : std::runtime_error("evaluation fuel exhausted") {}
};

struct MetricNotMonotone : std::runtime_error {
  explicit MetricNotMonotone(const std::string& what) : std::runtime_error(what) {}
};

// Runs a distribution-typed program. Every sampled real carries provenance in
// the returned output; the trace lists sampling calls in execution order.
RunOutcome runProgram(const ExprPtr& program, Sampler& sampler,
                      const ConcreteOptions& opts = {});

}  // namespace dpt

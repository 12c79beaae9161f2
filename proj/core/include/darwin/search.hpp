#pragma once

#include <array>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "darwin/evaluate.hpp"
#include "darwin/extract.hpp"

namespace darwin {

enum class Dominance { Strict, Weak, None };

// Pareto comparison over minimized objective vectors.
Dominance dominates(const std::array<double, 3>& a, const std::array<double, 3>& b);

enum class BaselineClass { StrictlyDominant, NonDominated, Dominated };

// How a solution relates to the baseline: strict dominance claims credit on
// every measure; anything with no strict improvement anywhere (including an
// exact tie) is Dominated.
BaselineClass classify_vs_baseline(const std::array<double, 3>& solution,
                                   const std::array<double, 3>& baseline);

const char* baseline_class_name(BaselineClass c);

struct Individual {
  Genome genome;
  EvalOutcome outcome;
  int rank = 0;
  double crowding = 0;

  bool feasible() const { return outcome.feasible; }
  const std::array<double, 3>& objectives() const { return outcome.measurement.objectives; }
};

// Any feasible individual beats any infeasible one; infeasibles order by how
// far they got (failing tests beats failing to build or timing out).
bool constrained_dominates(const Individual& a, const Individual& b);

// Index fronts; assigns rank on each individual.
std::vector<std::vector<int>> fast_nondominated_sort(std::vector<Individual>& pop);

// NSGA-II crowding over one front; boundary individuals get infinity and a
// zero objective range contributes nothing.
void assign_crowding(std::vector<Individual>& pop, const std::vector<int>& front);

using Rng = std::mt19937_64;

// Deterministic helpers over the raw engine (library distributions are not
// portable across standard libraries).
std::uint64_t uniform_index(Rng& rng, std::uint64_t n);
double uniform01(Rng& rng);

// Binary tournament: lower rank wins, then larger crowding, then first drawn.
int tournament_select(const std::vector<Individual>& pop, Rng& rng);

std::pair<Genome, Genome> uniform_crossover(const Genome& a, const Genome& b,
                                            double prob, Rng& rng);

Genome uniform_mutation(const Genome& g, const GenomeSchema& schema,
                        double prob_per_gene, Rng& rng);

Genome random_genome(const GenomeSchema& schema, Rng& rng);

struct SearchParams {
  int population_size = 30;
  int max_evaluations = 900;
  double crossover_prob = 0.8;
  double mutation_prob_per_gene = 0.1;
  std::uint64_t rng_seed = 0;
  int convergence_generations = 5;
  double convergence_tolerance = 0.005;  // relative, per objective

  void validate() const;
};

struct HistoryRecord {
  int generation = 0;
  std::string hash;
  Genome genome;
  int rank = 0;
  EvalOutcome outcome;
};

using EvalFn = std::function<EvalOutcome(const Genome&)>;
using HistorySink = std::function<void(const HistoryRecord&)>;

// Evaluates a batch of distinct unevaluated genomes, result[i] belonging to
// genomes[i]. Lets the caller dispatch evaluations to worker threads; the
// search itself stays deterministic because results are consumed in index
// order. When absent, eval_fn is applied sequentially.
using BatchEvalFn =
    std::function<std::vector<EvalOutcome>(const std::vector<Genome>&)>;

struct SearchResult {
  std::vector<Individual> front;  // feasible rank-0, unique genomes
  int generations = 0;
  int evaluations = 0;
  bool converged = false;
};

// The generational loop: seeds with the original program plus random
// genomes, evolves with tournament selection, uniform crossover and uniform
// mutation, truncates (mu+lambda) by rank and crowding, and stops on budget
// or when the feasible front is stable for convergence_generations.
// eval_fn is called at most max_evaluations times and never twice for the
// same genome. Throws AllInfeasibleError when nothing feasible was found.
SearchResult nsga2_run(const GenomeSchema& schema, const EvalFn& eval_fn,
                       const SearchParams& params, const HistorySink& sink = {},
                       const BatchEvalFn& batch_eval_fn = {});

}  // namespace darwin

#include "darwin/search.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "darwin/errors.hpp"

namespace darwin {

Dominance dominates(const std::array<double, 3>& a, const std::array<double, 3>& b) {
  bool all_le = true;
  bool any_lt = false;
  bool all_lt = true;
  for (int i = 0; i < 3; ++i) {
    all_le = all_le && a[i] <= b[i];
    any_lt = any_lt || a[i] < b[i];
    all_lt = all_lt && a[i] < b[i];
  }
  if (all_lt) return Dominance::Strict;
  if (all_le && any_lt) return Dominance::Weak;
  return Dominance::None;
}

BaselineClass classify_vs_baseline(const std::array<double, 3>& solution,
                                   const std::array<double, 3>& baseline) {
  if (dominates(solution, baseline) == Dominance::Strict) {
    return BaselineClass::StrictlyDominant;
  }
  bool no_improvement = true;
  for (int i = 0; i < 3; ++i) no_improvement = no_improvement && solution[i] >= baseline[i];
  return no_improvement ? BaselineClass::Dominated : BaselineClass::NonDominated;
}

const char* baseline_class_name(BaselineClass c) {
  switch (c) {
    case BaselineClass::StrictlyDominant: return "STRICTLY_DOMINANT";
    case BaselineClass::NonDominated: return "NON_DOMINATED";
    default: return "DOMINATED";
  }
}

namespace {

// How far an infeasible variant got: tests failing beats never building and
// beats hanging; build failures and timeouts rank the same.
int stage_severity(FailStage stage) {
  return stage == FailStage::TestsFailed ? 1 : 0;
}

}  // namespace

bool constrained_dominates(const Individual& a, const Individual& b) {
  if (a.feasible() && !b.feasible()) return true;
  if (!a.feasible() && b.feasible()) return false;
  if (!a.feasible() && !b.feasible()) {
    return stage_severity(a.outcome.stage) > stage_severity(b.outcome.stage);
  }
  return dominates(a.objectives(), b.objectives()) != Dominance::None;
}

std::vector<std::vector<int>> fast_nondominated_sort(std::vector<Individual>& pop) {
  const int n = static_cast<int>(pop.size());
  std::vector<std::vector<int>> dominated_by(n);
  std::vector<int> domination_count(n, 0);
  std::vector<std::vector<int>> fronts(1);

  for (int p = 0; p < n; ++p) {
    for (int q = 0; q < n; ++q) {
      if (p == q) continue;
      if (constrained_dominates(pop[p], pop[q])) {
        dominated_by[p].push_back(q);
      } else if (constrained_dominates(pop[q], pop[p])) {
        ++domination_count[p];
      }
    }
    if (domination_count[p] == 0) {
      pop[p].rank = 0;
      fronts[0].push_back(p);
    }
  }

  int i = 0;
  while (!fronts[i].empty()) {
    std::vector<int> next;
    for (int p : fronts[i]) {
      for (int q : dominated_by[p]) {
        if (--domination_count[q] == 0) {
          pop[q].rank = i + 1;
          next.push_back(q);
        }
      }
    }
    ++i;
    fronts.push_back(std::move(next));
  }
  fronts.pop_back();
  return fronts;
}

void assign_crowding(std::vector<Individual>& pop, const std::vector<int>& front) {
  const double inf = std::numeric_limits<double>::infinity();
  for (int idx : front) pop[idx].crowding = 0;
  if (front.size() <= 2) {
    for (int idx : front) pop[idx].crowding = inf;
    return;
  }
  // infeasible fronts have no objectives to spread over
  if (!pop[front[0]].feasible()) {
    for (int idx : front) pop[idx].crowding = 0;
    return;
  }

  std::vector<int> order(front);
  for (int obj = 0; obj < 3; ++obj) {
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return pop[a].objectives()[obj] < pop[b].objectives()[obj];
    });
    const double lo = pop[order.front()].objectives()[obj];
    const double hi = pop[order.back()].objectives()[obj];
    pop[order.front()].crowding = inf;
    pop[order.back()].crowding = inf;
    if (hi <= lo) continue;  // zero range contributes nothing
    for (std::size_t k = 1; k + 1 < order.size(); ++k) {
      if (std::isinf(pop[order[k]].crowding)) continue;
      pop[order[k]].crowding += (pop[order[k + 1]].objectives()[obj] -
                                 pop[order[k - 1]].objectives()[obj]) /
                                (hi - lo);
    }
  }
}

std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  // modulo with rejection of the biased tail
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t draw;
  do {
    draw = rng();
  } while (draw >= limit);
  return draw % n;
}

double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

int tournament_select(const std::vector<Individual>& pop, Rng& rng) {
  if (pop.empty()) throw InvalidParams("tournament over empty population");
  if (pop.size() == 1) return 0;
  const int first = static_cast<int>(uniform_index(rng, pop.size()));
  int second = static_cast<int>(uniform_index(rng, pop.size() - 1));
  if (second >= first) ++second;

  const Individual& a = pop[first];
  const Individual& b = pop[second];
  if (a.rank != b.rank) return a.rank < b.rank ? first : second;
  if (a.crowding != b.crowding) return a.crowding > b.crowding ? first : second;
  return first;
}

std::pair<Genome, Genome> uniform_crossover(const Genome& a, const Genome& b,
                                            double prob, Rng& rng) {
  if (a.values.size() != b.values.size()) {
    throw SchemaMismatch("crossover parents have different gene counts");
  }
  Genome c1 = a;
  Genome c2 = b;
  if (uniform01(rng) < prob) {
    for (std::size_t i = 0; i < c1.values.size(); ++i) {
      if (uniform01(rng) < 0.5) std::swap(c1.values[i], c2.values[i]);
    }
  }
  return {std::move(c1), std::move(c2)};
}

Genome uniform_mutation(const Genome& g, const GenomeSchema& schema,
                        double prob_per_gene, Rng& rng) {
  if (g.values.size() != schema.genes.size()) {
    throw SchemaMismatch("genome does not match schema");
  }
  Genome out = g;
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    if (uniform01(rng) < prob_per_gene) {
      out.values[i] = static_cast<int>(
          uniform_index(rng, static_cast<std::uint64_t>(schema.genes[i].cardinality)));
    }
  }
  return out;
}

Genome random_genome(const GenomeSchema& schema, Rng& rng) {
  Genome g;
  g.values.reserve(schema.genes.size());
  for (const auto& gene : schema.genes) {
    g.values.push_back(static_cast<int>(
        uniform_index(rng, static_cast<std::uint64_t>(gene.cardinality))));
  }
  return g;
}

void SearchParams::validate() const {
  if (population_size < 4 || population_size % 2 != 0) {
    throw InvalidParams("population_size must be even and >= 4");
  }
  auto prob_ok = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob_ok(crossover_prob) || !prob_ok(mutation_prob_per_gene)) {
    throw InvalidParams("probabilities must lie in [0, 1]");
  }
  if (max_evaluations < 0) throw InvalidParams("max_evaluations must be >= 0");
  if (convergence_generations < 1) {
    throw InvalidParams("convergence_generations must be >= 1");
  }
}

namespace {

using ObjectiveSet = std::vector<std::array<double, 3>>;

// Distinct rank-0 feasible objective vectors. The population may carry
// duplicate individuals; how many copies of a vector survive truncation is
// an artifact, so stability is judged on the distinct vectors only.
ObjectiveSet front_signature(const std::vector<Individual>& pop) {
  std::set<std::array<double, 3>> distinct;
  for (const auto& ind : pop) {
    if (ind.rank == 0 && ind.feasible()) distinct.insert(ind.objectives());
  }
  return ObjectiveSet(distinct.begin(), distinct.end());
}

bool signatures_close(const ObjectiveSet& a, const ObjectiveSet& b, double tol) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (int o = 0; o < 3; ++o) {
      const double scale = std::max({std::fabs(a[i][o]), std::fabs(b[i][o]), 1e-12});
      if (std::fabs(a[i][o] - b[i][o]) > tol * scale) return false;
    }
  }
  return true;
}

}  // namespace

namespace {

// Search-space size saturated at 2^62; anything near that is "huge".
std::uint64_t saturated_space(const GenomeSchema& schema) {
  const std::uint64_t cap = 1ull << 62;
  std::uint64_t space = 1;
  for (const auto& gene : schema.genes) {
    if (space > cap / std::max(gene.cardinality, 1)) return cap;
    space *= static_cast<std::uint64_t>(gene.cardinality);
  }
  return space;
}

// Lexicographic cursor over all genomes, gene 0 fastest.
class GenomeCursor {
 public:
  explicit GenomeCursor(const GenomeSchema& schema) : schema_(schema) {
    current_.values.assign(schema.genes.size(), 0);
  }

  bool next(Genome& out) {
    if (done_) return false;
    out = current_;
    std::size_t i = 0;
    for (; i < current_.values.size(); ++i) {
      if (++current_.values[i] < schema_.genes[i].cardinality) break;
      current_.values[i] = 0;
    }
    if (i == current_.values.size()) done_ = true;
    return true;
  }

  bool done() const { return done_; }

 private:
  const GenomeSchema& schema_;
  Genome current_;
  bool done_ = false;
};

}  // namespace

SearchResult nsga2_run(const GenomeSchema& schema, const EvalFn& eval_fn,
                       const SearchParams& params, const HistorySink& sink,
                       const BatchEvalFn& batch_eval_fn) {
  params.validate();
  Rng rng(params.rng_seed);

  // A genetic search earns its keep on huge spaces. When every variant fits
  // within the evaluation budget the sweep is exhaustive instead, and the
  // returned front is exact by construction.
  const bool exhaustive = saturated_space(schema) <=
                          static_cast<std::uint64_t>(std::max(params.max_evaluations, 0));
  GenomeCursor cursor(schema);

  int evaluations = 0;
  std::unordered_map<std::string, EvalOutcome> memo;

  // Evaluates the not-yet-seen prefix of a candidate list that fits in the
  // remaining budget; candidates beyond it are dropped for this generation.
  auto evaluate_batch = [&](const std::vector<Genome>& candidates) {
    std::vector<Genome> fresh;
    std::unordered_set<std::string> queued;
    for (const auto& g : candidates) {
      const std::string hash = genome_hash(g);
      if (memo.count(hash) || !queued.insert(hash).second) continue;
      if (evaluations + static_cast<int>(fresh.size()) >= params.max_evaluations) break;
      fresh.push_back(g);
    }
    if (fresh.empty()) return;
    std::vector<EvalOutcome> outcomes;
    if (batch_eval_fn) {
      outcomes = batch_eval_fn(fresh);
    } else {
      outcomes.reserve(fresh.size());
      for (const auto& g : fresh) outcomes.push_back(eval_fn(g));
    }
    for (std::size_t i = 0; i < fresh.size(); ++i) {
      memo.emplace(genome_hash(fresh[i]), outcomes[i]);
      ++evaluations;
    }
  };

  std::vector<Genome> initial{schema.seed};
  for (int i = 1; i < params.population_size; ++i) {
    initial.push_back(random_genome(schema, rng));
  }
  evaluate_batch(initial);

  // duplicates stay distinct individuals so the population keeps its size;
  // they share one memo entry and never cost a second evaluation
  std::vector<Individual> pop;
  for (const auto& g : initial) {
    auto it = memo.find(genome_hash(g));
    if (it != memo.end()) pop.push_back({g, it->second, 0, 0});
  }

  auto emit_history = [&](int generation) {
    if (!sink) return;
    for (const auto& ind : pop) {
      sink({generation, genome_hash(ind.genome), ind.genome, ind.rank, ind.outcome});
    }
  };

  auto sort_and_crowd = [&](std::vector<Individual>& population) {
    auto fronts = fast_nondominated_sort(population);
    for (const auto& front : fronts) assign_crowding(population, front);
    return fronts;
  };

  int generation = 0;
  bool converged = false;
  if (!pop.empty()) {
    sort_and_crowd(pop);
    emit_history(generation);
  }

  ObjectiveSet last_signature = front_signature(pop);
  int stable = 0;
  int stagnant = 0;  // generations without any new evaluation

  while (!pop.empty() && evaluations < params.max_evaluations && !converged) {
    ++generation;
    const int evals_before = evaluations;

    std::vector<Genome> offspring;
    if (exhaustive) {
      Genome g;
      while (static_cast<int>(offspring.size()) < params.population_size &&
             cursor.next(g)) {
        if (!memo.count(genome_hash(g))) offspring.push_back(g);
      }
    }
    while (static_cast<int>(offspring.size()) < params.population_size) {
      const Genome& p1 = pop[tournament_select(pop, rng)].genome;
      const Genome& p2 = pop[tournament_select(pop, rng)].genome;
      auto [c1, c2] = uniform_crossover(p1, p2, params.crossover_prob, rng);
      offspring.push_back(uniform_mutation(c1, schema, params.mutation_prob_per_gene, rng));
      if (static_cast<int>(offspring.size()) < params.population_size) {
        offspring.push_back(uniform_mutation(c2, schema, params.mutation_prob_per_gene, rng));
      }
    }
    evaluate_batch(offspring);

    std::vector<Individual> combined = pop;
    for (const auto& child : offspring) {
      auto it = memo.find(genome_hash(child));
      if (it == memo.end()) continue;  // dropped by the budget
      combined.push_back({child, it->second, 0, 0});
    }

    auto fronts = sort_and_crowd(combined);

    std::vector<Individual> next;
    next.reserve(params.population_size);
    for (const auto& front : fronts) {
      if (next.size() + front.size() <= static_cast<std::size_t>(params.population_size)) {
        for (int idx : front) next.push_back(combined[idx]);
        continue;
      }
      std::vector<int> sorted(front);
      std::stable_sort(sorted.begin(), sorted.end(), [&](int a, int b) {
        return combined[a].crowding > combined[b].crowding;
      });
      // duplicate individuals share crowding values; cutting by crowding
      // alone can evict every copy of a vector while copies of another
      // survive, so distinct objective vectors go first
      std::vector<int> ordered;
      ordered.reserve(sorted.size());
      std::set<std::array<double, 3>> seen_vectors;
      std::vector<bool> placed(sorted.size(), false);
      for (std::size_t k = 0; k < sorted.size(); ++k) {
        const Individual& ind = combined[sorted[k]];
        if (!ind.feasible() || seen_vectors.insert(ind.objectives()).second) {
          ordered.push_back(sorted[k]);
          placed[k] = true;
        }
      }
      for (std::size_t k = 0; k < sorted.size(); ++k) {
        if (!placed[k]) ordered.push_back(sorted[k]);
      }
      for (int idx : ordered) {
        if (next.size() >= static_cast<std::size_t>(params.population_size)) break;
        next.push_back(combined[idx]);
      }
      break;
    }
    pop = std::move(next);
    sort_and_crowd(pop);
    emit_history(generation);

    auto signature = front_signature(pop);
    const bool mid_sweep = exhaustive && !cursor.done();
    if (!mid_sweep && !signature.empty() &&
        signatures_close(signature, last_signature, params.convergence_tolerance)) {
      if (++stable >= params.convergence_generations) converged = true;
    } else {
      stable = 0;
    }
    last_signature = std::move(signature);

    // a fully memoized search space cannot spend budget; stop once it has
    // had ample generations to settle
    stagnant = evaluations == evals_before ? stagnant + 1 : 0;
    if (stagnant > std::max(200, 4 * params.convergence_generations)) break;
  }

  // final feasible front, unique genomes
  SearchResult result;
  result.generations = generation;
  result.evaluations = evaluations;
  result.converged = converged;

  std::unordered_set<std::string> seen;
  for (const auto& ind : pop) {
    if (ind.rank != 0 || !ind.feasible()) continue;
    if (seen.insert(genome_hash(ind.genome)).second) result.front.push_back(ind);
  }
  if (result.front.empty()) {
    std::map<std::string, int> stages;
    for (const auto& [hash, outcome] : memo) {
      if (!outcome.feasible) ++stages[fail_stage_name(outcome.stage)];
    }
    std::string most_common = "none";
    int best = -1;
    for (const auto& [stage, count] : stages) {
      if (count > best) {
        best = count;
        most_common = stage;
      }
    }
    throw AllInfeasibleError("no feasible variant found; most common failure: " +
                             most_common);
  }
  return result;
}

}  // namespace darwin

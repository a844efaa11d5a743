#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "cfrec/errors.hpp"
#include "cfrec/evaluation.hpp"
#include "cfrec/feature_space.hpp"
#include "cfrec/knn.hpp"
#include "cfrec/recommender.hpp"

namespace cfrec {

inline constexpr std::size_t kGeneCount = 6;

// Genes are the six group weights in fixed order: association, engagement,
// rating, age, skills, location.
using Genes = std::array<double, kGeneCount>;

inline GroupWeights weights_from_genes(const Genes& g) {
  return GroupWeights{g[0], g[1], g[2], g[3], g[4], g[5]};
}

struct GaConfig {
  std::size_t population_size = 32;
  std::size_t generations = 50;
  std::size_t tournament_size = 3;
  double crossover_gene_prob = 0.5;  // per-gene chance of taking parent B
  double mutation_sigma = 0.1;       // additive Gaussian, clipped to bounds
  std::size_t elitism = 1;
  std::uint64_t rng_seed = 0;  // required by callers; no default entropy
  double gene_min = 0.0;
  double gene_max = 10.0;
};

inline void validate_ga_config(const GaConfig& c) {
  if (c.population_size < 2) {
    throw ValidationError("population_size", "population must be >= 2");
  }
  if (c.generations < 1) {
    throw ValidationError("generations", "generations must be >= 1");
  }
  if (c.tournament_size < 1 || c.tournament_size > c.population_size) {
    throw ValidationError("tournament_size",
                          "tournament size must lie in [1, population]");
  }
  if (!(c.mutation_sigma >= 0.0)) {
    throw ValidationError("mutation_sigma", "sigma must be >= 0");
  }
  if (!(c.gene_min >= 0.0) || !(c.gene_max > c.gene_min)) {
    throw ValidationError("gene_max", "gene bounds must satisfy 0 <= min < max");
  }
}

struct Individual {
  Genes genes{};
  std::optional<double> fitness;
};

struct GaTracePoint {
  std::size_t generation = 0;
  double best_fitness = 0.0;
  double mean_fitness = 0.0;
};

struct GaResult {
  Genes best_genes{};
  double best_fitness = 0.0;
  std::vector<GaTracePoint> trace;  // generation 0 = initial population
};

inline std::string trace_to_csv(const std::vector<GaTracePoint>& trace) {
  std::string csv = "generation,best_fitness,mean_fitness\n";
  for (const GaTracePoint& p : trace) {
    csv += std::to_string(p.generation) + "," +
           nlohmann::json(p.best_fitness).dump() + "," +
           nlohmann::json(p.mean_fitness).dump() + "\n";
  }
  return csv;
}

// Fitness of one weight assignment: mean precision@n over every holdout
// user, recommending with cf_recommend on the train-side index. Pure -- no
// randomness -- so evaluations can run in any order.
inline double fitness_on_index(const Genes& genes, const ProfileIndex& index,
                               const Split& split, std::size_t k,
                               std::size_t n) {
  if (split.holdout_events.empty()) {
    throw ValidationError("holdout", "fitness requires a non-empty holdout");
  }
  const auto weights = expand_weights(weights_from_genes(genes), index.schema());
  double sum = 0.0;
  std::size_t users = 0;
  for (const auto& [user, _] : split.holdout_events) {
    if (!index.find(user)) continue;
    std::vector<std::string> recommended;
    for (const Recommendation& r : cf_recommend(index, user, k, n, weights)) {
      recommended.push_back(r.deck_id);
    }
    sum += precision_at_n(recommended, split.relevant.at(user), n);
    ++users;
  }
  if (users == 0) {
    throw ValidationError("holdout", "no holdout user is present in the index");
  }
  return sum / double(users);
}

inline double fitness(const Genes& genes, const Split& split,
                      const EvalParams& params) {
  const FeatureSchema schema = schema_from_store(split.train);
  UtcTime reference{};
  for (const ActivityEvent& ev : split.train.events()) {
    reference = std::max(reference, ev.timestamp);
  }
  const ProfileIndex index =
      ProfileIndex::build(split.train, schema, params.window, reference);
  return fitness_on_index(genes, index, split, params.k, params.n);
}

namespace detail {

// Index of the fittest individual; ties resolve to the lowest index so the
// loop stays deterministic.
inline std::size_t fittest(const std::vector<Individual>& population) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < population.size(); ++i) {
    if (*population[i].fitness > *population[best].fitness) best = i;
  }
  return best;
}

}  // namespace detail

// Generational GA over the six group weights: tournament selection, uniform
// crossover, additive Gaussian mutation clipped to the gene bounds, one
// elite carried over unchanged. One individual of the initial population is
// pinned to all-ones as the unweighted baseline, so the result can never
// fall below it. Fully reproducible from rng_seed.
inline GaResult optimize_weights(const RecordStore& store,
                                 const GaConfig& config,
                                 const EvalParams& params) {
  validate_ga_config(config);
  const Split split = temporal_split(store, params.holdout_fraction);
  if (split.holdout_events.size() < 2) {
    throw ValidationError("store",
                          "weight optimization needs at least two users with "
                          "holdout-eligible activity");
  }
  const FeatureSchema schema = schema_from_store(split.train);
  UtcTime reference{};
  for (const ActivityEvent& ev : split.train.events()) {
    reference = std::max(reference, ev.timestamp);
  }
  const ProfileIndex index =
      ProfileIndex::build(split.train, schema, params.window, reference);

  std::mt19937_64 rng(config.rng_seed);
  std::uniform_real_distribution<double> gene_init(config.gene_min,
                                                   config.gene_max);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0,
                                                  config.population_size - 1);

  auto evaluate = [&](Individual& ind) {
    if (!ind.fitness) {
      ind.fitness =
          fitness_on_index(ind.genes, index, split, params.k, params.n);
    }
  };

  std::vector<Individual> population(config.population_size);
  population[0].genes.fill(1.0);  // baseline anchor
  for (std::size_t i = 1; i < population.size(); ++i) {
    for (double& g : population[i].genes) g = gene_init(rng);
  }
  for (Individual& ind : population) evaluate(ind);

  auto tournament = [&]() -> const Individual& {
    std::size_t best = pick(rng);
    for (std::size_t t = 1; t < config.tournament_size; ++t) {
      const std::size_t challenger = pick(rng);
      if (*population[challenger].fitness > *population[best].fitness ||
          (*population[challenger].fitness == *population[best].fitness &&
           challenger < best)) {
        best = challenger;
      }
    }
    return population[best];
  };

  GaResult result;
  const std::size_t elite0 = detail::fittest(population);
  result.best_genes = population[elite0].genes;
  result.best_fitness = *population[elite0].fitness;

  auto record = [&](std::size_t generation) {
    double sum = 0.0, best = *population[0].fitness;
    for (const Individual& ind : population) {
      sum += *ind.fitness;
      best = std::max(best, *ind.fitness);
    }
    result.trace.push_back(
        GaTracePoint{generation, best, sum / double(population.size())});
  };
  record(0);

  for (std::size_t gen = 1; gen <= config.generations; ++gen) {
    std::vector<Individual> next;
    next.reserve(config.population_size);
    std::vector<std::size_t> ranked(population.size());
    for (std::size_t i = 0; i < ranked.size(); ++i) ranked[i] = i;
    std::sort(ranked.begin(), ranked.end(), [&](std::size_t x, std::size_t y) {
      return *population[x].fitness != *population[y].fitness
                 ? *population[x].fitness > *population[y].fitness
                 : x < y;
    });
    for (std::size_t e = 0; e < std::min(config.elitism, population.size());
         ++e) {
      next.push_back(population[ranked[e]]);
    }
    while (next.size() < config.population_size) {
      const Individual& a = tournament();
      const Individual& b = tournament();
      Individual child;
      for (std::size_t g = 0; g < kGeneCount; ++g) {
        child.genes[g] =
            coin(rng) < config.crossover_gene_prob ? b.genes[g] : a.genes[g];
      }
      if (config.mutation_sigma > 0.0) {
        std::normal_distribution<double> noise(0.0, config.mutation_sigma);
        for (double& g : child.genes) {
          g = std::clamp(g + noise(rng), config.gene_min, config.gene_max);
        }
      }
      next.push_back(std::move(child));
    }
    population = std::move(next);
    for (Individual& ind : population) evaluate(ind);
    record(gen);

    const std::size_t best = detail::fittest(population);
    if (*population[best].fitness > result.best_fitness) {
      result.best_fitness = *population[best].fitness;
      result.best_genes = population[best].genes;
    }
  }
  return result;
}

}  // namespace cfrec

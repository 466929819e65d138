#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <array>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "devo/error.hpp"
#include "devo/parallel.hpp"
#include "devo/rng.hpp"
#include "devo/selection.hpp"

namespace devo {

enum class Species : std::uint8_t { A = 0, B = 1, C = 2 };
inline constexpr std::size_t kSpeciesCount = 3;
char species_label(Species s) noexcept;

struct EvoConfig {
  std::size_t population = 20;
  std::size_t generations = 20;
  std::size_t tournament_size = 3;
  double mutation_rate = 0.05;
  double species_switch_rate = 0.05;
  std::size_t elitism = 1;  // per non-empty species
  std::uint64_t seed = 0;
  unsigned threads = 1;
  bool audit = false;  // keep one record per breeding event

  void validate() const;
};

template <typename G>
struct Individual {
  G genome;
  Species species = Species::A;
  std::optional<double> fitness;
  std::size_t born = 0;   // generation of creation
  std::size_t index = 0;  // position among that generation's newcomers
};

struct GenerationRecord {
  std::size_t generation = 0;
  double best_fitness = 0.0;
  std::string best_genome;
  Species best_species = Species::A;
  std::array<std::size_t, kSpeciesCount> species_sizes{};
  std::size_t evaluations = 0;
};

struct BreedingEvent {
  std::size_t generation = 0;
  Species parent1 = Species::A;
  Species parent2 = Species::A;
  Species offspring = Species::A;
};

struct EvoTrace {
  std::vector<GenerationRecord> generations;
  std::vector<BreedingEvent> audit;
  std::vector<std::string> failures;  // fitness evaluations that threw
  std::vector<std::size_t> population_sizes;

  std::string to_json() const;
};

/// Genome-specific variation operators plugged into the engine.
template <typename Ops>
concept GenomeOps = requires(const Ops ops, typename Ops::Genome g, Rng& rng, double rate) {
  { ops.sample(rng) } -> std::same_as<typename Ops::Genome>;
  { ops.crossover(g, g, rng) } -> std::same_as<typename Ops::Genome>;
  { ops.mutate(g, rate, rng) } -> std::same_as<void>;
  { ops.describe(g) } -> std::same_as<std::string>;
};

template <typename G>
using FitnessFn = std::function<double(const G&, std::uint64_t seed)>;

template <typename G>
struct EvoResult {
  EvoTrace trace;
  Individual<G> best;
  std::vector<Individual<G>> population;
};

namespace detail {

inline constexpr std::uint64_t kInitTag = 0x1417;
inline constexpr std::uint64_t kBreedTag = 0xb4eed;
inline constexpr std::uint64_t kFitnessTag = 0xf17;

template <typename G>
bool ranks_before(const Individual<G>& a, const Individual<G>& b) {
  const double fa = a.fitness.value_or(kUnfit), fb = b.fitness.value_or(kUnfit);
  if (fa != fb) return fa > fb;
  if (a.born != b.born) return a.born < b.born;
  return a.index < b.index;
}

template <typename G>
void evaluate_all(std::vector<Individual<G>>& members, std::size_t generation, const EvoConfig& config,
                  const FitnessFn<G>& fitness, EvoTrace& trace) {
  std::vector<std::string> errors(members.size());
  parallel_for(members.size(), config.threads, [&](std::size_t i) {
    auto& m = members[i];
    if (m.fitness) return;
    const std::uint64_t seed = derive_seed(config.seed, {kFitnessTag, generation, m.index});
    try {
      const double f = fitness(m.genome, seed);
      m.fitness = std::isnan(f) ? kUnfit : f;
    } catch (const std::exception& e) {
      m.fitness = kUnfit;
      errors[i] = e.what();
    }
  });
  for (std::size_t i = 0; i < errors.size(); ++i)
    if (!errors[i].empty())
      trace.failures.push_back("generation " + std::to_string(generation) + " individual " +
                               std::to_string(members[i].index) + ": " + errors[i]);
}

template <typename Ops>
void record(const std::vector<Individual<typename Ops::Genome>>& pop, std::size_t generation, std::size_t evaluations,
            const Ops& ops, EvoTrace& trace) {
  GenerationRecord rec;
  rec.generation = generation;
  rec.evaluations = evaluations;
  const auto best = std::min_element(pop.begin(), pop.end(), ranks_before<typename Ops::Genome>);
  rec.best_fitness = best->fitness.value_or(kUnfit);
  rec.best_genome = ops.describe(best->genome);
  rec.best_species = best->species;
  for (const auto& m : pop) ++rec.species_sizes[static_cast<std::size_t>(m.species)];
  trace.generations.push_back(std::move(rec));
  trace.population_sizes.push_back(pop.size());
}

}  // namespace detail

/// Random genomes with species drawn uniformly from {A, B, C}; unevaluated.
template <GenomeOps Ops>
std::vector<Individual<typename Ops::Genome>> init_population(const EvoConfig& config, const Ops& ops) {
  config.validate();
  Rng rng(derive_seed(config.seed, {detail::kInitTag}));
  std::vector<Individual<typename Ops::Genome>> pop;
  pop.reserve(config.population);
  for (std::size_t i = 0; i < config.population; ++i) {
    Individual<typename Ops::Genome> ind;
    ind.genome = ops.sample(rng);
    ind.species = static_cast<Species>(rng.below(kSpeciesCount));
    ind.born = 0;
    ind.index = i;
    pop.push_back(std::move(ind));
  }
  return pop;
}

/// Index into `pool` of the fittest of k members drawn with replacement.
template <typename G>
std::size_t tournament_select(std::span<const Individual<G>* const> pool, std::size_t k, Rng& rng) {
  require(!pool.empty(), ErrorKind::ConfigError, "tournament over an empty pool");
  std::size_t best = rng.below(pool.size());
  for (std::size_t i = 1; i < k; ++i) {
    const std::size_t pick = rng.below(pool.size());
    if (detail::ranks_before(*pool[pick], *pool[best])) best = pick;
  }
  return best;
}

/// Crossover then mutation; the child inherits the shared parent species and
/// may switch to one of the other two with probability species_switch_rate.
template <GenomeOps Ops>
Individual<typename Ops::Genome> breed(const Individual<typename Ops::Genome>& parent1,
                                       const Individual<typename Ops::Genome>& parent2, const Ops& ops,
                                       const EvoConfig& config, Rng& rng) {
  require(parent1.species == parent2.species, ErrorKind::SpeciesViolation,
          std::string("parents of species ") + species_label(parent1.species) + " and " +
              species_label(parent2.species) + " cannot breed");
  Individual<typename Ops::Genome> child;
  child.genome = ops.crossover(parent1.genome, parent2.genome, rng);
  ops.mutate(child.genome, config.mutation_rate, rng);
  child.species = parent1.species;
  if (config.species_switch_rate > 0.0 && rng.bernoulli(config.species_switch_rate)) {
    const auto shift = 1 + rng.below(kSpeciesCount - 1);
    child.species = static_cast<Species>((static_cast<std::size_t>(parent1.species) + shift) % kSpeciesCount);
  }
  return child;
}

/// Speciated generational loop: within-species tournament breeding (species
/// with a single member do not reproduce), parents and offspring merged and
/// truncated back to `population` with per-species elitism.
template <GenomeOps Ops>
EvoResult<typename Ops::Genome> evolve(const EvoConfig& config, const Ops& ops,
                                       const FitnessFn<typename Ops::Genome>& fitness) {
  using G = typename Ops::Genome;
  config.validate();
  EvoResult<G> result;
  auto& trace = result.trace;

  auto pop = init_population(config, ops);
  detail::evaluate_all(pop, 0, config, fitness, trace);
  detail::record(pop, 0, pop.size(), ops, trace);

  for (std::size_t gen = 1; gen <= config.generations; ++gen) {
    Rng rng(derive_seed(config.seed, {detail::kBreedTag, gen}));

    std::array<std::vector<const Individual<G>*>, kSpeciesCount> by_species;
    for (const auto& m : pop) by_species[static_cast<std::size_t>(m.species)].push_back(&m);
    std::vector<const Individual<G>*> eligible;
    for (const auto& m : pop)
      if (by_species[static_cast<std::size_t>(m.species)].size() >= 2) eligible.push_back(&m);

    std::vector<Individual<G>> offspring;
    if (!eligible.empty()) {
      offspring.reserve(config.population);
      for (std::size_t o = 0; o < config.population; ++o) {
        const auto* p1 = eligible[tournament_select<G>(eligible, config.tournament_size, rng)];
        std::vector<const Individual<G>*> mates;
        for (const auto* m : by_species[static_cast<std::size_t>(p1->species)])
          if (m != p1) mates.push_back(m);
        const auto* p2 = mates[tournament_select<G>(mates, config.tournament_size, rng)];
        auto child = breed(*p1, *p2, ops, config, rng);
        child.born = gen;
        child.index = o;
        if (config.audit) trace.audit.push_back({gen, p1->species, p2->species, child.species});
        offspring.push_back(std::move(child));
      }
    }
    detail::evaluate_all(offspring, gen, config, fitness, trace);

    std::vector<Individual<G>> merged = std::move(pop);
    for (auto& c : offspring) merged.push_back(std::move(c));
    std::sort(merged.begin(), merged.end(), detail::ranks_before<G>);

    std::vector<bool> keep(merged.size(), false);
    std::size_t kept = 0;
    std::array<std::size_t, kSpeciesCount> elites{};
    for (std::size_t i = 0; i < merged.size() && kept < config.population; ++i) {
      auto& slot = elites[static_cast<std::size_t>(merged[i].species)];
      if (slot < config.elitism) {
        ++slot;
        keep[i] = true;
        ++kept;
      }
    }
    for (std::size_t i = 0; i < merged.size() && kept < config.population; ++i)
      if (!keep[i]) {
        keep[i] = true;
        ++kept;
      }
    pop.clear();
    for (std::size_t i = 0; i < merged.size(); ++i)
      if (keep[i]) pop.push_back(std::move(merged[i]));

    detail::record(pop, gen, offspring.size(), ops, trace);
  }

  result.best = *std::min_element(pop.begin(), pop.end(), detail::ranks_before<G>);
  result.population = std::move(pop);
  return result;
}

/// Baseline with the same evaluation budget as evolve(): every generation
/// draws `population` fresh genomes and the best-so-far is tracked.
template <GenomeOps Ops>
EvoTrace random_search(const EvoConfig& config, const Ops& ops, const FitnessFn<typename Ops::Genome>& fitness) {
  using G = typename Ops::Genome;
  config.validate();
  EvoTrace trace;
  std::optional<Individual<G>> best;
  for (std::size_t gen = 0; gen <= config.generations; ++gen) {
    Rng rng(derive_seed(config.seed, {detail::kInitTag, gen}));
    std::vector<Individual<G>> batch;
    for (std::size_t i = 0; i < config.population; ++i) {
      Individual<G> ind;
      ind.genome = ops.sample(rng);
      ind.born = gen;
      ind.index = i;
      batch.push_back(std::move(ind));
    }
    detail::evaluate_all(batch, gen, config, fitness, trace);
    for (auto& b : batch)
      if (!best || detail::ranks_before(b, *best)) best = b;
    std::vector<Individual<G>> snapshot{*best};
    detail::record(snapshot, gen, batch.size(), ops, trace);
  }
  return trace;
}

/// Bit-string genome for attribute subsets.
struct MaskOps {
  using Genome = AttributeMask;
  std::size_t length = 0;
  double init_density = 0.1;

  AttributeMask sample(Rng& rng) const;
  AttributeMask crossover(const AttributeMask& a, const AttributeMask& b, Rng& rng) const;
  void mutate(AttributeMask& g, double rate, Rng& rng) const;
  std::string describe(const AttributeMask& g) const;
};

struct TopologyGenome {
  std::vector<int> layers;  // hidden-layer sizes
  bool operator==(const TopologyGenome&) const = default;
};

inline constexpr std::size_t kMaxHiddenLayers = 3;
inline constexpr int kMaxNeurons = 100;

/// Layer-list genome: one-point crossover, per-gene ±1..10 perturbation and
/// layer insertion/removal at the mutation rate; always re-clamped.
struct TopologyOps {
  using Genome = TopologyGenome;
  int init_max_neurons = kMaxNeurons;

  TopologyGenome sample(Rng& rng) const;
  TopologyGenome crossover(const TopologyGenome& a, const TopologyGenome& b, Rng& rng) const;
  void mutate(TopologyGenome& g, double rate, Rng& rng) const;
  std::string describe(const TopologyGenome& g) const;
  static void clamp(TopologyGenome& g);
};

bool valid(const TopologyGenome& g) noexcept;

}  // namespace devo

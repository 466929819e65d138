#include "devo/evolution.hpp"

#include <nlohmann/json.hpp>
#include <sstream>

namespace devo {

char species_label(Species s) noexcept { return static_cast<char>('A' + static_cast<int>(s)); }

void EvoConfig::validate() const {
  require(population >= 2, ErrorKind::ConfigError, "population must be at least 2");
  require(tournament_size >= 1, ErrorKind::ConfigError, "tournament size must be at least 1");
  require(mutation_rate >= 0.0 && mutation_rate <= 1.0, ErrorKind::ConfigError, "mutation rate must lie in [0,1]");
  require(species_switch_rate >= 0.0 && species_switch_rate <= 1.0, ErrorKind::ConfigError,
          "species switch rate must lie in [0,1]");
}

std::string EvoTrace::to_json() const {
  nlohmann::json doc;
  doc["format"] = "devo-evo-trace";
  doc["version"] = 1;
  nlohmann::json gens = nlohmann::json::array();
  for (const auto& g : generations) {
    nlohmann::json rec;
    rec["generation"] = g.generation;
    if (std::isfinite(g.best_fitness))
      rec["best_fitness"] = g.best_fitness;
    else
      rec["best_fitness"] = nullptr;
    rec["best_genome"] = g.best_genome;
    rec["best_species"] = std::string(1, species_label(g.best_species));
    rec["species"] = {{"A", g.species_sizes[0]}, {"B", g.species_sizes[1]}, {"C", g.species_sizes[2]}};
    rec["evaluations"] = g.evaluations;
    gens.push_back(rec);
  }
  doc["generations"] = gens;
  doc["failures"] = failures;
  return doc.dump(2);
}

AttributeMask MaskOps::sample(Rng& rng) const {
  AttributeMask m = AttributeMask::none(length);
  for (std::size_t i = 0; i < length; ++i) m.bits[i] = rng.bernoulli(init_density);
  if (length > 0 && m.count() == 0) m.bits[rng.below(length)] = true;
  return m;
}

AttributeMask MaskOps::crossover(const AttributeMask& a, const AttributeMask& b, Rng& rng) const {
  require(a.size() == b.size(), ErrorKind::ShapeError, "mask parents differ in length");
  AttributeMask child = a;
  for (std::size_t i = 0; i < a.size(); ++i) child.bits[i] = rng.bernoulli(0.5) ? a.bits[i] : b.bits[i];
  return child;
}

void MaskOps::mutate(AttributeMask& g, double rate, Rng& rng) const {
  if (rate <= 0.0) return;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (rng.bernoulli(rate)) g.bits[i] = !g.bits[i];
}

std::string MaskOps::describe(const AttributeMask& g) const {
  std::string s;
  s.reserve(g.size());
  for (bool b : g.bits) s.push_back(b ? '1' : '0');
  return s;
}

bool valid(const TopologyGenome& g) noexcept {
  if (g.layers.empty() || g.layers.size() > kMaxHiddenLayers) return false;
  return std::all_of(g.layers.begin(), g.layers.end(), [](int n) { return n >= 1 && n <= kMaxNeurons; });
}

void TopologyOps::clamp(TopologyGenome& g) {
  if (g.layers.size() > kMaxHiddenLayers) g.layers.resize(kMaxHiddenLayers);
  if (g.layers.empty()) g.layers.push_back(1);
  for (int& n : g.layers) n = std::clamp(n, 1, kMaxNeurons);
}

TopologyGenome TopologyOps::sample(Rng& rng) const {
  TopologyGenome g;
  const int depth = rng.between(1, static_cast<int>(kMaxHiddenLayers));
  for (int i = 0; i < depth; ++i) g.layers.push_back(rng.between(1, std::clamp(init_max_neurons, 1, kMaxNeurons)));
  return g;
}

TopologyGenome TopologyOps::crossover(const TopologyGenome& a, const TopologyGenome& b, Rng& rng) const {
  // child = a[0, cut) + b[cut, end); identical parents reproduce themselves
  const std::size_t cut = 1 + rng.below(a.layers.size());
  TopologyGenome child;
  child.layers.assign(a.layers.begin(), a.layers.begin() + static_cast<std::ptrdiff_t>(cut));
  for (std::size_t i = cut; i < b.layers.size(); ++i) child.layers.push_back(b.layers[i]);
  clamp(child);
  return child;
}

void TopologyOps::mutate(TopologyGenome& g, double rate, Rng& rng) const {
  if (rate <= 0.0) {
    clamp(g);
    return;
  }
  for (int& n : g.layers)
    if (rng.bernoulli(rate)) n += (rng.bernoulli(0.5) ? 1 : -1) * rng.between(1, 10);
  if (g.layers.size() < kMaxHiddenLayers && rng.bernoulli(rate)) {
    const auto pos = static_cast<std::ptrdiff_t>(rng.below(g.layers.size() + 1));
    g.layers.insert(g.layers.begin() + pos, rng.between(1, std::clamp(init_max_neurons, 1, kMaxNeurons)));
  }
  if (g.layers.size() > 1 && rng.bernoulli(rate)) g.layers.erase(g.layers.begin() + static_cast<std::ptrdiff_t>(rng.below(g.layers.size())));
  clamp(g);
}

std::string TopologyOps::describe(const TopologyGenome& g) const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < g.layers.size(); ++i) os << (i ? "," : "") << g.layers[i];
  os << ']';
  return os.str();
}

}  // namespace devo

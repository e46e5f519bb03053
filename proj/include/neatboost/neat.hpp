#pragma once

#include <cstddef>
#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "neatboost/random.hpp"

namespace neatboost {

enum class NodeKind { Input, Hidden, Output };

struct NodeGene {
    int id = 0;
    NodeKind kind = NodeKind::Hidden;
    friend bool operator==(const NodeGene&, const NodeGene&) = default;
};

struct ConnectionGene {
    int in_node = 0;
    int out_node = 0;
    double weight = 0.0;
    bool enabled = true;
    int innovation = 0;
    friend bool operator==(const ConnectionGene&, const ConnectionGene&) = default;
};

/// A NEAT genome. Nodes are kept sorted by id and connections by innovation
/// number; every node applies a logistic sigmoid, there are no bias inputs.
struct Genome {
    std::uint64_t id = 0;
    std::vector<NodeGene> nodes;
    std::vector<ConnectionGene> connections;
    std::optional<double> fitness;

    std::size_t count(NodeKind kind) const;
    bool has_node(int id) const;
    bool has_connection(int in_node, int out_node) const;
    /// True if `to` is reachable from `from` through any connection gene.
    bool reaches(int from, int to) const;
    bool is_acyclic() const;
    /// Unique node ids and every connection endpoint present.
    bool references_valid() const;
    int max_node_id() const;
};

/// Hands out innovation numbers. Structurally identical mutations within
/// one generation receive identical numbers; call new_generation() between
/// generations.
class InnovationTracker {
public:
    InnovationTracker() = default;
    InnovationTracker(int next_innovation, int next_node) : next_innovation_(next_innovation), next_node_(next_node) {}

    int connection(int in_node, int out_node);

    struct Split {
        int node_id;
        int in_innovation;
        int out_innovation;
    };
    Split split(const ConnectionGene& gene);

    int allocate_node() { return next_node_++; }
    /// Ensures future node ids start at `id` or later.
    void reserve_nodes(int id) { next_node_ = std::max(next_node_, id); }
    int allocate_innovation() { return next_innovation_++; }
    void new_generation();

    int next_innovation() const { return next_innovation_; }
    int next_node() const { return next_node_; }

private:
    int next_innovation_ = 0;
    int next_node_ = 0;
    std::map<std::pair<int, int>, int> connections_;
    std::map<int, Split> splits_;
};

enum class Scale { Linear, Log };

struct HyperparameterRange {
    std::string name;
    double lower = 0.0;
    double upper = 1.0;
    Scale scale = Scale::Linear;
    bool integer = false;
};

struct HyperparameterSpec {
    std::vector<HyperparameterRange> entries;

    std::size_t size() const { return entries.size(); }
    /// Throws std::invalid_argument when a range is empty or a log range
    /// touches zero.
    void validate() const;
};

/// Decoded values in spec order.
struct DecodedHyperparameters {
    std::vector<std::pair<std::string, double>> values;

    double at(const std::string& name) const;
    bool contains(const std::string& name) const;
    nlohmann::json to_json() const;
    static DecodedHyperparameters from_json(const nlohmann::json& j);
    friend bool operator==(const DecodedHyperparameters&, const DecodedHyperparameters&) = default;
};

struct NeatConfig {
    std::size_t population_size = 20;
    std::size_t generations = 10;
    std::vector<double> inputs{1.0, 1.0, 1.0, 1.0};
    double c1 = 1.0;
    double c2 = 1.0;
    double c3 = 0.4;
    double compatibility_threshold = 3.0;
    double weight_mutation_rate = 0.8;
    double weight_perturb_sigma = 0.5;
    double weight_replace_rate = 0.1;
    double add_node_rate = 0.03;
    double add_connection_rate = 0.05;
    double crossover_rate = 0.75;
    double survival_fraction = 0.5;
    std::size_t elitism = 2;
    std::size_t stagnation_limit = 15;
    std::size_t hall_of_fame = 1;
    std::size_t jobs = 1;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Feedforward evaluation; outputs ordered by output node id, each in (0,1).
/// Throws std::logic_error when the genome contains a cycle.
std::vector<double> activate_genome(const Genome& genome, std::span<const double> inputs);

DecodedHyperparameters decode_hyperparameters(std::span<const double> h, const HyperparameterSpec& spec);

/// Inputs fully connected to outputs with N(0,1) weights.
Genome minimal_genome(std::size_t num_inputs, std::size_t num_outputs, InnovationTracker& tracker, Rng& rng);

/// Adds one legal feedforward connection chosen uniformly; returns false
/// when no legal pair exists.
bool mutate_add_connection(Genome& genome, InnovationTracker& tracker, Rng& rng);
/// Splits a uniformly chosen enabled connection; returns false if none.
bool mutate_add_node(Genome& genome, InnovationTracker& tracker, Rng& rng);
/// Splits a specific connection (by innovation number).
void split_connection(Genome& genome, int innovation, InnovationTracker& tracker);

Genome mutate(const Genome& genome, const NeatConfig& cfg, InnovationTracker& tracker, Rng& rng);

double compatibility_distance(const Genome& a, const Genome& b, double c1, double c2, double c3);

/// Matching genes come from either parent at random, disjoint and excess
/// genes from `fitter`.
Genome crossover(const Genome& fitter, const Genome& other, Rng& rng);

struct GenerationStats {
    std::size_t generation = 0;
    double best_fitness = 0.0;
    double mean_fitness = 0.0;
    std::size_t species_count = 0;
    Genome best_genome;
};

struct FitnessReport {
    std::vector<GenerationStats> generations;

    std::string to_csv() const;
};

/// Fitness of a genome. The seed is derived from (run seed, generation,
/// genome id); throwing or returning a non-finite value scores 0.
using Objective = std::function<double(const Genome&, std::uint64_t seed)>;

class Population {
public:
    Population(const NeatConfig& cfg, std::size_t num_outputs);

    /// Scores every genome lacking a fitness value.
    void evaluate(const Objective& objective);
    void speciate();
    /// Produces the next generation: elites first, then offspring allocated
    /// to species by shared fitness.
    void reproduce();

    const std::vector<Genome>& genomes() const { return genomes_; }
    std::size_t generation() const { return generation_; }
    std::size_t species_count() const { return species_.size(); }
    const Genome& best() const;

private:
    struct Species {
        int id = 0;
        Genome representative;
        std::vector<std::size_t> members;
        double best_fitness = 0.0;
        std::size_t last_improved = 0;
    };

    NeatConfig cfg_;
    std::size_t num_outputs_;
    Rng rng_;
    InnovationTracker tracker_;
    std::vector<Genome> genomes_;
    std::vector<Species> species_;
    std::uint64_t next_genome_id_ = 0;
    std::size_t generation_ = 0;
    int next_species_id_ = 0;
};

struct EvolutionResult {
    Genome best;
    FitnessReport report;
    /// Best distinct genomes ever evaluated, fitness descending.
    std::vector<Genome> hall_of_fame;
};

EvolutionResult evolve(const Objective& objective, const HyperparameterSpec& spec, const NeatConfig& cfg);

nlohmann::json genome_to_json(const Genome& genome);
Genome genome_from_json(const nlohmann::json& j);

}  // namespace neatboost

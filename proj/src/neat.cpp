#include "neatboost/neat.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace neatboost {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

const ConnectionGene* find_innovation(const Genome& g, int innovation) {
    auto it = std::lower_bound(g.connections.begin(), g.connections.end(), innovation,
                               [](const ConnectionGene& c, int v) { return c.innovation < v; });
    return (it != g.connections.end() && it->innovation == innovation) ? &*it : nullptr;
}

void insert_node(Genome& g, NodeGene node) {
    auto it = std::lower_bound(g.nodes.begin(), g.nodes.end(), node.id,
                               [](const NodeGene& n, int id) { return n.id < id; });
    g.nodes.insert(it, node);
}

void insert_connection(Genome& g, ConnectionGene c) {
    auto it = std::lower_bound(g.connections.begin(), g.connections.end(), c.innovation,
                               [](const ConnectionGene& x, int v) { return x.innovation < v; });
    g.connections.insert(it, c);
}

// Kahn's algorithm over every connection gene; empty optional on a cycle.
std::optional<std::vector<int>> topological_order(const Genome& g) {
    std::map<int, int> indegree;
    std::map<int, std::vector<int>> out;
    for (const auto& n : g.nodes) indegree[n.id] = 0;
    for (const auto& c : g.connections) {
        ++indegree[c.out_node];
        out[c.in_node].push_back(c.out_node);
    }
    std::set<int> ready;
    for (const auto& [id, d] : indegree)
        if (d == 0) ready.insert(id);
    std::vector<int> order;
    while (!ready.empty()) {
        const int id = *ready.begin();
        ready.erase(ready.begin());
        order.push_back(id);
        for (int next : out[id])
            if (--indegree[next] == 0) ready.insert(next);
    }
    if (order.size() != indegree.size()) return std::nullopt;
    return order;
}

bool better(const Genome& a, const Genome& b) {
    const double fa = a.fitness.value_or(0.0), fb = b.fitness.value_or(0.0);
    if (fa != fb) return fa > fb;
    return a.id < b.id;
}

const char* kind_name(NodeKind k) {
    switch (k) {
        case NodeKind::Input: return "input";
        case NodeKind::Hidden: return "hidden";
        case NodeKind::Output: return "output";
    }
    return "hidden";
}

NodeKind kind_from_name(const std::string& s) {
    if (s == "input") return NodeKind::Input;
    if (s == "output") return NodeKind::Output;
    if (s == "hidden") return NodeKind::Hidden;
    throw std::invalid_argument("unknown node kind: " + s);
}

}  // namespace

std::size_t Genome::count(NodeKind kind) const {
    return static_cast<std::size_t>(
        std::count_if(nodes.begin(), nodes.end(), [kind](const NodeGene& n) { return n.kind == kind; }));
}

bool Genome::has_node(int node_id) const {
    return std::any_of(nodes.begin(), nodes.end(), [node_id](const NodeGene& n) { return n.id == node_id; });
}

bool Genome::has_connection(int in_node, int out_node) const {
    return std::any_of(connections.begin(), connections.end(),
                       [&](const ConnectionGene& c) { return c.in_node == in_node && c.out_node == out_node; });
}

bool Genome::reaches(int from, int to) const {
    if (from == to) return true;
    std::vector<int> stack{from};
    std::set<int> seen{from};
    while (!stack.empty()) {
        const int n = stack.back();
        stack.pop_back();
        for (const auto& c : connections) {
            if (c.in_node != n) continue;
            if (c.out_node == to) return true;
            if (seen.insert(c.out_node).second) stack.push_back(c.out_node);
        }
    }
    return false;
}

bool Genome::is_acyclic() const { return topological_order(*this).has_value(); }

bool Genome::references_valid() const {
    std::set<int> ids;
    for (const auto& n : nodes)
        if (!ids.insert(n.id).second) return false;
    return std::all_of(connections.begin(), connections.end(),
                       [&](const ConnectionGene& c) { return ids.count(c.in_node) && ids.count(c.out_node); });
}

int Genome::max_node_id() const {
    int m = -1;
    for (const auto& n : nodes) m = std::max(m, n.id);
    return m;
}

int InnovationTracker::connection(int in_node, int out_node) {
    const auto key = std::make_pair(in_node, out_node);
    auto it = connections_.find(key);
    if (it != connections_.end()) return it->second;
    const int innov = next_innovation_++;
    connections_.emplace(key, innov);
    return innov;
}

InnovationTracker::Split InnovationTracker::split(const ConnectionGene& gene) {
    auto it = splits_.find(gene.innovation);
    if (it != splits_.end()) return it->second;
    Split s{};
    s.node_id = next_node_++;
    s.in_innovation = connection(gene.in_node, s.node_id);
    s.out_innovation = connection(s.node_id, gene.out_node);
    splits_.emplace(gene.innovation, s);
    return s;
}

void InnovationTracker::new_generation() {
    connections_.clear();
    splits_.clear();
}

void HyperparameterSpec::validate() const {
    for (const auto& e : entries) {
        if (!(e.lower < e.upper)) throw std::invalid_argument("hyperparameter " + e.name + ": lower must be < upper");
        if (e.scale == Scale::Log && !(e.lower > 0.0))
            throw std::invalid_argument("hyperparameter " + e.name + ": log scale needs a positive lower bound");
    }
}

double DecodedHyperparameters::at(const std::string& name) const {
    for (const auto& [k, v] : values)
        if (k == name) return v;
    throw std::out_of_range("no hyperparameter named " + name);
}

bool DecodedHyperparameters::contains(const std::string& name) const {
    return std::any_of(values.begin(), values.end(), [&](const auto& kv) { return kv.first == name; });
}

nlohmann::json DecodedHyperparameters::to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : values) j[k] = v;
    return j;
}

DecodedHyperparameters DecodedHyperparameters::from_json(const nlohmann::json& j) {
    DecodedHyperparameters d;
    for (auto it = j.begin(); it != j.end(); ++it) d.values.emplace_back(it.key(), it.value().get<double>());
    return d;
}

void NeatConfig::validate() const {
    if (population_size < 2) throw std::invalid_argument("NEAT population_size must be >= 2");
    if (generations < 1) throw std::invalid_argument("NEAT generations must be >= 1");
    if (inputs.empty()) throw std::invalid_argument("NEAT input vector must be nonempty");
    for (double r : {weight_mutation_rate, weight_replace_rate, add_node_rate, add_connection_rate, crossover_rate,
                     survival_fraction})
        if (!(r >= 0.0 && r <= 1.0)) throw std::invalid_argument("NEAT rates must lie in [0,1]");
    if (elitism > population_size) throw std::invalid_argument("NEAT elitism exceeds population size");
}

std::vector<double> activate_genome(const Genome& genome, std::span<const double> inputs) {
    const auto order = topological_order(genome);
    if (!order) throw std::logic_error("genome contains a cycle");
    if (inputs.size() != genome.count(NodeKind::Input)) throw std::invalid_argument("input size mismatch");

    std::map<int, double> value;
    std::size_t next_input = 0;
    for (const auto& n : genome.nodes)
        if (n.kind == NodeKind::Input) value[n.id] = inputs[next_input++];

    std::map<int, std::vector<const ConnectionGene*>> incoming;
    for (const auto& c : genome.connections)
        if (c.enabled) incoming[c.out_node].push_back(&c);

    std::map<int, NodeKind> kinds;
    for (const auto& n : genome.nodes) kinds[n.id] = n.kind;
    for (int id : *order) {
        if (kinds[id] == NodeKind::Input) continue;
        double s = 0.0;
        for (const auto* c : incoming[id]) s += c->weight * value[c->in_node];
        value[id] = sigmoid(s);
    }
    std::vector<double> out;
    for (const auto& n : genome.nodes)
        if (n.kind == NodeKind::Output) out.push_back(value[n.id]);
    return out;
}

DecodedHyperparameters decode_hyperparameters(std::span<const double> h, const HyperparameterSpec& spec) {
    if (h.size() != spec.size()) throw std::invalid_argument("dimension mismatch between h and hyperparameter spec");
    DecodedHyperparameters out;
    for (std::size_t i = 0; i < h.size(); ++i) {
        const auto& e = spec.entries[i];
        const double hi = h[i];
        if (!(hi >= 0.0 && hi <= 1.0)) throw std::invalid_argument("normalized hyperparameter outside [0,1]");
        double v;
        if (e.scale == Scale::Linear) {
            v = e.lower + hi * (e.upper - e.lower);
        } else {
            const double ll = std::log(e.lower), lu = std::log(e.upper);
            v = std::exp(ll + hi * (lu - ll));
        }
        if (e.integer) v = std::floor(v + 0.5);
        v = std::clamp(v, e.lower, e.upper);
        out.values.emplace_back(e.name, v);
    }
    return out;
}

Genome minimal_genome(std::size_t num_inputs, std::size_t num_outputs, InnovationTracker& tracker, Rng& rng) {
    Genome g;
    const int ni = static_cast<int>(num_inputs), no = static_cast<int>(num_outputs);
    tracker.reserve_nodes(ni + no);
    for (int i = 0; i < ni; ++i) g.nodes.push_back({i, NodeKind::Input});
    for (int o = 0; o < no; ++o) g.nodes.push_back({ni + o, NodeKind::Output});
    std::normal_distribution<double> weight(0.0, 1.0);
    for (int i = 0; i < ni; ++i)
        for (int o = 0; o < no; ++o) g.connections.push_back({i, ni + o, weight(rng), true, tracker.connection(i, ni + o)});
    std::sort(g.connections.begin(), g.connections.end(),
              [](const ConnectionGene& a, const ConnectionGene& b) { return a.innovation < b.innovation; });
    return g;
}

bool mutate_add_connection(Genome& genome, InnovationTracker& tracker, Rng& rng) {
    std::vector<std::pair<int, int>> legal;
    for (const auto& src : genome.nodes) {
        if (src.kind == NodeKind::Output) continue;
        for (const auto& dst : genome.nodes) {
            if (dst.kind == NodeKind::Input || dst.id == src.id) continue;
            if (genome.has_connection(src.id, dst.id)) continue;
            if (genome.reaches(dst.id, src.id)) continue;  // would close a cycle
            legal.emplace_back(src.id, dst.id);
        }
    }
    if (legal.empty()) return false;
    std::uniform_int_distribution<std::size_t> pick(0, legal.size() - 1);
    const auto [in, out] = legal[pick(rng)];
    std::normal_distribution<double> weight(0.0, 1.0);
    insert_connection(genome, {in, out, weight(rng), true, tracker.connection(in, out)});
    return true;
}

void split_connection(Genome& genome, int innovation, InnovationTracker& tracker) {
    auto it = std::find_if(genome.connections.begin(), genome.connections.end(),
                           [innovation](const ConnectionGene& c) { return c.innovation == innovation; });
    if (it == genome.connections.end()) throw std::invalid_argument("no connection with that innovation");
    const ConnectionGene original = *it;
    it->enabled = false;

    InnovationTracker::Split s = tracker.split(original);
    if (genome.has_node(s.node_id) || find_innovation(genome, s.in_innovation) ||
        find_innovation(genome, s.out_innovation)) {
        // the shared split is already present in this genome; use fresh genes
        s.node_id = tracker.allocate_node();
        s.in_innovation = tracker.allocate_innovation();
        s.out_innovation = tracker.allocate_innovation();
    }
    insert_node(genome, {s.node_id, NodeKind::Hidden});
    insert_connection(genome, {original.in_node, s.node_id, 1.0, true, s.in_innovation});
    insert_connection(genome, {s.node_id, original.out_node, original.weight, true, s.out_innovation});
}

bool mutate_add_node(Genome& genome, InnovationTracker& tracker, Rng& rng) {
    std::vector<int> enabled;
    for (const auto& c : genome.connections)
        if (c.enabled) enabled.push_back(c.innovation);
    if (enabled.empty()) return false;
    std::uniform_int_distribution<std::size_t> pick(0, enabled.size() - 1);
    split_connection(genome, enabled[pick(rng)], tracker);
    return true;
}

Genome mutate(const Genome& genome, const NeatConfig& cfg, InnovationTracker& tracker, Rng& rng) {
    Genome g = genome;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    if (u(rng) < cfg.weight_mutation_rate) {
        std::normal_distribution<double> perturb(0.0, cfg.weight_perturb_sigma);
        std::normal_distribution<double> fresh(0.0, 1.0);
        for (auto& c : g.connections) {
            if (u(rng) < cfg.weight_replace_rate)
                c.weight = fresh(rng);
            else
                c.weight += perturb(rng);
        }
    }
    if (u(rng) < cfg.add_connection_rate) mutate_add_connection(g, tracker, rng);
    if (u(rng) < cfg.add_node_rate) mutate_add_node(g, tracker, rng);
    return g;
}

double compatibility_distance(const Genome& a, const Genome& b, double c1, double c2, double c3) {
    const auto& ga = a.connections;
    const auto& gb = b.connections;
    const int max_a = ga.empty() ? -1 : ga.back().innovation;
    const int max_b = gb.empty() ? -1 : gb.back().innovation;
    std::size_t i = 0, j = 0, matching = 0, disjoint = 0, excess = 0;
    double weight_diff = 0.0;
    while (i < ga.size() || j < gb.size()) {
        if (i < ga.size() && j < gb.size() && ga[i].innovation == gb[j].innovation) {
            weight_diff += std::abs(ga[i].weight - gb[j].weight);
            ++matching;
            ++i;
            ++j;
        } else if (j >= gb.size() || (i < ga.size() && ga[i].innovation < gb[j].innovation)) {
            (ga[i].innovation > max_b ? excess : disjoint) += 1;
            ++i;
        } else {
            (gb[j].innovation > max_a ? excess : disjoint) += 1;
            ++j;
        }
    }
    const std::size_t larger = std::max(ga.size(), gb.size());
    const double n = (ga.size() < 20 && gb.size() < 20) ? 1.0 : static_cast<double>(std::max<std::size_t>(larger, 1));
    const double wbar = matching ? weight_diff / static_cast<double>(matching) : 0.0;
    return c1 * static_cast<double>(excess) / n + c2 * static_cast<double>(disjoint) / n + c3 * wbar;
}

Genome crossover(const Genome& fitter, const Genome& other, Rng& rng) {
    Genome child;
    child.nodes = fitter.nodes;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (const auto& gene : fitter.connections) {
        ConnectionGene c = gene;
        const ConnectionGene* match = find_innovation(other, gene.innovation);
        bool disabled_in_parent = !gene.enabled;
        if (match) {
            if (u(rng) < 0.5) c = *match;
            disabled_in_parent = disabled_in_parent || !match->enabled;
        }
        c.enabled = disabled_in_parent ? !(u(rng) < 0.75) : true;
        child.connections.push_back(c);
    }
    return child;
}

std::string FitnessReport::to_csv() const {
    std::ostringstream os;
    os.precision(17);
    os << "generation,best_fitness,mean_fitness,species_count\n";
    for (const auto& g : generations)
        os << g.generation << ',' << g.best_fitness << ',' << g.mean_fitness << ',' << g.species_count << '\n';
    return os.str();
}

Population::Population(const NeatConfig& cfg, std::size_t num_outputs)
    : cfg_(cfg), num_outputs_(num_outputs), rng_(derive_seed(cfg.seed, "neat.population")) {
    cfg_.validate();
    if (num_outputs == 0) throw std::invalid_argument("genome needs at least one output");
    const std::size_t ni = cfg_.inputs.size();
    tracker_ = InnovationTracker(0, static_cast<int>(ni + num_outputs));
    for (std::size_t i = 0; i < cfg_.population_size; ++i) {
        Genome g = minimal_genome(ni, num_outputs, tracker_, rng_);
        g.id = next_genome_id_++;
        genomes_.push_back(std::move(g));
    }
}

const Genome& Population::best() const {
    return *std::min_element(genomes_.begin(), genomes_.end(), better);
}

void Population::evaluate(const Objective& objective) {
    std::vector<std::size_t> pending;
    for (std::size_t i = 0; i < genomes_.size(); ++i)
        if (!genomes_[i].fitness) pending.push_back(i);

    auto score = [&](std::size_t idx) {
        Genome& g = genomes_[idx];
        const std::uint64_t seed = derive_seed(cfg_.seed, "neat.genome", {generation_, g.id});
        double f = 0.0;
        try {
            f = objective(g, seed);
        } catch (...) {
            f = 0.0;
        }
        g.fitness = std::isfinite(f) ? f : 0.0;
    };

    const std::size_t jobs = std::max<std::size_t>(1, std::min(cfg_.jobs, pending.size()));
    if (jobs <= 1) {
        for (std::size_t idx : pending) score(idx);
        return;
    }
    std::atomic<std::size_t> cursor{0};
    std::vector<std::jthread> workers;
    for (std::size_t t = 0; t < jobs; ++t)
        workers.emplace_back([&] {
            for (std::size_t k = cursor++; k < pending.size(); k = cursor++) score(pending[k]);
        });
}

void Population::speciate() {
    for (auto& s : species_) s.members.clear();
    for (std::size_t i = 0; i < genomes_.size(); ++i) {
        bool placed = false;
        for (auto& s : species_) {
            if (compatibility_distance(genomes_[i], s.representative, cfg_.c1, cfg_.c2, cfg_.c3) <
                cfg_.compatibility_threshold) {
                s.members.push_back(i);
                placed = true;
                break;
            }
        }
        if (!placed) {
            Species s;
            s.id = next_species_id_++;
            s.representative = genomes_[i];
            s.members.push_back(i);
            s.last_improved = generation_;
            species_.push_back(std::move(s));
        }
    }
    std::erase_if(species_, [](const Species& s) { return s.members.empty(); });
    for (auto& s : species_) {
        s.representative = genomes_[s.members.front()];
        double top = -std::numeric_limits<double>::infinity();
        for (std::size_t m : s.members) top = std::max(top, genomes_[m].fitness.value_or(0.0));
        if (top > s.best_fitness) {
            s.best_fitness = top;
            s.last_improved = generation_;
        }
    }
}

void Population::reproduce() {
    if (species_.empty()) speciate();
    tracker_.new_generation();

    std::vector<std::size_t> ranked(genomes_.size());
    std::iota(ranked.begin(), ranked.end(), 0);
    std::sort(ranked.begin(), ranked.end(), [&](std::size_t a, std::size_t b) { return better(genomes_[a], genomes_[b]); });

    std::vector<Genome> next;
    for (std::size_t e = 0; e < std::min(cfg_.elitism, ranked.size()); ++e) next.push_back(genomes_[ranked[e]]);
    const std::size_t remaining = cfg_.population_size - next.size();

    // drop stagnant species, always keeping the one holding the champion
    const std::size_t champion = ranked.front();
    std::vector<Species> alive;
    for (auto& s : species_) {
        const bool has_champion = std::find(s.members.begin(), s.members.end(), champion) != s.members.end();
        if (has_champion || generation_ - s.last_improved < cfg_.stagnation_limit) alive.push_back(s);
    }
    species_ = std::move(alive);

    if (remaining > 0) {
        // fitness sharing: a species' claim is the mean fitness of its members
        std::vector<double> share(species_.size(), 0.0);
        double total = 0.0;
        for (std::size_t s = 0; s < species_.size(); ++s) {
            double sum = 0.0;
            for (std::size_t m : species_[s].members) sum += std::max(0.0, genomes_[m].fitness.value_or(0.0));
            share[s] = sum / static_cast<double>(species_[s].members.size());
            total += share[s];
        }
        std::vector<double> quota(species_.size());
        for (std::size_t s = 0; s < species_.size(); ++s)
            quota[s] = total > 0.0 ? share[s] / total * static_cast<double>(remaining)
                                   : static_cast<double>(remaining) / static_cast<double>(species_.size());
        std::vector<std::size_t> alloc(species_.size());
        std::size_t assigned = 0;
        for (std::size_t s = 0; s < species_.size(); ++s) {
            alloc[s] = static_cast<std::size_t>(std::floor(quota[s]));
            assigned += alloc[s];
        }
        std::vector<std::size_t> order(species_.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return quota[a] - std::floor(quota[a]) > quota[b] - std::floor(quota[b]);
        });
        for (std::size_t k = 0; assigned < remaining; k = (k + 1) % order.size(), ++assigned) ++alloc[order[k]];

        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (std::size_t s = 0; s < species_.size(); ++s) {
            auto members = species_[s].members;
            std::sort(members.begin(), members.end(),
                      [&](std::size_t a, std::size_t b) { return better(genomes_[a], genomes_[b]); });
            const auto pool = std::max<std::size_t>(
                1, static_cast<std::size_t>(std::ceil(cfg_.survival_fraction * static_cast<double>(members.size()))));
            std::uniform_int_distribution<std::size_t> pick(0, pool - 1);
            for (std::size_t k = 0; k < alloc[s]; ++k) {
                const Genome& p1 = genomes_[members[pick(rng_)]];
                Genome child;
                if (pool >= 2 && u(rng_) < cfg_.crossover_rate) {
                    const Genome& p2 = genomes_[members[pick(rng_)]];
                    // equal fitness keeps p1 as the designated fitter parent
                    child = p2.fitness.value_or(0.0) > p1.fitness.value_or(0.0) ? crossover(p2, p1, rng_)
                                                                                : crossover(p1, p2, rng_);
                } else {
                    child = p1;
                }
                child = mutate(child, cfg_, tracker_, rng_);
                child.fitness.reset();
                child.id = next_genome_id_++;
                next.push_back(std::move(child));
            }
        }
    }
    genomes_ = std::move(next);
    ++generation_;
}

EvolutionResult evolve(const Objective& objective, const HyperparameterSpec& spec, const NeatConfig& cfg) {
    spec.validate();
    Population pop(cfg, spec.size());
    EvolutionResult result;
    std::vector<Genome> fame;

    for (std::size_t gen = 0; gen < cfg.generations; ++gen) {
        pop.evaluate(objective);
        pop.speciate();

        GenerationStats stats;
        stats.generation = gen;
        double sum = 0.0;
        for (const auto& g : pop.genomes()) sum += g.fitness.value_or(0.0);
        stats.mean_fitness = sum / static_cast<double>(pop.genomes().size());
        stats.best_genome = pop.best();
        stats.best_fitness = stats.best_genome.fitness.value_or(0.0);
        stats.species_count = pop.species_count();
        result.report.generations.push_back(stats);

        if (gen == 0 || better(stats.best_genome, result.best)) result.best = stats.best_genome;
        for (const auto& g : pop.genomes())
            if (std::none_of(fame.begin(), fame.end(), [&](const Genome& f) { return f.id == g.id; })) fame.push_back(g);
        std::sort(fame.begin(), fame.end(), better);
        if (fame.size() > std::max<std::size_t>(1, cfg.hall_of_fame)) fame.resize(std::max<std::size_t>(1, cfg.hall_of_fame));

        if (gen + 1 < cfg.generations) pop.reproduce();
    }
    result.hall_of_fame = std::move(fame);
    return result;
}

nlohmann::json genome_to_json(const Genome& genome) {
    nlohmann::json j;
    j["id"] = genome.id;
    j["fitness"] = genome.fitness ? nlohmann::json(*genome.fitness) : nlohmann::json(nullptr);
    j["nodes"] = nlohmann::json::array();
    for (const auto& n : genome.nodes) j["nodes"].push_back({{"id", n.id}, {"kind", kind_name(n.kind)}});
    j["connections"] = nlohmann::json::array();
    for (const auto& c : genome.connections)
        j["connections"].push_back({{"in", c.in_node},
                                    {"out", c.out_node},
                                    {"weight", c.weight},
                                    {"enabled", c.enabled},
                                    {"innovation", c.innovation}});
    return j;
}

Genome genome_from_json(const nlohmann::json& j) {
    Genome g;
    g.id = j.at("id").get<std::uint64_t>();
    if (!j.at("fitness").is_null()) g.fitness = j.at("fitness").get<double>();
    for (const auto& n : j.at("nodes")) g.nodes.push_back({n.at("id").get<int>(), kind_from_name(n.at("kind"))});
    for (const auto& c : j.at("connections"))
        g.connections.push_back({c.at("in").get<int>(), c.at("out").get<int>(), c.at("weight").get<double>(),
                                 c.at("enabled").get<bool>(), c.at("innovation").get<int>()});
    if (!g.references_valid() || !g.is_acyclic()) throw std::invalid_argument("genome JSON is not a valid feedforward genome");
    return g;
}

}  // namespace neatboost

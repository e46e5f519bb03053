#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "neatboost/neat.hpp"

using namespace neatboost;

namespace {

Genome single_link(double w) {
    Genome g;
    g.nodes = {{0, NodeKind::Input}, {1, NodeKind::Output}};
    g.connections = {{0, 1, w, true, 0}};
    return g;
}

Genome with_genes(std::initializer_list<int> innovations, double w = 0.3) {
    Genome g;
    g.nodes = {{0, NodeKind::Input}, {1, NodeKind::Input}, {2, NodeKind::Input}, {3, NodeKind::Output},
               {4, NodeKind::Output}};
    const std::pair<int, int> ends[] = {{0, 3}, {0, 3}, {1, 3}, {2, 3}, {0, 4}, {1, 4}, {2, 4}, {1, 3}, {2, 4}, {0, 4}};
    for (int inn : innovations) g.connections.push_back({ends[inn].first, ends[inn].second, w, true, inn});
    return g;
}

NeatConfig surrogate_config(std::uint64_t seed) {
    NeatConfig c;
    c.population_size = 20;
    c.generations = 15;
    c.seed = seed;
    return c;
}

HyperparameterSpec unit_spec() { return {{{"lambda1", 0.0, 1.0, Scale::Linear, false}}}; }

double surrogate(const Genome& g, std::uint64_t) {
    const double l = decode_hyperparameters(activate_genome(g, std::vector<double>{1, 1, 1, 1}), unit_spec()).at("lambda1");
    return 1.0 - (l - 0.3) * (l - 0.3);
}

}  // namespace

TEST(Activate, ZeroWeightsGiveHalf) {
    InnovationTracker t;
    Rng rng(1);
    Genome g = minimal_genome(4, 3, t, rng);
    for (auto& c : g.connections) c.weight = 0.0;
    for (double v : activate_genome(g, std::vector<double>{1, 1, 1, 1})) EXPECT_DOUBLE_EQ(v, 0.5);
}

TEST(Activate, SingleConnectionSigmoid) {
    const auto out = activate_genome(single_link(std::log(3.0)), std::vector<double>{1.0});
    ASSERT_EQ(out.size(), 1u);
    EXPECT_NEAR(out[0], 0.75, 1e-15);
}

TEST(Activate, DisabledConnectionIsDead) {
    Genome g = single_link(5.0);
    g.connections[0].enabled = false;
    EXPECT_DOUBLE_EQ(activate_genome(g, std::vector<double>{1.0})[0], 0.5);
}

TEST(Activate, HiddenChain) {
    Genome g = single_link(2.0);
    InnovationTracker t(1, 2);
    split_connection(g, 0, t);
    const double hidden = 1.0 / (1.0 + std::exp(-1.0));
    EXPECT_NEAR(activate_genome(g, std::vector<double>{1.0})[0], 1.0 / (1.0 + std::exp(-2.0 * hidden)), 1e-15);
}

TEST(Activate, CycleThrows) {
    Genome g;
    g.nodes = {{0, NodeKind::Input}, {1, NodeKind::Hidden}, {2, NodeKind::Hidden}, {3, NodeKind::Output}};
    g.connections = {{0, 1, 1, true, 0}, {1, 2, 1, true, 1}, {2, 1, 1, true, 2}, {2, 3, 1, true, 3}};
    EXPECT_FALSE(g.is_acyclic());
    EXPECT_THROW(activate_genome(g, std::vector<double>{1.0}), std::logic_error);
}

TEST(Activate, InputSizeMismatch) {
    EXPECT_THROW(activate_genome(single_link(1), std::vector<double>{1.0, 2.0}), std::invalid_argument);
}

TEST(Decode, LinearMidpointAndEndpoints) {
    HyperparameterSpec spec{{{"a", 10, 100, Scale::Linear, false}}};
    EXPECT_DOUBLE_EQ(decode_hyperparameters(std::vector<double>{0.5}, spec).at("a"), 55.0);
    EXPECT_DOUBLE_EQ(decode_hyperparameters(std::vector<double>{0.0}, spec).at("a"), 10.0);
    EXPECT_DOUBLE_EQ(decode_hyperparameters(std::vector<double>{1.0}, spec).at("a"), 100.0);
}

TEST(Decode, LogMidpoint) {
    HyperparameterSpec spec{{{"lr", 1e-4, 1e-1, Scale::Log, false}}};
    EXPECT_NEAR(decode_hyperparameters(std::vector<double>{0.5}, spec).at("lr"), std::pow(10.0, -2.5), 1e-15);
    EXPECT_NEAR(decode_hyperparameters(std::vector<double>{1.0}, spec).at("lr"), 1e-1, 1e-16);
}

TEST(Decode, IntegerRoundsHalfUpAndClamps) {
    HyperparameterSpec spec{{{"n", 3, 12, Scale::Linear, true}}};
    EXPECT_EQ(decode_hyperparameters(std::vector<double>{0.5}, spec).at("n"), 8.0);  // 7.5
    EXPECT_EQ(decode_hyperparameters(std::vector<double>{0.0}, spec).at("n"), 3.0);
    EXPECT_EQ(decode_hyperparameters(std::vector<double>{1.0}, spec).at("n"), 12.0);
}

TEST(Decode, Errors) {
    HyperparameterSpec spec{{{"a", 0, 1, Scale::Linear, false}, {"b", 0, 1, Scale::Linear, false}}};
    EXPECT_THROW(decode_hyperparameters(std::vector<double>{0.5}, spec), std::invalid_argument);
    EXPECT_THROW(decode_hyperparameters(std::vector<double>{0.5, 1.5}, spec), std::invalid_argument);
    EXPECT_THROW((HyperparameterSpec{{{"x", 1, 1, Scale::Linear, false}}}.validate()), std::invalid_argument);
    EXPECT_THROW((HyperparameterSpec{{{"x", 0, 1, Scale::Log, false}}}.validate()), std::invalid_argument);
}

TEST(Decode, RandomPairsMatchFormula) {
    Rng rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 1000; ++k) {
        const double l = std::exp(u(rng) * 8 - 6), w = std::exp(u(rng) * 6 - 3), h = u(rng);
        HyperparameterSpec lin{{{"x", l, l + w, Scale::Linear, false}}};
        HyperparameterSpec log{{{"x", l, l + w, Scale::Log, false}}};
        std::vector<double> hv{h};
        EXPECT_EQ(decode_hyperparameters(hv, lin).at("x"), std::clamp(l + h * ((l + w) - l), l, l + w));
        const double geo = l * std::pow((l + w) / l, h);
        EXPECT_NEAR(decode_hyperparameters(hv, log).at("x"), geo, 1e-12 * std::max(1.0, geo));
    }
}

TEST(Mutate, AddNodeSplitsConnection) {
    Genome g = single_link(0.7);
    InnovationTracker t(1, 2);
    split_connection(g, 0, t);
    ASSERT_EQ(g.connections.size(), 3u);
    EXPECT_FALSE(g.connections[0].enabled);
    EXPECT_EQ(g.connections[1].in_node, 0);
    EXPECT_EQ(g.connections[1].out_node, 2);
    EXPECT_EQ(g.connections[1].weight, 1.0);
    EXPECT_EQ(g.connections[2].in_node, 2);
    EXPECT_EQ(g.connections[2].out_node, 1);
    EXPECT_EQ(g.connections[2].weight, 0.7);
    EXPECT_EQ(g.count(NodeKind::Hidden), 1u);
    EXPECT_TRUE(g.is_acyclic());
}

TEST(Mutate, ZeroRatesLeaveGenomeUnchanged) {
    InnovationTracker t;
    Rng rng(3);
    const Genome g = minimal_genome(4, 3, t, rng);
    NeatConfig cfg;
    cfg.weight_mutation_rate = cfg.add_node_rate = cfg.add_connection_rate = 0.0;
    for (int k = 0; k < 50; ++k) EXPECT_EQ(mutate(g, cfg, t, rng).connections, g.connections);
}

TEST(Mutate, SaturatedMinimalGenomeGetsNoConnection) {
    InnovationTracker t;
    Rng rng(3);
    Genome g = minimal_genome(4, 3, t, rng);
    const Genome before = g;
    EXPECT_FALSE(mutate_add_connection(g, t, rng));
    EXPECT_EQ(g.connections, before.connections);
}

TEST(Mutate, SameSplitInOneGenerationSharesInnovations) {
    InnovationTracker t;
    Rng rng(4);
    Genome a = minimal_genome(2, 1, t, rng);
    Genome b = a;
    split_connection(a, 0, t);
    split_connection(b, 0, t);
    EXPECT_EQ(a.nodes, b.nodes);
    EXPECT_EQ(a.connections.back().innovation, b.connections.back().innovation);
    t.new_generation();
    Genome c = minimal_genome(2, 1, t, rng);
    split_connection(c, c.connections.front().innovation, t);
    EXPECT_GT(c.connections.back().innovation, a.connections.back().innovation);
}

TEST(Mutate, RandomMutationsStayValid) {
    InnovationTracker t;
    Rng rng(11);
    NeatConfig cfg;
    cfg.add_node_rate = 0.5;
    cfg.add_connection_rate = 0.5;
    Genome g = minimal_genome(4, 3, t, rng);
    for (int k = 0; k < 200; ++k) {
        g = mutate(g, cfg, t, rng);
        ASSERT_TRUE(g.is_acyclic());
        ASSERT_TRUE(g.references_valid());
        std::set<int> innov;
        for (const auto& c : g.connections) ASSERT_TRUE(innov.insert(c.innovation).second);
        for (double v : activate_genome(g, cfg.inputs)) {
            ASSERT_GT(v, 0.0);
            ASSERT_LT(v, 1.0);
        }
    }
}

TEST(Distance, IdenticalIsZero) {
    const Genome g = with_genes({0, 1, 2, 3});
    EXPECT_EQ(compatibility_distance(g, g, 1, 1, 0.4), 0.0);
}

TEST(Distance, SingleWeightDifference) {
    const Genome a = with_genes({0, 1, 2});
    Genome b = a;
    b.connections[1].weight += 0.5;
    EXPECT_NEAR(compatibility_distance(a, b, 1, 1, 0.4), 0.4 * 0.5 / 3.0, 1e-15);
    Genome c = with_genes({0});
    Genome d = c;
    d.connections[0].weight += 0.5;
    EXPECT_NEAR(compatibility_distance(c, d, 1, 1, 0.4), 0.2, 1e-15);
}

TEST(Distance, DisjointAndExcess) {
    const Genome a = with_genes({1, 2});
    const Genome b = with_genes({1, 3});
    EXPECT_NEAR(compatibility_distance(a, b, 1, 1, 0.4), 2.0, 1e-15);
    EXPECT_NEAR(compatibility_distance(a, b, 1, 0, 0.4), 1.0, 1e-15);
    EXPECT_NEAR(compatibility_distance(a, b, 0, 1, 0.4), 1.0, 1e-15);
}

TEST(Crossover, IdenticalParents) {
    const Genome g = with_genes({0, 2, 4, 6});
    Rng rng(1);
    const Genome child = crossover(g, g, rng);
    EXPECT_EQ(child.nodes, g.nodes);
    ASSERT_EQ(child.connections.size(), g.connections.size());
    for (std::size_t i = 0; i < g.connections.size(); ++i)
        EXPECT_EQ(child.connections[i].innovation, g.connections[i].innovation);
}

TEST(Crossover, FitterParentContributesDisjointGenes) {
    Genome a = with_genes({0, 1, 2, 9});
    Genome b = with_genes({0, 1, 5}, 0.8);
    a.fitness = 0.9;
    b.fitness = 0.5;
    for (std::uint64_t s = 0; s < 20; ++s) {
        Rng rng(s);
        const Genome child = crossover(a, b, rng);
        std::set<int> innov;
        for (const auto& c : child.connections) innov.insert(c.innovation);
        EXPECT_EQ(innov, (std::set<int>{0, 1, 2, 9}));
        for (const auto& c : child.connections)
            if (c.innovation == 0 || c.innovation == 1) EXPECT_TRUE(c.weight == 0.3 || c.weight == 0.8);
        EXPECT_TRUE(child.references_valid());
    }
}

TEST(Crossover, EqualFitnessFavoursFirstArgument) {
    Genome a = with_genes({0, 3});
    Genome b = with_genes({0, 4});
    a.fitness = b.fitness = 0.5;
    Rng rng(2);
    const Genome child = crossover(a, b, rng);
    ASSERT_EQ(child.connections.size(), 2u);
    EXPECT_EQ(child.connections[1].innovation, 3);
}

TEST(Crossover, DisabledGeneUsuallyStaysDisabled) {
    Genome a = with_genes({0});
    Genome b = a;
    b.connections[0].enabled = false;
    int disabled = 0;
    const int trials = 4000;
    for (int s = 0; s < trials; ++s) {
        Rng rng(static_cast<std::uint64_t>(s));
        disabled += crossover(a, b, rng).connections[0].enabled ? 0 : 1;
    }
    EXPECT_NEAR(static_cast<double>(disabled) / trials, 0.75, 0.03);
}

TEST(Evolve, SurrogateConverges) {
    int hits = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto r = evolve(surrogate, unit_spec(), surrogate_config(seed));
        const double l =
            decode_hyperparameters(activate_genome(r.best, std::vector<double>{1, 1, 1, 1}), unit_spec()).at("lambda1");
        if (std::abs(l - 0.3) <= 0.05) ++hits;
        for (std::size_t g = 1; g < r.report.generations.size(); ++g)
            EXPECT_GE(r.report.generations[g].best_fitness, r.report.generations[g - 1].best_fitness);
    }
    EXPECT_GE(hits, 9);
}

TEST(Evolve, DeterministicGivenSeed) {
    auto cfg = surrogate_config(42);
    cfg.generations = 6;
    const auto a = evolve(surrogate, unit_spec(), cfg);
    cfg.jobs = 3;
    const auto b = evolve(surrogate, unit_spec(), cfg);
    EXPECT_EQ(a.report.to_csv(), b.report.to_csv());
    EXPECT_EQ(genome_to_json(a.best).dump(), genome_to_json(b.best).dump());
}

TEST(Evolve, FullElitismKeepsPopulation) {
    NeatConfig cfg = surrogate_config(5);
    cfg.population_size = 6;
    cfg.elitism = 6;
    Population pop(cfg, 1);
    pop.evaluate(surrogate);
    std::vector<std::uint64_t> before;
    for (const auto& g : pop.genomes()) before.push_back(g.id);
    std::sort(before.begin(), before.end());
    pop.speciate();
    pop.reproduce();
    std::vector<std::uint64_t> after;
    for (const auto& g : pop.genomes()) after.push_back(g.id);
    std::sort(after.begin(), after.end());
    EXPECT_EQ(before, after);
}

TEST(Evolve, FailingObjectiveScoresZero) {
    NeatConfig cfg = surrogate_config(1);
    cfg.population_size = 4;
    cfg.generations = 2;
    const auto r = evolve([](const Genome&, std::uint64_t) -> double { throw std::runtime_error("boom"); }, unit_spec(),
                          cfg);
    EXPECT_EQ(r.report.generations.back().best_fitness, 0.0);
    const auto nan = evolve([](const Genome&, std::uint64_t) { return std::nan(""); }, unit_spec(), cfg);
    EXPECT_EQ(nan.report.generations.back().best_fitness, 0.0);
}

TEST(Evolve, HallOfFameIsSortedAndDistinct) {
    NeatConfig cfg = surrogate_config(9);
    cfg.generations = 4;
    cfg.hall_of_fame = 3;
    const auto r = evolve(surrogate, unit_spec(), cfg);
    ASSERT_EQ(r.hall_of_fame.size(), 3u);
    EXPECT_EQ(r.hall_of_fame[0].id, r.best.id);
    EXPECT_GE(*r.hall_of_fame[0].fitness, *r.hall_of_fame[1].fitness);
    EXPECT_GE(*r.hall_of_fame[1].fitness, *r.hall_of_fame[2].fitness);
    EXPECT_NE(r.hall_of_fame[1].id, r.hall_of_fame[2].id);
}

TEST(Config, Validation) {
    NeatConfig c;
    c.population_size = 1;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = NeatConfig{};
    c.add_node_rate = 1.5;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = NeatConfig{};
    c.generations = 0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Serialization, GenomeRoundTrip) {
    InnovationTracker t;
    Rng rng(8);
    NeatConfig cfg;
    cfg.add_node_rate = cfg.add_connection_rate = 0.6;
    Genome g = minimal_genome(4, 2, t, rng);
    for (int k = 0; k < 10; ++k) g = mutate(g, cfg, t, rng);
    g.fitness = 0.123456789012345678;
    const Genome back = genome_from_json(nlohmann::json::parse(genome_to_json(g).dump()));
    EXPECT_EQ(back.nodes, g.nodes);
    EXPECT_EQ(back.connections, g.connections);
    EXPECT_EQ(back.fitness, g.fitness);
}

TEST(Serialization, RejectsCyclicGenome) {
    auto j = genome_to_json(single_link(1.0));
    j["connections"].push_back({{"in", 1}, {"out", 0}, {"weight", 1.0}, {"enabled", true}, {"innovation", 5}});
    EXPECT_THROW(genome_from_json(j), std::invalid_argument);
}

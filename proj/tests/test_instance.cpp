#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "sopcc/instance.hpp"
#include "sopcc/instance_io.hpp"
#include "sopcc/stochastic.hpp"

using namespace sopcc;

namespace {

std::vector<Vertex> unit_vertices(std::size_t n, double reward = 1.0) {
    std::vector<Vertex> vs;
    for (std::size_t k = 0; k < n; ++k) {
        vs.push_back({static_cast<VertexId>(k), static_cast<double>(k), 0.0, reward});
    }
    return vs;
}

// Floyd-Warshall on the listed means, independent of the closure code.
std::vector<std::vector<double>> all_pairs(std::size_t n, const std::vector<ExplicitEdge>& edges) {
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> d(n, std::vector<double>(n, inf));
    for (std::size_t i = 0; i < n; ++i) {
        d[i][i] = 0.0;
    }
    for (const auto& e : edges) {
        d[e.from][e.to] = std::min(d[e.from][e.to], e.mean);
    }
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);
            }
        }
    }
    return d;
}

// Ring 0 -> 1 -> ... -> n-1 -> 0 plus random chords.
std::vector<ExplicitEdge> sparse_strongly_connected(std::size_t n, unsigned seed, double density) {
    std::mt19937 gen(seed);
    std::uniform_real_distribution<double> mean(0.2, 3.0);
    std::bernoulli_distribution keep(density);
    std::vector<ExplicitEdge> edges;
    for (VertexId i = 0; i < n; ++i) {
        edges.push_back({i, static_cast<VertexId>((i + 1) % n), mean(gen)});
    }
    for (VertexId i = 0; i < n; ++i) {
        for (VertexId j = 0; j < n; ++j) {
            if (i != j && j != (i + 1) % n && keep(gen)) {
                edges.push_back({i, j, mean(gen)});
            }
        }
    }
    return edges;
}

std::string read_fixture(const char* name) {
    std::ifstream in(std::string(SOPCC_TEST_DATA) + "/" + name);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST(GenerateRandomInstance, TwentyVerticesWithUnitRewards) {
    const auto inst = generate_random_instance(20, 7, 0.0, 1.0, 0.5);
    ASSERT_EQ(inst.size(), 20u);
    for (const auto& v : inst.vertices()) {
        EXPECT_GE(v.reward, 0.0);
        EXPECT_LE(v.reward, 1.0);
    }
    EXPECT_EQ(inst.start(), 0u);
    EXPECT_EQ(inst.goal(), 19u);
    EXPECT_TRUE(inst.is_complete());
    EXPECT_TRUE(validate(inst).ok());
}

TEST(GenerateRandomInstance, DegenerateRewardRange) {
    const auto inst = generate_random_instance(3, 0, 1.0, 1.0, 0.5);
    for (const auto& v : inst.vertices()) {
        EXPECT_EQ(v.reward, 1.0);
    }
}

TEST(GenerateRandomInstance, SameSeedSameBytes) {
    const auto a = generate_random_instance(20, 7, 0.0, 1.0, 0.5);
    const auto b = generate_random_instance(20, 7, 0.0, 1.0, 0.5);
    EXPECT_EQ(a, b);
    EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
    EXPECT_NE(a, generate_random_instance(20, 8, 0.0, 1.0, 0.5));
}

TEST(GenerateRandomInstance, RejectsBadArguments) {
    EXPECT_THROW(generate_random_instance(2, 0, 0.0, 1.0, 0.5), InvalidInstanceError);
    EXPECT_THROW(generate_random_instance(5, 0, 0.0, 1.0, 1.0), ParameterError);
    EXPECT_THROW(generate_random_instance(5, 0, 0.0, 1.0, 0.0), ParameterError);
    EXPECT_THROW(generate_random_instance(5, 0, 2.0, 1.0, 0.5), ParameterError);
}

TEST(ParseTsplib, Ulysses16) {
    const auto inst = parse_tsplib(read_fixture("ulysses16.tsp"), 3, 1.0, 4.0, 0.5);
    ASSERT_EQ(inst.size(), 16u);
    EXPECT_EQ(inst.name(), "ulysses16.tsp");
    EXPECT_EQ(inst.start(), 0u);
    EXPECT_EQ(inst.goal(), 15u);
    EXPECT_DOUBLE_EQ(inst.vertices()[10].y, -5.21);
    for (const auto& v : inst.vertices()) {
        EXPECT_GE(v.reward, 1.0);
        EXPECT_LE(v.reward, 4.0);
    }
    EXPECT_TRUE(validate(inst).ok());
    EXPECT_NEAR(inst.expected_cost(0, 1), std::hypot(39.57 - 38.24, 26.15 - 20.42), 1e-12);
}

TEST(ParseTsplib, EmptyCoordinateSection) {
    EXPECT_THROW(parse_tsplib("NAME: x\nDIMENSION: 0\nNODE_COORD_SECTION\nEOF\n", 0, 0.0, 1.0, 0.5), ParseError);
}

TEST(ParseTsplib, MissingSection) {
    EXPECT_THROW(parse_tsplib("NAME: x\nDIMENSION: 2\nEOF\n", 0, 0.0, 1.0, 0.5), ParseError);
}

TEST(ParseTsplib, MalformedLineReportsLineNumber) {
    try {
        parse_tsplib("NAME: x\nNODE_COORD_SECTION\n1 0 0\n2 zero 1\nEOF\n", 0, 0.0, 1.0, 0.5);
        FAIL() << "expected a parse error";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 4u);
    }
}

TEST(ParseTsplib, DuplicateIndexAndDimensionMismatch) {
    EXPECT_THROW(parse_tsplib("NODE_COORD_SECTION\n1 0 0\n1 1 1\n", 0, 0.0, 1.0, 0.5), ParseError);
    EXPECT_THROW(parse_tsplib("DIMENSION: 3\nNODE_COORD_SECTION\n1 0 0\n2 1 1\n", 0, 0.0, 1.0, 0.5), ParseError);
}

TEST(Closure, TriangleSumOfMeans) {
    const ProblemInstance inst("tri", unit_vertices(3), 0, 2,
                               EdgeCostModel::explicit_edges({{0, 1, 1.0}, {1, 2, 1.0}}));
    EXPECT_FALSE(inst.is_complete());
    const auto closed = complete_graph_closure(inst);
    ASSERT_TRUE(closed.is_complete());
    EXPECT_EQ(closed.expected_cost(0, 2), 2.0);
    const std::vector<VertexId> route(closed.route(0, 2).begin(), closed.route(0, 2).end());
    EXPECT_EQ(route, (std::vector<VertexId>{0, 1, 2}));
    EXPECT_TRUE(closed.route(0, 1).empty());
}

TEST(Closure, CompleteInstanceUnchanged) {
    const auto euclid = generate_random_instance(6, 1, 0.0, 1.0, 0.5);
    EXPECT_EQ(complete_graph_closure(euclid), euclid);
    const ProblemInstance full("full", unit_vertices(3), 0, 2,
                               EdgeCostModel::explicit_edges({{0, 1, 1.0}, {1, 2, 1.0}, {0, 2, 5.0}}));
    EXPECT_EQ(complete_graph_closure(full), full);
}

TEST(Closure, MatchesFloydWarshallOnSparseGraphs) {
    for (unsigned seed = 0; seed < 50; ++seed) {
        const std::size_t n = 5;
        const auto edges = sparse_strongly_connected(n, seed, 0.25);
        const ProblemInstance inst("sparse", unit_vertices(n), 0, 4, EdgeCostModel::explicit_edges(edges));
        const auto closed = complete_graph_closure(inst);
        const auto d = all_pairs(n, edges);
        ASSERT_TRUE(closed.is_complete());
        for (VertexId i = 0; i < n; ++i) {
            for (VertexId j = 0; j < n; ++j) {
                if (!inst.is_required_pair(i, j)) {
                    continue;
                }
                if (inst.has_edge(i, j)) {
                    EXPECT_EQ(closed.expected_cost(i, j), inst.expected_cost(i, j));
                } else {
                    EXPECT_NEAR(closed.expected_cost(i, j), d[i][j], 1e-12) << "seed " << seed;
                    const auto r = closed.route(i, j);
                    ASSERT_GE(r.size(), 3u);
                    double along = 0.0;
                    for (std::size_t k = 0; k + 1 < r.size(); ++k) {
                        along += inst.expected_cost(r[k], r[k + 1]);
                    }
                    EXPECT_NEAR(along, d[i][j], 1e-12);
                }
            }
        }
    }
}

TEST(Closure, IdempotentAndMetricOnEuclideanSubgraphs) {
    std::mt19937 gen(11);
    std::uniform_real_distribution<double> coord(0.0, 1.0);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 7;
        std::vector<Vertex> vs;
        for (VertexId k = 0; k < n; ++k) {
            vs.push_back({k, coord(gen), coord(gen), 1.0});
        }
        std::vector<ExplicitEdge> edges;
        std::bernoulli_distribution keep(0.4);
        for (VertexId i = 0; i < n; ++i) {
            for (VertexId j = 0; j < n; ++j) {
                if (i != j && (j == (i + 1) % n || keep(gen))) {
                    edges.push_back({i, j, std::hypot(vs[i].x - vs[j].x, vs[i].y - vs[j].y)});
                }
            }
        }
        const ProblemInstance inst("metric", vs, 0, static_cast<VertexId>(n - 1),
                                   EdgeCostModel::explicit_edges(edges));
        const auto once = complete_graph_closure(inst);
        EXPECT_EQ(complete_graph_closure(once), once);
        for (VertexId i = 0; i < n; ++i) {
            for (VertexId j = 0; j < n; ++j) {
                for (VertexId k = 0; k < n; ++k) {
                    if (once.has_edge(i, k) && once.has_edge(i, j) && once.has_edge(j, k)) {
                        EXPECT_LE(once.expected_cost(i, k), once.expected_cost(i, j) + once.expected_cost(j, k) + 1e-12);
                    }
                }
            }
        }
    }
}

TEST(Closure, UnreachableVertex) {
    const ProblemInstance inst("cut", unit_vertices(3), 0, 2, EdgeCostModel::explicit_edges({{0, 2, 1.0}}));
    EXPECT_THROW(complete_graph_closure(inst), ClosureError);
}

TEST(Closure, CompositeEdgeSamplesEachHop) {
    const auto closed = complete_graph_closure(ProblemInstance(
        "tri", unit_vertices(3), 0, 2, EdgeCostModel::explicit_edges({{0, 1, 1.0}, {1, 2, 2.0}}, 0.5)));
    Rng rng(4);
    double sum = 0.0;
    const int n = 100000;
    for (int k = 0; k < n; ++k) {
        const double c = sample_edge_cost(closed, 0, 2, rng);
        ASSERT_GE(c, 1.5);
        sum += c;
    }
    // Two exponential parts with means 0.5 and 1.0: sd sqrt(1.25).
    EXPECT_NEAR(sum / n, 3.0, 3.0 * std::sqrt(1.25 / n));
}

TEST(Validate, GeneratedInstanceIsClean) {
    EXPECT_TRUE(validate(generate_random_instance(12, 2, 0.0, 1.0, 0.5)).ok());
}

TEST(Validate, StartEqualsGoal) {
    const ProblemInstance inst("bad", unit_vertices(4), 1, 1, EdgeCostModel::euclidean(0.5));
    EXPECT_EQ(validate(inst).violations.size(), 1u);
}

TEST(Validate, NegativeReward) {
    auto vs = unit_vertices(4);
    vs[2].reward = -0.5;
    const ProblemInstance inst("bad", vs, 0, 3, EdgeCostModel::euclidean(0.5));
    EXPECT_EQ(validate(inst).violations.size(), 1u);
}

TEST(Validate, CoincidentPointsGiveZeroCost) {
    auto vs = unit_vertices(3);
    vs[1].x = vs[0].x;
    const ProblemInstance inst("bad", vs, 0, 2, EdgeCostModel::euclidean(0.5));
    EXPECT_FALSE(validate(inst).ok());
}

TEST(Validate, ExplicitEdgeProblems) {
    const ProblemInstance inst("bad", unit_vertices(3), 0, 2,
                               EdgeCostModel::explicit_edges({{0, 1, 0.0}, {0, 1, 1.0}, {1, 7, 1.0}}));
    EXPECT_EQ(validate(inst).violations.size(), 3u);
}

TEST(InstanceJson, RoundTrip) {
    const auto a = generate_random_instance(9, 5, 0.0, 1.0, 0.5);
    EXPECT_EQ(instance_from_json(to_json(a)), a);
    const ProblemInstance b("sparse", unit_vertices(3), 0, 2,
                            EdgeCostModel::explicit_edges({{0, 1, 1.0}, {1, 2, 1.5}}, 0.25));
    EXPECT_EQ(instance_from_json(to_json(b)), b);
}

TEST(InstanceJson, RejectsUnknownFields) {
    auto doc = to_json(generate_random_instance(4, 5, 0.0, 1.0, 0.5));
    doc["colour"] = "blue";
    EXPECT_THROW(instance_from_json(doc), ParseError);
    std::istringstream broken("{\"name\": ");
    EXPECT_THROW(read_instance_json(broken), ParseError);
}

#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "mi/mlp.hpp"

namespace mi {

// Subgraph of an Mlp restricted to one output neuron. edges[l] holds one bit
// per weight of block l (bit out * in_size + in). A node is included when it
// is the target output or an endpoint of an included edge.
struct Circuit {
    int target_output = 0;
    std::vector<std::uint64_t> edges;

    bool has_edge(const Mlp& m, int block, int out, int in) const {
        return (edges[block] >> (out * m.layer_sizes[block] + in)) & 1u;
    }
    bool includes(const Mlp& m, NeuronRef n) const;
    std::vector<std::vector<bool>> node_mask(const Mlp& m) const;
    // Included parents of an included neuron, by index in the previous layer.
    std::vector<int> parents(const Mlp& m, NeuronRef n) const;

    static Circuit full(const Mlp& m, int target_output);

    auto operator<=>(const Circuit&) const = default;
};

struct CircuitError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Throws CircuitError unless every included edge lies on the target's side of
// the graph and some input reaches the target output.
void validate_circuit(const Circuit& c, const Mlp& m);
bool has_input_output_path(const Circuit& c, const Mlp& m);

// Nodes and edges on input -> target paths of the full graph.
int total_components(const Mlp& m);
int included_components(const Circuit& c, const Mlp& m);
double sparsity(const Circuit& c, const Mlp& m);

// Value of the target output with excluded nodes zeroed and excluded edges cut.
double run_circuit(const Circuit& c, const Mlp& m, const std::vector<double>& input);
// Post-activations of every neuron of the ablated network.
std::vector<std::vector<double>> run_circuit_all(const Circuit& c, const Mlp& m,
                                                 const std::vector<double>& input);

double circuit_error(const Circuit& c, const Mlp& m,
                     const std::vector<std::vector<double>>& inputs, double threshold = 0.5);

struct CircuitSearchOptions {
    double min_sparsity = 0.0;
    double threshold = 0.5;
    std::uint64_t budget = 10'000'000;  // candidate circuits examined
    int threads = 1;
};

struct CensusEntry {
    Circuit circuit;
    double sparsity = 0;
    double error = 0;
};

struct CircuitCensus {
    std::string model_id;
    int target_output = 0;
    std::string target_gate;
    std::vector<CensusEntry> circuits;
    std::uint64_t candidates_total = 0;
    std::uint64_t candidates_examined = 0;
    bool partial = false;

    double completed_fraction() const {
        return candidates_total ? static_cast<double>(candidates_examined) / candidates_total : 1.0;
    }
};

// Called for every perfect circuit; `worker` identifies the calling thread.
// Calls from different workers may run concurrently.
using CircuitVisitor = std::function<void(const CensusEntry&, int worker)>;

struct EnumerationStats {
    std::uint64_t candidates_total = 0;
    std::uint64_t candidates_examined = 0;
    std::uint64_t perfect = 0;
    bool partial = false;
};

// Streams perfect circuits of a network with two hidden layers. Candidates
// are visited in canonical order; a budget cut keeps exactly the first
// `budget` candidates of that order regardless of the thread count.
EnumerationStats visit_perfect_circuits(const Mlp& m, int target_output,
                                        const CircuitSearchOptions& opts,
                                        const CircuitVisitor& visit);

// Census in canonical order. Sets `partial` when the budget was hit.
CircuitCensus enumerate_perfect_circuits(const Mlp& m, int target_output,
                                         const CircuitSearchOptions& opts = {});

std::string census_entry_json(const CensusEntry& e, const Mlp& m, std::size_t id);
void write_census(std::ostream& os, const CircuitCensus& census, const Mlp& m);
CircuitCensus read_census(std::istream& is, const Mlp& m);

}  // namespace mi

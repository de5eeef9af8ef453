#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "mi/circuit.hpp"
#include "mi/logic.hpp"

namespace mi {

using BigCount = unsigned __int128;
BigCount saturating_add(BigCount a, BigCount b);
BigCount saturating_mul(BigCount a, BigCount b);
double to_double(BigCount c);
std::string to_string(BigCount c);

// A threshold on one neuron and the gate it induces over the parents'
// interpreted values. Values above the threshold read as 1.
struct Separation {
    double threshold = 0;
    int interval = 0;  // index of the gap between sorted distinct activations
    GateLabel gate;
};

// Every midpoint threshold whose induced labelling is a function of the parent
// bits, one entry per completion of the parent combinations that never occur.
std::vector<Separation> candidate_separations(
    const std::vector<std::pair<std::vector<bool>, double>>& activations);

struct NeuronInterpretation {
    NeuronRef neuron;
    std::vector<int> parents;  // indices in the previous layer, ascending
    GateLabel gate;
    double separation = 0;
    int interval = 0;
};

struct CircuitInterpretation {
    std::size_t circuit_id = 0;
    std::vector<NeuronInterpretation> neurons;  // hidden in (layer, index) order, then output
};

struct InterpretationOptions {
    double output_threshold = 0.5;
    std::uint64_t budget = 1'000'000;  // interpretations materialised per circuit
};

struct InterpretationResult {
    std::vector<CircuitInterpretation> interpretations;
    bool partial = false;
};

InterpretationResult enumerate_interpretations(const Circuit& c, const Mlp& m,
                                               const TruthTable& target,
                                               const InterpretationOptions& opts = {},
                                               std::size_t circuit_id = 0);

// Same total as enumerate_interpretations without materialising anything.
BigCount count_interpretations(const Circuit& c, const Mlp& m, const TruthTable& target,
                               const InterpretationOptions& opts = {});

void write_interpretation_table(std::ostream& os, const std::vector<CircuitInterpretation>& rows);

}  // namespace mi

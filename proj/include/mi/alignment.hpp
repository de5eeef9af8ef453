#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mi/logic.hpp"
#include "mi/mlp.hpp"

namespace mi {

// Pre-image of one high-level variable: activations of `neuron` above
// `threshold` read as 1 when `positive`, as 0 otherwise.
struct VariableMap {
    int var = 0;  // index into formula_intermediate_vars
    NeuronRef neuron;
    double threshold = 0;
    bool positive = true;

    bool read(double activation) const { return (activation > threshold) == positive; }
};

struct Mapping {
    std::vector<VariableMap> vars;
    int target_output = 0;
    double output_threshold = 0.5;

    const VariableMap& of(int var) const;
};

struct InterventionResult {
    int base = 0, source = 0;  // binary input indices 0..3
    int var = 0;
    bool low = false, high = false;
    bool agree() const { return low == high; }
};

// Threshold separating the neuron's activations on inputs where the variable
// is 0 from those where it is 1, or nothing when the two sets overlap or the
// variable is constant.
std::optional<VariableMap> induce_variable_map(const Mlp& m, const Intermediate& v, int var,
                                               NeuronRef neuron);

bool interchange_low(const Mlp& m, const Mapping& mapping, int base, int source, int var);
bool interchange_high(const FormulaPtr& f, const std::vector<Intermediate>& vars, int base,
                      int source, int var);
InterventionResult interchange(const Mlp& m, const FormulaPtr& f,
                               const std::vector<Intermediate>& vars, const Mapping& mapping,
                               int base, int source, int var);

double iia(const Mlp& m, const FormulaPtr& f, const Mapping& mapping, int var);

struct AlignmentReport {
    std::size_t formula_id = 0;
    Mapping mapping;
    std::vector<double> iia;
    bool perfect = false;
    bool minimal = false;
};

// True when `a` dominates `b`, so that `b` is not minimal.
using DominanceFn = std::function<bool(const Mapping& a, const Mapping& b)>;

// Every variable of `a` uses the same neuron as in `b` and each of its value
// regions contains the corresponding region of `b`, one of them strictly.
bool preimage_dominates(const Mapping& a, const Mapping& b);

// Marks `minimal` on perfect reports that no other perfect report dominates.
void apply_minimality(std::vector<AlignmentReport>& reports,
                      const DominanceFn& dominates = preimage_dominates);

struct AlignmentOptions {
    int target_output = 0;
    std::uint64_t budget = 1'000'000;  // perfect mappings kept, as a canonical prefix
    int threads = 1;
    DominanceFn dominates = preimage_dominates;
};

struct MappingSearch {
    std::vector<AlignmentReport> reports;  // perfect mappings only, canonical order
    std::uint64_t visited = 0;
    bool partial = false;
};

// Injective assignments of the formula's intermediates to hidden neurons with
// IIA 1 on every variable.
MappingSearch enumerate_perfect_mappings(const Mlp& m, const FormulaPtr& f,
                                         const AlignmentOptions& opts = {},
                                         std::size_t formula_id = 0);

struct FormulaAlignment {
    std::size_t formula_id = 0;
    std::string formula;
    std::size_t perfect = 0;
    std::size_t minimal = 0;
};

struct AlignmentSummary {
    std::size_t formulas = 0;
    std::size_t algorithms = 0;  // formulas with at least one perfect mapping
    std::size_t total_minimal = 0;
    bool partial = false;
    std::vector<FormulaAlignment> per_formula;
    std::vector<std::vector<AlignmentReport>> reports;  // filled when requested
};

AlignmentSummary align_all(const Mlp& m, const TruthTable& target, int max_depth,
                           const AlignmentOptions& opts = {}, bool keep_reports = false);

void write_mapping_table(std::ostream& os, const FormulaPtr& f, std::size_t formula_id,
                         const std::vector<AlignmentReport>& reports);

}  // namespace mi

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mi/logic.hpp"

namespace mi {

enum class SweepKind { Size, Multitask, LossCutoff, Noise, SkewedDistribution, GateVariation, Single };

std::string sweep_kind_name(SweepKind k);
SweepKind sweep_kind_from_name(const std::string& s);

// The eight gates multitask sweeps draw from.
const std::vector<std::string>& multitask_gate_pool();

struct CellParams {
    int k = 3;
    int n = 1;
    std::vector<std::string> gates;  // empty: sample n gates from the pool per seed
    std::optional<double> loss_cutoff;
    double noise_std = 0.0;
    bool skewed = false;  // draw input weights per seed from U[0,1], normalised
    std::vector<double> input_weights{0.25, 0.25, 0.25, 0.25};
    std::optional<double> min_sparsity;  // default: 0 for k <= 3, 0.3 above
    double x = 0;                        // plot abscissa
    std::string label;

    double effective_min_sparsity() const;
};

struct Budgets {
    std::uint64_t circuits = 10'000'000;
    std::uint64_t mappings = 1'000'000;
};

struct ExperimentSpec {
    SweepKind kind = SweepKind::Single;
    std::vector<CellParams> grid;
    int seeds = 20;
    std::uint64_t base_seed = 1;
    Budgets budgets;
    int max_depth = 3;
    long max_steps = 100000;
    int threads = 1;
    std::string out_dir = "out";

    void validate() const;
};

// Default grid for a sweep kind.
ExperimentSpec default_spec(SweepKind kind);
ExperimentSpec spec_from_json(const nlohmann::json& j);
nlohmann::json spec_to_json(const ExperimentSpec& s);

struct GateResult {
    std::string gate;
    double circuits = 0;
    double interpretations = 0;
    double algorithms = 0;
    double mappings = 0;
    bool circuits_partial = false;
    bool mappings_partial = false;
};

struct CellResult {
    int cell = 0;
    std::uint64_t seed = 0;
    CellParams params;
    std::vector<std::string> gates;
    std::vector<double> input_weights;
    double entropy_bits = 0;
    bool converged = false;
    long steps = 0;
    double final_loss = 0;
    // Means over the network's target gates.
    double circuits = 0;
    double total_interpretations = 0;
    std::optional<double> interpretations_per_circuit;
    double algorithms = 0;
    double total_mappings = 0;
    std::optional<double> mappings_per_algorithm;
    bool partial = false;
    std::vector<GateResult> per_gate;
    std::string model_file;
    double wall_seconds = 0;  // kept out of the records file

    bool zero_abstraction() const { return !converged || circuits == 0 || algorithms == 0; }
};

nlohmann::json cell_result_to_json(const CellResult& r);
CellResult cell_result_from_json(const nlohmann::json& j);

struct RunOptions {
    bool save_models = true;
    bool resume = true;
    bool quiet = true;
};

// Trains and analyses one network.
CellResult run_cell(const ExperimentSpec& spec, int cell, std::uint64_t seed,
                    const std::string& model_dir = "");

// One CellResult per (cell, seed) in canonical order. Completed runs are
// journaled to <out_dir>/records.partial.jsonl and skipped on resume.
std::vector<CellResult> run_sweep(const ExperimentSpec& spec, const RunOptions& opts = {});

// Writes records.jsonl, summary.tsv, plot_<metric>.tsv and stats.tsv.
void emit_reports(const std::vector<CellResult>& results, const std::string& out_dir,
                  const ExperimentSpec* spec = nullptr);

std::vector<CellResult> read_records(const std::string& path);

// Metric accessor by name; absent when undefined for that network.
std::optional<double> metric_value(const CellResult& r, const std::string& metric);
const std::vector<std::string>& metric_names();

}  // namespace mi

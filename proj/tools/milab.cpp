// Command-line front end: train, circuits, interpret, formulas, align, sweep, stats.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "mi/alignment.hpp"
#include "mi/circuit.hpp"
#include "mi/harness.hpp"
#include "mi/interpretation.hpp"
#include "mi/logic.hpp"
#include "mi/mlp.hpp"
#include "mi/stats.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kError = 1;
constexpr int kPartial = 2;

struct Globals {
    std::uint64_t seed = 1;
    std::optional<std::uint64_t> budget;
    int threads = 1;
    std::string out;
};

// Writes to --out when given, stdout otherwise.
class Sink {
public:
    explicit Sink(const std::string& path) {
        if (!path.empty()) {
            file_.open(path, std::ios::binary | std::ios::trunc);
            if (!file_) throw std::runtime_error("cannot write " + path);
        }
    }
    std::ostream& os() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

private:
    std::ofstream file_;
};

std::vector<std::string> split(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Identifiability laboratory for explanations of small Boolean MLPs"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--seed", g.seed, "Random seed");
    app.add_option("--budget", g.budget, "Enumeration budget");
    app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);
    app.add_option("--out", g.out, "Output path (file, or directory for sweep)");

    // train
    auto* train = app.add_subcommand("train", "Train an MLP and write the model file");
    std::string train_gates = "XOR";
    int train_k = 3;
    std::optional<double> train_cutoff;
    double train_noise = 0;
    std::string train_weights;
    long train_steps = 100000;
    std::string train_act = "sigmoid";
    train->add_option("--gates", train_gates, "Comma-separated target gates");
    train->add_option("-k,--width", train_k, "Hidden layer width");
    train->add_option("--cutoff", train_cutoff, "Loss cutoff");
    train->add_option("--noise", train_noise, "Input noise standard deviation");
    train->add_option("--weights", train_weights, "Input distribution weights w00,w01,w10,w11");
    train->add_option("--max-steps", train_steps, "Step limit");
    train->add_option("--activation", train_act, "sigmoid or relu");

    // circuits
    auto* circ = app.add_subcommand("circuits", "Perfect circuit census of a model");
    std::string circ_model;
    int circ_output = 0;
    std::optional<double> circ_sparsity;
    circ->add_option("--model", circ_model, "Model file")->required();
    circ->add_option("--output", circ_output, "Target output neuron");
    circ->add_option("--min-sparsity", circ_sparsity, "Minimum sparsity (default by width)");

    // interpret
    auto* interp = app.add_subcommand("interpret", "Interpretations of every circuit in a census");
    std::string int_model, int_census, int_gate = "XOR";
    interp->add_option("--model", int_model, "Model file")->required();
    interp->add_option("--census", int_census, "Census file from `circuits`")->required();
    interp->add_option("--gate", int_gate, "Gate computed by the target output");

    // formulas
    auto* forms = app.add_subcommand("formulas", "Formulas over A, B computing a gate");
    std::string f_gate = "XOR";
    int f_depth = 3;
    bool f_count = false;
    forms->add_option("--gate", f_gate, "Target gate");
    forms->add_option("--depth", f_depth, "Maximum depth")->check(CLI::PositiveNumber);
    forms->add_flag("--count", f_count, "Print only the number of formulas");

    // align
    auto* align = app.add_subcommand("align", "Perfect minimal mappings of every formula");
    std::string a_model, a_gate = "XOR";
    int a_depth = 3, a_output = 0;
    align->add_option("--model", a_model, "Model file")->required();
    align->add_option("--gate", a_gate, "Gate computed by the target output");
    align->add_option("--depth", a_depth, "Maximum formula depth");
    align->add_option("--output", a_output, "Target output neuron");

    // sweep
    auto* sweep = app.add_subcommand("sweep", "Run an experiment sweep");
    std::string s_config, s_kind;
    std::optional<int> s_seeds;
    bool s_fresh = false;
    sweep->add_option("--config", s_config, "ExperimentSpec JSON file");
    sweep->add_option("--kind", s_kind,
                      "size, multitask, loss_cutoff, noise, skewed_distribution, gate_variation, single");
    sweep->add_option("--seeds", s_seeds, "Seeds per cell");
    sweep->add_flag("--fresh", s_fresh, "Ignore an existing journal");

    // stats
    auto* stats = app.add_subcommand("stats", "Welch t-test or regression over a records file");
    std::string st_records, st_metric = "circuits", st_test = "regression";
    std::vector<int> st_cells;
    stats->add_option("--records", st_records, "records.jsonl")->required();
    stats->add_option("--metric", st_metric, "Metric name");
    stats->add_option("--test", st_test, "regression or welch")
        ->check(CLI::IsMember({"regression", "welch"}));
    stats->add_option("--cells", st_cells, "Two cell indices for welch")->expected(2);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train) {
            mi::TrainConfig tc;
            for (const auto& name : split(train_gates)) tc.target_gates.push_back(mi::gate_from_name(name));
            tc.hidden_width = train_k;
            tc.loss_cutoff = train_cutoff;
            tc.noise_std = train_noise;
            if (!train_weights.empty()) {
                tc.input_weights.clear();
                for (const auto& w : split(train_weights)) tc.input_weights.push_back(std::stod(w));
            }
            tc.max_steps = train_steps;
            tc.hidden_activation = mi::activation_from_name(train_act);
            auto r = mi::train_detailed(tc, g.seed);
            if (g.out.empty())
                std::cout << mi::serialize(r.model);
            else
                mi::save_model(r.model, g.out);
            std::cerr << "converged after " << r.steps << " steps, loss " << fmt(r.final_loss) << "\n";
            return kOk;
        }
        if (*circ) {
            const mi::Mlp m = mi::load_model(circ_model);
            mi::CircuitSearchOptions o;
            o.threads = g.threads;
            if (g.budget) o.budget = *g.budget;
            const int width = m.layer_sizes.size() > 1 ? m.layer_sizes[1] : 0;
            o.min_sparsity = circ_sparsity ? *circ_sparsity : (width <= 3 ? 0.0 : 0.3);
            auto census = mi::enumerate_perfect_circuits(m, circ_output, o);
            census.model_id = circ_model;
            Sink sink(g.out);
            mi::write_census(sink.os(), census, m);
            std::cerr << census.circuits.size() << " perfect circuits, "
                      << census.candidates_examined << "/" << census.candidates_total
                      << " candidates examined\n";
            return census.partial ? kPartial : kOk;
        }
        if (*interp) {
            const mi::Mlp m = mi::load_model(int_model);
            std::ifstream in(int_census);
            if (!in) throw std::runtime_error("cannot read " + int_census);
            const auto census = mi::read_census(in, m);
            const auto target = mi::gate_from_name(int_gate);
            mi::InterpretationOptions o;
            if (g.budget) o.budget = *g.budget;
            Sink sink(g.out);
            // The budget caps rows written over the whole census; counting continues past it.
            bool partial = census.partial;
            mi::BigCount total = 0;
            std::uint64_t remaining = o.budget;
            for (std::size_t i = 0; i < census.circuits.size(); ++i) {
                const auto& c = census.circuits[i].circuit;
                const mi::BigCount n = mi::count_interpretations(c, m, target, o);
                total = mi::saturating_add(total, n);
                if (n == 0) continue;
                if (remaining == 0) {
                    partial = true;
                    continue;
                }
                mi::InterpretationOptions oi = o;
                oi.budget = remaining;
                auto r = mi::enumerate_interpretations(c, m, target, oi, i);
                partial = partial || r.partial;
                remaining -= std::min<std::uint64_t>(remaining, r.interpretations.size());
                mi::write_interpretation_table(sink.os(), r.interpretations);
            }
            std::cerr << mi::to_string(total) << " interpretations over " << census.circuits.size()
                      << " circuits\n";
            return partial ? kPartial : kOk;
        }
        if (*forms) {
            const auto fs = mi::enumerate_formulas(mi::gate_from_name(f_gate), f_depth);
            Sink sink(g.out);
            if (f_count) {
                sink.os() << fs.size() << "\n";
            } else {
                for (std::size_t i = 0; i < fs.size(); ++i)
                    sink.os() << i + 1 << "\t" << mi::depth(*fs[i]) << "\t" << mi::to_string(*fs[i]) << "\n";
                std::cerr << fs.size() << " formulas\n";
            }
            return kOk;
        }
        if (*align) {
            const mi::Mlp m = mi::load_model(a_model);
            const auto target = mi::gate_from_name(a_gate);
            mi::AlignmentOptions o;
            o.target_output = a_output;
            o.threads = g.threads;
            if (g.budget) o.budget = *g.budget;
            const auto s = mi::align_all(m, target, a_depth, o, true);
            const auto fs = mi::enumerate_formulas(target, a_depth);
            Sink sink(g.out);
            for (std::size_t i = 0; i < fs.size() && i < s.reports.size(); ++i) {
                std::vector<mi::AlignmentReport> minimal;
                for (const auto& r : s.reports[i])
                    if (r.minimal) minimal.push_back(r);
                mi::write_mapping_table(sink.os(), fs[i], i, minimal);
            }
            std::cerr << s.total_minimal << " perfect minimal mappings, " << s.algorithms << " of "
                      << s.formulas << " formulas aligned\n";
            return s.partial ? kPartial : kOk;
        }
        if (*sweep) {
            mi::ExperimentSpec spec;
            if (!s_config.empty()) {
                std::ifstream in(s_config);
                if (!in) throw std::runtime_error("cannot read " + s_config);
                spec = mi::spec_from_json(nlohmann::json::parse(in));
            } else {
                spec = mi::default_spec(mi::sweep_kind_from_name(s_kind.empty() ? "single" : s_kind));
            }
            if (!s_kind.empty() && !s_config.empty()) spec.kind = mi::sweep_kind_from_name(s_kind);
            if (s_seeds) spec.seeds = *s_seeds;
            if (app.count("--seed")) spec.base_seed = g.seed;
            if (g.budget) spec.budgets.circuits = spec.budgets.mappings = *g.budget;
            if (app.count("--threads")) spec.threads = g.threads;
            if (!g.out.empty()) spec.out_dir = g.out;
            spec.validate();
            mi::RunOptions ro;
            ro.resume = !s_fresh;
            if (s_fresh) std::filesystem::remove(std::filesystem::path(spec.out_dir) / "records.partial.jsonl");
            const auto results = mi::run_sweep(spec, ro);
            bool partial = false;
            int failed = 0;
            for (const auto& r : results) {
                partial = partial || r.partial;
                failed += !r.converged;
            }
            std::cerr << results.size() << " networks, " << failed << " did not converge; reports in "
                      << spec.out_dir << "\n";
            return partial ? kPartial : kOk;
        }
        if (*stats) {
            const auto records = mi::read_records(st_records);
            if (st_test == "regression") {
                std::vector<double> xs, ys;
                for (const auto& r : records)
                    if (auto y = mi::metric_value(r, st_metric)) {
                        xs.push_back(r.params.skewed ? r.entropy_bits : r.params.x);
                        ys.push_back(*y);
                    }
                const auto reg = mi::linear_regression(xs, ys);
                std::cout << "slope\t" << fmt(reg.slope) << "\nintercept\t" << fmt(reg.intercept) << "\nt\t"
                          << fmt(reg.t) << "\np\t" << fmt(reg.p) << "\nn\t" << xs.size() << "\n";
            } else {
                if (st_cells.size() != 2) throw std::invalid_argument("--cells needs two cell indices");
                std::vector<double> a, b;
                for (const auto& r : records)
                    if (auto y = mi::metric_value(r, st_metric)) {
                        if (r.cell == st_cells[0]) a.push_back(*y);
                        if (r.cell == st_cells[1]) b.push_back(*y);
                    }
                const auto t = mi::welch_t_test(a, b);
                std::cout << "t\t" << fmt(t.t) << "\ndf\t" << fmt(t.df) << "\np\t" << fmt(t.p) << "\n";
            }
            return kOk;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kError;
    }
    return kError;
}

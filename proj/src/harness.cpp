#include "mi/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "mi/alignment.hpp"
#include "mi/circuit.hpp"
#include "mi/interpretation.hpp"
#include "mi/mlp.hpp"
#include "mi/stats.hpp"

namespace fs = std::filesystem;

namespace mi {

std::string sweep_kind_name(SweepKind k) {
    switch (k) {
        case SweepKind::Size: return "size";
        case SweepKind::Multitask: return "multitask";
        case SweepKind::LossCutoff: return "loss_cutoff";
        case SweepKind::Noise: return "noise";
        case SweepKind::SkewedDistribution: return "skewed_distribution";
        case SweepKind::GateVariation: return "gate_variation";
        case SweepKind::Single: return "single";
    }
    return "?";
}

SweepKind sweep_kind_from_name(const std::string& s) {
    for (auto k : {SweepKind::Size, SweepKind::Multitask, SweepKind::LossCutoff, SweepKind::Noise,
                   SweepKind::SkewedDistribution, SweepKind::GateVariation, SweepKind::Single})
        if (sweep_kind_name(k) == s) return k;
    throw std::invalid_argument("unknown sweep kind: " + s);
}

const std::vector<std::string>& multitask_gate_pool() {
    static const std::vector<std::string> pool{"AND", "OR", "XOR", "IMP", "NOR", "NAND", "NIMP", "XNOR"};
    return pool;
}

double CellParams::effective_min_sparsity() const {
    if (min_sparsity) return *min_sparsity;
    return k <= 3 ? 0.0 : 0.3;
}

void ExperimentSpec::validate() const {
    if (grid.empty()) throw std::invalid_argument("experiment grid is empty");
    if (seeds < 1) throw std::invalid_argument("seeds must be at least 1");
    if (max_depth < 1) throw std::invalid_argument("max_depth must be at least 1");
    for (const auto& c : grid) {
        if (c.k < 1 || c.n < 1) throw std::invalid_argument("k and n must be positive");
        if (!c.gates.empty() && static_cast<int>(c.gates.size()) != c.n)
            throw std::invalid_argument("cell lists " + std::to_string(c.gates.size()) +
                                        " gates but n = " + std::to_string(c.n));
        if (c.gates.empty() && c.n > static_cast<int>(multitask_gate_pool().size()))
            throw std::invalid_argument("n exceeds the gate pool");
        for (const auto& g : c.gates) gate_from_name(g);
    }
}

ExperimentSpec default_spec(SweepKind kind) {
    ExperimentSpec s;
    s.kind = kind;
    auto xor_cell = [](int k) {
        CellParams c;
        c.k = k;
        c.gates = {"XOR"};
        c.x = k;
        c.label = "k=" + std::to_string(k);
        return c;
    };
    switch (kind) {
        case SweepKind::Size:
            for (int k = 2; k <= 5; ++k) s.grid.push_back(xor_cell(k));
            break;
        case SweepKind::Multitask:
            for (int n = 1; n <= 6; ++n) {
                CellParams c;
                c.k = 3;
                c.n = n;
                c.x = n;
                c.label = "n=" + std::to_string(n);
                s.grid.push_back(c);
            }
            break;
        case SweepKind::LossCutoff:
            for (int e = 1; e <= 6; ++e) {
                CellParams c = xor_cell(3);
                c.loss_cutoff = std::pow(10.0, -e);
                c.x = -e;
                c.label = "cutoff=1e-" + std::to_string(e);
                s.grid.push_back(c);
            }
            break;
        case SweepKind::Noise:
            for (double sd : {0.0, 0.1}) {
                CellParams c = xor_cell(3);
                c.noise_std = sd;
                c.x = sd;
                c.label = sd > 0 ? "noise=0.1" : "noise=0";
                s.grid.push_back(c);
            }
            break;
        case SweepKind::SkewedDistribution: {
            CellParams c = xor_cell(3);
            c.skewed = true;
            c.label = "skewed";
            s.grid.push_back(c);
            break;
        }
        case SweepKind::GateVariation: {
            int i = 0;
            for (const auto& g : multitask_gate_pool()) {
                CellParams c = xor_cell(3);
                c.gates = {g};
                c.x = i++;
                c.label = g;
                s.grid.push_back(c);
            }
            break;
        }
        case SweepKind::Single:
            s.grid.push_back(xor_cell(3));
            s.seeds = 1;
            break;
    }
    return s;
}

namespace {

nlohmann::json cell_to_json(const CellParams& c) {
    nlohmann::json j;
    j["k"] = c.k;
    j["n"] = c.n;
    j["gates"] = c.gates;
    if (c.loss_cutoff) j["loss_cutoff"] = *c.loss_cutoff;
    j["noise_std"] = c.noise_std;
    j["skewed"] = c.skewed;
    j["input_weights"] = c.input_weights;
    j["min_sparsity"] = c.effective_min_sparsity();
    j["x"] = c.x;
    j["label"] = c.label;
    return j;
}

CellParams cell_from_json(const nlohmann::json& j, const CellParams& base) {
    CellParams c = base;
    if (j.contains("k")) c.k = j["k"].get<int>();
    if (j.contains("n")) c.n = j["n"].get<int>();
    if (j.contains("gates")) c.gates = j["gates"].get<std::vector<std::string>>();
    if (j.contains("loss_cutoff")) c.loss_cutoff = j["loss_cutoff"].get<double>();
    if (j.contains("noise_std")) c.noise_std = j["noise_std"].get<double>();
    if (j.contains("skewed")) c.skewed = j["skewed"].get<bool>();
    if (j.contains("input_weights")) c.input_weights = j["input_weights"].get<std::vector<double>>();
    if (j.contains("min_sparsity")) c.min_sparsity = j["min_sparsity"].get<double>();
    if (j.contains("x")) c.x = j["x"].get<double>();
    else if (j.contains("k") && !j.contains("n")) c.x = c.k;
    else if (j.contains("n")) c.x = c.n;
    if (j.contains("label")) c.label = j["label"].get<std::string>();
    return c;
}

}  // namespace

ExperimentSpec spec_from_json(const nlohmann::json& j) {
    ExperimentSpec s = default_spec(sweep_kind_from_name(j.value("kind", std::string("single"))));
    if (j.contains("grid")) {
        std::vector<CellParams> grid;
        for (const auto& c : j["grid"]) grid.push_back(cell_from_json(c, CellParams{}));
        s.grid = grid;
    }
    if (j.contains("seeds")) s.seeds = j["seeds"].get<int>();
    if (j.contains("base_seed")) s.base_seed = j["base_seed"].get<std::uint64_t>();
    if (j.contains("max_depth")) s.max_depth = j["max_depth"].get<int>();
    if (j.contains("max_steps")) s.max_steps = j["max_steps"].get<long>();
    if (j.contains("threads")) s.threads = j["threads"].get<int>();
    if (j.contains("out_dir")) s.out_dir = j["out_dir"].get<std::string>();
    if (j.contains("budgets")) {
        const auto& b = j["budgets"];
        if (b.contains("circuits")) s.budgets.circuits = b["circuits"].get<std::uint64_t>();
        if (b.contains("mappings")) s.budgets.mappings = b["mappings"].get<std::uint64_t>();
    }
    s.validate();
    return s;
}

nlohmann::json spec_to_json(const ExperimentSpec& s) {
    nlohmann::json j;
    j["kind"] = sweep_kind_name(s.kind);
    j["seeds"] = s.seeds;
    j["base_seed"] = s.base_seed;
    j["max_depth"] = s.max_depth;
    j["max_steps"] = s.max_steps;
    j["threads"] = s.threads;
    j["out_dir"] = s.out_dir;
    j["budgets"] = {{"circuits", s.budgets.circuits}, {"mappings", s.budgets.mappings}};
    auto g = nlohmann::json::array();
    for (const auto& c : s.grid) g.push_back(cell_to_json(c));
    j["grid"] = g;
    return j;
}

namespace {

nlohmann::json opt_json(const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::optional<double> opt_from(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    return j[key].get<double>();
}

}  // namespace

nlohmann::json cell_result_to_json(const CellResult& r) {
    nlohmann::json j;
    j["cell"] = r.cell;
    j["seed"] = r.seed;
    j["params"] = cell_to_json(r.params);
    j["gates"] = r.gates;
    j["input_weights"] = r.input_weights;
    j["entropy_bits"] = r.entropy_bits;
    j["converged"] = r.converged;
    j["steps"] = r.steps;
    j["final_loss"] = r.final_loss;
    j["circuits"] = r.circuits;
    j["total_interpretations"] = r.total_interpretations;
    j["interpretations_per_circuit"] = opt_json(r.interpretations_per_circuit);
    j["algorithms"] = r.algorithms;
    j["total_mappings"] = r.total_mappings;
    j["mappings_per_algorithm"] = opt_json(r.mappings_per_algorithm);
    j["partial"] = r.partial;
    j["zero_abstraction"] = r.zero_abstraction();
    j["model_file"] = r.model_file;
    auto pg = nlohmann::json::array();
    for (const auto& g : r.per_gate)
        pg.push_back({{"gate", g.gate},
                      {"circuits", g.circuits},
                      {"interpretations", g.interpretations},
                      {"algorithms", g.algorithms},
                      {"mappings", g.mappings},
                      {"circuits_partial", g.circuits_partial},
                      {"mappings_partial", g.mappings_partial}});
    j["per_gate"] = pg;
    return j;
}

CellResult cell_result_from_json(const nlohmann::json& j) {
    CellResult r;
    r.cell = j.at("cell").get<int>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.params = cell_from_json(j.at("params"), CellParams{});
    r.gates = j.at("gates").get<std::vector<std::string>>();
    r.input_weights = j.at("input_weights").get<std::vector<double>>();
    r.entropy_bits = j.at("entropy_bits").get<double>();
    r.converged = j.at("converged").get<bool>();
    r.steps = j.at("steps").get<long>();
    r.final_loss = j.at("final_loss").get<double>();
    r.circuits = j.at("circuits").get<double>();
    r.total_interpretations = j.at("total_interpretations").get<double>();
    r.interpretations_per_circuit = opt_from(j, "interpretations_per_circuit");
    r.algorithms = j.at("algorithms").get<double>();
    r.total_mappings = j.at("total_mappings").get<double>();
    r.mappings_per_algorithm = opt_from(j, "mappings_per_algorithm");
    r.partial = j.at("partial").get<bool>();
    r.model_file = j.value("model_file", std::string());
    for (const auto& g : j.at("per_gate")) {
        GateResult gr;
        gr.gate = g.at("gate").get<std::string>();
        gr.circuits = g.at("circuits").get<double>();
        gr.interpretations = g.at("interpretations").get<double>();
        gr.algorithms = g.at("algorithms").get<double>();
        gr.mappings = g.at("mappings").get<double>();
        gr.circuits_partial = g.at("circuits_partial").get<bool>();
        gr.mappings_partial = g.at("mappings_partial").get<bool>();
        r.per_gate.push_back(gr);
    }
    return r;
}

namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a * 0x9e3779b97f4a7c15ULL + b + 0x632be59bd9b4e019ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::vector<std::string> choose_gates(const CellParams& c, std::uint64_t seed) {
    if (!c.gates.empty()) return c.gates;
    std::vector<std::string> pool = multitask_gate_pool();
    std::mt19937_64 rng(mix(seed, 0x6761746573ULL + c.n));
    std::shuffle(pool.begin(), pool.end(), rng);
    pool.resize(c.n);
    return pool;
}

std::vector<double> choose_weights(const CellParams& c, std::uint64_t seed) {
    if (!c.skewed) return c.input_weights;
    std::mt19937_64 rng(mix(seed, 0x736b6577ULL));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> w(4);
    double s = 0;
    for (auto& x : w) s += (x = u(rng));
    for (auto& x : w) x /= s;
    return w;
}

GateResult analyse_gate(const Mlp& m, const std::string& gate, int output,
                        const CellParams& c, const ExperimentSpec& spec) {
    GateResult g;
    g.gate = gate;
    const TruthTable target = gate_from_name(gate);
    CircuitSearchOptions co;
    co.min_sparsity = c.effective_min_sparsity();
    co.budget = spec.budgets.circuits;
    co.threads = 1;
    BigCount interp = 0;
    std::uint64_t circuits = 0;
    const auto st = visit_perfect_circuits(m, output, co, [&](const CensusEntry& e, int) {
        ++circuits;
        interp = saturating_add(interp, count_interpretations(e.circuit, m, target));
    });
    g.circuits = static_cast<double>(circuits);
    g.interpretations = to_double(interp);
    g.circuits_partial = st.partial;

    AlignmentOptions ao;
    ao.target_output = output;
    ao.budget = spec.budgets.mappings;
    const auto s = align_all(m, target, spec.max_depth, ao);
    g.algorithms = static_cast<double>(s.algorithms);
    g.mappings = static_cast<double>(s.total_minimal);
    g.mappings_partial = s.partial;
    return g;
}

}  // namespace

CellResult run_cell(const ExperimentSpec& spec, int cell, std::uint64_t seed,
                    const std::string& model_dir) {
    const auto t0 = std::chrono::steady_clock::now();
    const CellParams& c = spec.grid.at(cell);
    CellResult r;
    r.cell = cell;
    r.seed = seed;
    r.params = c;
    r.gates = choose_gates(c, seed);
    r.input_weights = choose_weights(c, seed);
    r.entropy_bits = entropy_bits(r.input_weights);

    TrainConfig tc;
    for (const auto& g : r.gates) tc.target_gates.push_back(gate_from_name(g));
    tc.hidden_width = c.k;
    tc.loss_cutoff = c.loss_cutoff;
    tc.noise_std = c.noise_std;
    tc.input_weights = r.input_weights;
    tc.max_steps = spec.max_steps;

    Mlp m;
    try {
        auto tr = train_detailed(tc, seed);
        m = std::move(tr.model);
        r.steps = tr.steps;
        r.final_loss = tr.final_loss;
        r.converged = true;
    } catch (const NonConvergence& e) {
        r.steps = e.steps;
        r.final_loss = e.final_loss;
        r.converged = false;
    }
    if (r.converged) {
        if (!model_dir.empty()) {
            fs::create_directories(model_dir);
            r.model_file = "models/cell" + std::to_string(cell) + "_seed" + std::to_string(seed) + ".json";
            save_model(m, (fs::path(model_dir) / fs::path(r.model_file).filename()).string());
        }
        double circ = 0, interp = 0, alg = 0, maps = 0;
        double ipc = 0, mpa = 0;
        int ipc_n = 0, mpa_n = 0;
        for (std::size_t i = 0; i < r.gates.size(); ++i) {
            auto g = analyse_gate(m, r.gates[i], static_cast<int>(i), c, spec);
            circ += g.circuits;
            interp += g.interpretations;
            alg += g.algorithms;
            maps += g.mappings;
            if (g.circuits > 0) {
                ipc += g.interpretations / g.circuits;
                ++ipc_n;
            }
            if (g.algorithms > 0) {
                mpa += g.mappings / g.algorithms;
                ++mpa_n;
            }
            r.partial = r.partial || g.circuits_partial || g.mappings_partial;
            r.per_gate.push_back(g);
        }
        const double n = static_cast<double>(r.gates.size());
        r.circuits = circ / n;
        r.total_interpretations = interp / n;
        r.algorithms = alg / n;
        r.total_mappings = maps / n;
        if (ipc_n) r.interpretations_per_circuit = ipc / ipc_n;
        if (mpa_n) r.mappings_per_algorithm = mpa / mpa_n;
    }
    r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

namespace {

void write_atomic(const fs::path& path, const std::string& content) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("cannot write " + tmp.string());
        f << content;
        if (!f) throw std::runtime_error("write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

}  // namespace

std::vector<CellResult> read_records(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read " + path);
    std::vector<CellResult> out;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        try {
            out.push_back(cell_result_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception&) {
            // a torn final line from an interrupted run is ignored
        }
    }
    return out;
}

std::vector<CellResult> run_sweep(const ExperimentSpec& spec, const RunOptions& opts) {
    spec.validate();
    const fs::path out(spec.out_dir);
    fs::create_directories(out);
    const fs::path journal = out / "records.partial.jsonl";

    std::map<std::pair<int, std::uint64_t>, CellResult> done;
    if (opts.resume && fs::exists(journal))
        for (auto& r : read_records(journal.string())) done[{r.cell, r.seed}] = r;

    std::vector<std::pair<int, std::uint64_t>> todo;
    for (int c = 0; c < static_cast<int>(spec.grid.size()); ++c)
        for (int s = 0; s < spec.seeds; ++s) {
            const std::uint64_t seed = spec.base_seed + static_cast<std::uint64_t>(s);
            if (!done.count({c, seed})) todo.push_back({c, seed});
        }

    std::mutex mu;
    std::ofstream jf(journal, std::ios::app | std::ios::binary);
    std::ofstream tf(out / "timings.jsonl", std::ios::app | std::ios::binary);
    std::atomic<std::size_t> next{0};
    const std::string model_dir = opts.save_models ? (out / "models").string() : "";
    auto work = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= todo.size()) break;
            CellResult r = run_cell(spec, todo[i].first, todo[i].second, model_dir);
            std::lock_guard<std::mutex> lock(mu);
            jf << cell_result_to_json(r).dump() << '\n';
            jf.flush();
            tf << nlohmann::json{{"cell", r.cell}, {"seed", r.seed}, {"wall_seconds", r.wall_seconds}}.dump()
               << '\n';
            tf.flush();
            done[{r.cell, r.seed}] = std::move(r);
        }
    };
    const int nthreads = std::max(1, spec.threads);
    if (nthreads == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < nthreads; ++t) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    std::vector<CellResult> results;
    for (int c = 0; c < static_cast<int>(spec.grid.size()); ++c)
        for (int s = 0; s < spec.seeds; ++s) {
            const std::uint64_t seed = spec.base_seed + static_cast<std::uint64_t>(s);
            results.push_back(done.at({c, seed}));
        }
    emit_reports(results, spec.out_dir, &spec);
    return results;
}

const std::vector<std::string>& metric_names() {
    static const std::vector<std::string> names{
        "circuits", "total_interpretations", "interpretations_per_circuit",
        "algorithms", "total_mappings", "mappings_per_algorithm"};
    return names;
}

std::optional<double> metric_value(const CellResult& r, const std::string& metric) {
    if (!r.converged) return std::nullopt;
    if (metric == "circuits") return r.circuits;
    if (metric == "total_interpretations") return r.total_interpretations;
    if (metric == "interpretations_per_circuit") return r.interpretations_per_circuit;
    if (metric == "algorithms") return r.algorithms;
    if (metric == "total_mappings") return r.total_mappings;
    if (metric == "mappings_per_algorithm") return r.mappings_per_algorithm;
    if (metric == "entropy_bits") return r.entropy_bits;
    if (metric == "steps") return static_cast<double>(r.steps);
    if (metric == "final_loss") return r.final_loss;
    throw std::invalid_argument("unknown metric: " + metric);
}

namespace {

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

double abscissa(const CellResult& r, const ExperimentSpec* spec) {
    if (spec && spec->kind == SweepKind::SkewedDistribution) return r.entropy_bits;
    if (!spec && r.params.skewed) return r.entropy_bits;
    return r.params.x;
}

}  // namespace

void emit_reports(const std::vector<CellResult>& results, const std::string& out_dir,
                  const ExperimentSpec* spec) {
    const fs::path out(out_dir);
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw std::runtime_error("cannot create " + out.string() + ": " + ec.message());

    std::ostringstream rec;
    for (const auto& r : results) rec << cell_result_to_json(r).dump() << '\n';
    write_atomic(out / "records.jsonl", rec.str());

    std::map<int, std::vector<const CellResult*>> by_cell;
    for (const auto& r : results) by_cell[r.cell].push_back(&r);

    std::ostringstream sum;
    sum << "cell\tlabel\tx\tnetworks\tconverged\texcluded";
    for (const auto& m : metric_names())
        sum << '\t' << m << "_median\t" << m << "_median_nonzero\t" << m << "_mean\t" << m << "_n";
    sum << '\n';
    for (const auto& [cell, rs] : by_cell) {
        int conv = 0, excluded = 0;
        for (auto* r : rs) {
            conv += r->converged;
            excluded += r->zero_abstraction();
        }
        sum << cell << '\t' << rs.front()->params.label << '\t' << num(rs.front()->params.x) << '\t'
            << rs.size() << '\t' << conv << '\t' << excluded;
        for (const auto& m : metric_names()) {
            std::vector<double> v, nz;
            for (auto* r : rs)
                if (auto x = metric_value(*r, m)) {
                    v.push_back(*x);
                    if (*x != 0) nz.push_back(*x);
                }
            sum << '\t' << (v.empty() ? "NA" : num(median(v))) << '\t'
                << (nz.empty() ? "NA" : num(median(nz))) << '\t' << (v.empty() ? "NA" : num(mean(v)))
                << '\t' << v.size();
        }
        sum << '\n';
    }
    write_atomic(out / "summary.tsv", sum.str());

    std::ostringstream st;
    st << "metric\ttest\tstatistic\tslope\tintercept\tp\tn\n";
    for (const auto& m : metric_names()) {
        std::ostringstream plot;
        plot << "x\t" << m << "\tcell\tseed\n";
        std::vector<double> xs, ys;
        for (const auto& r : results)
            if (auto y = metric_value(r, m)) {
                const double x = abscissa(r, spec);
                plot << num(x) << '\t' << num(*y) << '\t' << r.cell << '\t' << r.seed << '\n';
                xs.push_back(x);
                ys.push_back(*y);
            }
        write_atomic(out / ("plot_" + m + ".tsv"), plot.str());
        try {
            const auto reg = linear_regression(xs, ys);
            st << m << "\tregression\t" << num(reg.t) << '\t' << num(reg.slope) << '\t'
               << num(reg.intercept) << '\t' << num(reg.p) << '\t' << xs.size() << '\n';
        } catch (const StatsError&) {
        }
        if (by_cell.size() >= 2) {
            std::vector<double> a, b;
            for (auto* r : by_cell.begin()->second)
                if (auto y = metric_value(*r, m)) a.push_back(*y);
            for (auto* r : by_cell.rbegin()->second)
                if (auto y = metric_value(*r, m)) b.push_back(*y);
            try {
                const auto t = welch_t_test(a, b);
                st << m << "\twelch_first_last\t" << num(t.t) << "\tNA\tNA\t" << num(t.p) << '\t'
                   << a.size() + b.size() << '\n';
            } catch (const StatsError&) {
            }
        }
    }
    write_atomic(out / "stats.tsv", st.str());
}

}  // namespace mi

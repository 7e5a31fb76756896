// Command-line front end: cell problems / single eps-solves / convergence
// studies / unfolding identity checks, driven by a key-value config file.

#include "sighom/study.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sighom;

namespace {

std::atomic<bool> g_interrupted{false};
void handle_sigint(int) { g_interrupted.store(true); }

RunConfig load_config(const std::string& path, const std::string& out_override, int jobs_override,
                      long seed_override) {
    std::ifstream in(path);
    if (!in.good()) throw ConfigError("cannot open config file '" + path + "'");
    RunConfig c = parse_config(in);
    if (!out_override.empty()) c.out_dir = out_override;
    if (jobs_override > 0) c.jobs = jobs_override;
    if (seed_override >= 0) c.seed = unsigned(seed_override);
    c.validate();
    return c;
}

fs::path out_file(const RunConfig& c, const std::string& name) {
    fs::create_directories(c.out_dir);
    return fs::path(c.out_dir) / name;
}

json tensor_json(const EffectiveTensor& t, const CellSolution& sol, const TwoComponentMesh& mesh,
                 const CoefficientField& A, int resolution) {
    // dual-route residual: quadratic form vs the minimum cell energy
    Eigen::Vector2d probe(1.0, 1.0);
    double form = probe.dot(t.matrix * probe);
    double energy = cell_energy_at(sol, mesh, A, nullptr, probe);
    return json{{"regime", t.regime},
                {"matrix", {{t.matrix(0, 0), t.matrix(0, 1)}, {t.matrix(1, 0), t.matrix(1, 1)}}},
                {"mesh_resolution", resolution},
                {"residuals", {{"energy_consistency", std::abs(form - energy) / (1 + std::abs(form))}}}};
}

json environment_stamp() {
    return json{{"compiler", __VERSION__},
                {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                              "." + std::to_string(EIGEN_MINOR_VERSION)},
                {"cxx_standard", long(__cplusplus)}};
}

json config_json(const RunConfig& c) {
    return json{{"serialized", serialize_config(c)}};
}

int cmd_cell(const RunConfig& c) {
    auto mesh = build_cell_mesh(c.cell(), c.cell_resolution);
    auto A = c.coefficient();
    json out;
    if (c.regime == "whole") {
        auto sol = solve_cell_whole(mesh, A, c.cg_rtol * 0.1);
        out = tensor_json(effective_tensor(sol, mesh, A), sol, mesh, A, c.cell_resolution);
    } else if (c.regime == "perforated") {
        auto sol = solve_cell_perforated(mesh, A, c.cg_rtol * 0.1);
        out = tensor_json(effective_tensor(sol, mesh, A), sol, mesh, A, c.cell_resolution);
    } else { // vi
        CellVIOptions opt;
        opt.psor.tol = c.psor_tol;
        if (c.psor_omega != 0) opt.psor.relaxation = c.psor_omega;
        auto map = tabulate_effective_map(mesh, A, c.interface(), c.map_directions, opt, true);
        json table = json::array();
        for (int m = 0; m < map.directions(); ++m) {
            const auto& p = map.table[size_t(m)];
            table.push_back({{"angle", 2.0 * 3.14159265358979323846 * m / map.directions()},
                             {"total", {p.total[0], p.total[1]}},
                             {"comp1", {p.comp1[0], p.comp1[1]}},
                             {"comp2", {p.comp2[0], p.comp2[1]}}});
        }
        out = json{{"regime", "vi"},
                   {"direction_table", table},
                   {"mesh_resolution", c.cell_resolution},
                   {"residuals", {{"interp_error", map.interp_error}, {"asymmetry", map.asymmetry}}}};
    }
    std::ofstream f(out_file(c, "cell_" + c.regime + ".json"));
    f << out.dump(2) << "\n";
    std::cout << "wrote " << out_file(c, "cell_" + c.regime + ".json").string() << "\n";
    return 0;
}

int cmd_solve(const RunConfig& c) {
    ProblemSpec spec;
    spec.gamma = c.gamma;
    spec.n = c.epsilon_n;
    spec.coefficient = c.coefficient();
    spec.interface = c.interface();
    spec.source = c.source_fn();
    auto mesh = build_epsilon_mesh(c.cell(), c.epsilon_n, c.per_cell_resolution);
    EpsilonOptions opt;
    opt.psor.tol = c.psor_tol;
    if (c.psor_max_sweeps > 0) opt.psor.max_sweeps = c.psor_max_sweeps;
    if (c.psor_omega != 0) {
        opt.psor.relaxation = c.psor_omega;
        opt.auto_relaxation = false;
    }
    auto sol = solve_epsilon(spec, mesh, opt);
    {
        std::ofstream f(out_file(c, "solution.csv"));
        write_solution_csv(mesh, sol.u, f);
    }
    {
        std::ofstream f(out_file(c, "interface.csv"));
        write_interface_csv(mesh, sol, f);
    }
    json diag{{"iterations", sol.diagnostics.sweeps},
              {"kkt_residual", sol.diagnostics.kkt_residual},
              {"active_set_size", sol.diagnostics.active_count},
              {"energy", sol.energy},
              {"compl_residual", sol.compl_residual},
              {"jump_zone_fraction", sol.jump_zone_fraction},
              {"polished", sol.diagnostics.polished}};
    std::ofstream f(out_file(c, "diagnostics.json"));
    f << diag.dump(2) << "\n";
    std::cout << "wrote solution.csv, interface.csv, diagnostics.json under " << c.out_dir << "\n";
    return 0;
}

const char* kPlotScript = R"PY(#!/usr/bin/env python3
"""Plot the convergence report produced by `sighom study`."""
import csv, math, sys
try:
    import matplotlib.pyplot as plt
except ImportError:
    sys.exit("matplotlib is required to plot")

path = sys.argv[1] if len(sys.argv) > 1 else "report.csv"
rows = []
with open(path) as f:
    for rec in csv.DictReader(f):
        rec["eps"] = 1.0 / float(rec["epsilon"].split("/")[1])
        rows.append(rec)

gammas = sorted({r["gamma"] for r in rows}, key=float)
fig, axes = plt.subplots(1, 3, figsize=(15, 4))
for g in gammas:
    sel = [r for r in rows if r["gamma"] == g]
    sel.sort(key=lambda r: -r["eps"])
    eps = [r["eps"] for r in sel]
    for ax, col in zip(axes, ["weak_u1", "weak_u2", "flux2_norm"]):
        vals = [float(r[col]) for r in sel]
        if all(math.isfinite(v) for v in vals):
            ax.loglog(eps, vals, "o-", label=f"gamma={g}")
            ax.set_xlabel("eps"); ax.set_title(col)
axes[0].legend()
fig.tight_layout()
fig.savefig("report.png", dpi=150)
print("wrote report.png")
)PY";

int cmd_study(const RunConfig& c) {
    StudyPlan plan = plan_from_config(c);
    plan.cancel = &g_interrupted;
    std::signal(SIGINT, handle_sigint);
    ConvergenceReport report = run_study(plan);
    {
        std::ofstream f(out_file(c, "report.csv"), std::ios::binary);
        write_report_csv(report, f);
    }
    json j;
    j["plan"] = config_json(c);
    j["environment"] = environment_stamp();
    json rows = json::array();
    for (const auto& r : report.rows) {
        json row{{"gamma", r.gamma}, {"epsilon_n", r.n}, {"regime", regime_name(r.regime)},
                 {"failed", r.failed}};
        if (r.failed) row["error"] = r.error;
        rows.push_back(row);
    }
    j["row_status"] = rows;
    for (const auto& [g, rates] : report.rates_u1) j["rates_u1"][std::to_string(g)] = rates;
    for (const auto& [g, rates] : report.rates_u2) j["rates_u2"][std::to_string(g)] = rates;
    {
        std::ofstream f(out_file(c, "report.json"));
        f << j.dump(2) << "\n";
    }
    {
        std::ofstream f(out_file(c, "plot_report.py"));
        f << kPlotScript;
    }
    std::cout << "wrote report.csv, report.json, plot_report.py under " << c.out_dir << "\n";
    if (!report.complete()) {
        std::cerr << "study finished with failed or interrupted rows\n";
        return 3;
    }
    return 0;
}

int cmd_unfold_check(const RunConfig& c) {
    ProblemSpec spec;
    spec.gamma = c.gamma;
    spec.n = c.epsilon_n;
    spec.coefficient = c.coefficient();
    spec.interface = c.interface();
    spec.source = c.source_fn();
    auto mesh = build_epsilon_mesh(c.cell(), c.epsilon_n, c.per_cell_resolution);
    EpsilonOptions opt;
    opt.psor.tol = c.psor_tol;
    auto sol = solve_epsilon(spec, mesh, opt);
    auto cell_mesh = build_cell_mesh(c.cell(), c.per_cell_resolution);

    auto phi = make_source("bump", 1.0);
    auto ident = interface_identity_check(sol.u, mesh, c.interface(), phi);
    auto U1 = unfold(sol.u, mesh, cell_mesh, 1);
    auto U2 = unfold(sol.u, mesh, cell_mesh, 2);
    double int_diff1 = std::abs(unfolded_integral(U1) - component_integral(mesh, sol.u, 1));
    double int_diff2 = std::abs(unfolded_integral(U2) - component_integral(mesh, sol.u, 2));
    double norm_diff1 = std::abs(unfolded_l2_sq(U1) - component_l2_sq(mesh, sol.u, 1));

    json out{{"interface_identity_lhs", ident.lhs},
             {"interface_identity_rhs", ident.rhs},
             {"interface_identity_abs_diff", ident.abs_diff},
             {"interface_inequality_slack", ident.ineq_slack},
             {"integration_identity_diff_comp1", int_diff1},
             {"integration_identity_diff_comp2", int_diff2},
             {"norm_identity_diff_comp1", norm_diff1},
             {"unfolded_jump_l2", unfolded_jump_l2(sol.u, mesh)}};
    std::ofstream f(out_file(c, "unfold_check.json"));
    f << out.dump(2) << "\n";
    std::cout << out.dump(2) << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-component Signorini-interface homogenization workbench"};
    app.require_subcommand(1);
    app.fallthrough(); // allow global flags after the subcommand name
    std::string config_path;
    std::string out_dir;
    int jobs = 0;
    long seed = -1;
    app.add_option("--config", config_path, "key-value configuration file")->required();
    app.add_option("--out", out_dir, "output directory (overrides config)");
    app.add_option("--jobs", jobs, "parallel study rows (overrides config)");
    app.add_option("--seed", seed, "seed for randomized property suites");
    auto* cell = app.add_subcommand("cell", "solve cell problems, write tensor/map JSON");
    auto* solve = app.add_subcommand("solve", "single eps-solve, write solution CSVs");
    auto* study = app.add_subcommand("study", "full convergence study, write report CSV/JSON");
    auto* unfold = app.add_subcommand("unfold-check", "unfolding identity diagnostics");
    CLI11_PARSE(app, argc, argv);

    try {
        RunConfig c = load_config(config_path, out_dir, jobs, seed);
        if (cell->parsed()) return cmd_cell(c);
        if (solve->parsed()) return cmd_solve(c);
        if (study->parsed()) return cmd_study(c);
        if (unfold->parsed()) return cmd_unfold_check(c);
        return 1;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const SolverError& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

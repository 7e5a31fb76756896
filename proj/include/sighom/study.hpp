#pragma once

#include "sighom/config.hpp"
#include "sighom/homogenized.hpp"
#include "sighom/unfolding.hpp"

#include <atomic>
#include <cmath>
#include <algorithm>
#include <limits>
#include <map>
#include <thread>

namespace sighom {

/// The four limit regimes.
enum class Regime { whole_linear, cell_vi, perforated_linear, obstacle };

/// Exact regime split: gamma = -1 and gamma = 1 are matched exactly, never
/// by tolerance; gamma > 1 is outside the standing assumptions.
inline Regime regime_of(double gamma) {
    if (gamma > 1.0) throw std::invalid_argument("regime_of: gamma must satisfy gamma <= 1");
    if (gamma == 1.0) return Regime::obstacle;
    if (gamma == -1.0) return Regime::cell_vi;
    if (gamma < -1.0) return Regime::whole_linear;
    return Regime::perforated_linear;
}

inline const char* regime_name(Regime r) {
    switch (r) {
        case Regime::whole_linear: return "whole";
        case Regime::cell_vi: return "vi";
        case Regime::perforated_linear: return "perforated";
        case Regime::obstacle: return "obstacle";
    }
    return "?";
}

struct StudyPlan {
    std::vector<double> gammas{-2.0, -1.0, 0.0, 1.0};
    std::vector<int> epsilons{4, 8, 16}; // eps = 1/n
    int per_cell_resolution = 8;
    int cell_resolution = 16;
    int homog_resolution = 64;
    int window_factor = 4; // H = window_factor * eps
    int map_directions = 32;
    CellGeometry cell;
    CoefficientField A;
    InterfaceCoefficient h;
    SourceFn f;
    std::string source_name = "sin_2pi_x_sin_pi_y";
    double source_amplitude = 1.0;
    double psor_omega = 0.0; // 0 = auto per mesh
    double psor_tol = 1e-10;
    long psor_max_sweeps = 0;
    double cg_rtol = 1e-12;
    double nonlinear_tol = 1e-6;
    int jobs = 1;
    bool keep_solutions = false; // retain per-row nodal fields in the report
    const std::atomic<bool>* cancel = nullptr; // cooperative interruption

    void validate() const {
        cell.validate();
        A.validate();
        h.validate();
        if (!f) throw std::invalid_argument("StudyPlan: missing source");
        for (double g : gammas) (void)regime_of(g);
        int w = window_count();
        for (int n : epsilons) {
            if (n <= 0) throw std::invalid_argument("StudyPlan: epsilon must be 1/n");
            if (n % w != 0)
                throw std::invalid_argument("StudyPlan: the metric window must be a multiple of every epsilon");
        }
        if (homog_resolution % w != 0)
            throw std::invalid_argument("StudyPlan: homog_resolution must align with the metric windows");
    }

    /// One fixed window grid for the whole sweep (every row is measured
    /// against the same averaging family): H = window_factor * (finest eps),
    /// capped below by the coarsest eps so H stays a multiple of every eps.
    int window_count() const {
        int n_min = epsilons.empty() ? 1 : *std::min_element(epsilons.begin(), epsilons.end());
        int n_max = epsilons.empty() ? 1 : *std::max_element(epsilons.begin(), epsilons.end());
        return std::min(n_min, std::max(1, n_max / window_factor));
    }
};

inline StudyPlan plan_from_config(const RunConfig& c) {
    StudyPlan p;
    p.gammas = c.gamma_list;
    p.epsilons = c.epsilon_list;
    p.per_cell_resolution = c.per_cell_resolution;
    p.cell_resolution = c.cell_resolution;
    p.homog_resolution = c.homog_resolution;
    p.window_factor = c.window_factor;
    p.map_directions = c.map_directions;
    p.cell = c.cell();
    p.A = c.coefficient();
    p.h = c.interface();
    p.f = c.source_fn();
    p.source_name = c.source;
    p.source_amplitude = c.source_amplitude;
    p.psor_omega = c.psor_omega;
    p.psor_tol = c.psor_tol;
    p.psor_max_sweeps = c.psor_max_sweeps;
    p.cg_rtol = c.cg_rtol;
    p.nonlinear_tol = c.nonlinear_tol;
    p.jobs = c.jobs;
    return p;
}

/// Everything computed once per gamma: the regime's cell objects and the
/// homogenized solution on the Omega mesh.
struct RegimeArtifacts {
    Regime regime = Regime::perforated_linear;
    EffectiveTensorParts parts;  // whole_linear split A0 = A1 + A2
    EffectiveTensor tensor;      // homogenized tensor (linear regimes)
    EffectiveMap map;            // gamma = -1
    double c = 0;                // gamma = 1 zero-order coefficient int_Gamma h / |Y|
    HomogenizedSolution homog;
    bool failed = false;
    std::string error;
};

struct StudyRow {
    double gamma = 0;
    int n = 0;
    Regime regime = Regime::perforated_linear;
    long iters = 0;
    double energy = 0, weak_u1 = 0, weak_u2 = 0, flux1_err = 0, flux2_norm = 0;
    double jump_zone_measure = 0, compl_residual = 0;
    double jump_unfolded = 0; // || T1 u1 - T2 u2 ||_{L2(Omega x Gamma)} (diagnostic)
    double min_jump = 0;      // smallest interface jump (feasibility diagnostic)
    bool failed = false;
    std::string error;
};

struct ConvergenceReport {
    std::vector<StudyRow> rows;
    std::map<double, RegimeArtifacts> artifacts; // keyed by gamma
    // log2 ratios of successive weak metrics per gamma, in epsilon order
    std::map<double, std::vector<double>> rates_u1, rates_u2;
    // per-row nodal fields, only when the plan asks for them
    std::map<std::pair<double, int>, Vector> solutions;
    bool complete() const {
        for (const auto& r : rows)
            if (r.failed) return false;
        return true;
    }
};

/// The zero-order coefficient of the gamma = 1 limit: (1/|Y|) int_Gamma h,
/// the quantity produced by the unfolding identity for the interface term.
inline double interface_exchange_coefficient(const InterfaceCoefficient& h,
                                             const TwoComponentMesh& cell_mesh) {
    auto table = pullback_interface(h, cell_mesh);
    double s = 0;
    for (size_t e = 0; e < cell_mesh.interface_edges.size(); ++e)
        s += table[e] * cell_mesh.interface_edges[e].length;
    return s / (cell_mesh.domain_lx * cell_mesh.domain_ly);
}

inline RegimeArtifacts compute_regime_artifacts(const StudyPlan& plan, double gamma,
                                                const TwoComponentMesh& cell_mesh,
                                                const TwoComponentMesh& homog_mesh) {
    RegimeArtifacts art;
    art.regime = regime_of(gamma);
    PsorOptions psor;
    psor.tol = plan.psor_tol;
    if (plan.psor_omega != 0) psor.relaxation = plan.psor_omega;
    if (plan.psor_max_sweeps > 0) psor.max_sweeps = plan.psor_max_sweeps;
    switch (art.regime) {
        case Regime::whole_linear: {
            auto sol = solve_cell_whole(cell_mesh, plan.A, plan.cg_rtol * 0.1);
            art.parts = effective_tensor_parts(sol, cell_mesh, plan.A);
            art.tensor = {art.parts.total, "whole"};
            art.homog = solve_linear_homogenized(art.tensor, plan.f, homog_mesh, plan.cg_rtol);
            break;
        }
        case Regime::cell_vi: {
            CellVIOptions opt;
            opt.psor = psor;
            art.map = tabulate_effective_map(cell_mesh, plan.A, plan.h, plan.map_directions, opt, false);
            NonlinearOptions nopt;
            nopt.residual_tol = plan.nonlinear_tol;
            art.homog = solve_nonlinear_homogenized(art.map, plan.f, homog_mesh, nopt);
            break;
        }
        case Regime::perforated_linear: {
            auto sol = solve_cell_perforated(cell_mesh, plan.A, plan.cg_rtol * 0.1);
            art.tensor = effective_tensor(sol, cell_mesh, plan.A);
            art.homog = solve_linear_homogenized(art.tensor, plan.f, homog_mesh, plan.cg_rtol);
            break;
        }
        case Regime::obstacle: {
            auto sol = solve_cell_perforated(cell_mesh, plan.A, plan.cg_rtol * 0.1);
            art.tensor = effective_tensor(sol, cell_mesh, plan.A);
            art.c = interface_exchange_coefficient(plan.h, cell_mesh);
            art.homog = solve_obstacle_homogenized(art.tensor, art.c, plan.cell.theta1(),
                                                   plan.cell.theta2(), plan.f, homog_mesh, psor);
            break;
        }
    }
    return art;
}

inline StudyRow compute_study_row(const StudyPlan& plan, double gamma, int n,
                                  const RegimeArtifacts& art, const TwoComponentMesh& homog_mesh,
                                  Vector* keep_u = nullptr) {
    StudyRow row;
    row.gamma = gamma;
    row.n = n;
    row.regime = art.regime;

    ProblemSpec spec;
    spec.gamma = gamma;
    spec.n = n;
    spec.coefficient = plan.A;
    spec.interface = plan.h;
    spec.source = plan.f;

    auto mesh = build_epsilon_mesh(plan.cell, n, plan.per_cell_resolution);
    EpsilonOptions opt;
    opt.psor.tol = plan.psor_tol;
    if (plan.psor_max_sweeps > 0) opt.psor.max_sweeps = plan.psor_max_sweeps;
    if (plan.psor_omega != 0) {
        opt.psor.relaxation = plan.psor_omega;
        opt.auto_relaxation = false;
    }
    auto sol = solve_epsilon(spec, mesh, opt);
    if (keep_u) *keep_u = sol.u;

    row.iters = sol.diagnostics.sweeps;
    row.energy = sol.energy;
    row.jump_zone_measure = sol.jump_zone_fraction;
    row.compl_residual = sol.compl_residual;
    row.jump_unfolded = unfolded_jump_l2(sol.u, mesh);
    row.min_jump = sol.jump.size() ? sol.jump.minCoeff() : 0.0;

    const int w = plan.window_count();
    const Vector& u1_lim = art.homog.u1;
    const Vector& u2_lim = (art.regime == Regime::obstacle) ? *art.homog.u2 : art.homog.u1;
    double theta1 = plan.cell.theta1(), theta2 = plan.cell.theta2();
    row.weak_u1 = weak_convergence_metric(sol.u, mesh, 1, theta1, u1_lim, homog_mesh, w);
    row.weak_u2 = weak_convergence_metric(sol.u, mesh, 2, theta2, u2_lim, homog_mesh, w);

    auto eps_table = pullback_coefficient(plan.A, spec.epsilon(), mesh);
    auto flux1 = window_flux_average(sol.u, mesh, eps_table, 1, w);
    auto flux2 = window_flux_average(sol.u, mesh, eps_table, 2, w);
    auto grad = window_gradient_average(art.homog.u1, homog_mesh, w);
    std::vector<Eigen::Vector2d> lim1(grad.size()), lim2(grad.size(), Eigen::Vector2d::Zero());
    switch (art.regime) {
        case Regime::whole_linear:
            for (size_t i = 0; i < grad.size(); ++i) {
                lim1[i] = art.parts.comp1 * grad[i];
                lim2[i] = art.parts.comp2 * grad[i];
            }
            break;
        case Regime::cell_vi:
            for (size_t i = 0; i < grad.size(); ++i) {
                lim1[i] = art.map.component(1, grad[i]);
                lim2[i] = art.map.component(2, grad[i]);
            }
            break;
        case Regime::perforated_linear:
        case Regime::obstacle:
            for (size_t i = 0; i < grad.size(); ++i) lim1[i] = art.tensor.matrix * grad[i];
            break;
    }
    row.flux1_err = window_metric(flux1, lim1);
    // gamma < -1 and gamma = -1 have nonzero component-2 limits: report the
    // distance to the limit; the other regimes report the plain norm
    if (art.regime == Regime::whole_linear || art.regime == Regime::cell_vi)
        row.flux2_norm = window_metric(flux2, lim2);
    else
        row.flux2_norm = window_norm(flux2);
    return row;
}

inline ConvergenceReport run_study(const StudyPlan& plan) {
    plan.validate();
    ConvergenceReport report;
    auto cell_mesh = build_cell_mesh(plan.cell, plan.cell_resolution);
    auto homog_mesh = build_omega_mesh(plan.homog_resolution);

    // per-gamma artifacts (cell objects + homogenized solve), sequential
    for (double gamma : plan.gammas) {
        if (report.artifacts.count(gamma)) continue;
        try {
            report.artifacts[gamma] = compute_regime_artifacts(plan, gamma, cell_mesh, homog_mesh);
        } catch (const std::exception& e) {
            RegimeArtifacts failed;
            failed.regime = regime_of(gamma);
            failed.failed = true;
            failed.error = e.what();
            report.artifacts[gamma] = failed;
        }
    }

    // rows in deterministic (gamma, epsilon) order; a work pool may execute
    // them concurrently, results land in preallocated slots
    struct Task { double gamma; int n; size_t slot; };
    std::vector<Task> tasks;
    for (double gamma : plan.gammas)
        for (int n : plan.epsilons) tasks.push_back({gamma, n, tasks.size()});
    report.rows.resize(tasks.size());
    if (plan.keep_solutions)
        for (const auto& t : tasks) report.solutions[{t.gamma, t.n}]; // preallocate map slots

    auto run_task = [&](const Task& t) {
        StudyRow row;
        row.gamma = t.gamma;
        row.n = t.n;
        const RegimeArtifacts& art = report.artifacts.at(t.gamma);
        row.regime = art.regime;
        if (plan.cancel && plan.cancel->load()) {
            row.failed = true;
            row.error = "interrupted";
        } else if (art.failed) {
            row.failed = true;
            row.error = art.error;
        } else {
            try {
                Vector* keep = plan.keep_solutions ? &report.solutions.at({t.gamma, t.n}) : nullptr;
                row = compute_study_row(plan, t.gamma, t.n, art, homog_mesh, keep);
            } catch (const std::exception& e) {
                row.failed = true;
                row.error = e.what();
            }
        }
        if (row.failed) {
            double nan = std::numeric_limits<double>::quiet_NaN();
            row.energy = row.weak_u1 = row.weak_u2 = nan;
            row.flux1_err = row.flux2_norm = row.jump_zone_measure = row.compl_residual = nan;
        }
        report.rows[t.slot] = std::move(row);
    };

    int jobs = std::max(1, plan.jobs);
    if (jobs == 1) {
        for (const auto& t : tasks) run_task(t);
    } else {
        std::atomic<size_t> next{0};
        std::vector<std::thread> pool;
        for (int j = 0; j < jobs; ++j)
            pool.emplace_back([&] {
                for (;;) {
                    size_t i = next.fetch_add(1);
                    if (i >= tasks.size()) break;
                    run_task(tasks[i]);
                }
            });
        for (auto& th : pool) th.join();
    }

    // log2 ratios of successive weak metrics per gamma
    for (double gamma : plan.gammas) {
        std::vector<const StudyRow*> per_gamma;
        for (const auto& r : report.rows)
            if (r.gamma == gamma && !r.failed) per_gamma.push_back(&r);
        for (size_t i = 1; i < per_gamma.size(); ++i) {
            report.rates_u1[gamma].push_back(std::log2(per_gamma[i - 1]->weak_u1 / per_gamma[i]->weak_u1));
            report.rates_u2[gamma].push_back(std::log2(per_gamma[i - 1]->weak_u2 / per_gamma[i]->weak_u2));
        }
    }
    return report;
}

/// Report CSV, fixed column order and formatting (byte-reproducible).
inline void write_report_csv(const ConvergenceReport& report, std::ostream& os) {
    os << "gamma,epsilon,regime,iters,energy,weak_u1,weak_u2,flux1_err,flux2_norm,"
          "jump_zone_measure,compl_residual\n";
    char buf[512];
    for (const auto& r : report.rows) {
        std::snprintf(buf, sizeof buf, "%.12g,1/%d,%s,%ld,%.12e,%.12e,%.12e,%.12e,%.12e,%.12e,%.12e",
                      r.gamma, r.n, regime_name(r.regime), r.iters, r.energy, r.weak_u1, r.weak_u2,
                      r.flux1_err, r.flux2_norm, r.jump_zone_measure, r.compl_residual);
        os << buf << "\n";
    }
}

} // namespace sighom

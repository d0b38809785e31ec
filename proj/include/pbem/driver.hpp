#pragma once

#include <chrono>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pbem/energy.hpp"
#include "pbem/errors.hpp"
#include "pbem/estimator.hpp"
#include "pbem/refine.hpp"
#include "pbem/solver.hpp"

namespace pbem {

enum class RefinementMode { Flat, Conforming };

inline RefinementMode parse_mode(const std::string& s) {
    if (s == "flat") return RefinementMode::Flat;
    if (s == "conforming") return RefinementMode::Conforming;
    throw ConfigError("unknown refinement mode '" + s + "' (expected flat or conforming)");
}

inline std::string to_string(RefinementMode m) { return m == RefinementMode::Flat ? "flat" : "conforming"; }

struct AdaptiveConfig {
    EstimatorTag estimator = EstimatorTag::Eu;
    double marking_fraction = 0.10;
    int adjoint_refine_levels = 1;
    RefinementMode mode = RefinementMode::Conforming;
    int max_iterations = 20;
    std::shared_ptr<const SurfaceMesh> background; // required for conforming mode
    SolverOptions solver;
    ConformingOptions conforming;

    void validate() const {
        if (!(marking_fraction > 0.0 && marking_fraction <= 1.0))
            throw ConfigError("marking fraction must lie in (0, 1]");
        if (max_iterations < 1) throw ConfigError("max_iterations must be at least 1");
        if (adjoint_refine_levels < 0) throw ConfigError("adjoint refinement levels must be non-negative");
        if (mode == RefinementMode::Conforming && !background)
            throw ConfigError("conforming refinement needs a background mesh");
        if (!(solver.gmres_tol > 0.0)) throw ConfigError("GMRES tolerance must be positive");
    }
};

struct IterationRecord {
    int iter = 0;
    std::shared_ptr<const SurfaceMesh> mesh;
    EnergyResult energy;
    std::optional<ErrorMap> errors; // absent for uniform runs
    double wall_time_s = 0.0;
    ConformingStats refine_stats;   // of the refinement that followed this iteration

    std::size_t num_panels() const { return mesh->num_triangles(); }
};

struct History {
    std::vector<IterationRecord> records;
    std::shared_ptr<const SurfaceMesh> next_mesh; // produced by the last refinement
    std::exception_ptr failure;                   // set if a stage threw; records stay valid

    bool ok() const { return !failure; }
};

namespace detail {

inline SurfaceMesh apply_plan(const SurfaceMesh& mesh, const MarkedSet& plan, RefinementMode mode,
                              const NearestVertexGrid* grid, const ConformingOptions& opts, ConformingStats* stats) {
    if (mode == RefinementMode::Flat) return refine_flat(mesh, plan);
    return refine_conforming(mesh, plan, *grid, opts, stats);
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

} // namespace detail

using IterationObserver = std::function<void(const IterationRecord&)>;

/// Fig. 5 loop: solve, adjoint, estimate, mark, close, refine; repeated max_iterations times.
inline History adaptive_loop(const SurfaceMesh& mesh0, const ChargeSet& charges, const BiePhysics& physics,
                             const AdaptiveConfig& cfg, const IterationObserver& observe = {}) {
    cfg.validate();
    History h;
    std::unique_ptr<NearestVertexGrid> grid;
    if (cfg.mode == RefinementMode::Conforming) grid = std::make_unique<NearestVertexGrid>(*cfg.background);
    auto mesh = std::make_shared<const SurfaceMesh>(mesh0);
    try {
        for (int k = 0; k < cfg.max_iterations; ++k) {
            const auto t0 = std::chrono::steady_clock::now();
            IterationRecord rec;
            rec.iter = k;
            rec.mesh = mesh;
            const PanelSolution fwd = solve_forward(*mesh, physics, charges, cfg.solver);
            const PanelSolution adj = solve_adjoint(*mesh, physics, charges, cfg.adjoint_refine_levels, cfg.solver);
            rec.energy = solvation_energy(fwd, charges, physics, cfg.solver.near);
            rec.errors = estimate(cfg.estimator, fwd, adj, charges, physics);
            const std::vector<int> marked = mark_elements(rec.errors->per_panel, cfg.marking_fraction);
            const MarkedSet plan = close_marking(*mesh, marked);
            SurfaceMesh next = detail::apply_plan(*mesh, plan, cfg.mode, grid.get(), cfg.conforming, &rec.refine_stats);
            rec.wall_time_s = detail::seconds_since(t0);
            h.records.push_back(rec);
            if (observe) observe(h.records.back());
            mesh = std::make_shared<const SurfaceMesh>(std::move(next));
        }
        h.next_mesh = mesh;
    } catch (...) {
        h.failure = std::current_exception();
    }
    return h;
}

/// Uniform refinement baseline: solve on mesh0 and `levels - 1` successive all-marked refinements.
inline History uniform_loop(const SurfaceMesh& mesh0, const ChargeSet& charges, const BiePhysics& physics, int levels,
                            RefinementMode mode, std::shared_ptr<const SurfaceMesh> background = nullptr,
                            const SolverOptions& solver = {}, const ConformingOptions& conforming = {},
                            const IterationObserver& observe = {}) {
    if (levels < 1) throw ConfigError("uniform_loop needs at least one level");
    if (mode == RefinementMode::Conforming && !background) throw ConfigError("conforming refinement needs a background mesh");
    History h;
    std::unique_ptr<NearestVertexGrid> grid;
    if (mode == RefinementMode::Conforming) grid = std::make_unique<NearestVertexGrid>(*background);
    auto mesh = std::make_shared<const SurfaceMesh>(mesh0);
    try {
        for (int k = 0; k < levels; ++k) {
            const auto t0 = std::chrono::steady_clock::now();
            IterationRecord rec;
            rec.iter = k;
            rec.mesh = mesh;
            const PanelSolution fwd = solve_forward(*mesh, physics, charges, solver);
            rec.energy = solvation_energy(fwd, charges, physics, solver.near);
            rec.wall_time_s = detail::seconds_since(t0);
            h.records.push_back(rec);
            if (observe) observe(h.records.back());
            if (k + 1 < levels) {
                SurfaceMesh next = detail::apply_plan(*mesh, mark_all(*mesh), mode, grid.get(), conforming,
                                                      &h.records.back().refine_stats);
                mesh = std::make_shared<const SurfaceMesh>(std::move(next));
            }
        }
    } catch (...) {
        h.failure = std::current_exception();
    }
    return h;
}

/// Writes mesh_XXX.off, errors_XXX.csv (when estimated) and one energy.csv row per iteration.
class RunWriter {
public:
    RunWriter(std::filesystem::path dir, bool timing) : dir_(std::move(dir)), timing_(timing) {
        std::filesystem::create_directories(dir_);
        energy_.open(dir_ / "energy.csv");
        if (!energy_) throw Error("cannot write to '" + (dir_ / "energy.csv").string() + "'");
        energy_ << "iter,N_panels,dG,signed_E,sum_Ei,gmres_iters,wall_time_s\n";
        energy_ << std::setprecision(17);
    }

    void operator()(const IterationRecord& r) {
        char tag[16];
        std::snprintf(tag, sizeof tag, "%03d", r.iter);
        save_off(*r.mesh, (dir_ / ("mesh_" + std::string(tag) + ".off")).string());
        energy_ << r.iter << ',' << r.num_panels() << ',' << r.energy.dG << ',';
        if (r.errors) {
            write_panel_csv(*r.mesh, r.errors->per_panel, (dir_ / ("errors_" + std::string(tag) + ".csv")).string());
            energy_ << r.errors->signed_total << ',' << r.errors->sum_per_panel();
        } else {
            energy_ << "nan,nan";
        }
        energy_ << ',' << r.energy.gmres_iterations << ',' << (timing_ ? r.wall_time_s : 0.0) << '\n';
        energy_.flush();
    }

private:
    std::filesystem::path dir_;
    bool timing_;
    std::ofstream energy_;
};

} // namespace pbem

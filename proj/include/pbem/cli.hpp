#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "pbem/driver.hpp"
#include "pbem/energy.hpp"
#include "pbem/errors.hpp"
#include "pbem/estimator.hpp"
#include "pbem/mesh.hpp"
#include "pbem/oracle.hpp"
#include "pbem/physics.hpp"
#include "pbem/solver.hpp"

namespace pbem::cli {

enum ExitCode { kOk = 0, kConfig = 2, kInput = 3, kSolver = 4, kInternal = 5 };

/// Everything a command needs, after merging the INI file with command-line overrides.
struct RunConfig {
    std::filesystem::path base_dir; // relative paths in the file resolve against this

    std::string mesh_source = "icosphere";
    double radius = 1.0;
    int level = 3;
    Vec3 center = Vec3::Zero();
    std::string vert, face;

    int background_level = 6;
    std::string background_vert, background_face;

    std::string charge_source = "preset";
    std::string preset = "born";
    std::string inline_charges;
    std::string pqr;

    BiePhysics physics;
    SolverOptions solver;
    int threads = 0;

    EstimatorTag estimator = EstimatorTag::Eu;
    double fraction = 0.10;
    int adjoint_levels = 1;
    RefinementMode mode = RefinementMode::Conforming;
    int iterations = 20;
    int uniform_levels = 0;
    bool timing = true;

    std::string oracle = "auto"; // auto | kirkwood | born | none
    int n_terms = 50;
    std::optional<double> reference_dG;
    std::vector<double> richardson_values;
};

struct Overrides {
    std::optional<std::string> estimator, mode;
    std::optional<double> fraction, gmres_tol;
    std::optional<int> adjoint_levels, iterations, threads;
};

namespace detail {

namespace pt = boost::property_tree;

inline const std::map<std::string, std::set<std::string>>& allowed_keys() {
    static const std::map<std::string, std::set<std::string>> keys{
        {"mesh",
         {"source", "radius", "level", "center", "vert", "face", "background_level", "background_vert",
          "background_face"}},
        {"charges", {"source", "preset", "inline", "pqr"}},
        {"physics", {"eps_m", "eps_w", "kappa", "energy_unit"}},
        {"solver", {"gmres_tol", "max_iterations", "diagonal_scaling", "threads", "near_distance", "near_depth"}},
        {"adapt", {"estimator", "fraction", "adjoint_levels", "mode", "iterations", "uniform_levels", "timing"}},
        {"oracle", {"type", "n_terms"}},
        {"reference", {"dG", "richardson"}},
    };
    return keys;
}

template <class T>
T get(const pt::ptree& tree, const std::string& key, const T& fallback) {
    const auto node = tree.get_optional<std::string>(key);
    if (!node) return fallback;
    try {
        std::istringstream is(*node);
        T value;
        is >> std::boolalpha >> value;
        if (is.fail() || !(is >> std::ws).eof()) throw std::invalid_argument(*node);
        return value;
    } catch (const std::exception&) {
        throw ConfigError("bad value for '" + key + "': '" + *node + "'");
    }
}

inline std::string get_string(const pt::ptree& tree, const std::string& key, const std::string& fallback) {
    return tree.get<std::string>(key, fallback);
}

inline std::vector<double> parse_numbers(const std::string& text, const std::string& what) {
    std::string s = text;
    for (char& c : s)
        if (c == ',') c = ' ';
    std::istringstream is(s);
    std::vector<double> out;
    std::string tok;
    while (is >> tok) {
        try {
            std::size_t pos = 0;
            out.push_back(std::stod(tok, &pos));
            if (pos != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw ConfigError("bad number '" + tok + "' in " + what);
        }
    }
    return out;
}

} // namespace detail

/// "q x y z; q x y z; ..."
inline ChargeSet parse_inline_charges(const std::string& text) {
    ChargeSet c;
    std::istringstream is(text);
    std::string item;
    while (std::getline(is, item, ';')) {
        if (item.find_first_not_of(" \t") == std::string::npos) continue;
        const auto v = detail::parse_numbers(item, "inline charges");
        if (v.size() != 4) throw ConfigError("inline charge needs 'q x y z', got '" + item + "'");
        c.add(Vec3(v[1], v[2], v[3]), v[0]);
    }
    if (c.size() == 0) throw ConfigError("inline charge list is empty");
    return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw ParseError("config file '" + path.string() + "' not found");
    detail::pt::ptree tree;
    try {
        detail::pt::ini_parser::read_ini(path.string(), tree);
    } catch (const detail::pt::ini_parser_error& e) {
        throw ConfigError(e.what());
    }
    for (const auto& [section, body] : tree) {
        const auto it = detail::allowed_keys().find(section);
        if (it == detail::allowed_keys().end()) throw ConfigError("unknown config section [" + section + "]");
        for (const auto& kv : body)
            if (!it->second.count(kv.first)) throw ConfigError("unknown key '" + kv.first + "' in [" + section + "]");
    }
    RunConfig c;
    c.base_dir = path.parent_path();
    using detail::get;
    using detail::get_string;
    c.mesh_source = get_string(tree, "mesh.source", c.mesh_source);
    c.radius = get(tree, "mesh.radius", c.radius);
    c.level = get(tree, "mesh.level", c.level);
    if (auto s = tree.get_optional<std::string>("mesh.center")) {
        const auto v = detail::parse_numbers(*s, "mesh.center");
        if (v.size() != 3) throw ConfigError("mesh.center needs three numbers");
        c.center = Vec3(v[0], v[1], v[2]);
    }
    c.vert = get_string(tree, "mesh.vert", "");
    c.face = get_string(tree, "mesh.face", "");
    c.background_level = get(tree, "mesh.background_level", c.background_level);
    c.background_vert = get_string(tree, "mesh.background_vert", "");
    c.background_face = get_string(tree, "mesh.background_face", "");

    c.charge_source = get_string(tree, "charges.source", c.charge_source);
    c.preset = get_string(tree, "charges.preset", c.preset);
    c.inline_charges = get_string(tree, "charges.inline", "");
    c.pqr = get_string(tree, "charges.pqr", "");

    c.physics.eps_m = get(tree, "physics.eps_m", c.physics.eps_m);
    c.physics.eps_w = get(tree, "physics.eps_w", c.physics.eps_w);
    c.physics.kappa = get(tree, "physics.kappa", c.physics.kappa);
    c.physics.energy_unit = get(tree, "physics.energy_unit", c.physics.energy_unit);

    c.solver.gmres_tol = get(tree, "solver.gmres_tol", c.solver.gmres_tol);
    c.solver.max_iterations = get(tree, "solver.max_iterations", c.solver.max_iterations);
    c.solver.diagonal_scaling = get(tree, "solver.diagonal_scaling", c.solver.diagonal_scaling);
    c.solver.near.distance_factor = get(tree, "solver.near_distance", c.solver.near.distance_factor);
    c.solver.near.max_depth = get(tree, "solver.near_depth", c.solver.near.max_depth);
    c.threads = get(tree, "solver.threads", c.threads);

    c.estimator = parse_estimator(get_string(tree, "adapt.estimator", to_string(c.estimator)));
    c.fraction = get(tree, "adapt.fraction", c.fraction);
    c.adjoint_levels = get(tree, "adapt.adjoint_levels", c.adjoint_levels);
    c.mode = parse_mode(get_string(tree, "adapt.mode", to_string(c.mode)));
    c.iterations = get(tree, "adapt.iterations", c.iterations);
    c.uniform_levels = get(tree, "adapt.uniform_levels", c.uniform_levels);
    c.timing = get(tree, "adapt.timing", c.timing);

    c.oracle = get_string(tree, "oracle.type", c.oracle);
    c.n_terms = get(tree, "oracle.n_terms", c.n_terms);
    if (tree.get_optional<std::string>("reference.dG")) c.reference_dG = get(tree, "reference.dG", 0.0);
    if (auto s = tree.get_optional<std::string>("reference.richardson")) {
        c.richardson_values = detail::parse_numbers(*s, "reference.richardson");
        if (c.richardson_values.size() != 3) throw ConfigError("reference.richardson needs exactly three values");
    }
    return c;
}

inline void apply_overrides(RunConfig& c, const Overrides& o) {
    if (o.estimator) c.estimator = parse_estimator(*o.estimator);
    if (o.mode) c.mode = parse_mode(*o.mode);
    if (o.fraction) c.fraction = *o.fraction;
    if (o.gmres_tol) c.solver.gmres_tol = *o.gmres_tol;
    if (o.adjoint_levels) c.adjoint_levels = *o.adjoint_levels;
    if (o.iterations) c.iterations = *o.iterations;
    if (o.threads) c.threads = *o.threads;
}

inline void validate(const RunConfig& c) {
    c.physics.validate();
    if (!(c.radius > 0.0)) throw ConfigError("mesh.radius must be positive");
    if (c.level < 0) throw ConfigError("mesh.level must be non-negative");
    if (!(c.fraction > 0.0 && c.fraction <= 1.0)) throw ConfigError("fraction must lie in (0, 1]");
    if (c.adjoint_levels < 0) throw ConfigError("adjoint_levels must be non-negative");
    if (c.iterations < 1) throw ConfigError("iterations must be at least 1");
    if (c.uniform_levels < 0) throw ConfigError("uniform_levels must be non-negative");
    if (!(c.solver.gmres_tol > 0.0)) throw ConfigError("gmres_tol must be positive");
    if (c.solver.max_iterations < 1) throw ConfigError("solver.max_iterations must be at least 1");
    if (c.threads < 0) throw ConfigError("threads must be non-negative");
    if (c.n_terms < 1 || c.n_terms > kKirkwoodMaxTerms) throw ConfigError("oracle.n_terms out of range");
}

inline std::string resolve(const RunConfig& c, const std::string& p) {
    if (p.empty()) return p;
    const std::filesystem::path path(p);
    return path.is_absolute() ? p : (c.base_dir / path).string();
}

inline SurfaceMesh build_mesh(const RunConfig& c) {
    if (c.mesh_source == "icosphere") return icosphere(c.radius, c.level, c.center);
    if (c.mesh_source == "msms") {
        if (c.vert.empty() || c.face.empty()) throw ConfigError("msms mesh needs mesh.vert and mesh.face");
        return load_msms(resolve(c, c.vert), resolve(c, c.face));
    }
    throw ConfigError("unknown mesh.source '" + c.mesh_source + "' (expected icosphere or msms)");
}

inline std::shared_ptr<const SurfaceMesh> build_background(const RunConfig& c) {
    if (!c.background_vert.empty() || !c.background_face.empty()) {
        if (c.background_vert.empty() || c.background_face.empty())
            throw ConfigError("background mesh needs both background_vert and background_face");
        return std::make_shared<const SurfaceMesh>(load_msms(resolve(c, c.background_vert), resolve(c, c.background_face)));
    }
    if (c.mesh_source != "icosphere")
        throw ConfigError("conforming refinement of an msms mesh needs mesh.background_vert/background_face");
    return std::make_shared<const SurfaceMesh>(icosphere(c.radius, c.background_level, c.center));
}

inline ChargeSet build_charges(const RunConfig& c) {
    ChargeSet q;
    if (c.charge_source == "preset") {
        q = charge_preset(c.preset, c.radius);
        for (auto& r : q.positions) r += c.center;
    } else if (c.charge_source == "inline") {
        q = parse_inline_charges(c.inline_charges);
    } else if (c.charge_source == "pqr") {
        if (c.pqr.empty()) throw ConfigError("charges.pqr is empty");
        q = load_pqr(resolve(c, c.pqr));
    } else {
        throw ConfigError("unknown charges.source '" + c.charge_source + "' (expected preset, inline or pqr)");
    }
    return q;
}

/// Reference energy: explicit value, Richardson of three values, or the sphere oracle.
struct Reference {
    double value = 0.0;
    std::string origin;
};

inline std::optional<Reference> reference_energy(const RunConfig& c, const ChargeSet& q) {
    if (c.reference_dG) return Reference{*c.reference_dG, "config"};
    if (!c.richardson_values.empty()) {
        const auto r = richardson(c.richardson_values[0], c.richardson_values[1], c.richardson_values[2]);
        return Reference{r.extrapolated, "richardson"};
    }
    if (c.oracle == "none") return std::nullopt;
    const bool sphere = c.mesh_source == "icosphere";
    if (c.oracle == "auto" && !sphere) return std::nullopt;
    if (c.oracle != "auto" && c.oracle != "kirkwood" && c.oracle != "born")
        throw ConfigError("unknown oracle.type '" + c.oracle + "'");
    if (!sphere) throw ConfigError("the sphere oracle needs an icosphere mesh");
    ChargeSet centered = q;
    for (auto& r : centered.positions) r -= c.center;
    SphereCase sc{c.radius, centered, c.physics, c.n_terms};
    return Reference{kirkwood_energy(sc), "kirkwood"};
}

inline void print_kv(std::ostream& os, const std::string& key, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.15g", v);
    os << key << ": " << buf << '\n';
}

inline void print_kv(std::ostream& os, const std::string& key, const std::string& v) { os << key << ": " << v << '\n'; }

inline std::ofstream open_csv(const std::filesystem::path& dir, const std::string& name) {
    std::filesystem::create_directories(dir);
    std::ofstream f(dir / name);
    if (!f) throw Error("cannot write '" + (dir / name).string() + "'");
    f << std::setprecision(17);
    return f;
}

inline int cmd_solve(const RunConfig& c, const std::filesystem::path& out, std::ostream& os) {
    const SurfaceMesh mesh = build_mesh(c);
    const ChargeSet q = build_charges(c);
    const PanelSolution s = solve_forward(mesh, c.physics, q, c.solver);
    const EnergyResult e = solvation_energy(s, q, c.physics, c.solver.near);
    print_kv(os, "dG_solv_kcal_per_mol", e.dG);
    print_kv(os, "N_panels", static_cast<double>(mesh.num_triangles()));
    print_kv(os, "gmres_iterations", s.gmres_iterations);
    print_kv(os, "gmres_residual", s.gmres_residual);
    print_kv(os, "gmres_tol", c.solver.gmres_tol);
    auto f = open_csv(out, "solve.csv");
    f << "N_panels,dG,gmres_iters,gmres_residual,gmres_tol\n"
      << mesh.num_triangles() << ',' << e.dG << ',' << s.gmres_iterations << ',' << s.gmres_residual << ','
      << c.solver.gmres_tol << '\n';
    return kOk;
}

inline int cmd_estimate(const RunConfig& c, const std::filesystem::path& out, std::ostream& os) {
    const SurfaceMesh mesh = build_mesh(c);
    const ChargeSet q = build_charges(c);
    const PanelSolution fwd = solve_forward(mesh, c.physics, q, c.solver);
    const PanelSolution adj = solve_adjoint(mesh, c.physics, q, c.adjoint_levels, c.solver);
    const EnergyResult e = solvation_energy(fwd, q, c.physics, c.solver.near);
    const ErrorMap ephi = estimate_Ephi(fwd, adj, q, c.physics);
    const ErrorMap eu = estimate_Eu(fwd, adj, q, c.physics);
    const auto ref = reference_energy(c, q);

    print_kv(os, "dG_solv_kcal_per_mol", e.dG);
    print_kv(os, "N_panels", static_cast<double>(mesh.num_triangles()));
    print_kv(os, "adjoint_levels", c.adjoint_levels);
    print_kv(os, "gmres_iterations_forward", fwd.gmres_iterations);
    print_kv(os, "gmres_iterations_adjoint", adj.gmres_iterations);
    print_kv(os, "E_phi_signed", ephi.signed_total);
    print_kv(os, "E_phi_sum_panels", ephi.sum_per_panel());
    print_kv(os, "E_u_signed", eu.signed_total);
    print_kv(os, "E_u_sum_panels", eu.sum_per_panel());
    std::optional<double> g_phi, g_u;
    if (ref) {
        print_kv(os, "dG_reference", ref->value);
        print_kv(os, "reference_origin", ref->origin);
        g_phi = effectivity(ephi.signed_total, e.dG, ref->value);
        g_u = effectivity(eu.signed_total, e.dG, ref->value);
        print_kv(os, "gamma_eff_phi", *g_phi);
        print_kv(os, "gamma_eff_u", *g_u);
    } else {
        print_kv(os, "gamma_eff", "omitted (no reference: set [reference] dG or a three-value richardson history)");
    }
    std::filesystem::create_directories(out);
    write_panel_csv(mesh, ephi.per_panel, (out / "errors_Ephi.csv").string());
    write_panel_csv(mesh, eu.per_panel, (out / "errors_Eu.csv").string());
    auto f = open_csv(out, "estimate.csv");
    f << "N_panels,dG,E_phi,sum_E_phi,E_u,sum_E_u,dG_reference,gamma_phi,gamma_u\n"
      << mesh.num_triangles() << ',' << e.dG << ',' << ephi.signed_total << ',' << ephi.sum_per_panel() << ','
      << eu.signed_total << ',' << eu.sum_per_panel() << ',';
    if (ref)
        f << ref->value << ',' << *g_phi << ',' << *g_u << '\n';
    else
        f << "nan,nan,nan\n";
    return kOk;
}

inline int cmd_adapt(const RunConfig& c, const std::filesystem::path& out, std::ostream& os) {
    const SurfaceMesh mesh = build_mesh(c);
    const ChargeSet q = build_charges(c);
    AdaptiveConfig ac;
    ac.estimator = c.estimator;
    ac.marking_fraction = c.fraction;
    ac.adjoint_refine_levels = c.adjoint_levels;
    ac.mode = c.mode;
    ac.max_iterations = c.iterations;
    ac.solver = c.solver;
    if (c.mode == RefinementMode::Conforming || c.uniform_levels > 0) ac.background = build_background(c);

    RunWriter writer(out, c.timing);
    const History h = adaptive_loop(mesh, q, c.physics, ac, [&](const IterationRecord& r) {
        writer(r);
        os << "iter " << r.iter << "  N=" << r.num_panels();
        char buf[96];
        std::snprintf(buf, sizeof buf, "  dG=%.10g  E=%.6g  gmres=%d\n", r.energy.dG, r.errors->signed_total,
                      r.energy.gmres_iterations);
        os << buf;
    });
    if (!h.ok()) std::rethrow_exception(h.failure);
    if (h.next_mesh) save_off(*h.next_mesh, (out / "mesh_final.off").string());
    if (c.uniform_levels > 0) {
        RunWriter uw(out / "uniform", c.timing);
        const History u = uniform_loop(mesh, q, c.physics, c.uniform_levels, c.mode, ac.background, c.solver, {},
                                       [&](const IterationRecord& r) { uw(r); });
        if (!u.ok()) std::rethrow_exception(u.failure);
    }
    print_kv(os, "iterations", static_cast<double>(h.records.size()));
    print_kv(os, "run_directory", out.string());
    return kOk;
}

inline int cmd_oracle(const RunConfig& c, std::ostream& os) {
    if (!c.richardson_values.empty()) {
        const auto r = richardson(c.richardson_values[0], c.richardson_values[1], c.richardson_values[2]);
        print_kv(os, "richardson_extrapolated", r.extrapolated);
        print_kv(os, "richardson_order", r.order);
    }
    if (c.oracle == "none") return kOk;
    if (c.mesh_source != "icosphere") {
        if (c.richardson_values.empty()) throw ConfigError("oracle needs a sphere geometry or [reference] richardson values");
        return kOk;
    }
    ChargeSet q = build_charges(c);
    for (auto& r : q.positions) r -= c.center;
    const double dG = kirkwood_energy({c.radius, q, c.physics, c.n_terms});
    print_kv(os, "kirkwood_dG_kcal_per_mol", dG);
    if (q.size() == 1 && q.positions[0].norm() == 0.0 && c.physics.kappa == 0.0)
        print_kv(os, "born_dG_kcal_per_mol",
                 born_energy(q.charges[0], c.radius, c.physics.eps_m, c.physics.eps_w, c.physics.energy_unit));
    return kOk;
}

/// Maps library errors onto the documented exit codes.
inline int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e)) return kConfig;
    if (dynamic_cast<const ParseError*>(&e) || dynamic_cast<const MeshError*>(&e) ||
        dynamic_cast<const DomainError*>(&e))
        return kInput;
    if (dynamic_cast<const SolverError*>(&e) || dynamic_cast<const NumericError*>(&e)) return kSolver;
    return kInternal;
}

inline int run(int argc, char** argv, std::ostream& os = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Boundary-element linearized Poisson-Boltzmann solver with goal-oriented adaptivity"};
    app.require_subcommand(1);
    std::string config_path;
    std::string out_dir = "pbem_out";
    Overrides ov;
    std::string estimator, mode;
    double fraction = 0, gmres_tol = 0;
    int adjoint_levels = 0, iterations = 0, threads = 0;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "INI configuration file")->required();
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--estimator", estimator, "Ephi or Eu")->check(CLI::IsMember({"Ephi", "Eu"}));
        sub->add_option("--fraction", fraction, "marking fraction in (0, 1]");
        sub->add_option("--adjoint-levels", adjoint_levels, "flat refinements for the adjoint mesh");
        sub->add_option("--mode", mode, "flat or conforming")->check(CLI::IsMember({"flat", "conforming"}));
        sub->add_option("--iters", iterations, "adaptive iterations");
        sub->add_option("--gmres-tol", gmres_tol, "GMRES relative tolerance");
        sub->add_option("--threads", threads, "worker threads (0: library default)");
    };
    CLI::App* solve = app.add_subcommand("solve", "forward solve and solvation energy");
    CLI::App* est = app.add_subcommand("estimate", "per-panel error estimates and effectivity");
    CLI::App* adapt = app.add_subcommand("adapt", "adaptive refinement loop");
    CLI::App* orac = app.add_subcommand("oracle", "Kirkwood / Born / Richardson reference values");
    for (CLI::App* sub : {solve, est, adapt, orac}) add_common(sub);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e, os, err);
        return rc == 0 ? kOk : kConfig;
    }

    CLI::App* active = app.get_subcommands().front();
    if (active->count("--estimator")) ov.estimator = estimator;
    if (active->count("--mode")) ov.mode = mode;
    if (active->count("--fraction")) ov.fraction = fraction;
    if (active->count("--adjoint-levels")) ov.adjoint_levels = adjoint_levels;
    if (active->count("--iters")) ov.iterations = iterations;
    if (active->count("--gmres-tol")) ov.gmres_tol = gmres_tol;
    if (active->count("--threads")) ov.threads = threads;

    try {
        RunConfig c = load_config(config_path);
        apply_overrides(c, ov);
        validate(c);
#ifdef _OPENMP
        if (c.threads > 0) omp_set_num_threads(c.threads);
#endif
        const std::filesystem::path out(out_dir);
        if (active == solve) return cmd_solve(c, out, os);
        if (active == est) return cmd_estimate(c, out, os);
        if (active == adapt) return cmd_adapt(c, out, os);
        return cmd_oracle(c, os);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_code_for(e);
    }
}

} // namespace pbem::cli

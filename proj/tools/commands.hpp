#pragma once

#include <mempol/mempol.hpp>

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace mempol::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kFailure = 1, kValidation = 2, kGuard = 3, kDivergence = 4 };

struct Globals {
    std::uint64_t seed = 0;
    bool seed_given = false;
    bool json = false;
    std::string out;  // empty: no files
};

struct Context {
    Globals globals;
    std::ostream& out;
    std::string command;
    Json config = Json::object();
    std::vector<std::string> outputs;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

    RunManifest manifest(const std::string& status = "ok") const {
        RunManifest m;
        m.command = command;
        m.config = config;
        m.seed = globals.seed;
        m.outputs = outputs;
        m.duration_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        m.status = status;
        return m;
    }

    void write(const std::string& name, const std::string& text) {
        const fs::path path = fs::path(globals.out) / name;
        write_text_file(path, text);
        outputs.push_back(path.string());
    }

    /// Writes manifest.json when an output directory is set and returns the
    /// manifest for JSON printing.
    Json finish(const std::string& status = "ok") {
        if (!globals.out.empty()) outputs.push_back((fs::path(globals.out) / "manifest.json").string());
        const Json m = to_json(manifest(status));
        if (!globals.out.empty()) write_text_file(fs::path(globals.out) / "manifest.json", m.dump(2) + "\n");
        return m;
    }
};

inline std::string fixed(double x, int digits) {
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(digits) << x;
    return ss.str();
}

inline std::string row_text(const Eigen::Ref<const Vector>& v, int digits) {
    std::string s = "(";
    for (Index i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fixed(v[i], digits);
    return s + ")";
}

/// A POMDP document, or an environment description with a "type" field.
inline Pomdp load_environment(const fs::path& path) {
    const Json j = read_json_file(path);
    if (j.is_object() && j.contains("type")) return environment_from_json(j, path.parent_path(), path.string());
    return pomdp_from_json(j, path.string());
}

// eval

inline int cmd_eval(Context& ctx, const std::string& pomdp_file, const std::string& policy_file) {
    const Pomdp m = load_environment(pomdp_file);
    const Policy p = policy_from_json(read_json_file(policy_file), m.n_sensor, m.n_action, policy_file);
    ctx.config = {{"pomdp", pomdp_file}, {"policy", policy_file}};
    const Matrix P = world_transition_matrix(m, p);
    const Vector stationary = stationary_distribution(P);
    const double reward = average_reward(m, p);
    const auto U = ambiguous_sensor_set(m);
    const std::size_t degree = stochasticity_degree(p);
    if (ctx.globals.json) {
        Json j{{"average_reward", reward},
               {"stationary", detail::to_array(stationary)},
               {"stochasticity_degree", degree},
               {"ambiguous_sensors", U},
               {"u_size", U.size()},
               {"degree_bound", U.size() * (m.n_action - 1)}};
        j["manifest"] = ctx.finish();
        ctx.out << j.dump(2) << "\n";
    } else {
        ctx.finish();
        ctx.out << "average reward       " << format_double(reward) << "\n"
                << "stationary           " << row_text(stationary, 6) << "\n"
                << "stochasticity degree " << degree << "\n"
                << "|U|                  " << U.size() << " (bound |U|(|A|-1) = " << U.size() * (m.n_action - 1) << ")\n";
    }
    return kOk;
}

// train

inline int cmd_train(Context& ctx, const std::string& config_file, std::optional<std::size_t> reps) {
    const Json raw = read_json_file(config_file);
    TrainJob job = train_job_from_json(raw, config_file);
    if (reps) job.config.repetitions = *reps;
    if (ctx.globals.seed_given) job.config.seed = ctx.globals.seed;
    ctx.globals.seed = job.config.seed;
    validate(job.config);
    const Pomdp m = environment_from_json(job.environment, fs::path(config_file).parent_path(), config_file + ".environment");
    const AnyModel model = make_model(job.model, m.n_sensor, m.n_action);
    ctx.config = {{"environment", job.environment}, {"model", to_json(job.model)}, {"train", to_json(job.config)}};
    if (ctx.globals.out.empty()) ctx.globals.out = "train_out";

    auto write_outputs = [&](const LearningCurve& curve) {
        ctx.write("curve.csv", learning_curve_csv(curve));
        ctx.write("curve_mean.csv", mean_curve_csv(curve));
        ctx.write("policy.json", policy_to_json(curve.final_policy).dump(2) + "\n");
        Json checkpoints = Json::array();
        for (const auto& rep : curve.repetitions) {
            ModelDescriptor d = job.model;
            d.parameters = rep.final_theta;
            checkpoints.push_back(to_json(d));
        }
        ctx.write("parameters.json", checkpoints.dump(2) + "\n");
    };

    LearningCurve curve;
    try {
        curve = train(m, model, job.config);
    } catch (const TrainingDiverged& e) {
        write_outputs(e.partial());
        const Json manifest = ctx.finish("diverged");
        if (ctx.globals.json) ctx.out << Json{{"status", "diverged"}, {"error", e.what()}, {"manifest", manifest}}.dump(2) << "\n";
        throw;
    }
    write_outputs(curve);
    const double final_running = curve.running.back();
    double exact = std::nan("");
    try {
        exact = average_reward(m, curve.final_policy);
    } catch (const NonUniqueStationary&) {
    }
    const Json manifest = ctx.finish();
    if (ctx.globals.json) {
        ctx.out << Json{{"status", "ok"},
                        {"final_running_average", final_running},
                        {"final_policy_reward", exact},
                        {"model_dimension", model.dimension()},
                        {"repetitions", curve.repetitions.size()},
                        {"manifest", manifest}}
                       .dump(2)
                << "\n";
    } else {
        ctx.out << "model dimension         " << model.dimension() << "\n"
                << "repetitions             " << curve.repetitions.size() << "\n"
                << "final running average   " << format_double(final_running) << "\n"
                << "final policy reward     " << format_double(exact) << "\n"
                << "outputs in              " << ctx.globals.out << "\n";
    }
    return kOk;
}

// geometry

inline Json vertex_list_json(const PolytopeVRep& p) {
    Json out = Json::array();
    for (const auto& v : p.vertices) out.push_back(rational_table_json(v));
    return out;
}

inline int cmd_geometry(Context& ctx, const std::string& pomdp_file, double tolerance, std::size_t restarts) {
    const Pomdp m = load_environment(pomdp_file);
    ctx.config = {{"pomdp", pomdp_file}, {"tolerance", tolerance}, {"restarts", restarts}};
    const auto j = j_vertex_enumeration(m);  // guard first
    const auto lemma = check_lemma1(j);
    const auto xi = xi_vertices(m.n_world);
    const std::size_t xi_rank = affine_rank(xi);
    OracleOptions options;
    options.restarts = restarts;
    options.seed = ctx.globals.seed;
    const auto bound = verify_stochasticity_bound(m, tolerance, options);
    const auto U = ambiguous_sensor_set(m);
    const bool passed = lemma.passed() && bound.passed;

    if (ctx.globals.json) {
        Json out{{"xi", {{"n_world", m.n_world}, {"vertex_count", xi.vertices.size()}, {"affine_rank", xi_rank},
                         {"dimension_expected", m.n_world * (m.n_world - 1)}}},
                 {"j", {{"vertex_count", j.vertices.size()}, {"vertices", vertex_list_json(j)}}},
                 {"lemma1", {{"passed", lemma.passed()}, {"violations", lemma.violations}}},
                 {"stochasticity_bound",
                  {{"passed", bound.passed},
                   {"u_size", U.size()},
                   {"bound", bound.bound},
                   {"degree", bound.degree},
                   {"oracle_reward", bound.oracle_reward},
                   {"truncated_reward", bound.truncated_reward},
                   {"reward_loss", bound.reward_loss},
                   {"tolerance", tolerance},
                   {"deterministic", bound.degree == 0},
                   {"truncated_policy", detail::to_rows(bound.truncated_policy.probs)},
                   {"note", bound.note}}},
                 {"passed", passed}};
        out["manifest"] = ctx.finish();
        ctx.out << out.dump(2) << "\n";
    } else {
        ctx.finish();
        ctx.out << "Xi: " << xi.vertices.size() << " vertices, affine rank " << xi_rank << " (|W|(|W|-1) = "
                << m.n_world * (m.n_world - 1) << ")\n";
        ctx.out << "J: " << j.vertices.size() << " vertices\n";
        for (const auto& v : j.vertices) ctx.out << "  " << rational_table_json(v).dump() << "\n";
        ctx.out << "J vertex support check: " << (lemma.passed() ? "pass" : "FAIL") << "\n";
        ctx.out << "stochasticity bound: degree " << bound.degree << " <= " << bound.bound << ", reward loss "
                << format_double(bound.reward_loss) << " (tolerance " << tolerance << "): "
                << (bound.passed ? "pass" : "FAIL") << (bound.note.empty() ? "" : " (" + bound.note + ")") << "\n";
    }
    return passed ? kOk : kFailure;
}

// analytic

struct AnalyticRow {
    ChainSpec spec;
    ChainSolution solution;
    Json verify;
    bool verified = true;
};

inline void verify_row(AnalyticRow& row, std::uint64_t seed) {
    const Pomdp m = build_chain(row.spec);
    const Policy p = chain_policy_matrix(row.solution.policy);
    const double core = average_reward(m, p);
    const double consistency = std::abs(core - chain_reward(row.solution.policy, row.spec));
    const double grad = project_to_tangent(exact_policy_gradient(m, p)).cwiseAbs().maxCoeff();
    OracleOptions options;
    options.seed = seed;
    const auto oracle = brute_force_optimal_policy(m, options);
    const double policy_gap = (oracle.policy.probs - p.probs).cwiseAbs().maxCoeff();
    const double reward_gap = std::abs(oracle.reward - row.solution.reward);
    row.verified = consistency <= 1e-10 && grad <= 1e-6 && policy_gap <= 1e-3 && reward_gap <= 1e-3;
    row.verify = {{"average_reward", core},         {"reward_consistency", consistency},
                  {"projected_gradient", grad},     {"oracle_reward", oracle.reward},
                  {"oracle_policy_gap", policy_gap}, {"passed", row.verified}};
}

inline int cmd_analytic(Context& ctx, std::vector<std::size_t> ks, const std::string& spec_file, bool verify, bool csv) {
    std::vector<AnalyticRow> rows;
    if (!spec_file.empty()) {
        const Json j = read_json_file(spec_file);
        Json env = j;
        if (env.is_object() && !env.contains("type")) env["type"] = "chain";
        detail::reject_unknown(env, {"type", "groups", "actions", "success"}, spec_file);
        ChainSpec spec = ChainSpec::uniform(env.contains("groups") ? detail::count(env["groups"], spec_file + ".groups") : 1,
                                            detail::count(detail::field(env, "actions", spec_file), spec_file + ".actions"));
        if (env.contains("success")) {
            const Matrix t = detail::matrix(env["success"], spec.n_groups, spec.n_actions, spec_file + ".success");
            for (std::size_t g = 0; g < spec.n_groups; ++g)
                for (std::size_t i = 0; i < spec.n_actions; ++i) spec.success[g][i] = t(Index(g), Index(i));
        }
        validate(spec);
        rows.push_back({spec, multichain_optimal(spec), {}, true});
        ctx.config = {{"spec", spec_file}};
    } else {
        if (ks.empty()) ks = {1, 2, 3, 4};
        for (std::size_t K : ks) {
            if (K < 1) throw ValidationError("K must be at least 1");
            rows.push_back({ChainSpec::uniform(1, K), chain_optimal(K), {}, true});
        }
        ctx.config = {{"K", ks}};
    }
    ctx.config["verify"] = verify;
    bool ok = true;
    if (verify) {
        for (auto& r : rows) {
            verify_row(r, ctx.globals.seed);
            ok = ok && r.verified;
        }
    }

    std::string table_csv = "groups,K,group,policy,reward\n";
    for (const auto& r : rows) {
        for (std::size_t g = 0; g < r.solution.policy.size(); ++g) {
            std::string pol;
            for (Index i = 0; i < r.solution.policy[g].size(); ++i) pol += (i ? " " : "") + format_double(r.solution.policy[g][i]);
            table_csv += std::to_string(r.spec.n_groups) + ',' + std::to_string(r.spec.n_actions) + ',' + std::to_string(g) +
                         ',' + pol + ',' + format_double(r.solution.reward) + '\n';
        }
    }
    if (!ctx.globals.out.empty()) ctx.write("analytic.csv", table_csv);

    if (ctx.globals.json) {
        Json list = Json::array();
        for (const auto& r : rows) {
            Json policy = Json::array();
            for (const auto& g : r.solution.policy) policy.push_back(detail::to_array(g));
            Json item{{"groups", r.spec.n_groups}, {"K", r.spec.n_actions}, {"policy", policy}, {"reward", r.solution.reward}};
            if (verify) item["verify"] = r.verify;
            list.push_back(item);
        }
        Json out{{"rows", list}};
        if (verify) out["verified"] = ok;
        out["manifest"] = ctx.finish();
        ctx.out << out.dump(2) << "\n";
    } else if (csv) {
        ctx.finish();
        ctx.out << table_csv;
    } else {
        ctx.finish();
        ctx.out << std::left << std::setw(4) << "K" << std::setw(44) << "pi" << "R\n";
        for (const auto& r : rows) {
            for (std::size_t g = 0; g < r.solution.policy.size(); ++g) {
                const std::string label = r.solution.policy.size() > 1 ? std::to_string(r.spec.n_actions) + "/" + std::to_string(g)
                                                                       : std::to_string(r.spec.n_actions);
                ctx.out << std::setw(4) << label << std::setw(44) << row_text(r.solution.policy[g], 4)
                        << (g == 0 ? fixed(r.solution.reward, 4) : "") << "\n";
            }
            if (verify) ctx.out << "    verify: " << (r.verified ? "pass" : "FAIL") << " " << r.verify.dump() << "\n";
        }
    }
    return ok ? kOk : kFailure;
}

// maze-export

inline int cmd_maze_export(Context& ctx, const std::string& grid, const std::string& labels) {
    MazeLayout layout;
    if (grid.empty()) {
        layout = default_maze_layout();
        if (!labels.empty()) layout = apply_maze_sidecar(layout, read_json_file(labels), labels);
    } else {
        layout = load_maze(grid, labels.empty() ? std::nullopt : std::optional<fs::path>(labels));
    }
    ctx.config = {{"grid", grid.empty() ? "default" : grid}, {"labels", labels}};
    const Pomdp m = build_maze(layout);
    const auto enc = sensor_encoding(layout);
    const auto U = ambiguous_sensor_set(m);
    if (ctx.globals.out.empty()) ctx.globals.out = "maze_out";
    ctx.write("maze.json", pomdp_to_json(m).dump(2) + "\n");
    ctx.write("maze.txt", maze_grid_text(layout));
    ctx.write("maze_labels.json", maze_sidecar_json(layout).dump(2) + "\n");
    Json patterns = Json::array();
    for (std::size_t c = 0; c < enc.sensor_of_cell.size(); ++c)
        patterns.push_back({{"cell", c + 1}, {"walls", enc.pattern_of_cell[c]}, {"sensor", enc.sensor_of_cell[c]}});
    if (ctx.globals.json) {
        Json out{{"cells", m.n_world},   {"sensors", m.n_sensor},  {"actions", m.n_action},
                 {"policy_dimension", m.n_sensor * (m.n_action - 1)}, {"ambiguous_sensors", U},
                 {"cells_detail", patterns}};
        out["manifest"] = ctx.finish();
        ctx.out << out.dump(2) << "\n";
    } else {
        ctx.finish();
        ctx.out << "cells " << m.n_world << ", sensors " << m.n_sensor << ", |S|(|A|-1) = " << m.n_sensor * (m.n_action - 1)
                << ", |U| = " << U.size() << "\n"
                << "written to " << ctx.globals.out << "\n";
    }
    return kOk;
}

// Dispatch

inline int exit_code(const std::exception& e) {
    if (dynamic_cast<const GuardExceeded*>(&e)) return kGuard;
    if (dynamic_cast<const Divergence*>(&e)) return kDivergence;
    if (dynamic_cast<const ValidationError*>(&e) || dynamic_cast<const DimensionMismatch*>(&e) ||
        dynamic_cast<const InvalidArgument*>(&e) || dynamic_cast<const NonUniqueStationary*>(&e)) {
        return kValidation;
    }
    return kFailure;
}

/// args excludes the program name.
inline int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Memoryless stochastic policies for POMDPs"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--seed", g.seed, "Random seed");
    app.add_flag("--json", g.json, "Machine-readable output");
    app.add_option("--out", g.out, "Output directory");

    std::string pomdp_file, policy_file, config_file, spec_file, grid, labels;
    std::optional<std::size_t> reps;
    std::vector<std::size_t> ks;
    bool verify = false, csv = false;
    double tolerance = 1e-3;
    std::size_t restarts = 10;

    auto* eval = app.add_subcommand("eval", "Average reward of a policy");
    eval->add_option("pomdp", pomdp_file, "POMDP or environment JSON")->required();
    eval->add_option("policy", policy_file, "Policy JSON")->required();

    auto* train_cmd = app.add_subcommand("train", "Policy-gradient training");
    train_cmd->add_option("config", config_file, "Training config JSON")->required();
    train_cmd->add_option("--reps", reps, "Repetitions (overrides the config)");

    auto* geometry = app.add_subcommand("geometry", "Polytope checks on a small POMDP");
    geometry->add_option("pomdp", pomdp_file, "POMDP or environment JSON")->required();
    geometry->add_option("--tolerance", tolerance, "Truncation and reward tolerance");
    geometry->add_option("--restarts", restarts, "Oracle gradient-ascent starts");

    auto* analytic = app.add_subcommand("analytic", "Optimal policies of the chain families");
    analytic->add_option("-K,--k", ks, "Chain lengths (default 1 2 3 4)");
    analytic->add_option("--spec", spec_file, "Multichain spec JSON");
    analytic->add_flag("--verify", verify, "Cross-check against evaluation and the oracle");
    analytic->add_flag("--csv", csv, "Print CSV");

    auto* maze = app.add_subcommand("maze-export", "Build the maze and export it");
    maze->add_option("--grid", grid, "Grid text file");
    maze->add_option("--labels", labels, "Label sidecar JSON");

    std::reverse(args.begin(), args.end());
    try {
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kValidation;
    }
    g.seed_given = app.count("--seed") > 0;

    Context ctx{g, out, app.get_subcommands().front()->get_name()};
    try {
        if (eval->parsed()) return cmd_eval(ctx, pomdp_file, policy_file);
        if (train_cmd->parsed()) return cmd_train(ctx, config_file, reps);
        if (geometry->parsed()) return cmd_geometry(ctx, pomdp_file, tolerance, restarts);
        if (analytic->parsed()) return cmd_analytic(ctx, ks, spec_file, verify, csv);
        if (maze->parsed()) return cmd_maze_export(ctx, grid, labels);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return exit_code(e);
    }
    return kFailure;
}

}  // namespace mempol::cli

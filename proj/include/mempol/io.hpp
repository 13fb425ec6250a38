#pragma once

#include <mempol/chains.hpp>
#include <mempol/environments.hpp>
#include <mempol/models/model.hpp>
#include <mempol/rational.hpp>
#include <mempol/train.hpp>

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

namespace mempol {

using Json = nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";

namespace detail {

[[noreturn]] inline void io_fail(const std::string& where, const std::string& what) {
    throw ValidationError(where + ": " + what);
}

inline const Json& field(const Json& j, const char* key, const std::string& where) {
    if (!j.is_object()) io_fail(where, "expected an object");
    auto it = j.find(key);
    if (it == j.end()) io_fail(where, std::string("missing field '") + key + "'");
    return *it;
}

inline void reject_unknown(const Json& j, std::initializer_list<const char*> known, const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : known) ok = ok || it.key() == k;
        if (!ok) io_fail(where, "unknown field '" + it.key() + "'");
    }
}

inline double number(const Json& j, const std::string& where) {
    if (!j.is_number()) io_fail(where, "expected a number");
    return j.get<double>();
}

inline std::size_t count(const Json& j, const std::string& where) {
    if (!j.is_number_integer() || j.get<long long>() < 0) io_fail(where, "expected a non-negative integer");
    return j.get<std::size_t>();
}

inline Matrix matrix(const Json& j, std::size_t rows, std::size_t cols, const std::string& where) {
    if (!j.is_array() || j.size() != rows) io_fail(where, "expected an array of " + std::to_string(rows) + " rows");
    Matrix out(static_cast<Index>(rows), static_cast<Index>(cols));
    for (std::size_t r = 0; r < rows; ++r) {
        const std::string at = where + "[" + std::to_string(r) + "]";
        if (!j[r].is_array() || j[r].size() != cols) io_fail(at, "expected " + std::to_string(cols) + " entries");
        for (std::size_t c = 0; c < cols; ++c)
            out(static_cast<Index>(r), static_cast<Index>(c)) = number(j[r][c], at + "[" + std::to_string(c) + "]");
    }
    return out;
}

inline Json to_rows(const Matrix& m) {
    Json out = Json::array();
    for (Index r = 0; r < m.rows(); ++r) {
        Json row = Json::array();
        for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        out.push_back(std::move(row));
    }
    return out;
}

inline Json to_array(const Vector& v) {
    Json out = Json::array();
    for (Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
    return out;
}

inline Vector vector(const Json& j, const std::string& where) {
    if (!j.is_array()) io_fail(where, "expected an array");
    Vector out(static_cast<Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) out[static_cast<Index>(i)] = number(j[i], where + "[" + std::to_string(i) + "]");
    return out;
}

}  // namespace detail

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError(path.string() + ": cannot open file");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline Json read_json_file(const std::filesystem::path& path) {
    const std::string text = read_text_file(path);
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError(path.string() + ": cannot write file");
    out << text;
}

inline void write_json_file(const std::filesystem::path& path, const Json& j) { write_text_file(path, j.dump(2) + "\n"); }

// POMDP documents: n_world, n_sensor, n_action, alpha[w][a][w'], beta[w][s],
// reward[w][a] or reward[w][a][w'].

inline Pomdp pomdp_from_json(const Json& j, const std::string& where = "pomdp") {
    using namespace detail;
    if (!j.is_object()) io_fail(where, "expected an object");
    reject_unknown(j, {"n_world", "n_sensor", "n_action", "alpha", "beta", "reward", "name"}, where);
    const std::size_t W = count(field(j, "n_world", where), where + ".n_world");
    const std::size_t S = count(field(j, "n_sensor", where), where + ".n_sensor");
    const std::size_t A = count(field(j, "n_action", where), where + ".n_action");
    if (W == 0 || S == 0 || A == 0) io_fail(where, "n_world, n_sensor and n_action must be positive");
    Pomdp m(W, S, A);
    const Json& alpha = field(j, "alpha", where);
    if (!alpha.is_array() || alpha.size() != W) io_fail(where + ".alpha", "expected " + std::to_string(W) + " blocks");
    for (std::size_t w = 0; w < W; ++w) m.alpha[w] = matrix(alpha[w], A, W, where + ".alpha[" + std::to_string(w) + "]");
    m.beta = matrix(field(j, "beta", where), W, S, where + ".beta");
    const Json& reward = field(j, "reward", where);
    const bool full = reward.is_array() && !reward.empty() && reward[0].is_array() && !reward[0].empty() &&
                      reward[0][0].is_array();
    if (full) {
        if (reward.size() != W) io_fail(where + ".reward", "expected " + std::to_string(W) + " blocks");
        std::vector<Matrix> blocks;
        for (std::size_t w = 0; w < W; ++w) blocks.push_back(matrix(reward[w], A, W, where + ".reward[" + std::to_string(w) + "]"));
        m.reward = reduce_transition_reward(m, blocks);
    } else {
        m.reward = matrix(reward, W, A, where + ".reward");
    }
    const auto issues = validate(m);
    if (!issues.empty()) io_fail(where, to_string(issues.front()));
    return m;
}

inline Json pomdp_to_json(const Pomdp& m) {
    Json alpha = Json::array();
    for (const auto& block : m.alpha) alpha.push_back(detail::to_rows(block));
    return {{"n_world", m.n_world}, {"n_sensor", m.n_sensor}, {"n_action", m.n_action},
            {"alpha", alpha},       {"beta", detail::to_rows(m.beta)}, {"reward", detail::to_rows(m.reward)}};
}

inline Pomdp load_pomdp(const std::filesystem::path& path) { return pomdp_from_json(read_json_file(path), path.string()); }

/// Either a bare 2-D array or {"policy": [[...]]}.
inline Policy policy_from_json(const Json& j, std::size_t n_sensor, std::size_t n_action,
                               const std::string& where = "policy") {
    const Json& rows = j.is_object() ? detail::field(j, "policy", where) : j;
    const std::string at = j.is_object() ? where + ".policy" : where;
    Policy p(detail::matrix(rows, n_sensor, n_action, at));
    const auto issues = validate(p, n_sensor, n_action);
    if (!issues.empty()) {
        const auto& v = issues.front();
        detail::io_fail(at, (v.where.empty() ? std::string() : "row " + std::to_string(v.where.front()) + ": ") + v.what);
    }
    return p;
}

inline Json policy_to_json(const Policy& p) { return {{"policy", detail::to_rows(p.probs)}}; }

// Model descriptors.

struct ModelDescriptor {
    std::string family = "k_interaction";  // k_interaction | cyclic | mixture | crbm
    unsigned k = 1;
    std::size_t degree = 2;
    /// Weight statistics of a mixture: k_interaction or cyclic.
    std::string weights = "k_interaction";
    std::size_t hidden = 1;
    std::optional<Vector> parameters;
};

inline ModelDescriptor model_descriptor_from_json(const Json& j, const std::string& where = "model") {
    using namespace detail;
    if (!j.is_object()) io_fail(where, "expected an object");
    reject_unknown(j, {"family", "k", "degree", "weights", "hidden", "parameters"}, where);
    ModelDescriptor d;
    const Json& family = field(j, "family", where);
    if (!family.is_string()) io_fail(where + ".family", "expected a string");
    d.family = family.get<std::string>();
    if (d.family != "k_interaction" && d.family != "cyclic" && d.family != "mixture" && d.family != "crbm") {
        io_fail(where + ".family", "unknown family '" + d.family + "'");
    }
    if (j.contains("k")) d.k = static_cast<unsigned>(count(j["k"], where + ".k"));
    if (j.contains("degree")) d.degree = count(j["degree"], where + ".degree");
    if (j.contains("hidden")) d.hidden = count(j["hidden"], where + ".hidden");
    if (j.contains("weights")) {
        if (!j["weights"].is_string()) io_fail(where + ".weights", "expected a string");
        d.weights = j["weights"].get<std::string>();
        if (d.weights != "k_interaction" && d.weights != "cyclic") io_fail(where + ".weights", "unknown statistics '" + d.weights + "'");
    }
    if (j.contains("parameters")) d.parameters = vector(j["parameters"], where + ".parameters");
    return d;
}

inline Json to_json(const ModelDescriptor& d) {
    Json j{{"family", d.family}};
    if (d.family == "k_interaction") j["k"] = d.k;
    if (d.family == "cyclic") j["degree"] = d.degree;
    if (d.family == "mixture") {
        j["weights"] = d.weights;
        if (d.weights == "cyclic") {
            j["degree"] = d.degree;
        } else {
            j["k"] = d.k;
        }
    }
    if (d.family == "crbm") j["hidden"] = d.hidden;
    if (d.parameters) j["parameters"] = detail::to_array(*d.parameters);
    return j;
}

/// Instantiates a descriptor for the given sizes. Cyclic statistics are
/// standardized; parameters default to zero.
inline AnyModel make_model(const ModelDescriptor& d, std::size_t n_sensor, std::size_t n_action) {
    AnyModel model;
    if (d.family == "k_interaction") {
        model = ExponentialPolicyModel(k_interaction_statistics(n_sensor, n_action, d.k));
    } else if (d.family == "cyclic") {
        model = ExponentialPolicyModel(standardized(cyclic_statistics(n_sensor, n_action, d.degree)));
    } else if (d.family == "mixture") {
        const Matrix g = d.weights == "cyclic" ? function_cyclic_statistics(n_sensor, n_action, d.degree)
                                               : function_k_interaction_statistics(n_sensor, n_action, d.k);
        model = MixtureModel(n_sensor, n_action, g);
    } else if (d.family == "crbm") {
        model = CrbmModel(n_sensor, n_action, d.hidden);
    } else {
        throw ValidationError("unknown model family '" + d.family + "'");
    }
    if (d.parameters) {
        if (static_cast<std::size_t>(d.parameters->size()) != model.dimension()) {
            throw ValidationError("model.parameters has length " + std::to_string(d.parameters->size()) +
                                  ", the model has dimension " + std::to_string(model.dimension()));
        }
        model = model.with_parameters(*d.parameters);
    }
    return model;
}

// Maze label sidecar: {"labels": [[row, col, label], ...], "teleports": [...],
// "reward": label, "start": label}. Every field is optional; a label list must
// relabel all free cells.

inline MazeLayout apply_maze_sidecar(MazeLayout layout, const Json& j, const std::string& where = "labels") {
    using namespace detail;
    if (!j.is_object()) io_fail(where, "expected an object");
    reject_unknown(j, {"labels", "teleports", "reward", "start"}, where);
    if (j.contains("labels")) {
        const Json& list = j["labels"];
        if (!list.is_array() || list.size() != layout.cell_count()) {
            io_fail(where + ".labels", "expected one entry per free cell (" + std::to_string(layout.cell_count()) + ")");
        }
        std::vector<int> labels(layout.labels.size(), 0);
        for (std::size_t i = 0; i < list.size(); ++i) {
            const std::string at = where + ".labels[" + std::to_string(i) + "]";
            if (!list[i].is_array() || list[i].size() != 3) io_fail(at, "expected [row, col, label]");
            const std::size_t r = count(list[i][0], at), c = count(list[i][1], at);
            if (!layout.is_free(static_cast<long>(r), static_cast<long>(c))) io_fail(at, "cell is not free");
            labels[r * layout.cols + c] = static_cast<int>(count(list[i][2], at));
        }
        layout.labels = std::move(labels);
    }
    if (j.contains("teleports")) {
        layout.teleports.clear();
        if (!j["teleports"].is_array()) io_fail(where + ".teleports", "expected an array");
        for (const auto& t : j["teleports"]) layout.teleports.insert(static_cast<int>(count(t, where + ".teleports")));
    }
    if (j.contains("reward")) layout.reward_cell = static_cast<int>(count(j["reward"], where + ".reward"));
    if (j.contains("start")) layout.start_cell = static_cast<int>(count(j["start"], where + ".start"));
    validate(layout);
    return layout;
}

inline MazeLayout load_maze(const std::filesystem::path& grid, const std::optional<std::filesystem::path>& sidecar = {}) {
    MazeLayout layout;
    try {
        layout = parse_maze_grid(read_text_file(grid));
    } catch (const ValidationError& e) {
        throw ValidationError(grid.string() + ": " + e.what());
    }
    if (sidecar) return apply_maze_sidecar(std::move(layout), read_json_file(*sidecar), sidecar->string());
    validate(layout);
    return layout;
}

inline std::string maze_grid_text(const MazeLayout& m) {
    std::string out;
    for (std::size_t r = 0; r < m.rows; ++r) {
        for (std::size_t c = 0; c < m.cols; ++c) {
            if (!m.is_free(static_cast<long>(r), static_cast<long>(c))) {
                out += '#';
                continue;
            }
            const int l = m.label(r, c);
            const bool teleport = m.teleports.count(l) > 0, reward = l == m.reward_cell;
            out += reward ? (teleport ? 'R' : 'r') : (teleport ? 'T' : '.');
        }
        out += '\n';
    }
    return out;
}

inline Json maze_sidecar_json(const MazeLayout& m) {
    Json labels = Json::array();
    for (std::size_t r = 0; r < m.rows; ++r)
        for (std::size_t c = 0; c < m.cols; ++c)
            if (m.is_free(static_cast<long>(r), static_cast<long>(c))) labels.push_back({r, c, m.label(r, c)});
    return {{"labels", labels},
            {"teleports", std::vector<int>(m.teleports.begin(), m.teleports.end())},
            {"reward", m.reward_cell},
            {"start", m.start_cell}};
}

// Environments inside training configs.

/// {"type": "maze" [, "grid_file", "labels_file"]} | {"type": "chain", "groups",
/// "actions" [, "success"]} | {"type": "example1", "n"} | {"type": "example3"} |
/// {"type": "example4"} | {"type": "file", "path"}. Relative paths resolve
/// against base.
inline Pomdp environment_from_json(const Json& j, const std::filesystem::path& base = {},
                                   const std::string& where = "environment") {
    using namespace detail;
    const Json& type_field = field(j, "type", where);
    if (!type_field.is_string()) io_fail(where + ".type", "expected a string");
    const std::string type = type_field.get<std::string>();
    auto resolve = [&](const Json& p, const std::string& at) {
        if (!p.is_string()) io_fail(at, "expected a path string");
        std::filesystem::path path(p.get<std::string>());
        return path.is_absolute() ? path : base / path;
    };
    if (type == "maze") {
        reject_unknown(j, {"type", "grid_file", "labels_file"}, where);
        if (!j.contains("grid_file")) {
            if (j.contains("labels_file")) {
                return build_maze(apply_maze_sidecar(default_maze_layout(), read_json_file(resolve(j["labels_file"], where)),
                                                     where + ".labels_file"));
            }
            return build_maze(default_maze_layout());
        }
        std::optional<std::filesystem::path> sidecar;
        if (j.contains("labels_file")) sidecar = resolve(j["labels_file"], where + ".labels_file");
        return build_maze(load_maze(resolve(j["grid_file"], where + ".grid_file"), sidecar));
    }
    if (type == "chain") {
        reject_unknown(j, {"type", "groups", "actions", "success"}, where);
        ChainSpec spec = ChainSpec::uniform(j.contains("groups") ? count(j["groups"], where + ".groups") : 1,
                                            count(field(j, "actions", where), where + ".actions"));
        if (j.contains("success")) {
            const Matrix t = matrix(j["success"], spec.n_groups, spec.n_actions, where + ".success");
            for (std::size_t g = 0; g < spec.n_groups; ++g)
                for (std::size_t i = 0; i < spec.n_actions; ++i) spec.success[g][i] = t(static_cast<Index>(g), static_cast<Index>(i));
        }
        validate(spec);
        return build_chain(spec);
    }
    if (type == "example1") {
        reject_unknown(j, {"type", "n"}, where);
        return build_example1(count(field(j, "n", where), where + ".n"));
    }
    if (type == "example3") {
        reject_unknown(j, {"type"}, where);
        return build_example3();
    }
    if (type == "example4") {
        reject_unknown(j, {"type"}, where);
        return build_example4();
    }
    if (type == "file") {
        reject_unknown(j, {"type", "path"}, where);
        return load_pomdp(resolve(field(j, "path", where), where + ".path"));
    }
    io_fail(where + ".type", "unknown environment type '" + type + "'");
}

struct TrainJob {
    Json environment;
    ModelDescriptor model;
    TrainConfig config;
};

inline TrainJob train_job_from_json(const Json& j, const std::string& where = "config") {
    using namespace detail;
    if (!j.is_object()) io_fail(where, "expected an object");
    reject_unknown(j, {"environment", "model", "learning_rate", "iterations", "horizon", "trace_discount", "repetitions",
                       "seed", "window", "gradient", "reset_each_iteration", "init_range", "running_window",
                       "divergence_limit"},
                   where);
    TrainJob job;
    job.environment = field(j, "environment", where);
    job.model = model_descriptor_from_json(field(j, "model", where), where + ".model");
    TrainConfig& c = job.config;
    auto at = [&](const char* key) { return where + "." + key; };
    if (j.contains("learning_rate")) c.learning_rate = number(j["learning_rate"], at("learning_rate"));
    if (j.contains("iterations")) c.iterations = count(j["iterations"], at("iterations"));
    if (j.contains("horizon")) c.horizon = count(j["horizon"], at("horizon"));
    if (j.contains("trace_discount")) c.trace_discount = number(j["trace_discount"], at("trace_discount"));
    if (j.contains("repetitions")) c.repetitions = count(j["repetitions"], at("repetitions"));
    if (j.contains("seed")) c.seed = count(j["seed"], at("seed"));
    if (j.contains("window")) {
        const auto w = j["window"].is_string() ? j["window"].get<std::string>() : std::string();
        if (w == "uniform") {
            c.window_mode = WindowMode::uniform;
        } else if (w == "fixed") {
            c.window_mode = WindowMode::fixed;
        } else {
            io_fail(at("window"), "expected \"uniform\" or \"fixed\"");
        }
    }
    if (j.contains("gradient")) {
        const auto g = j["gradient"].is_string() ? j["gradient"].get<std::string>() : std::string();
        if (g == "gpomdp") {
            c.gradient_mode = GradientMode::gpomdp;
        } else if (g == "exact") {
            c.gradient_mode = GradientMode::exact;
        } else {
            io_fail(at("gradient"), "expected \"gpomdp\" or \"exact\"");
        }
    }
    if (j.contains("reset_each_iteration")) {
        if (!j["reset_each_iteration"].is_boolean()) io_fail(at("reset_each_iteration"), "expected a boolean");
        c.reset_each_iteration = j["reset_each_iteration"].get<bool>();
    }
    if (j.contains("init_range")) c.init_range = number(j["init_range"], at("init_range"));
    if (j.contains("running_window")) c.running_window = count(j["running_window"], at("running_window"));
    if (j.contains("divergence_limit")) c.divergence_limit = number(j["divergence_limit"], at("divergence_limit"));
    try {
        validate(c);
    } catch (const ValidationError& e) {
        io_fail(where, e.what());
    }
    return job;
}

inline Json to_json(const TrainConfig& c) {
    return {{"learning_rate", c.learning_rate},
            {"iterations", c.iterations},
            {"horizon", c.horizon},
            {"trace_discount", c.trace_discount},
            {"repetitions", c.repetitions},
            {"seed", c.seed},
            {"window", c.window_mode == WindowMode::uniform ? "uniform" : "fixed"},
            {"gradient", c.gradient_mode == GradientMode::gpomdp ? "gpomdp" : "exact"},
            {"reset_each_iteration", c.reset_each_iteration},
            {"init_range", c.init_range},
            {"running_window", c.running_window},
            {"divergence_limit", c.divergence_limit}};
}

// CSV with a header row, ',' separators, LF line ends and 17 significant digits.

inline std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

/// iteration, reward_estimate, running_avg, repetition; one block per repetition.
inline std::string learning_curve_csv(const LearningCurve& curve) {
    std::string out = "iteration,reward_estimate,running_avg,repetition\n";
    for (std::size_t r = 0; r < curve.repetitions.size(); ++r) {
        const auto& rep = curve.repetitions[r];
        for (std::size_t i = 0; i < rep.reward.size(); ++i) {
            out += std::to_string(i) + ',' + format_double(rep.reward[i]) + ',' + format_double(rep.running[i]) + ',' +
                   std::to_string(r) + '\n';
        }
    }
    return out;
}

/// Averages over repetitions: iteration, reward_estimate, running_avg.
inline std::string mean_curve_csv(const LearningCurve& curve) {
    std::string out = "iteration,reward_estimate,running_avg\n";
    for (std::size_t i = 0; i < curve.reward.size(); ++i)
        out += std::to_string(i) + ',' + format_double(curve.reward[i]) + ',' + format_double(curve.running[i]) + '\n';
    return out;
}

struct RunManifest {
    std::string command;
    Json config;
    std::uint64_t seed = 0;
    std::string version = kVersion;
    std::vector<std::string> outputs;
    double duration_seconds = 0.0;
    std::string status = "ok";
};

inline Json to_json(const RunManifest& m) {
    return {{"command", m.command}, {"config", m.config},     {"seed", m.seed},
            {"version", m.version}, {"outputs", m.outputs},   {"duration_seconds", m.duration_seconds},
            {"status", m.status}};
}

inline Json rational_table_json(const RationalMatrix& m) {
    Json out = Json::array();
    for (std::size_t r = 0; r < m.rows; ++r) {
        Json row = Json::array();
        for (std::size_t c = 0; c < m.cols; ++c) row.push_back(to_string(m(r, c)));
        out.push_back(std::move(row));
    }
    return out;
}

}  // namespace mempol

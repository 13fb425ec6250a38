#pragma once

#include <mempol/chains.hpp>
#include <mempol/pomdp.hpp>

#include <array>
#include <deque>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace mempol {

/// Actions in the maze, in this order.
inline constexpr std::array<const char*, 4> kMazeActions{"N", "E", "S", "W"};

/// Grid world with labelled free cells. Labels run 1..n over the free cells;
/// world state w corresponds to label w + 1.
struct MazeLayout {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<bool> free;   // row-major
    std::vector<int> labels;  // row-major, 0 on walls
    std::set<int> teleports;
    int reward_cell = 0;
    int start_cell = 1;

    bool is_free(long r, long c) const {
        if (r < 0 || c < 0 || r >= static_cast<long>(rows) || c >= static_cast<long>(cols)) return false;
        return free[static_cast<std::size_t>(r) * cols + static_cast<std::size_t>(c)];
    }
    int label(std::size_t r, std::size_t c) const { return labels[r * cols + c]; }
    std::size_t cell_count() const {
        std::size_t n = 0;
        for (bool f : free) n += f ? 1 : 0;
        return n;
    }
    /// (row, col) of every label, indexed by label - 1.
    std::vector<std::pair<std::size_t, std::size_t>> positions() const {
        std::vector<std::pair<std::size_t, std::size_t>> out(cell_count());
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c)
                if (free[r * cols + c]) out[static_cast<std::size_t>(label(r, c) - 1)] = {r, c};
        return out;
    }
};

/// Throws ValidationError unless labels are exactly 1..n on the free cells and
/// the teleport, reward and start cells exist.
inline void validate(const MazeLayout& m) {
    if (m.free.size() != m.rows * m.cols || m.labels.size() != m.rows * m.cols) {
        throw ValidationError("maze grid storage does not match its shape");
    }
    const std::size_t n = m.cell_count();
    if (n == 0) throw ValidationError("maze has no free cells");
    std::vector<int> seen(n + 1, 0);
    for (std::size_t i = 0; i < m.free.size(); ++i) {
        const int l = m.labels[i];
        if (!m.free[i]) {
            if (l != 0) throw ValidationError("wall cell carries label " + std::to_string(l));
            continue;
        }
        if (l < 1 || l > static_cast<int>(n)) {
            throw ValidationError("label " + std::to_string(l) + " outside 1.." + std::to_string(n));
        }
        if (seen[static_cast<std::size_t>(l)]++) throw ValidationError("label " + std::to_string(l) + " used twice");
    }
    auto exists = [&](int l) { return l >= 1 && l <= static_cast<int>(n); };
    for (int t : m.teleports) {
        if (!exists(t)) throw ValidationError("teleport cell " + std::to_string(t) + " is not a free cell");
    }
    if (!exists(m.reward_cell)) throw ValidationError("reward cell " + std::to_string(m.reward_cell) + " is not a free cell");
    if (!exists(m.start_cell)) throw ValidationError("start cell " + std::to_string(m.start_cell) + " is not a free cell");
}

/// Grid text: '#' is a wall, anything else a free cell. 'T' marks a teleport,
/// 'R' the reward cell (which also teleports), 'r' a reward cell that does not
/// teleport. Labels follow reading order. Short rows are padded with walls.
inline MazeLayout parse_maze_grid(const std::string& text) {
    std::vector<std::string> lines;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    if (lines.empty()) throw ValidationError("empty maze grid");
    MazeLayout m;
    m.rows = lines.size();
    for (const auto& l : lines) m.cols = std::max(m.cols, l.size());
    m.free.assign(m.rows * m.cols, false);
    m.labels.assign(m.rows * m.cols, 0);
    int next = 1;
    int rewards = 0;
    for (std::size_t r = 0; r < m.rows; ++r) {
        for (std::size_t c = 0; c < lines[r].size(); ++c) {
            const char ch = lines[r][c];
            if (ch == '#' || ch == ' ') continue;
            const std::size_t i = r * m.cols + c;
            m.free[i] = true;
            m.labels[i] = next;
            if (ch == 'T' || ch == 'R') m.teleports.insert(next);
            if (ch == 'R' || ch == 'r') {
                m.reward_cell = next;
                ++rewards;
            }
            ++next;
        }
    }
    if (rewards > 1) throw ValidationError("maze grid marks more than one reward cell");
    return m;
}

/// The canonical 13-cell layout: ten distinct wall patterns, two of them
/// shared (by cells 3 and 9, and by another pair), teleports at 5, 11, 13 and
/// the reward at 13.
inline constexpr const char* kDefaultMazeGrid =
    "....##T\n"
    ".##....\n"
    "###T.##\n"
    "####R##\n";

inline MazeLayout default_maze_layout() {
    auto m = parse_maze_grid(kDefaultMazeGrid);
    validate(m);
    return m;
}

/// Wall bits (N=1, E=2, S=4, W=8) around every cell, and sensor indices that
/// number the distinct patterns by first appearance in label order.
struct SensorEncoding {
    std::vector<unsigned> pattern_of_cell;  // by label - 1
    std::vector<std::size_t> sensor_of_cell;
    std::vector<unsigned> patterns;  // by sensor index

    std::size_t n_sensor() const { return patterns.size(); }
};

inline constexpr std::array<long, 4> kMazeDr{-1, 0, 1, 0};
inline constexpr std::array<long, 4> kMazeDc{0, 1, 0, -1};

inline SensorEncoding sensor_encoding(const MazeLayout& m) {
    validate(m);
    SensorEncoding enc;
    std::map<unsigned, std::size_t> index;
    for (const auto& [r, c] : m.positions()) {
        unsigned bits = 0;
        for (unsigned d = 0; d < 4; ++d) {
            if (!m.is_free(static_cast<long>(r) + kMazeDr[d], static_cast<long>(c) + kMazeDc[d])) bits |= 1U << d;
        }
        auto [it, inserted] = index.emplace(bits, enc.patterns.size());
        if (inserted) enc.patterns.push_back(bits);
        enc.pattern_of_cell.push_back(bits);
        enc.sensor_of_cell.push_back(it->second);
    }
    return enc;
}

/// Moves succeed unless blocked by a wall; every action from a teleport cell
/// lands on the start cell. Reward 1 for any action taken on the reward cell.
inline Pomdp build_maze(const MazeLayout& m) {
    const auto enc = sensor_encoding(m);
    const auto pos = m.positions();
    const std::size_t W = pos.size();
    Pomdp out(W, enc.n_sensor(), 4);
    for (std::size_t w = 0; w < W; ++w) {
        const int label = static_cast<int>(w) + 1;
        out.beta(static_cast<Index>(w), static_cast<Index>(enc.sensor_of_cell[w])) = 1.0;
        if (label == m.reward_cell) out.reward.row(static_cast<Index>(w)).setOnes();
        for (std::size_t a = 0; a < 4; ++a) {
            std::size_t next = w;
            if (m.teleports.count(label)) {
                next = static_cast<std::size_t>(m.start_cell - 1);
            } else {
                const long r = static_cast<long>(pos[w].first) + kMazeDr[a];
                const long c = static_cast<long>(pos[w].second) + kMazeDc[a];
                if (m.is_free(r, c)) {
                    next = static_cast<std::size_t>(m.label(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) - 1);
                }
            }
            out.transition(w, a, next) = 1.0;
        }
    }
    return out;
}

/// Cells reachable from the start cell through positive-probability moves.
inline std::vector<bool> maze_reachable(const MazeLayout& m) {
    const Pomdp p = build_maze(m);
    std::vector<bool> seen(p.n_world, false);
    std::deque<std::size_t> queue{static_cast<std::size_t>(m.start_cell - 1)};
    seen[queue.front()] = true;
    while (!queue.empty()) {
        const std::size_t w = queue.front();
        queue.pop_front();
        for (std::size_t a = 0; a < p.n_action; ++a)
            for (std::size_t v = 0; v < p.n_world; ++v)
                if (p.transition(w, a, v) > 0.0 && !seen[v]) {
                    seen[v] = true;
                    queue.push_back(v);
                }
    }
    return seen;
}

/// Chain world: state 0 is the reset state, state x < U*K is step x % K of
/// group x / K and senses that group; its action x % K advances with
/// probability t, everything else returns to 0. The terminal state U*K pays 1,
/// senses group 0 and returns to 0.
inline Pomdp build_chain(const ChainSpec& spec) {
    validate(spec);
    const std::size_t U = spec.n_groups;
    const std::size_t K = spec.n_actions;
    const std::size_t terminal = U * K;
    Pomdp m(terminal + 1, U, K);
    for (std::size_t x = 0; x < terminal; ++x) {
        const std::size_t j = x / K;
        const std::size_t i = x % K;
        m.beta(static_cast<Index>(x), static_cast<Index>(j)) = 1.0;
        for (std::size_t a = 0; a < K; ++a) {
            if (a == i) {
                const double t = spec.t(j, i);
                m.transition(x, a, x + 1) += t;
                m.transition(x, a, 0) += 1.0 - t;
            } else {
                m.transition(x, a, 0) = 1.0;
            }
        }
    }
    m.beta(static_cast<Index>(terminal), 0) = 1.0;
    for (std::size_t a = 0; a < K; ++a) m.transition(terminal, a, 0) = 1.0;
    m.reward.row(static_cast<Index>(terminal)).setOnes();
    return m;
}

/// n worlds and n actions behind a single sensor. Action i in world i pays +1
/// and jumps to a uniformly random world; every other action pays -1 and stays.
inline Pomdp build_example1(std::size_t n) {
    if (n < 2) throw InvalidArgument("needs at least two world states");
    Pomdp m(n, 1, n);
    m.beta.setOnes();
    for (std::size_t w = 0; w < n; ++w) {
        for (std::size_t a = 0; a < n; ++a) {
            if (a == w) {
                m.alpha[w].row(static_cast<Index>(a)).setConstant(1.0 / static_cast<double>(n));
                m.reward(static_cast<Index>(w), static_cast<Index>(a)) = 1.0;
            } else {
                m.transition(w, a, w) = 1.0;
                m.reward(static_cast<Index>(w), static_cast<Index>(a)) = -1.0;
            }
        }
    }
    return m;
}

/// Four worlds 0..3; worlds 1 and 2 share a sensor. Sensor indices 0, 1, 2
/// stand for sensations 0, 1, 3 and action indices 0, 1, 2 for actions 1, 2, 3.
/// From 0 the agent moves to 1 or 2 at random; action 3 on 1 or 2 leads to 3
/// at a small cost, actions 1 and 2 there pay -10 or +10 and return to 0;
/// from 3 every action pays +10 and returns to 0.
inline Pomdp build_example3() {
    Pomdp m(4, 3, 3);
    m.beta(0, 0) = 1.0;
    m.beta(1, 1) = 1.0;
    m.beta(2, 1) = 1.0;
    m.beta(3, 2) = 1.0;
    for (std::size_t a = 0; a < 3; ++a) {
        m.transition(0, a, 1) = 0.5;
        m.transition(0, a, 2) = 0.5;
        m.transition(3, a, 0) = 1.0;
    }
    for (std::size_t w : {1, 2}) {
        m.transition(w, 0, 0) = 1.0;
        m.transition(w, 1, 0) = 1.0;
        m.transition(w, 2, 3) = 1.0;
    }
    m.reward << 0, 0, 0,
                -10, 10, -1,
                10, -10, -1,
                10, 10, 10;
    return m;
}

/// The same system with every world observed directly.
inline Pomdp build_example3_mdp() {
    Pomdp m = build_example3();
    m.n_sensor = 4;
    m.beta = Matrix::Identity(4, 4);
    return m;
}

/// Two worlds, two sensors both emitted with probability 1/2 everywhere. In
/// world 0 action a moves to world a; world 1 moves uniformly at random.
inline Pomdp build_example4() {
    Pomdp m(2, 2, 2);
    m.alpha[0] << 1, 0, 0, 1;
    m.alpha[1].setConstant(0.5);
    m.beta.setConstant(0.5);
    return m;
}

}  // namespace mempol

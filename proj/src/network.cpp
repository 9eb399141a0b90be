#include "dbcd/network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace dbcd {

std::size_t DeviceGraph::degree(std::size_t a) const {
    std::size_t d = 0;
    for (std::size_t b = 0; b < device_count(); ++b) {
        if (cost(a, b) > 0) ++d;
    }
    return d;
}

bool DeviceGraph::connected() const {
    const std::size_t n = device_count();
    if (n == 0) return true;
    std::vector<bool> seen(n, false);
    std::vector<std::size_t> stack{0};
    seen[0] = true;
    std::size_t visited = 1;
    while (!stack.empty()) {
        const std::size_t a = stack.back();
        stack.pop_back();
        for (std::size_t b = 0; b < n; ++b) {
            if (cost(a, b) > 0 && !seen[b]) {
                seen[b] = true;
                ++visited;
                stack.push_back(b);
            }
        }
    }
    return visited == n;
}

void DeviceGraph::validate() const {
    if (cost.rows() != cost.cols()) throw ShapeMismatch("DeviceGraph: cost matrix not square");
    for (std::size_t a = 0; a < device_count(); ++a) {
        if (cost(a, a) != 0) throw ValueOutOfRange("DeviceGraph: nonzero diagonal");
        for (std::size_t b = 0; b < device_count(); ++b) {
            const real c = cost(a, b);
            if (!(c >= 0) || !std::isfinite(c)) {
                throw ValueOutOfRange("DeviceGraph: invalid cost");
            }
            if (c != cost(b, a)) throw ValueOutOfRange("DeviceGraph: asymmetric cost");
        }
    }
}

void AggregationConfig::validate() const {
    if (!(mu >= 0 && mu <= 1)) throw ValueOutOfRange("AggregationConfig: mu must be in [0,1]");
    if (similarity_floor < 0) {
        throw ValueOutOfRange("AggregationConfig: similarity_floor must be >= 0");
    }
    if (staleness < 0) throw ValueOutOfRange("AggregationConfig: staleness must be >= 0");
}

DeviceGraph build_random_graph(std::size_t devices, std::size_t max_degree, real cost_lo,
                               real cost_hi, SeededRng& rng) {
    if (devices < 2) throw ValueOutOfRange("build_random_graph: need at least 2 devices");
    if (max_degree < 1) throw ValueOutOfRange("build_random_graph: max_degree must be >= 1");
    if (!(cost_lo > 0) || cost_hi < cost_lo) {
        throw ValueOutOfRange("build_random_graph: cost range must satisfy 0 < lo <= hi");
    }

    DeviceGraph g;
    g.cost = Matrix(devices, devices);
    std::vector<std::size_t> degree(devices, 0);

    const auto add_edge = [&](std::size_t a, std::size_t b) {
        const real c = static_cast<real>(rng.uniform(cost_lo, cost_hi));
        g.cost(a, b) = c;
        g.cost(b, a) = c;
        ++degree[a];
        ++degree[b];
    };

    // Spanning tree over a random node order; each new node attaches to a
    // uniformly chosen earlier node with spare degree.
    const auto order = rng.permutation(devices);
    for (std::size_t i = 1; i < devices; ++i) {
        std::vector<std::size_t> candidates;
        for (std::size_t j = 0; j < i; ++j) {
            if (degree[order[j]] < max_degree) candidates.push_back(order[j]);
        }
        if (candidates.empty()) {
            throw InfeasibleDegree("build_random_graph: max_degree " +
                                   std::to_string(max_degree) + " cannot connect " +
                                   std::to_string(devices) + " devices");
        }
        add_edge(order[i], candidates[rng.next_below(candidates.size())]);
    }

    // Extra edges up to roughly half the degree budget.
    const std::size_t attempts = devices * std::max<std::size_t>(1, max_degree / 2);
    for (std::size_t t = 0; t < attempts; ++t) {
        const std::size_t a = rng.next_below(devices);
        const std::size_t b = rng.next_below(devices);
        if (a == b || g.cost(a, b) > 0) continue;
        if (degree[a] >= max_degree || degree[b] >= max_degree) continue;
        add_edge(a, b);
    }
    return g;
}

NeighborSet select_neighbors(const DeviceGraph& graph, std::size_t device, std::size_t m) {
    if (device >= graph.device_count()) {
        throw ValueOutOfRange("select_neighbors: device id out of range");
    }
    NeighborSet set;
    set.owner = device;
    set.m = m;
    std::vector<std::pair<real, std::size_t>> peers;
    for (std::size_t b = 0; b < graph.device_count(); ++b) {
        const real c = graph.cost(device, b);
        if (b != device && c > 0) peers.emplace_back(c, b);
    }
    std::sort(peers.begin(), peers.end());
    const std::size_t take = std::min(m, peers.size());
    set.members.reserve(take);
    for (std::size_t i = 0; i < take; ++i) set.members.push_back(peers[i].second);
    return set;
}

real similarity(const UserProfile& a, const UserProfile& b) {
    if (a.e.size() != b.e.size()) throw ShapeMismatch("similarity: profile dimension mismatch");
    real dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.e.size(); ++i) {
        dot += a.e[i] * b.e[i];
        na += a.e[i] * a.e[i];
        nb += b.e[i] * b.e[i];
    }
    if (na == 0 || nb == 0) throw ZeroNormProfile("similarity: zero-norm profile");
    const real h = dot / (std::sqrt(na) * std::sqrt(nb));
    return std::clamp(h, real(-1), real(1));
}

MlpParams aggregate(const MlpParams& theta, const std::vector<const MlpParams*>& neighbor_params,
                    const std::vector<real>& similarities, const AggregationConfig& cfg) {
    cfg.validate();
    if (neighbor_params.size() != similarities.size()) {
        throw ShapeMismatch("aggregate: neighbor/similarity count mismatch");
    }
    if (cfg.mode == AggregationMode::Off || cfg.mu == 0 || neighbor_params.empty()) {
        return theta;
    }
    for (const auto* nb : neighbor_params) {
        if (!nb->same_shape(theta)) throw ShapeMismatch("aggregate: neighbor shape mismatch");
    }

    std::vector<real> h(similarities.size());
    real mass = 0;
    for (std::size_t i = 0; i < h.size(); ++i) {
        h[i] = (cfg.mode == AggregationMode::MeanAggregation)
                   ? real(1)
                   : std::max(cfg.similarity_floor, similarities[i]);
        h[i] = std::max(h[i], real(0));
        mass += h[i];
    }
    if (mass <= 0) {
        warn("aggregate: zero similarity mass, keeping own parameters");
        return theta;
    }

    MlpParams out = theta;
    for (std::size_t li = 0; li < out.weights.size(); ++li) {
        Matrix& w = out.weights[li];
        scale(w, 1 - cfg.mu);
        for (std::size_t i = 0; i < neighbor_params.size(); ++i) {
            if (h[i] == 0) continue;
            add_scaled(w, cfg.mu * h[i] / mass, neighbor_params[i]->weights[li]);
        }
    }
    return out;
}

DeviceGraph load_cost_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("load_cost_csv: cannot open " + path);
    std::vector<std::vector<real>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<real> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(static_cast<real>(std::stod(cell)));
        rows.push_back(std::move(row));
    }
    DeviceGraph g;
    g.cost = Matrix(rows.size(), rows.empty() ? 0 : rows[0].size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != g.cost.cols()) throw ShapeMismatch("load_cost_csv: ragged rows");
        for (std::size_t j = 0; j < rows[i].size(); ++j) g.cost(i, j) = rows[i][j];
    }
    g.validate();
    return g;
}

void save_cost_csv(const DeviceGraph& graph, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("save_cost_csv: cannot open " + path);
    out.precision(17);
    for (std::size_t i = 0; i < graph.cost.rows(); ++i) {
        for (std::size_t j = 0; j < graph.cost.cols(); ++j) {
            if (j) out << ',';
            out << graph.cost(i, j);
        }
        out << '\n';
    }
}

std::vector<UserProfile> load_profiles_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("load_profiles_csv: cannot open " + path);
    std::vector<UserProfile> profiles;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::getline(ss, cell, ','); // device id column; row order defines ids
        UserProfile p;
        while (std::getline(ss, cell, ',')) p.e.push_back(static_cast<real>(std::stod(cell)));
        profiles.push_back(std::move(p));
    }
    return profiles;
}

void save_profiles_csv(const std::vector<UserProfile>& profiles, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("save_profiles_csv: cannot open " + path);
    out.precision(17);
    for (std::size_t i = 0; i < profiles.size(); ++i) {
        out << i;
        for (real v : profiles[i].e) out << ',' << v;
        out << '\n';
    }
}

} // namespace dbcd

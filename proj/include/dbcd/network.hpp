#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dbcd/model.hpp"
#include "dbcd/rng.hpp"

namespace dbcd {

// Weighted device graph. cost(a, b) > 0 means an edge with that communication
// cost; 0 encodes "no edge" and the diagonal is always 0.
struct DeviceGraph {
    Matrix cost; // A x A, symmetric, nonnegative, zero diagonal

    std::size_t device_count() const { return cost.rows(); }
    std::size_t degree(std::size_t a) const;
    bool connected() const;
    void validate() const;
};

struct NeighborSet {
    std::size_t owner = 0;
    std::vector<std::size_t> members; // sorted by (cost asc, id asc)
    std::size_t m = 0;                // configured neighbor count
};

struct UserProfile {
    std::vector<real> e;
};

enum class AggregationMode { SimilarityWeighted, MeanAggregation, Off };

// Which parameter snapshot a device publishes for its peers to consume next
// round: the end-of-round state (already blended with its own neighbors, the
// in-place reading of the aggregation recurrence and the default) or the raw
// pre-aggregation output of its local step.
enum class SnapshotShare { PostAggregation, Raw };

struct AggregationConfig {
    real mu = real(0.01);
    AggregationMode mode = AggregationMode::SimilarityWeighted;
    real similarity_floor = 0;
    SnapshotShare share = SnapshotShare::PostAggregation;
    // 0 = synchronous rounds (every read sees the previous round). Positive
    // values model asynchronous exchange: each (device, neighbor, round)
    // reads a deterministically chosen snapshot up to this many rounds stale.
    int staleness = 0;

    void validate() const;
};

// Random connected symmetric graph with bounded degree: a bounded-degree
// spanning tree first, then random extra edges while degrees allow. Costs
// are uniform in [cost_lo, cost_hi].
DeviceGraph build_random_graph(std::size_t devices, std::size_t max_degree, real cost_lo,
                               real cost_hi, SeededRng& rng);

// The min(m, available) peers with lowest positive cost; ties break toward
// the lower device id. An empty result means the device trains alone.
NeighborSet select_neighbors(const DeviceGraph& graph, std::size_t device, std::size_t m);

// Cosine similarity of two profiles; both must have nonzero norm.
real similarity(const UserProfile& a, const UserProfile& b);

// theta <- (1-mu) * theta + (mu / sum h) * sum_b h_b * theta_b, with each h
// floored at max(similarity_floor, 0). MeanAggregation substitutes h = 1.
// Empty neighbor lists, mode Off, and zero similarity mass all leave theta
// unchanged (the last with a warning).
MlpParams aggregate(const MlpParams& theta, const std::vector<const MlpParams*>& neighbor_params,
                    const std::vector<real>& similarities, const AggregationConfig& cfg);

// Plain-text interchange: cost matrix as an A x A CSV, profiles as rows of
// device_id,e_1,...,e_k.
DeviceGraph load_cost_csv(const std::string& path);
void save_cost_csv(const DeviceGraph& graph, const std::string& path);
std::vector<UserProfile> load_profiles_csv(const std::string& path);
void save_profiles_csv(const std::vector<UserProfile>& profiles, const std::string& path);

} // namespace dbcd

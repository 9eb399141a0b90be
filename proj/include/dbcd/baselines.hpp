#pragma once

#include <cstdint>
#include <vector>

#include "dbcd/model.hpp"

namespace dbcd {

enum class TrainingMode { CSgd, DSgd, CBcd, IBcd, DBcd };

const char* training_mode_name(TrainingMode mode);

struct SgdConfig {
    real learning_rate = real(0.05);
    std::size_t batch_size = 128;
    int epochs_per_round = 1; // local epochs between aggregation rounds

    void validate() const;
};

// Exact gradient of the mean softmax cross-entropy of forward(params, x)
// w.r.t. each weight matrix; ReLU subgradient at 0 taken as 0. Result is one
// matrix per layer, ordered input to output.
std::vector<Matrix> backprop_grad(const MlpParams& params, const LocalDataset& batch);

// One pass of shuffled minibatches, W <- W - lr * grad. The shuffle consumes
// the passed rng, so equal rng states give identical epochs.
MlpParams sgd_epoch(MlpParams params, const LocalDataset& data, const SgdConfig& cfg,
                    SeededRng& shuffle_rng);

// Column subset of a dataset in the given index order.
LocalDataset dataset_subset(const LocalDataset& data, const std::vector<std::size_t>& indices);

// Union of several datasets (columns concatenated in device order).
LocalDataset pool_datasets(const std::vector<const LocalDataset*>& parts);

} // namespace dbcd

#include "dbcd/baselines.hpp"

#include <string>

namespace dbcd {

const char* training_mode_name(TrainingMode mode) {
    switch (mode) {
        case TrainingMode::CSgd: return "csgd";
        case TrainingMode::DSgd: return "dsgd";
        case TrainingMode::CBcd: return "cbcd";
        case TrainingMode::IBcd: return "ibcd";
        case TrainingMode::DBcd: return "dbcd";
    }
    return "?";
}

void SgdConfig::validate() const {
    if (!(learning_rate > 0)) throw ValueOutOfRange("SgdConfig: learning_rate must be > 0");
    if (batch_size < 1) throw ValueOutOfRange("SgdConfig: batch_size must be >= 1");
    if (epochs_per_round < 1) throw ValueOutOfRange("SgdConfig: epochs_per_round must be >= 1");
}

std::vector<Matrix> backprop_grad(const MlpParams& params, const LocalDataset& batch) {
    params.validate();
    if (batch.n() == 0) throw ShapeMismatch("backprop_grad: empty batch");
    const std::size_t depth = params.depth();
    const std::size_t n = batch.n();

    // Forward, keeping pre-activations for the ReLU masks.
    std::vector<Matrix> pre(depth);     // u_i
    std::vector<Matrix> post(depth - 1); // relu(u_i) for hidden layers
    const Matrix* below = &batch.x;
    for (std::size_t i = 0; i < depth; ++i) {
        pre[i] = matmul(params.weights[i], *below);
        if (i + 1 < depth) {
            post[i] = relu(pre[i]);
            below = &post[i];
        }
    }

    // delta_L = (softmax - onehot) / n
    Matrix delta = softmax_columns(pre[depth - 1]);
    for (std::size_t j = 0; j < n; ++j) {
        const int label = batch.y[j];
        if (label < 0 || static_cast<std::size_t>(label) >= delta.rows()) {
            throw LabelOutOfRange("backprop_grad: label " + std::to_string(label));
        }
        delta(static_cast<std::size_t>(label), j) -= 1;
    }
    scale(delta, real(1) / static_cast<real>(n));

    std::vector<Matrix> grads(depth);
    for (std::size_t i = depth; i-- > 0;) {
        const Matrix& input = (i == 0) ? batch.x : post[i - 1];
        grads[i] = matmul(delta, transpose(input));
        if (i > 0) {
            Matrix back = matmul(transpose(params.weights[i]), delta);
            // ReLU mask: derivative 0 at exactly 0.
            for (std::size_t e = 0; e < back.size(); ++e) {
                if (!(pre[i - 1].data()[e] > 0)) back.data()[e] = 0;
            }
            delta = std::move(back);
        }
    }
    return grads;
}

LocalDataset dataset_subset(const LocalDataset& data, const std::vector<std::size_t>& indices) {
    LocalDataset out;
    out.x = Matrix(data.x.rows(), indices.size());
    out.y.resize(indices.size());
    for (std::size_t c = 0; c < indices.size(); ++c) {
        const std::size_t src = indices[c];
        for (std::size_t r = 0; r < data.x.rows(); ++r) out.x(r, c) = data.x(r, src);
        out.y[c] = data.y[src];
    }
    return out;
}

MlpParams sgd_epoch(MlpParams params, const LocalDataset& data, const SgdConfig& cfg,
                    SeededRng& shuffle_rng) {
    cfg.validate();
    if (data.n() == 0) return params;
    const auto order = shuffle_rng.permutation(data.n());
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
        const std::size_t end = std::min(start + cfg.batch_size, order.size());
        const std::vector<std::size_t> batch_idx(order.begin() + start, order.begin() + end);
        const LocalDataset batch = dataset_subset(data, batch_idx);
        const auto grads = backprop_grad(params, batch);
        for (std::size_t i = 0; i < params.weights.size(); ++i) {
            add_scaled(params.weights[i], -cfg.learning_rate, grads[i]);
        }
    }
    return params;
}

LocalDataset pool_datasets(const std::vector<const LocalDataset*>& parts) {
    std::size_t total = 0;
    std::size_t dim = 0;
    for (const auto* p : parts) {
        total += p->n();
        if (p->n() > 0) dim = p->x.rows();
    }
    LocalDataset out;
    out.x = Matrix(dim, total);
    out.y.reserve(total);
    std::size_t c = 0;
    for (const auto* p : parts) {
        for (std::size_t j = 0; j < p->n(); ++j, ++c) {
            for (std::size_t r = 0; r < dim; ++r) out.x(r, c) = p->x(r, j);
            out.y.push_back(p->y[j]);
        }
    }
    return out;
}

} // namespace dbcd

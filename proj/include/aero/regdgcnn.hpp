#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "aero/autodiff.hpp"
#include "aero/errors.hpp"
#include "aero/knn.hpp"
#include "aero/rng.hpp"
#include "aero/tensor.hpp"

namespace aero {

/// Architecture hyperparameters. Defaults follow the published drag-regression
/// configuration: k = 40 neighbors, EdgeConv widths {256, 512, 512, 1024},
/// 512-d global embedding, FC head {128, 64, 32, 16}.
struct RegDGCNNConfig {
    std::size_t k = 40;
    std::vector<std::size_t> edgeconv_channels{256, 512, 512, 1024};
    std::size_t embedding_dim = 512;
    std::vector<std::size_t> fc_channels{128, 64, 32, 16};
    double dropout_p = 0.5;
    double leaky_slope = 0.2;
    bool use_batch_norm = true;
    bool include_self = false;
    /// true: concatenate all EdgeConv outputs before the embedding projection
    /// (reproduces the ~3.1M parameter budget); false: embed only the last
    /// EdgeConv output.
    bool concat_edgeconvs = true;
    std::size_t input_points = 5000;

    void validate() const {
        if (k < 1) throw Error("config: k must be >= 1");
        if (edgeconv_channels.empty()) throw Error("config: edgeconv_channels empty");
        if (fc_channels.empty()) throw Error("config: fc_channels empty");
        if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw Error("config: dropout_p must be in [0,1)");
        if (!(leaky_slope > 0.0 && leaky_slope < 1.0)) throw Error("config: leaky_slope in (0,1)");
        if (embedding_dim < 1) throw Error("config: embedding_dim must be >= 1");
    }
};

/// One linear stage with optional batch-norm site.
template <typename T>
struct LinearBlock {
    NodePtr<T> weight;  // c_in x c_out
    NodePtr<T> bias;    // c_out
    NodePtr<T> gamma;   // null when the site has no batch norm
    NodePtr<T> beta;
    BatchNormState<T> bn_state;
};

template <typename T>
struct NamedTensorRef {
    std::string name;
    Tensor<T>* tensor;
};

template <typename T>
struct NamedParam {
    std::string name;
    NodePtr<T> node;
};

/// The drag-regression network: stacked EdgeConv layers with per-layer
/// dynamic graph rebuild, a pooled global descriptor, and an FC head ending
/// in a single linear output (normalized-target space).
template <typename T>
struct RegDGCNNModel {
    RegDGCNNConfig config;
    Mode mode = Mode::Training;

    std::vector<LinearBlock<T>> edgeconvs;
    LinearBlock<T> embedding;
    std::vector<LinearBlock<T>> fc;
    NodePtr<T> head_weight;
    NodePtr<T> head_bias;

    /// Trainable parameters in fixed declaration order; names are unique.
    std::vector<NamedParam<T>> parameters() {
        std::vector<NamedParam<T>> out;
        auto block = [&out](const std::string& prefix, LinearBlock<T>& blk) {
            out.push_back({prefix + ".weight", blk.weight});
            out.push_back({prefix + ".bias", blk.bias});
            if (blk.gamma) {
                out.push_back({prefix + ".bn.gamma", blk.gamma});
                out.push_back({prefix + ".bn.beta", blk.beta});
            }
        };
        for (std::size_t i = 0; i < edgeconvs.size(); ++i) {
            block("edgeconv" + std::to_string(i + 1), edgeconvs[i]);
        }
        block("embedding", embedding);
        for (std::size_t i = 0; i < fc.size(); ++i) {
            block("fc" + std::to_string(i + 1), fc[i]);
        }
        out.push_back({"head.weight", head_weight});
        out.push_back({"head.bias", head_bias});
        return out;
    }

    /// Non-trainable state (batch-norm running statistics), for checkpoints.
    std::vector<NamedTensorRef<T>> buffers() {
        std::vector<NamedTensorRef<T>> out;
        auto site = [&out](const std::string& prefix, LinearBlock<T>& blk) {
            if (!blk.gamma) return;
            out.push_back({prefix + ".bn.running_mean", &blk.bn_state.running_mean});
            out.push_back({prefix + ".bn.running_var", &blk.bn_state.running_var});
        };
        for (std::size_t i = 0; i < edgeconvs.size(); ++i) {
            site("edgeconv" + std::to_string(i + 1), edgeconvs[i]);
        }
        site("embedding", embedding);
        return out;
    }

    void zero_grad() {
        for (auto& p : parameters()) p.node->zero_grad();
    }
};

/// Per-slot edge features: slot (i, j) holds [x_i, x_neighbor(i,j) - x_i].
/// The neighbor table itself is treated as a constant; gradients flow through
/// the feature values only.
template <typename T>
NodePtr<T> edge_features(Tape<T>& tape, const NodePtr<T>& x, const NeighborGraph& graph) {
    const auto& xs = x->value.shape;
    if (xs.size() != 2) throw ShapeMismatch("edge_features: X must be rank 2");
    const std::size_t n = xs[0], c = xs[1];
    if (graph.n != n) {
        throw GraphSizeMismatch("edge_features: graph built over " + std::to_string(graph.n) +
                                " rows, features have " + std::to_string(n));
    }
    const std::size_t k = graph.k;

    Tensor<T> out({n, k, 2 * c});
    for (std::size_t i = 0; i < n; ++i) {
        const T* xi = x->value.data.data() + i * c;
        for (std::size_t s = 0; s < k; ++s) {
            const T* xj = x->value.data.data() + graph.at(i, s) * c;
            T* slot = out.data.data() + (i * k + s) * 2 * c;
            for (std::size_t j = 0; j < c; ++j) {
                slot[j] = xi[j];
                slot[c + j] = xj[j] - xi[j];
            }
        }
    }
    NodePtr<T> node = tape.emit(std::move(out), x->requires_grad, "edge_features");
    if (tape.recording() && x->requires_grad) {
        tape.record([x, node, graph, n, c, k] {
            x->ensure_grad();
            for (std::size_t i = 0; i < n; ++i) {
                T* gi = x->grad.data.data() + i * c;
                for (std::size_t s = 0; s < k; ++s) {
                    const T* gslot = node->grad.data.data() + (i * k + s) * 2 * c;
                    T* gj = x->grad.data.data() + graph.at(i, s) * c;
                    for (std::size_t j = 0; j < c; ++j) {
                        gi[j] += gslot[j] - gslot[c + j];
                        gj[j] += gslot[c + j];
                    }
                }
            }
        });
    }
    return node;
}

namespace detail {

/// Builds the kNN graph in the current feature space. The 3-D case (the
/// first, coordinate-space layer) takes the spatial-hash path; feature-space
/// layers use exact brute force.
template <typename T>
NeighborGraph dynamic_graph(const Tensor<T>& features, std::size_t k, bool include_self) {
    const std::size_t n = features.dim(0), d = features.dim(1);
    std::span<const T> data(features.data.data(), features.data.size());
    if (d == 3) return knn_graph_accelerated<T>(data, n, k, include_self);
    return knn_graph<T>(data, n, d, k, include_self);
}

} // namespace detail

/// One EdgeConv stage: dynamic graph rebuild in the current feature space,
/// edge features, shared pointwise MLP (+ batch norm) with LeakyReLU, then
/// max over each neighborhood.
template <typename T>
NodePtr<T> edgeconv_layer(Tape<T>& tape, RegDGCNNModel<T>& model, std::size_t layer,
                          const NodePtr<T>& x) {
    const RegDGCNNConfig& cfg = model.config;
    const std::size_t n = x->value.dim(0);
    if (n <= cfg.k) {
        throw KTooLarge("edgeconv_layer: need n > k (n=" + std::to_string(n) +
                        ", k=" + std::to_string(cfg.k) + ")");
    }
    NeighborGraph graph = detail::dynamic_graph(x->value, cfg.k, cfg.include_self);
    LinearBlock<T>& blk = model.edgeconvs[layer];
    NodePtr<T> h = edge_features(tape, x, graph);
    h = pointwise_linear(tape, h, blk.weight, blk.bias);
    if (blk.gamma) {
        h = batch_norm(tape, h, blk.gamma, blk.beta, blk.bn_state, model.mode);
    }
    h = leaky_relu(tape, h, cfg.leaky_slope);
    return neighborhood_max_pool(tape, h);
}

/// Full forward pass: EdgeConv stack, channel concatenation (or last layer
/// only), embedding projection, global max pooling, FC head with dropout
/// after the first two FC layers, linear output. Returns a 1x1 node holding
/// the predicted drag coefficient in normalized-target space.
template <typename T>
NodePtr<T> forward(Tape<T>& tape, RegDGCNNModel<T>& model, const Tensor<T>& points,
                   std::uint64_t dropout_seed = 0) {
    if (points.ndim() != 2 || points.dim(1) != 3) {
        throw ShapeMismatch("forward: points must be n x 3, got " + shape_string(points.shape));
    }
    const std::size_t n = points.dim(0);
    if (n <= model.config.k) {
        throw TooFewPoints("forward: need more points than k (n=" + std::to_string(n) +
                           ", k=" + std::to_string(model.config.k) + ")");
    }

    NodePtr<T> x = make_leaf(points, false);
    std::vector<NodePtr<T>> edge_outputs;
    edge_outputs.reserve(model.edgeconvs.size());
    for (std::size_t l = 0; l < model.edgeconvs.size(); ++l) {
        x = edgeconv_layer(tape, model, l, x);
        edge_outputs.push_back(x);
    }

    NodePtr<T> h = model.config.concat_edgeconvs ? concat_channels(tape, edge_outputs)
                                                 : edge_outputs.back();
    h = pointwise_linear(tape, h, model.embedding.weight, model.embedding.bias);
    if (model.embedding.gamma) {
        h = batch_norm(tape, h, model.embedding.gamma, model.embedding.beta,
                       model.embedding.bn_state, model.mode);
    }
    h = leaky_relu(tape, h, model.config.leaky_slope);
    h = global_max_pool(tape, h);

    for (std::size_t l = 0; l < model.fc.size(); ++l) {
        h = pointwise_linear(tape, h, model.fc[l].weight, model.fc[l].bias);
        h = leaky_relu(tape, h, model.config.leaky_slope);
        if (l < 2) {
            h = dropout(tape, h, model.config.dropout_p, derive_seed(dropout_seed, {l}),
                        model.mode);
        }
    }
    return pointwise_linear(tape, h, model.head_weight, model.head_bias);
}

/// Inference-only forward; no tape is kept.
template <typename T>
T predict(RegDGCNNModel<T>& model, const Tensor<T>& points) {
    Mode saved = model.mode;
    model.mode = Mode::Inference;
    Tape<T> tape(/*recording=*/false);
    T out;
    try {
        out = forward(tape, model, points)->value.data[0];
    } catch (...) {
        model.mode = saved;
        throw;
    }
    model.mode = saved;
    return out;
}

namespace detail {

/// Glorot-uniform weight matrix: entries uniform in +-sqrt(6/(fan_in+fan_out)),
/// drawn row-major from the shared init stream.
template <typename T>
Tensor<T> glorot_uniform(std::size_t fan_in, std::size_t fan_out, Pcg32& rng) {
    double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Tensor<T> w({fan_in, fan_out});
    for (auto& v : w.data) v = static_cast<T>((2.0 * rng.next_double() - 1.0) * bound);
    return w;
}

template <typename T>
LinearBlock<T> make_block(std::size_t c_in, std::size_t c_out, bool with_bn, Pcg32& rng) {
    LinearBlock<T> blk;
    blk.weight = make_leaf(glorot_uniform<T>(c_in, c_out, rng), true);
    blk.bias = make_leaf(Tensor<T>::zeros({c_out}), true);
    if (with_bn) {
        blk.gamma = make_leaf(Tensor<T>::full({c_out}, T(1)), true);
        blk.beta = make_leaf(Tensor<T>::zeros({c_out}), true);
        blk.bn_state = BatchNormState<T>(c_out);
    }
    return blk;
}

} // namespace detail

/// Builds a model with freshly initialized parameters. Weight matrices are
/// drawn in declaration order from one Pcg32(seed) stream, so identical seeds
/// give identical parameters. Biases start at zero, batch-norm affine terms
/// at (1, 0).
template <typename T>
RegDGCNNModel<T> init_parameters(const RegDGCNNConfig& config, std::uint64_t seed) {
    config.validate();
    RegDGCNNModel<T> model;
    model.config = config;
    Pcg32 rng(seed);

    std::size_t c_in = 3;
    std::size_t concat_width = 0;
    for (std::size_t c_out : config.edgeconv_channels) {
        model.edgeconvs.push_back(
            detail::make_block<T>(2 * c_in, c_out, config.use_batch_norm, rng));
        concat_width += c_out;
        c_in = c_out;
    }

    std::size_t emb_in = config.concat_edgeconvs ? concat_width : config.edgeconv_channels.back();
    model.embedding = detail::make_block<T>(emb_in, config.embedding_dim, config.use_batch_norm, rng);

    std::size_t prev = config.embedding_dim;
    for (std::size_t c_out : config.fc_channels) {
        model.fc.push_back(detail::make_block<T>(prev, c_out, /*with_bn=*/false, rng));
        prev = c_out;
    }

    model.head_weight = make_leaf(detail::glorot_uniform<T>(prev, 1, rng), true);
    model.head_bias = make_leaf(Tensor<T>::zeros({1}), true);
    return model;
}

/// Total trainable parameter elements; a pure function of the configuration.
template <typename T>
std::size_t count_parameters(RegDGCNNModel<T>& model) {
    std::size_t total = 0;
    for (const auto& p : model.parameters()) total += p.node->value.numel();
    return total;
}

} // namespace aero

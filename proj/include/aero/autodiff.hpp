#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "aero/errors.hpp"
#include "aero/rng.hpp"
#include "aero/tensor.hpp"

namespace aero {

enum class Mode { Training, Inference };

/// A value in the computation graph. Leaves (parameters, inputs) persist
/// across tapes; intermediates belong to the tape that produced them.
/// Gradients accumulate additively; leaf gradients survive backward calls
/// until explicitly zeroed.
template <typename T>
struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool requires_grad = false;
    bool intermediate = false;

    void ensure_grad() {
        if (grad.data.size() != value.data.size()) grad = Tensor<T>::zeros(value.shape);
    }
    void zero_grad() {
        if (!grad.data.empty()) std::fill(grad.data.begin(), grad.data.end(), T(0));
    }
};

template <typename T>
using NodePtr = std::shared_ptr<Node<T>>;

template <typename T>
NodePtr<T> make_leaf(Tensor<T> value, bool requires_grad = false) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    return n;
}

/// Ordered record of executed ops. backward() replays the record in exact
/// reverse execution order. With recording disabled the ops run forward-only
/// (inference). check_finite throws NonFinite the moment any op produces a
/// NaN or Inf, because silent divergence is the costliest failure mode.
template <typename T>
class Tape {
public:
    explicit Tape(bool recording = true, bool check_finite = true)
        : recording_(recording), check_finite_(check_finite) {}

    bool recording() const { return recording_; }

    NodePtr<T> emit(Tensor<T> value, bool requires_grad, const char* op_name) {
        if (check_finite_ && !value.all_finite()) {
            throw NonFinite(std::string("non-finite value produced by op '") + op_name + "'");
        }
        auto n = std::make_shared<Node<T>>();
        n->value = std::move(value);
        n->requires_grad = recording_ && requires_grad;
        n->intermediate = true;
        if (recording_) nodes_.push_back(n);
        return n;
    }

    void record(std::function<void()> backward_step) {
        if (recording_) steps_.push_back(std::move(backward_step));
    }

    /// Seeds d(root)/d(root) = 1 and accumulates gradients into every
    /// requires_grad node. Intermediate gradients (including other roots) are
    /// cleared first; leaf gradients are left to accumulate.
    void backward(const NodePtr<T>& root) {
        if (!recording_) throw Error("Tape::backward: tape is not recording");
        if (root->value.numel() != 1) throw ShapeMismatch("Tape::backward: root must be scalar");
        for (auto& n : nodes_) n->zero_grad();
        root->ensure_grad();
        root->grad.data[0] = T(1);
        for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
    }

    std::size_t op_count() const { return steps_.size(); }

private:
    bool recording_;
    bool check_finite_;
    std::vector<std::function<void()>> steps_;
    std::vector<NodePtr<T>> nodes_;
};

namespace detail {

template <typename T>
using EigenMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<EigenMatrix<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const EigenMatrix<T>>;

} // namespace detail

// ---------------------------------------------------------------------------
// Operator set. Each op computes its forward value and, when the tape is
// recording and an input requires gradients, records one backward step that
// accumulates into its inputs.
// ---------------------------------------------------------------------------

/// out = X*W + b applied along the channel (last) axis. X may be rank 2
/// (n x c_in) or rank 3 (n x k x c_in); leading axes are flattened into rows.
template <typename T>
NodePtr<T> pointwise_linear(Tape<T>& tape, const NodePtr<T>& x, const NodePtr<T>& w,
                            const NodePtr<T>& b) {
    const auto& xs = x->value.shape;
    if (xs.size() != 2 && xs.size() != 3) {
        throw ShapeMismatch("pointwise_linear: X must be rank 2 or 3, got " + shape_string(xs));
    }
    const std::size_t c_in = xs.back();
    const std::size_t rows = x->value.numel() / c_in;
    if (w->value.ndim() != 2 || w->value.dim(0) != c_in) {
        throw ShapeMismatch("pointwise_linear: W is " + shape_string(w->value.shape) +
                            ", X channels " + std::to_string(c_in));
    }
    const std::size_t c_out = w->value.dim(1);
    if (b->value.numel() != c_out) {
        throw ShapeMismatch("pointwise_linear: bias length " + std::to_string(b->value.numel()) +
                            " != c_out " + std::to_string(c_out));
    }

    std::vector<std::size_t> out_shape(xs.begin(), xs.end() - 1);
    out_shape.push_back(c_out);
    Tensor<T> out(out_shape);
    {
        detail::ConstMatMap<T> X(x->value.data.data(), static_cast<Eigen::Index>(rows),
                                 static_cast<Eigen::Index>(c_in));
        detail::ConstMatMap<T> W(w->value.data.data(), static_cast<Eigen::Index>(c_in),
                                 static_cast<Eigen::Index>(c_out));
        detail::MatMap<T> O(out.data.data(), static_cast<Eigen::Index>(rows),
                            static_cast<Eigen::Index>(c_out));
        O.noalias() = X * W;
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t j = 0; j < c_out; ++j) out.data[r * c_out + j] += b->value.data[j];
        }
    }

    bool needs = x->requires_grad || w->requires_grad || b->requires_grad;
    NodePtr<T> node = tape.emit(std::move(out), needs, "pointwise_linear");
    if (tape.recording() && needs) {
        tape.record([x, w, b, node, rows, c_in, c_out] {
            detail::ConstMatMap<T> G(node->grad.data.data(), static_cast<Eigen::Index>(rows),
                                     static_cast<Eigen::Index>(c_out));
            if (x->requires_grad) {
                x->ensure_grad();
                detail::ConstMatMap<T> W(w->value.data.data(), static_cast<Eigen::Index>(c_in),
                                         static_cast<Eigen::Index>(c_out));
                detail::MatMap<T> GX(x->grad.data.data(), static_cast<Eigen::Index>(rows),
                                     static_cast<Eigen::Index>(c_in));
                GX.noalias() += G * W.transpose();
            }
            if (w->requires_grad) {
                w->ensure_grad();
                detail::ConstMatMap<T> X(x->value.data.data(), static_cast<Eigen::Index>(rows),
                                         static_cast<Eigen::Index>(c_in));
                detail::MatMap<T> GW(w->grad.data.data(), static_cast<Eigen::Index>(c_in),
                                     static_cast<Eigen::Index>(c_out));
                GW.noalias() += X.transpose() * G;
            }
            if (b->requires_grad) {
                b->ensure_grad();
                for (std::size_t r = 0; r < rows; ++r) {
                    for (std::size_t j = 0; j < c_out; ++j) {
                        b->grad.data[j] += node->grad.data[r * c_out + j];
                    }
                }
            }
        });
    }
    return node;
}

/// x >= 0 -> x, x < 0 -> slope*x. The subgradient at exactly 0 is the
/// negative-side slope (documented convention).
template <typename T>
NodePtr<T> leaky_relu(Tape<T>& tape, const NodePtr<T>& x, double slope) {
    if (!(slope > 0.0 && slope < 1.0)) throw Error("leaky_relu: slope must be in (0,1)");
    Tensor<T> out(x->value.shape);
    const T s = static_cast<T>(slope);
    for (std::size_t i = 0; i < x->value.numel(); ++i) {
        T v = x->value.data[i];
        out.data[i] = v >= T(0) ? v : s * v;
    }
    NodePtr<T> node = tape.emit(std::move(out), x->requires_grad, "leaky_relu");
    if (tape.recording() && x->requires_grad) {
        tape.record([x, node, s] {
            x->ensure_grad();
            for (std::size_t i = 0; i < x->value.numel(); ++i) {
                T v = x->value.data[i];
                x->grad.data[i] += node->grad.data[i] * (v > T(0) ? T(1) : s);
            }
        });
    }
    return node;
}

/// Persistent batch-norm statistics for one normalization site.
template <typename T>
struct BatchNormState {
    Tensor<T> running_mean;
    Tensor<T> running_var;

    explicit BatchNormState(std::size_t channels = 0) {
        if (channels) {
            running_mean = Tensor<T>::zeros({channels});
            running_var = Tensor<T>::full({channels}, T(1));
        }
    }
};

/// Per-channel batch normalization over every non-channel element. The
/// channel axis is the last one for rank-2 (rows x c) and rank-3
/// channels-last (n x k x c) inputs; rank-3 inputs may instead put channels
/// in the middle (batch x c x n) via channels_last=false. Training mode
/// normalizes with biased batch statistics and folds them into the running
/// estimates (momentum weighting the fresh value, unbiased variance, the
/// torch convention); inference mode normalizes with the running estimates.
template <typename T>
NodePtr<T> batch_norm(Tape<T>& tape, const NodePtr<T>& x, const NodePtr<T>& gamma,
                      const NodePtr<T>& beta, BatchNormState<T>& state, Mode mode,
                      double momentum = 0.1, double eps = 1e-5, bool channels_last = true) {
    const auto& xs = x->value.shape;
    if (xs.size() != 2 && xs.size() != 3) {
        throw ShapeMismatch("batch_norm: X must be rank 2 or 3, got " + shape_string(xs));
    }
    const std::size_t c = channels_last ? xs.back() : xs[1];
    if (gamma->value.numel() != c || beta->value.numel() != c || state.running_mean.numel() != c ||
        state.running_var.numel() != c) {
        throw ShapeMismatch("batch_norm: parameter length != channel count " + std::to_string(c));
    }
    const std::size_t total = x->value.numel();
    const std::size_t count = total / c;  // elements per channel
    if (mode == Mode::Training && count == 1) {
        throw BatchTooSmall("batch_norm: cannot compute batch statistics from a single element");
    }

    // index helper: element e of channel j; captures by value so the backward
    // closure can hold a copy safely
    const std::size_t inner = channels_last ? 1 : xs[2];
    auto flat_index = [c, inner, channels_last](std::size_t j, std::size_t e) -> std::size_t {
        if (channels_last) return e * c + j;
        std::size_t b_idx = e / inner, n_idx = e % inner;
        return (b_idx * c + j) * inner + n_idx;
    };

    std::vector<double> mean(c), inv_std(c);
    if (mode == Mode::Training) {
        for (std::size_t j = 0; j < c; ++j) {
            double m = 0.0;
            for (std::size_t e = 0; e < count; ++e) m += static_cast<double>(x->value.data[flat_index(j, e)]);
            m /= static_cast<double>(count);
            double var = 0.0;
            for (std::size_t e = 0; e < count; ++e) {
                double d = static_cast<double>(x->value.data[flat_index(j, e)]) - m;
                var += d * d;
            }
            var /= static_cast<double>(count);
            mean[j] = m;
            inv_std[j] = 1.0 / std::sqrt(var + eps);
            double unbiased = var * static_cast<double>(count) / static_cast<double>(count - 1);
            state.running_mean.data[j] = static_cast<T>(
                (1.0 - momentum) * static_cast<double>(state.running_mean.data[j]) + momentum * m);
            state.running_var.data[j] = static_cast<T>(
                (1.0 - momentum) * static_cast<double>(state.running_var.data[j]) + momentum * unbiased);
        }
    } else {
        for (std::size_t j = 0; j < c; ++j) {
            mean[j] = static_cast<double>(state.running_mean.data[j]);
            inv_std[j] = 1.0 / std::sqrt(static_cast<double>(state.running_var.data[j]) + eps);
        }
    }

    Tensor<T> out(xs);
    for (std::size_t j = 0; j < c; ++j) {
        double g = static_cast<double>(gamma->value.data[j]);
        double bta = static_cast<double>(beta->value.data[j]);
        for (std::size_t e = 0; e < count; ++e) {
            std::size_t idx = flat_index(j, e);
            double xhat = (static_cast<double>(x->value.data[idx]) - mean[j]) * inv_std[j];
            out.data[idx] = static_cast<T>(xhat * g + bta);
        }
    }

    bool needs = x->requires_grad || gamma->requires_grad || beta->requires_grad;
    NodePtr<T> node = tape.emit(std::move(out), needs, "batch_norm");
    if (tape.recording() && needs) {
        bool training = mode == Mode::Training;
        tape.record([x, gamma, beta, node, mean, inv_std, c, count, flat_index, training] {
            for (std::size_t j = 0; j < c; ++j) {
                double sum_dy = 0.0, sum_dy_xhat = 0.0;
                for (std::size_t e = 0; e < count; ++e) {
                    std::size_t idx = flat_index(j, e);
                    double dy = static_cast<double>(node->grad.data[idx]);
                    double xhat = (static_cast<double>(x->value.data[idx]) - mean[j]) * inv_std[j];
                    sum_dy += dy;
                    sum_dy_xhat += dy * xhat;
                }
                if (gamma->requires_grad) {
                    gamma->ensure_grad();
                    gamma->grad.data[j] += static_cast<T>(sum_dy_xhat);
                }
                if (beta->requires_grad) {
                    beta->ensure_grad();
                    beta->grad.data[j] += static_cast<T>(sum_dy);
                }
                if (x->requires_grad) {
                    x->ensure_grad();
                    double g = static_cast<double>(gamma->value.data[j]);
                    double n_inv = 1.0 / static_cast<double>(count);
                    for (std::size_t e = 0; e < count; ++e) {
                        std::size_t idx = flat_index(j, e);
                        double dy = static_cast<double>(node->grad.data[idx]);
                        double dx;
                        if (training) {
                            double xhat =
                                (static_cast<double>(x->value.data[idx]) - mean[j]) * inv_std[j];
                            dx = g * inv_std[j] * (dy - n_inv * sum_dy - xhat * n_inv * sum_dy_xhat);
                        } else {
                            dx = g * inv_std[j] * dy;
                        }
                        x->grad.data[idx] += static_cast<T>(dx);
                    }
                }
            }
        });
    }
    return node;
}

/// Max over the neighbor axis: (n x k x c) -> (n x c). Gradient routes to the
/// first occurrence of the maximum on ties.
template <typename T>
NodePtr<T> neighborhood_max_pool(Tape<T>& tape, const NodePtr<T>& h) {
    const auto& hs = h->value.shape;
    if (hs.size() != 3) throw ShapeMismatch("neighborhood_max_pool: expected rank 3, got " + shape_string(hs));
    const std::size_t n = hs[0], k = hs[1], c = hs[2];
    if (k < 1) throw ShapeMismatch("neighborhood_max_pool: k must be >= 1");

    Tensor<T> out({n, c});
    std::vector<std::uint32_t> argmax(n * c, 0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            T best = h->value.data[(i * k + 0) * c + j];
            std::uint32_t best_slot = 0;
            for (std::size_t s = 1; s < k; ++s) {
                T v = h->value.data[(i * k + s) * c + j];
                if (v > best) {
                    best = v;
                    best_slot = static_cast<std::uint32_t>(s);
                }
            }
            out.data[i * c + j] = best;
            argmax[i * c + j] = best_slot;
        }
    }
    NodePtr<T> node = tape.emit(std::move(out), h->requires_grad, "neighborhood_max_pool");
    if (tape.recording() && h->requires_grad) {
        tape.record([h, node, argmax = std::move(argmax), n, k, c] {
            h->ensure_grad();
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < c; ++j) {
                    std::uint32_t s = argmax[i * c + j];
                    h->grad.data[(i * k + s) * c + j] += node->grad.data[i * c + j];
                }
            }
        });
    }
    return node;
}

/// Per-channel max over all points: (n x c) -> (1 x c). First occurrence wins
/// on ties.
template <typename T>
NodePtr<T> global_max_pool(Tape<T>& tape, const NodePtr<T>& x) {
    const auto& xs = x->value.shape;
    if (xs.size() != 2) throw ShapeMismatch("global_max_pool: expected rank 2, got " + shape_string(xs));
    const std::size_t n = xs[0], c = xs[1];
    if (n < 1) throw ShapeMismatch("global_max_pool: need n >= 1");

    Tensor<T> out({1, c});
    std::vector<std::uint32_t> argmax(c, 0);
    for (std::size_t j = 0; j < c; ++j) {
        T best = x->value.data[j];
        std::uint32_t best_row = 0;
        for (std::size_t i = 1; i < n; ++i) {
            T v = x->value.data[i * c + j];
            if (v > best) {
                best = v;
                best_row = static_cast<std::uint32_t>(i);
            }
        }
        out.data[j] = best;
        argmax[j] = best_row;
    }
    NodePtr<T> node = tape.emit(std::move(out), x->requires_grad, "global_max_pool");
    if (tape.recording() && x->requires_grad) {
        tape.record([x, node, argmax = std::move(argmax), c] {
            x->ensure_grad();
            for (std::size_t j = 0; j < c; ++j) {
                x->grad.data[argmax[j] * c + j] += node->grad.data[j];
            }
        });
    }
    return node;
}

/// Inverted dropout: training zeroes each element with probability p and
/// scales survivors by 1/(1-p); inference (or p == 0) is the identity. The
/// mask consumes one uniform double per element in flat index order from
/// Pcg32(seed).
template <typename T>
NodePtr<T> dropout(Tape<T>& tape, const NodePtr<T>& x, double p, std::uint64_t seed, Mode mode) {
    if (!(p >= 0.0 && p < 1.0)) throw Error("dropout: p must be in [0,1)");
    if (mode == Mode::Inference || p == 0.0) return x;

    const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
    Pcg32 rng(seed);
    std::vector<std::uint8_t> mask(x->value.numel());
    Tensor<T> out(x->value.shape);
    for (std::size_t i = 0; i < x->value.numel(); ++i) {
        bool keep = rng.next_double() >= p;
        mask[i] = keep ? 1 : 0;
        out.data[i] = keep ? x->value.data[i] * keep_scale : T(0);
    }
    NodePtr<T> node = tape.emit(std::move(out), x->requires_grad, "dropout");
    if (tape.recording() && x->requires_grad) {
        tape.record([x, node, mask = std::move(mask), keep_scale] {
            x->ensure_grad();
            for (std::size_t i = 0; i < x->value.numel(); ++i) {
                if (mask[i]) x->grad.data[i] += node->grad.data[i] * keep_scale;
            }
        });
    }
    return node;
}

/// Concatenates along the channel axis in argument order; backward splits.
template <typename T>
NodePtr<T> concat_channels(Tape<T>& tape, const std::vector<NodePtr<T>>& xs) {
    if (xs.empty()) throw ShapeMismatch("concat_channels: no inputs");
    if (xs.size() == 1) return xs[0];
    const std::size_t n = xs[0]->value.dim(0);
    std::size_t c_total = 0;
    bool needs = false;
    for (const auto& x : xs) {
        if (x->value.ndim() != 2 || x->value.dim(0) != n) {
            throw ShapeMismatch("concat_channels: inputs must be rank 2 with matching rows");
        }
        c_total += x->value.dim(1);
        needs = needs || x->requires_grad;
    }
    Tensor<T> out({n, c_total});
    std::size_t offset = 0;
    for (const auto& x : xs) {
        const std::size_t c = x->value.dim(1);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < c; ++j) {
                out.data[i * c_total + offset + j] = x->value.data[i * c + j];
            }
        }
        offset += c;
    }
    NodePtr<T> node = tape.emit(std::move(out), needs, "concat_channels");
    if (tape.recording() && needs) {
        tape.record([xs, node, n, c_total] {
            std::size_t offset = 0;
            for (const auto& x : xs) {
                const std::size_t c = x->value.dim(1);
                if (x->requires_grad) {
                    x->ensure_grad();
                    for (std::size_t i = 0; i < n; ++i) {
                        for (std::size_t j = 0; j < c; ++j) {
                            x->grad.data[i * c + j] += node->grad.data[i * c_total + offset + j];
                        }
                    }
                }
                offset += c;
            }
        });
    }
    return node;
}

/// Mean squared error against a constant target: (1/m) sum (pred - target)^2.
template <typename T>
NodePtr<T> mse_loss(Tape<T>& tape, const NodePtr<T>& pred, const Tensor<T>& target) {
    const std::size_t m = pred->value.numel();
    if (m == 0 || target.numel() != m) {
        throw ShapeMismatch("mse_loss: prediction and target lengths differ");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        double d = static_cast<double>(pred->value.data[i]) - static_cast<double>(target.data[i]);
        acc += d * d;
    }
    Tensor<T> out({1});
    out.data[0] = static_cast<T>(acc / static_cast<double>(m));
    NodePtr<T> node = tape.emit(std::move(out), pred->requires_grad, "mse_loss");
    if (tape.recording() && pred->requires_grad) {
        tape.record([pred, node, target, m] {
            pred->ensure_grad();
            const T g = node->grad.data[0];
            const T scale = static_cast<T>(2.0 / static_cast<double>(m));
            for (std::size_t i = 0; i < m; ++i) {
                pred->grad.data[i] += g * scale * (pred->value.data[i] - target.data[i]);
            }
        });
    }
    return node;
}

} // namespace aero

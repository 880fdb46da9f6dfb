#pragma once

#include <guard/graph.hpp>

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace guard {

enum class Optimizer { GradientDescent, Adam };
enum class FeatureTransform { Auto, RowL1, None };

inline std::string to_string(Optimizer o) {
    return o == Optimizer::Adam ? "adam" : "gd";
}
inline std::string to_string(FeatureTransform t) {
    switch (t) {
        case FeatureTransform::RowL1: return "row_l1";
        case FeatureTransform::None: return "none";
        default: return "auto";
    }
}
inline Optimizer parse_optimizer(const std::string& s) {
    if (s == "gd") return Optimizer::GradientDescent;
    if (s == "adam") return Optimizer::Adam;
    throw ConfigError("unknown optimizer '" + s + "' (expected gd or adam)");
}
inline FeatureTransform parse_feature_transform(const std::string& s) {
    if (s == "auto") return FeatureTransform::Auto;
    if (s == "row_l1") return FeatureTransform::RowL1;
    if (s == "none") return FeatureTransform::None;
    throw ConfigError("unknown feature transform '" + s + "'");
}

struct TrainingConfig {
    double learning_rate = 0.01;
    int epochs = 200;
    double weight_decay = 5e-4;
    int hidden = 16;  // width of the convolution's hidden layer
    int hops = 2;     // propagation depth of the linear model
    Optimizer optimizer = Optimizer::GradientDescent;
    FeatureTransform feature_transform = FeatureTransform::Auto;
    std::uint64_t seed = 0;

    void validate() const {
        if (learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
        if (epochs < 0) throw ConfigError("epochs must be nonnegative");
        if (weight_decay < 0.0) throw ConfigError("weight_decay must be nonnegative");
        if (hidden < 1) throw ConfigError("hidden width must be at least 1");
        if (hops < 0) throw ConfigError("hops must be nonnegative");
    }
};

/// True when every entry is exactly 0 or 1.
inline bool is_binary(const Matrix& x) {
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index j = 0; j < x.cols(); ++j)
            if (x(i, j) != 0.0 && x(i, j) != 1.0) return false;
    return true;
}

/// Applies the configured feature preprocessing. Auto row-normalizes
/// binary matrices to unit L1 mass and leaves anything else untouched;
/// all-zero rows stay zero.
inline Matrix transform_features(const Matrix& x, FeatureTransform t) {
    const bool normalize =
        t == FeatureTransform::RowL1 || (t == FeatureTransform::Auto && is_binary(x));
    if (!normalize) return x;
    Matrix out = x;
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        const double mass = out.row(i).cwiseAbs().sum();
        if (mass > 0.0) out.row(i) /= mass;
    }
    return out;
}

/// Repeated smoothing: Â^hops · x. hops = 0 returns x unchanged.
inline Matrix propagate(const NormalizedOperator& op, Matrix x, int hops) {
    if (hops < 0) throw PreconditionError("hops must be nonnegative");
    for (int h = 0; h < hops; ++h) x = op.apply(x);
    return x;
}

/// Row-wise softmax computed through the shifted exponential, so extreme
/// logits cannot overflow.
inline Matrix row_softmax(Matrix logits) {
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const double m = logits.row(i).maxCoeff();
        Eigen::ArrayXd e = (logits.row(i).array() - m).exp();
        logits.row(i) = (e / e.sum()).matrix();
    }
    return logits;
}

struct Prediction {
    Matrix logits;          // N × C, pre-softmax
    Matrix probabilities;   // N × C, rows sum to 1
    std::vector<int> predicted;  // argmax per row, first max on ties
};

inline Prediction prediction_from_logits(Matrix logits) {
    Prediction p;
    p.probabilities = row_softmax(logits);
    p.logits = std::move(logits);
    p.predicted.resize(static_cast<std::size_t>(p.logits.rows()));
    for (Eigen::Index i = 0; i < p.logits.rows(); ++i) {
        Eigen::Index c = 0;
        p.logits.row(i).maxCoeff(&c);
        p.predicted[static_cast<std::size_t>(i)] = static_cast<int>(c);
    }
    return p;
}

/// Fraction of `nodes` whose argmax prediction matches the label.
/// Empty node sets and unlabeled members are errors.
inline double accuracy(const Prediction& pred, const SparseGraph& g,
                       std::span<const NodeId> nodes) {
    if (nodes.empty()) throw PreconditionError("accuracy over an empty node set is undefined");
    std::int64_t hits = 0;
    for (NodeId u : nodes) {
        const int y = g.label(u);
        if (y == kUnlabeled)
            throw PreconditionError("accuracy requires labeled nodes; node " +
                                    std::to_string(u) + " has no label");
        hits += pred.predicted[static_cast<std::size_t>(u)] == y ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(nodes.size());
}

struct TrainingHistory {
    std::vector<double> train_loss;
    std::vector<double> validation_accuracy;
};

/// Propagation-then-linear classifier: probabilities are
/// softmax(Â^hops X_t W) with X_t the transformed features. `collapsed`
/// caches X_t W for the training features, the attack and defense modules
/// read it as the per-node class weight table.
struct LinearSurrogate {
    Matrix weight;     // F × C
    Matrix collapsed;  // N × C = X_t · weight
    int hops = 2;
    TrainingConfig config;
    double best_validation_accuracy = 0.0;
    int best_epoch = -1;
    TrainingHistory history;
    std::vector<std::string> warnings;
    std::shared_ptr<const Matrix> trained_features;  // raw feature buffer identity

    /// Collapsed table for an arbitrary graph: the cached product when the
    /// feature buffer is the training one, otherwise recomputed.
    Matrix collapsed_for(const SparseGraph& g) const {
        if (trained_features && g.features_ptr().get() == trained_features.get())
            return collapsed;
        return transform_features(g.features(), config.feature_transform) * weight;
    }
};

/// Two-layer graph convolution: softmax(Â relu(Â X_t W0) W1).
struct GcnVictim {
    Matrix w0;  // F × hidden
    Matrix w1;  // hidden × C
    TrainingConfig config;
    double best_validation_accuracy = 0.0;
    int best_epoch = -1;
    TrainingHistory history;
    std::vector<std::string> warnings;
    std::shared_ptr<const Matrix> trained_features;
};

namespace detail {

inline Matrix glorot_uniform(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Matrix w(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) w(i, j) = dist(rng);
    return w;
}

inline Matrix gather_rows(const Matrix& x, std::span<const NodeId> rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
    for (std::size_t i = 0; i < rows.size(); ++i)
        out.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);
    return out;
}

/// Mean cross-entropy of `logits` rows against `labels[nodes]`, plus its
/// gradient w.r.t. the logits. Uses the log-sum-exp form for stability.
inline double softmax_cross_entropy(const Matrix& logits, const std::vector<int>& labels,
                                    std::span<const NodeId> nodes, Matrix& dlogits) {
    const auto t = static_cast<double>(nodes.size());
    double loss = 0.0;
    dlogits.resize(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const int y = labels[static_cast<std::size_t>(nodes[static_cast<std::size_t>(i)])];
        const double m = logits.row(i).maxCoeff();
        Eigen::ArrayXd e = (logits.row(i).array() - m).exp();
        const double z = e.sum();
        loss += std::log(z) + m - logits(i, y);
        dlogits.row(i) = (e / z).matrix();
        dlogits(i, y) -= 1.0;
    }
    dlogits /= t;
    return loss / t;
}

inline void check_trainable(const SparseGraph& g, const SplitSet& splits,
                            std::vector<std::string>& warnings) {
    if (splits.train.empty()) throw PreconditionError("training requires a non-empty train split");
    if (g.num_classes() < 1) throw PreconditionError("training requires labeled nodes");
    for (NodeId u : splits.train)
        if (g.label(u) == kUnlabeled)
            throw PreconditionError("train split contains unlabeled node " + std::to_string(u));
    int first = g.label(splits.train.front());
    bool single = true;
    for (NodeId u : splits.train)
        if (g.label(u) != first) { single = false; break; }
    if (single) warnings.push_back("train split holds a single class; the model will be degenerate");
    if (splits.valid.empty())
        warnings.push_back("empty validation split; keeping the final epoch's weights");
}

/// First-moment/second-moment stepper covering both optimizers; plain
/// gradient descent is the moment-free special case.
class AdamState {
public:
    AdamState(Eigen::Index rows, Eigen::Index cols)
        : m_(Matrix::Zero(rows, cols)), v_(Matrix::Zero(rows, cols)) {}

    void step(Matrix& w, const Matrix& grad, const TrainingConfig& cfg) {
        if (cfg.optimizer == Optimizer::GradientDescent) {
            w -= cfg.learning_rate * grad;
            return;
        }
        ++t_;
        m_ = kBeta1 * m_ + (1.0 - kBeta1) * grad;
        v_ = kBeta2 * v_ + (1.0 - kBeta2) * grad.cwiseProduct(grad);
        const double c1 = 1.0 - std::pow(kBeta1, t_);
        const double c2 = 1.0 - std::pow(kBeta2, t_);
        w.array() -= cfg.learning_rate * (m_.array() / c1) /
                     ((v_.array() / c2).sqrt() + kEpsilon);
    }

private:
    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEpsilon = 1e-8;
    Matrix m_, v_;
    int t_ = 0;
};

inline int argmax_hits(const Matrix& logits, const std::vector<int>& labels,
                       std::span<const NodeId> nodes) {
    int hits = 0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        Eigen::Index c = 0;
        logits.row(i).maxCoeff(&c);
        if (static_cast<int>(c) == labels[static_cast<std::size_t>(nodes[static_cast<std::size_t>(i)])])
            ++hits;
    }
    return hits;
}

}  // namespace detail

/// Loss and weight gradient of the linear model given the propagated
/// features S = Â^hops X_t: mean cross-entropy on `train` plus
/// 0.5 * weight_decay * ||W||_F^2.
struct LinearLossGrad {
    double loss = 0.0;
    Matrix grad;  // F × C
};

inline LinearLossGrad linear_loss_gradient(const Matrix& propagated, const Matrix& weight,
                                           const std::vector<int>& labels,
                                           std::span<const NodeId> train, double weight_decay) {
    const Matrix s_train = detail::gather_rows(propagated, train);
    const Matrix logits = s_train * weight;
    Matrix dlogits;
    LinearLossGrad out;
    out.loss = detail::softmax_cross_entropy(logits, labels, train, dlogits);
    out.loss += 0.5 * weight_decay * weight.squaredNorm();
    out.grad = s_train.transpose() * dlogits + weight_decay * weight;
    return out;
}

/// Loss and weight gradients of the two-layer convolution. `ax` is the
/// precomputed product Â X_t (training-time association).
struct GcnLossGrads {
    double loss = 0.0;
    Matrix grad_w0;
    Matrix grad_w1;
};

inline GcnLossGrads gcn_loss_gradients(const NormalizedOperator& op, const Matrix& ax,
                                       const Matrix& w0, const Matrix& w1,
                                       const std::vector<int>& labels,
                                       std::span<const NodeId> train, double weight_decay,
                                       Matrix* logits_out = nullptr) {
    const Matrix h1pre = ax * w0;
    const Matrix h1 = h1pre.cwiseMax(0.0);
    const Matrix logits = op.apply(h1) * w1;

    Matrix dlogits_train;
    GcnLossGrads out;
    {
        const Matrix logits_train = detail::gather_rows(logits, train);
        out.loss = detail::softmax_cross_entropy(logits_train, labels, train, dlogits_train);
    }
    out.loss += 0.5 * weight_decay * (w0.squaredNorm() + w1.squaredNorm());

    Matrix dlogits = Matrix::Zero(logits.rows(), logits.cols());
    for (std::size_t i = 0; i < train.size(); ++i)
        dlogits.row(train[i]) = dlogits_train.row(static_cast<Eigen::Index>(i));

    // Â is symmetric, so Âᵀ dlogits = Â dlogits.
    const Matrix a_dlogits = op.apply(dlogits);
    out.grad_w1 = h1.transpose() * a_dlogits + weight_decay * w1;
    Matrix dh1 = a_dlogits * w1.transpose();
    dh1 = (h1pre.array() > 0.0).select(dh1, 0.0);
    out.grad_w0 = ax.transpose() * dh1 + weight_decay * w0;
    if (logits_out) *logits_out = logits;
    return out;
}

/// Trains the propagation-then-linear classifier with full-batch steps and
/// validation-based model selection (highest accuracy, earliest epoch on
/// ties; final weights when the validation split is empty).
inline LinearSurrogate train_linear_surrogate(const SparseGraph& g, const SplitSet& splits,
                                              const TrainingConfig& config) {
    config.validate();
    LinearSurrogate model;
    model.config = config;
    model.hops = config.hops;
    detail::check_trainable(g, splits, model.warnings);

    const Matrix x_t = transform_features(g.features(), config.feature_transform);
    const auto op = normalized_operator(g);
    const Matrix s = propagate(op, x_t, config.hops);
    const Matrix s_valid = detail::gather_rows(s, splits.valid);

    std::mt19937_64 rng(config.seed);
    Matrix w = detail::glorot_uniform(x_t.cols(), g.num_classes(), rng);
    detail::AdamState opt(w.rows(), w.cols());

    Matrix best_w = w;
    double best_acc = -1.0;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        // evaluate the current weights, then step
        if (!splits.valid.empty()) {
            const Matrix logits_valid = s_valid * w;
            const double acc = static_cast<double>(detail::argmax_hits(
                                   logits_valid, g.labels(), splits.valid)) /
                               static_cast<double>(splits.valid.size());
            model.history.validation_accuracy.push_back(acc);
            if (acc > best_acc) {
                best_acc = acc;
                best_w = w;
                model.best_epoch = epoch;
            }
        }
        auto lg = linear_loss_gradient(s, w, g.labels(), splits.train, config.weight_decay);
        opt.step(w, lg.grad, config);
        model.history.train_loss.push_back(lg.loss);
    }
    if (splits.valid.empty() || config.epochs == 0) {
        best_w = w;
        best_acc = 0.0;
        model.best_epoch = config.epochs - 1;
    }
    model.weight = best_w;
    model.best_validation_accuracy = best_acc < 0.0 ? 0.0 : best_acc;
    model.collapsed = x_t * model.weight;
    model.trained_features = g.features_ptr();
    return model;
}

/// Trains the two-layer graph convolution, same protocol as the linear
/// model.
inline GcnVictim train_gcn_victim(const SparseGraph& g, const SplitSet& splits,
                                  const TrainingConfig& config) {
    config.validate();
    GcnVictim model;
    model.config = config;
    detail::check_trainable(g, splits, model.warnings);

    const Matrix x_t = transform_features(g.features(), config.feature_transform);
    const auto op = normalized_operator(g);
    const Matrix ax = op.apply(x_t);

    std::mt19937_64 rng(config.seed);
    Matrix w0 = detail::glorot_uniform(x_t.cols(), config.hidden, rng);
    Matrix w1 = detail::glorot_uniform(config.hidden, g.num_classes(), rng);
    detail::AdamState opt0(w0.rows(), w0.cols());
    detail::AdamState opt1(w1.rows(), w1.cols());

    Matrix best_w0 = w0, best_w1 = w1;
    double best_acc = -1.0;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        Matrix logits;
        auto lg = gcn_loss_gradients(op, ax, w0, w1, g.labels(), splits.train,
                                     config.weight_decay, &logits);
        // the logits describe the pre-step weights; evaluate, then step
        if (!splits.valid.empty()) {
            const Matrix valid_logits = detail::gather_rows(logits, splits.valid);
            const double acc = static_cast<double>(detail::argmax_hits(
                                   valid_logits, g.labels(), splits.valid)) /
                               static_cast<double>(splits.valid.size());
            model.history.validation_accuracy.push_back(acc);
            if (acc > best_acc) {
                best_acc = acc;
                best_w0 = w0;
                best_w1 = w1;
                model.best_epoch = epoch;
            }
        }
        opt0.step(w0, lg.grad_w0, config);
        opt1.step(w1, lg.grad_w1, config);
        model.history.train_loss.push_back(lg.loss);
    }
    if (splits.valid.empty() || config.epochs == 0) {
        best_w0 = w0;
        best_w1 = w1;
        best_acc = 0.0;
        model.best_epoch = config.epochs - 1;
    }
    model.w0 = best_w0;
    model.w1 = best_w1;
    model.best_validation_accuracy = best_acc < 0.0 ? 0.0 : best_acc;
    model.trained_features = g.features_ptr();
    return model;
}

/// Full-graph inference. The linear route propagates the collapsed table,
/// so it equals softmax(Â^hops X_t W) exactly.
inline Prediction predict(const LinearSurrogate& model, const SparseGraph& g) {
    const auto op = normalized_operator(g);
    return prediction_from_logits(propagate(op, model.collapsed_for(g), model.hops));
}

inline Prediction predict(const GcnVictim& model, const SparseGraph& g) {
    const auto op = normalized_operator(g);
    const Matrix x_t = transform_features(g.features(), model.config.feature_transform);
    const Matrix h1 = op.apply(x_t * model.w0).cwiseMax(0.0);
    return prediction_from_logits(op.apply(h1) * model.w1);
}

namespace detail {

/// Rows of Â^hops · M for the nodes a target depends on, computed over the
/// target's hop-neighborhood only. Accumulation order per row matches
/// NormalizedOperator::apply, so values agree with the full pass to float
/// rounding.
inline Eigen::RowVectorXd restricted_propagate_row(const NormalizedOperator& op, const Matrix& m,
                                                   NodeId u, int hops) {
    if (hops == 0) return m.row(u);
    std::vector<NodeId> frontier{u};
    // needed[h] = rows of the h-times propagated matrix we must produce
    std::vector<std::vector<NodeId>> needed(static_cast<std::size_t>(hops));
    needed[static_cast<std::size_t>(hops - 1)] = frontier;
    for (int h = hops - 1; h > 0; --h) {
        std::vector<NodeId> prev;
        for (NodeId t : needed[static_cast<std::size_t>(h)]) {
            const auto idx = op.row_indices(t);
            prev.insert(prev.end(), idx.begin(), idx.end());
        }
        std::sort(prev.begin(), prev.end());
        prev.erase(std::unique(prev.begin(), prev.end()), prev.end());
        needed[static_cast<std::size_t>(h - 1)] = std::move(prev);
    }

    // level 0 reads M directly; each level h produces rows from level h-1
    std::vector<NodeId> ids;  // sorted ids of `current` rows
    Matrix current;
    for (int h = 0; h < hops; ++h) {
        const auto& want = needed[static_cast<std::size_t>(h)];
        Matrix next = Matrix::Zero(static_cast<Eigen::Index>(want.size()), m.cols());
        for (std::size_t r = 0; r < want.size(); ++r) {
            const auto idx = op.row_indices(want[r]);
            const auto val = op.row_values(want[r]);
            for (std::size_t t = 0; t < idx.size(); ++t) {
                if (h == 0) {
                    next.row(static_cast<Eigen::Index>(r)) += val[t] * m.row(idx[t]);
                } else {
                    const auto pos = std::lower_bound(ids.begin(), ids.end(), idx[t]);
                    next.row(static_cast<Eigen::Index>(r)) +=
                        val[t] * current.row(pos - ids.begin());
                }
            }
        }
        ids = want;
        current = std::move(next);
    }
    return current.row(0);
}

}  // namespace detail

/// Probability row of a single node, evaluated through the node's
/// hop-neighborhood instead of a full-graph pass. Intended for scoring one
/// target on many perturbed graphs.
inline Eigen::RowVectorXd predict_node(const LinearSurrogate& model, const SparseGraph& g,
                                       NodeId u) {
    const auto op = normalized_operator(g);
    Eigen::RowVectorXd logits =
        detail::restricted_propagate_row(op, model.collapsed_for(g), u, model.hops);
    const double m = logits.maxCoeff();
    Eigen::ArrayXd e = (logits.transpose().array() - m).exp();
    return (e / e.sum()).matrix().transpose();
}

/// Single-target evaluator for the two-layer convolution. Caches X_t W0
/// once; each probability row then costs only the target's two-hop ball.
/// Perturbed graphs must share the constructor graph's feature buffer.
class GcnNodeScorer {
public:
    GcnNodeScorer(const GcnVictim& model, const SparseGraph& g)
        : model_(model),
          features_(g.features_ptr()),
          xw0_(transform_features(g.features(), model.config.feature_transform) * model.w0) {}

    Eigen::RowVectorXd probabilities(const SparseGraph& g, NodeId u) const {
        if (g.features_ptr().get() != features_.get())
            throw PreconditionError("scorer requires graphs sharing the base feature buffer");
        const auto op = normalized_operator(g);
        Eigen::RowVectorXd row_h(model_.w0.cols());
        row_h.setZero();
        const auto idx = op.row_indices(u);
        const auto val = op.row_values(u);
        for (std::size_t t = 0; t < idx.size(); ++t) {
            Eigen::RowVectorXd h1_t(model_.w0.cols());
            h1_t.setZero();
            const auto idx2 = op.row_indices(idx[t]);
            const auto val2 = op.row_values(idx[t]);
            for (std::size_t s = 0; s < idx2.size(); ++s) h1_t += val2[s] * xw0_.row(idx2[s]);
            row_h += val[t] * h1_t.cwiseMax(0.0);
        }
        Eigen::RowVectorXd logits = row_h * model_.w1;
        const double m = logits.maxCoeff();
        Eigen::ArrayXd e = (logits.transpose().array() - m).exp();
        return (e / e.sum()).matrix().transpose();
    }

private:
    const GcnVictim& model_;
    std::shared_ptr<const Matrix> features_;
    Matrix xw0_;
};

}  // namespace guard

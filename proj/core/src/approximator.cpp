#include "orthosurv/approximator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace orthosurv {

namespace {

double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }
double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

void apply_hidden(HiddenActivation act, Eigen::MatrixXd& z) {
    switch (act) {
        case HiddenActivation::logistic:
            z = z.unaryExpr([](double v) { return sigmoid(v); });
            break;
        case HiddenActivation::tanh:
            z = z.array().tanh().matrix();
            break;
        case HiddenActivation::relu:
            z = z.cwiseMax(0.0);
            break;
    }
}

// Derivative of the hidden activation expressed through its output.
Eigen::MatrixXd hidden_derivative(HiddenActivation act, const Eigen::MatrixXd& h) {
    switch (act) {
        case HiddenActivation::logistic:
            return (h.array() * (1.0 - h.array())).matrix();
        case HiddenActivation::tanh:
            return (1.0 - h.array().square()).matrix();
        case HiddenActivation::relu:
            return (h.array() > 0.0).cast<double>().matrix();
    }
    return h;
}

void check_inputs(const ApproxConfig& cfg, const Eigen::MatrixXd& inputs) {
    if (static_cast<std::size_t>(inputs.cols()) != cfg.input_dim) {
        throw std::invalid_argument("input dimension " + std::to_string(inputs.cols()) +
                                    " does not match configured " +
                                    std::to_string(cfg.input_dim));
    }
    if (!inputs.allFinite()) throw std::invalid_argument("non-finite inputs");
}

void check_training_data(const ApproxConfig& cfg, const Eigen::MatrixXd& inputs,
                         const Eigen::VectorXd& targets, const Eigen::VectorXd& weights,
                         LossKind kind) {
    check_inputs(cfg, inputs);
    if (targets.size() != inputs.rows() || weights.size() != inputs.rows()) {
        throw std::invalid_argument("inputs, targets and weights must have equal row counts");
    }
    if (!targets.allFinite() || !weights.allFinite()) {
        throw std::invalid_argument("non-finite targets or weights");
    }
    if (kind == LossKind::bernoulli_log_likelihood) {
        if (cfg.output_activation != OutputActivation::logistic) {
            throw std::invalid_argument("bernoulli loss requires logistic output");
        }
        if ((weights.array() < 0.0).any()) {
            throw std::invalid_argument("negative weights are only allowed for weighted_squared");
        }
        if ((targets.array() < 0.0).any() || (targets.array() > 1.0).any()) {
            throw std::invalid_argument("bernoulli targets must lie in [0,1]");
        }
    }
}

// Per-row loss and dL/dz at the output for a batch, both already scaled by 1/rows.
double output_loss(const ApproxConfig& cfg, const Eigen::MatrixXd& z_out,
                   const Eigen::VectorXd& targets, const Eigen::VectorXd& weights,
                   LossKind kind, Eigen::MatrixXd* delta) {
    const Eigen::Index n = z_out.rows();
    const double scale = 1.0 / static_cast<double>(std::max<Eigen::Index>(n, 1));
    double total = 0.0;
    if (delta) delta->resize(n, 1);
    const bool logistic = cfg.output_activation == OutputActivation::logistic;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double z = z_out(i, 0);
        const double y = targets(i);
        const double w = weights(i);
        double d = 0.0;
        if (kind == LossKind::bernoulli_log_likelihood) {
            total += w * (y * softplus(-z) + (1.0 - y) * softplus(z));
            d = w * (sigmoid(z) - y);
        } else {
            const double o = logistic ? sigmoid(z) : z;
            const double r = o - y;
            total += w * r * r;
            d = 2.0 * w * r * (logistic ? o * (1.0 - o) : 1.0);
        }
        if (delta) (*delta)(i, 0) = d * scale;
    }
    return total * scale;
}

}  // namespace

void validate_config(const ApproxConfig& cfg) {
    if (cfg.input_dim == 0) throw std::invalid_argument("input_dim must be positive");
    for (auto w : cfg.hidden_layers) {
        if (w == 0) throw std::invalid_argument("hidden_layers widths must be positive");
    }
    if (!(cfg.learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
    if (cfg.batch_size < 1) throw std::invalid_argument("batch_size must be at least 1");
    if (cfg.epochs < 0) throw std::invalid_argument("epochs must be non-negative");
    if (!(cfg.dropout_rate >= 0.0 && cfg.dropout_rate < 1.0)) {
        throw std::invalid_argument("dropout_rate must lie in [0,1)");
    }
}

Approximator::Approximator(const ApproxConfig& cfg) : cfg_(cfg) {
    validate_config(cfg);
    std::mt19937_64 rng(cfg.seed);
    std::size_t fan_in = cfg.input_dim;
    std::vector<std::size_t> widths = cfg.hidden_layers;
    widths.push_back(1);
    for (auto out : widths) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        std::uniform_real_distribution<double> u(-bound, bound);
        Layer l;
        l.w.resize(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(fan_in));
        l.b.resize(static_cast<Eigen::Index>(out));
        for (Eigen::Index r = 0; r < l.w.rows(); ++r)
            for (Eigen::Index c = 0; c < l.w.cols(); ++c) l.w(r, c) = u(rng);
        for (Eigen::Index r = 0; r < l.b.size(); ++r) l.b(r) = u(rng);
        layers_.push_back(std::move(l));
        fan_in = out;
    }
}

void Approximator::forward(const Eigen::MatrixXd& inputs, Cache& c,
                           const std::vector<Eigen::MatrixXd>* masks) const {
    const std::size_t n_layers = layers_.size();
    c.in.resize(n_layers);
    c.h.resize(n_layers - 1);
    c.in[0] = inputs;
    for (std::size_t l = 0; l < n_layers; ++l) {
        Eigen::MatrixXd z = c.in[l] * layers_[l].w.transpose();
        z.rowwise() += layers_[l].b.transpose();
        if (l + 1 == n_layers) {
            c.z_out = std::move(z);
            break;
        }
        apply_hidden(cfg_.hidden_activation, z);
        c.h[l] = std::move(z);
        if (masks && (*masks)[l].size() != 0) {
            c.in[l + 1] = c.h[l].cwiseProduct((*masks)[l]);
        } else {
            c.in[l + 1] = c.h[l];
        }
    }
}

void Approximator::backward(const Cache& c, const std::vector<Eigen::MatrixXd>* masks,
                            Eigen::MatrixXd delta, std::vector<Layer>& grads) const {
    const std::size_t n_layers = layers_.size();
    grads.resize(n_layers);
    for (std::size_t l = n_layers; l-- > 0;) {
        grads[l].w.noalias() = delta.transpose() * c.in[l];
        grads[l].b = delta.colwise().sum().transpose();
        if (l == 0) break;
        Eigen::MatrixXd da = delta * layers_[l].w;
        if (masks && (*masks)[l - 1].size() != 0) da = da.cwiseProduct((*masks)[l - 1]);
        delta = da.cwiseProduct(hidden_derivative(cfg_.hidden_activation, c.h[l - 1]));
    }
}

Eigen::VectorXd Approximator::predict(const Eigen::MatrixXd& inputs) const {
    check_inputs(cfg_, inputs);
    Cache c;
    forward(inputs, c, nullptr);
    Eigen::VectorXd out = c.z_out.col(0);
    if (cfg_.output_activation == OutputActivation::logistic) {
        out = out.unaryExpr([](double z) {
            return std::clamp(sigmoid(z), kOutputClip, 1.0 - kOutputClip);
        });
    }
    return out;
}

std::size_t Approximator::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += static_cast<std::size_t>(l.w.size() + l.b.size());
    return n;
}

Eigen::VectorXd Approximator::parameters() const {
    Eigen::VectorXd flat(static_cast<Eigen::Index>(parameter_count()));
    Eigen::Index k = 0;
    for (const auto& l : layers_) {
        for (Eigen::Index r = 0; r < l.w.rows(); ++r)
            for (Eigen::Index c = 0; c < l.w.cols(); ++c) flat(k++) = l.w(r, c);
        for (Eigen::Index r = 0; r < l.b.size(); ++r) flat(k++) = l.b(r);
    }
    return flat;
}

void Approximator::set_parameters(const Eigen::VectorXd& flat) {
    if (static_cast<std::size_t>(flat.size()) != parameter_count()) {
        throw std::invalid_argument("parameter vector has wrong length");
    }
    Eigen::Index k = 0;
    for (auto& l : layers_) {
        for (Eigen::Index r = 0; r < l.w.rows(); ++r)
            for (Eigen::Index c = 0; c < l.w.cols(); ++c) l.w(r, c) = flat(k++);
        for (Eigen::Index r = 0; r < l.b.size(); ++r) l.b(r) = flat(k++);
    }
}

double Approximator::loss(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets,
                          const Eigen::VectorXd& weights, LossKind kind,
                          Eigen::VectorXd* grad) const {
    check_training_data(cfg_, inputs, targets, weights, kind);
    Cache c;
    forward(inputs, c, nullptr);
    Eigen::MatrixXd delta;
    const double value = output_loss(cfg_, c.z_out, targets, weights, kind, grad ? &delta : nullptr);
    if (grad) {
        std::vector<Layer> g;
        backward(c, nullptr, std::move(delta), g);
        grad->resize(static_cast<Eigen::Index>(parameter_count()));
        Eigen::Index k = 0;
        for (const auto& l : g) {
            for (Eigen::Index r = 0; r < l.w.rows(); ++r)
                for (Eigen::Index col = 0; col < l.w.cols(); ++col) (*grad)(k++) = l.w(r, col);
            for (Eigen::Index r = 0; r < l.b.size(); ++r) (*grad)(k++) = l.b(r);
        }
    }
    return value;
}

TrainResult train(const ApproxConfig& cfg, const Eigen::MatrixXd& inputs,
                  const Eigen::VectorXd& targets, const Eigen::VectorXd& weights, LossKind kind,
                  const TrainOptions& opts) {
    validate_config(cfg);
    check_training_data(cfg, inputs, targets, weights, kind);
    const bool use_val = opts.val_inputs && opts.val_targets && opts.val_weights;
    if (use_val) check_training_data(cfg, *opts.val_inputs, *opts.val_targets, *opts.val_weights, kind);

    TrainResult res{Approximator(cfg), {}, {}, -1};
    Approximator& m = res.model;
    const std::size_t n = static_cast<std::size_t>(inputs.rows());
    if (n == 0) throw std::invalid_argument("empty training set");

    // Separate stream from initialization so that the init is shared with
    // Approximator(cfg) regardless of training settings.
    std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    std::bernoulli_distribution keep(1.0 - cfg.dropout_rate);
    const double keep_scale = 1.0 / (1.0 - cfg.dropout_rate);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    std::vector<Approximator::Layer> grads;
    std::vector<Approximator::Layer> m1, m2;  // Adam moments
    if (cfg.optimizer == Optimizer::adam) {
        for (const auto& l : m.layers_) {
            m1.push_back({Eigen::MatrixXd::Zero(l.w.rows(), l.w.cols()), Eigen::VectorXd::Zero(l.b.size())});
        }
        m2 = m1;
    }
    constexpr double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
    long step = 0;

    Approximator::Cache cache;
    std::vector<Eigen::MatrixXd> masks(m.layers_.size() - 1);
    Eigen::MatrixXd xb;
    Eigen::VectorXd yb, wb;
    Eigen::MatrixXd delta;

    double best_val = std::numeric_limits<double>::infinity();
    Eigen::VectorXd best_params;
    int since_best = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t stop = std::min(n, start + cfg.batch_size);
            const auto bsz = static_cast<Eigen::Index>(stop - start);
            xb.resize(bsz, inputs.cols());
            yb.resize(bsz);
            wb.resize(bsz);
            for (Eigen::Index i = 0; i < bsz; ++i) {
                const auto src = static_cast<Eigen::Index>(order[start + static_cast<std::size_t>(i)]);
                xb.row(i) = inputs.row(src);
                yb(i) = targets(src);
                wb(i) = weights(src);
            }
            const std::vector<Eigen::MatrixXd>* mp = nullptr;
            if (cfg.dropout_rate > 0.0) {
                for (std::size_t l = 0; l < masks.size(); ++l) {
                    masks[l].resize(bsz, m.layers_[l].w.rows());
                    for (Eigen::Index i = 0; i < masks[l].size(); ++i) {
                        masks[l].data()[i] = keep(rng) ? keep_scale : 0.0;
                    }
                }
                mp = &masks;
            }
            m.forward(xb, cache, mp);
            output_loss(cfg, cache.z_out, yb, wb, kind, &delta);
            m.backward(cache, mp, delta, grads);

            if (cfg.optimizer == Optimizer::sgd) {
                for (std::size_t l = 0; l < grads.size(); ++l) {
                    m.layers_[l].w -= cfg.learning_rate * grads[l].w;
                    m.layers_[l].b -= cfg.learning_rate * grads[l].b;
                }
            } else {
                ++step;
                const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
                const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
                const double lr = cfg.learning_rate * std::sqrt(c2) / c1;
                for (std::size_t l = 0; l < grads.size(); ++l) {
                    m1[l].w = beta1 * m1[l].w + (1.0 - beta1) * grads[l].w;
                    m1[l].b = beta1 * m1[l].b + (1.0 - beta1) * grads[l].b;
                    m2[l].w = beta2 * m2[l].w + (1.0 - beta2) * grads[l].w.cwiseAbs2();
                    m2[l].b = beta2 * m2[l].b + (1.0 - beta2) * grads[l].b.cwiseAbs2();
                    m.layers_[l].w.array() -=
                        lr * m1[l].w.array() / (m2[l].w.array().sqrt() + adam_eps);
                    m.layers_[l].b.array() -=
                        lr * m1[l].b.array() / (m2[l].b.array().sqrt() + adam_eps);
                }
            }
        }
        res.loss_trace.push_back(m.loss(inputs, targets, weights, kind));
        if (use_val) {
            const double v = m.loss(*opts.val_inputs, *opts.val_targets, *opts.val_weights, kind);
            res.val_trace.push_back(v);
            if (opts.patience > 0) {
                if (v < best_val) {
                    best_val = v;
                    best_params = m.parameters();
                    res.best_epoch = epoch;
                    since_best = 0;
                } else if (++since_best >= opts.patience) {
                    break;
                }
            }
        }
    }
    if (best_params.size() > 0) {
        m.set_parameters(best_params);
    } else {
        res.best_epoch = static_cast<int>(res.loss_trace.size()) - 1;
    }
    return res;
}

double grad_check(const Approximator& m, const Eigen::MatrixXd& inputs,
                  const Eigen::VectorXd& targets, const Eigen::VectorXd& weights, LossKind kind) {
    Eigen::VectorXd analytic;
    m.loss(inputs, targets, weights, kind, &analytic);
    Approximator probe = m;
    const Eigen::VectorXd base = m.parameters();
    constexpr double h = 1e-5;
    double worst = 0.0;
    for (Eigen::Index k = 0; k < base.size(); ++k) {
        Eigen::VectorXd p = base;
        p(k) = base(k) + h;
        probe.set_parameters(p);
        const double up = probe.loss(inputs, targets, weights, kind);
        p(k) = base(k) - h;
        probe.set_parameters(p);
        const double down = probe.loss(inputs, targets, weights, kind);
        const double fd = (up - down) / (2.0 * h);
        const double denom = std::max({std::abs(analytic(k)), std::abs(fd), 1e-6});
        worst = std::max(worst, std::abs(analytic(k) - fd) / denom);
    }
    return worst;
}

std::string to_string(OutputActivation v) {
    return v == OutputActivation::logistic ? "logistic" : "identity";
}

std::string to_string(HiddenActivation v) {
    switch (v) {
        case HiddenActivation::logistic: return "logistic";
        case HiddenActivation::tanh: return "tanh";
        case HiddenActivation::relu: return "relu";
    }
    return "logistic";
}

std::string to_string(Optimizer v) { return v == Optimizer::sgd ? "sgd" : "adam"; }

}  // namespace orthosurv

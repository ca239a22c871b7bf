// approximator.hpp
//
// Small fully connected network with hand-written backpropagation. Used for the
// propensity and hazard models (logistic output, Bernoulli likelihood) and for
// the second-stage effect regressor (identity output, signed weighted squares).
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace orthosurv {

enum class OutputActivation { logistic, identity };
enum class HiddenActivation { logistic, tanh, relu };
enum class Optimizer { sgd, adam };
enum class LossKind { weighted_squared, bernoulli_log_likelihood };

struct ApproxConfig {
    std::size_t input_dim = 1;
    std::vector<std::size_t> hidden_layers{20, 20, 20};
    OutputActivation output_activation = OutputActivation::identity;
    HiddenActivation hidden_activation = HiddenActivation::logistic;
    Optimizer optimizer = Optimizer::sgd;
    int epochs = 10;
    std::size_t batch_size = 64;
    double learning_rate = 1e-3;
    double dropout_rate = 0.0;
    std::uint64_t seed = 0;
};

// Throws std::invalid_argument naming the offending field.
void validate_config(const ApproxConfig& cfg);

// Logistic outputs are clipped to (kOutputClip, 1 - kOutputClip) at prediction.
inline constexpr double kOutputClip = 1e-6;

struct TrainOptions;
struct TrainResult;

class Approximator {
public:
    // Parameters drawn uniformly in [-1/sqrt(fan_in), 1/sqrt(fan_in)] from cfg.seed.
    explicit Approximator(const ApproxConfig& cfg);

    const ApproxConfig& config() const { return cfg_; }

    Eigen::VectorXd predict(const Eigen::MatrixXd& inputs) const;

    std::size_t parameter_count() const;
    Eigen::VectorXd parameters() const;
    void set_parameters(const Eigen::VectorXd& flat);

    // Mean loss over all rows, evaluated without dropout. When grad is non-null
    // it receives the gradient w.r.t. the flat parameter vector.
    double loss(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets,
                const Eigen::VectorXd& weights, LossKind kind,
                Eigen::VectorXd* grad = nullptr) const;

private:
    friend TrainResult train(const ApproxConfig&, const Eigen::MatrixXd&, const Eigen::VectorXd&,
                             const Eigen::VectorXd&, LossKind, const TrainOptions&);

    struct Layer {
        Eigen::MatrixXd w;  // out x in
        Eigen::VectorXd b;
    };

    struct Cache {
        std::vector<Eigen::MatrixXd> in;  // input to each layer, dropout applied
        std::vector<Eigen::MatrixXd> h;   // hidden activations before dropout
        Eigen::MatrixXd z_out;            // output pre-activation (rows x 1)
    };

    void forward(const Eigen::MatrixXd& inputs, Cache& c,
                 const std::vector<Eigen::MatrixXd>* masks) const;
    // Per-layer gradients given dL/dz at the output.
    void backward(const Cache& c, const std::vector<Eigen::MatrixXd>* masks,
                  Eigen::MatrixXd delta, std::vector<Layer>& grads) const;

    ApproxConfig cfg_;
    std::vector<Layer> layers_;
};

struct TrainOptions {
    // Optional held-out set for early stopping; patience <= 0 disables it.
    const Eigen::MatrixXd* val_inputs = nullptr;
    const Eigen::VectorXd* val_targets = nullptr;
    const Eigen::VectorXd* val_weights = nullptr;
    int patience = 0;
};

struct TrainResult {
    Approximator model;
    std::vector<double> loss_trace;  // full-data training loss after each epoch
    std::vector<double> val_trace;   // empty without a validation set
    int best_epoch = -1;             // epoch whose parameters were kept
};

// Weights may be negative only for weighted_squared. Deterministic given cfg.seed.
TrainResult train(const ApproxConfig& cfg, const Eigen::MatrixXd& inputs,
                  const Eigen::VectorXd& targets, const Eigen::VectorXd& weights, LossKind kind,
                  const TrainOptions& opts = {});

// Max relative error between the analytic gradient and central differences
// (step 1e-5). Per-component error is |g - fd| / max(|g|, |fd|, 1e-6).
double grad_check(const Approximator& m, const Eigen::MatrixXd& inputs,
                  const Eigen::VectorXd& targets, const Eigen::VectorXd& weights, LossKind kind);

std::string to_string(OutputActivation v);
std::string to_string(HiddenActivation v);
std::string to_string(Optimizer v);

}  // namespace orthosurv

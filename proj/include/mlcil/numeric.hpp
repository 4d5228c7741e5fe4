#pragma once

// Small dense substrate: one-hidden-layer multi-label classifier with
// hand-written backpropagation, Adam with L2 weight decay, frozen snapshots,
// and a central-difference gradient checker.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace mlcil {

// Output probabilities are clamped to [kProbEpsilon, 1 - kProbEpsilon].
inline constexpr double kProbEpsilon = 1e-12;

// Logistic followed by the probability clamp.
double clamped_logistic(double logit);

// Parameters live in one flat buffer laid out as
//   w1 (hidden x inputs, row-major) | b1 (hidden) | w2 (outputs x hidden) | b2 (outputs)
// so optimizers, snapshots and gradient checks can treat them uniformly.
class ClassifierModel {
public:
    ClassifierModel(std::size_t inputs, std::size_t hidden, std::size_t outputs);

    // Uniform Glorot initialisation, biases zero.
    static ClassifierModel random(std::size_t inputs, std::size_t hidden, std::size_t outputs,
                                  std::uint64_t seed);

    std::size_t input_dim() const { return inputs_; }
    std::size_t hidden_dim() const { return hidden_; }
    std::size_t output_dim() const { return outputs_; }
    std::size_t parameter_count() const { return params_.size(); }

    std::span<double> parameters() { return params_; }
    std::span<const double> parameters() const { return params_; }

    std::span<const double> w1() const { return {params_.data() + w1_offset(), hidden_ * inputs_}; }
    std::span<const double> b1() const { return {params_.data() + b1_offset(), hidden_}; }
    std::span<const double> w2() const { return {params_.data() + w2_offset(), outputs_ * hidden_}; }
    std::span<const double> b2() const { return {params_.data() + b2_offset(), outputs_}; }

    std::size_t w1_offset() const { return 0; }
    std::size_t b1_offset() const { return hidden_ * inputs_; }
    std::size_t w2_offset() const { return b1_offset() + hidden_; }
    std::size_t b2_offset() const { return w2_offset() + outputs_ * hidden_; }

    // Human-readable name of a flat parameter index, e.g. "w2[3,7]".
    std::string parameter_name(std::size_t flat_index) const;

    std::vector<double> forward(std::span<const double> features) const;

    // Scratch-buffer variant used by the batch kernels. `hidden` receives the
    // tanh activations, `probs` the clamped output probabilities.
    void forward_into(std::span<const double> features, std::span<double> hidden,
                      std::span<double> probs) const;

    // Adds d(loss)/d(params) for one sample into `grads`, given the cached
    // activations from forward_into and d(loss)/d(probs).
    void accumulate_backward(std::span<const double> features, std::span<const double> hidden,
                             std::span<const double> probs, std::span<const double> output_gradient,
                             std::span<double> grads, std::span<double> scratch) const;

    friend bool operator==(const ClassifierModel&, const ClassifierModel&) = default;

private:
    std::size_t inputs_;
    std::size_t hidden_;
    std::size_t outputs_;
    std::vector<double> params_;
};

// Single-sample gradient of the loss with respect to every parameter.
std::vector<double> backward(const ClassifierModel& model, std::span<const double> features,
                             std::span<const double> output_gradient);

// Frozen copy of a model taken at a task boundary.
class ModelSnapshot {
public:
    ModelSnapshot(const ClassifierModel& source, int task) : model_(source), task_(task) {}

    const ClassifierModel& model() const { return model_; }
    int task() const { return task_; }
    std::vector<double> forward(std::span<const double> features) const { return model_.forward(features); }

private:
    ClassifierModel model_;
    int task_;
};

ModelSnapshot snapshot(const ClassifierModel& model, int task);

// FNV-1a over the raw parameter bytes; used to assert immutability.
std::uint64_t parameter_hash(const ClassifierModel& model);

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 1e-4;
};

struct OptimizerState {
    explicit OptimizerState(std::size_t parameter_count, AdamConfig config = {})
        : config(config), first_moment(parameter_count, 0.0), second_moment(parameter_count, 0.0) {}

    AdamConfig config;
    std::vector<double> first_moment;
    std::vector<double> second_moment;
    std::uint64_t step = 0;
};

// One Adam update with bias correction; weight decay is added to the raw
// gradient as wd * w. Throws NumericalError on a non-finite gradient.
void optimizer_step(ClassifierModel& model, std::span<const double> gradients, OptimizerState& state);

// Returns the loss; when `analytic_gradient` is non-null it must also be
// filled with d(loss)/d(params).
using LossClosure = std::function<double(const ClassifierModel&, std::vector<double>* analytic_gradient)>;

struct GradCheckReport {
    double max_relative_error = 0.0;
    std::size_t worst_index = 0;
    std::string worst_parameter;
    double analytic = 0.0;
    double numeric = 0.0;
    std::size_t checked = 0;
    bool passed = true;
};

struct GradCheckOptions {
    double step = 1e-6;
    // Denominator floor for the relative error |a - n| / max(|a|, |n|, floor).
    // Central differences at step 1e-6 carry ~1e-10 absolute roundoff, so
    // components far below the floor are compared absolutely.
    double scale_floor = 1e-4;
};

GradCheckReport grad_check(const LossClosure& loss, const ClassifierModel& model, double tolerance,
                           GradCheckOptions options = {});

}  // namespace mlcil

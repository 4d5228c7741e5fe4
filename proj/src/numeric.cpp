#include "mlcil/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>
#include <sstream>

#include "mlcil/errors.hpp"

namespace mlcil {

double clamped_logistic(double logit) {
    double s;
    if (logit >= 0.0) {
        s = 1.0 / (1.0 + std::exp(-logit));
    } else {
        const double e = std::exp(logit);
        s = e / (1.0 + e);
    }
    return std::clamp(s, kProbEpsilon, 1.0 - kProbEpsilon);
}

ClassifierModel::ClassifierModel(std::size_t inputs, std::size_t hidden, std::size_t outputs)
    : inputs_(inputs), hidden_(hidden), outputs_(outputs),
      params_(hidden * inputs + hidden + outputs * hidden + outputs, 0.0) {
    if (inputs == 0 || hidden == 0 || outputs == 0) {
        throw ShapeError("classifier dimensions must be positive");
    }
}

ClassifierModel ClassifierModel::random(std::size_t inputs, std::size_t hidden, std::size_t outputs,
                                        std::uint64_t seed) {
    ClassifierModel model(inputs, hidden, outputs);
    std::mt19937_64 rng(seed);
    const double l1 = std::sqrt(6.0 / static_cast<double>(inputs + hidden));
    const double l2 = std::sqrt(6.0 / static_cast<double>(hidden + outputs));
    std::uniform_real_distribution<double> u1(-l1, l1);
    std::uniform_real_distribution<double> u2(-l2, l2);
    auto p = model.parameters();
    for (std::size_t i = 0; i < hidden * inputs; ++i) p[model.w1_offset() + i] = u1(rng);
    for (std::size_t i = 0; i < outputs * hidden; ++i) p[model.w2_offset() + i] = u2(rng);
    return model;
}

std::string ClassifierModel::parameter_name(std::size_t flat_index) const {
    std::ostringstream os;
    if (flat_index < b1_offset()) {
        os << "w1[" << flat_index / inputs_ << "," << flat_index % inputs_ << "]";
    } else if (flat_index < w2_offset()) {
        os << "b1[" << flat_index - b1_offset() << "]";
    } else if (flat_index < b2_offset()) {
        const std::size_t k = flat_index - w2_offset();
        os << "w2[" << k / hidden_ << "," << k % hidden_ << "]";
    } else if (flat_index < params_.size()) {
        os << "b2[" << flat_index - b2_offset() << "]";
    } else {
        os << "<out of range " << flat_index << ">";
    }
    return os.str();
}

void ClassifierModel::forward_into(std::span<const double> features, std::span<double> hidden,
                                   std::span<double> probs) const {
    if (features.size() != inputs_) {
        throw ShapeError("forward: expected " + std::to_string(inputs_) + " features, got " +
                         std::to_string(features.size()));
    }
    const double* w1p = params_.data() + w1_offset();
    const double* b1p = params_.data() + b1_offset();
    const double* w2p = params_.data() + w2_offset();
    const double* b2p = params_.data() + b2_offset();
    for (std::size_t j = 0; j < hidden_; ++j) {
        double z = b1p[j];
        const double* wrow = w1p + j * inputs_;
        for (std::size_t i = 0; i < inputs_; ++i) z += wrow[i] * features[i];
        hidden[j] = std::tanh(z);
    }
    for (std::size_t o = 0; o < outputs_; ++o) {
        double z = b2p[o];
        const double* wrow = w2p + o * hidden_;
        for (std::size_t j = 0; j < hidden_; ++j) z += wrow[j] * hidden[j];
        probs[o] = clamped_logistic(z);
    }
}

std::vector<double> ClassifierModel::forward(std::span<const double> features) const {
    std::vector<double> hidden(hidden_);
    std::vector<double> probs(outputs_);
    forward_into(features, hidden, probs);
    return probs;
}

void ClassifierModel::accumulate_backward(std::span<const double> features, std::span<const double> hidden,
                                          std::span<const double> probs,
                                          std::span<const double> output_gradient, std::span<double> grads,
                                          std::span<double> scratch) const {
    if (output_gradient.size() != outputs_ || probs.size() != outputs_) {
        throw ShapeError("backward: output gradient has " + std::to_string(output_gradient.size()) +
                         " entries, model has " + std::to_string(outputs_) + " outputs");
    }
    if (features.size() != inputs_ || grads.size() != params_.size()) {
        throw ShapeError("backward: feature or gradient buffer size mismatch");
    }
    const double* w2p = params_.data() + w2_offset();
    double* gw1 = grads.data() + w1_offset();
    double* gb1 = grads.data() + b1_offset();
    double* gw2 = grads.data() + w2_offset();
    double* gb2 = grads.data() + b2_offset();

    std::fill(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(hidden_), 0.0);
    for (std::size_t o = 0; o < outputs_; ++o) {
        const double p = probs[o];
        // The clamp is flat outside [eps, 1 - eps].
        if (output_gradient[o] == 0.0 || p <= kProbEpsilon || p >= 1.0 - kProbEpsilon) continue;
        const double delta = output_gradient[o] * p * (1.0 - p);
        gb2[o] += delta;
        double* grow = gw2 + o * hidden_;
        const double* wrow = w2p + o * hidden_;
        for (std::size_t j = 0; j < hidden_; ++j) {
            grow[j] += delta * hidden[j];
            scratch[j] += delta * wrow[j];
        }
    }
    for (std::size_t j = 0; j < hidden_; ++j) {
        const double delta = scratch[j] * (1.0 - hidden[j] * hidden[j]);
        if (delta == 0.0) continue;
        gb1[j] += delta;
        double* grow = gw1 + j * inputs_;
        for (std::size_t i = 0; i < inputs_; ++i) grow[i] += delta * features[i];
    }
}

std::vector<double> backward(const ClassifierModel& model, std::span<const double> features,
                             std::span<const double> output_gradient) {
    std::vector<double> hidden(model.hidden_dim());
    std::vector<double> probs(model.output_dim());
    std::vector<double> scratch(model.hidden_dim());
    std::vector<double> grads(model.parameter_count(), 0.0);
    model.forward_into(features, hidden, probs);
    model.accumulate_backward(features, hidden, probs, output_gradient, grads, scratch);
    return grads;
}

ModelSnapshot snapshot(const ClassifierModel& model, int task) { return ModelSnapshot(model, task); }

std::uint64_t parameter_hash(const ClassifierModel& model) {
    std::uint64_t h = 1469598103934665603ULL;
    for (double v : model.parameters()) {
        unsigned char bytes[sizeof(double)];
        std::memcpy(bytes, &v, sizeof(double));
        for (unsigned char b : bytes) {
            h ^= b;
            h *= 1099511628211ULL;
        }
    }
    return h;
}

void optimizer_step(ClassifierModel& model, std::span<const double> gradients, OptimizerState& state) {
    auto params = model.parameters();
    if (gradients.size() != params.size() || state.first_moment.size() != params.size()) {
        throw ShapeError("optimizer_step: gradient has " + std::to_string(gradients.size()) +
                         " entries, model has " + std::to_string(params.size()) + " parameters");
    }
    for (std::size_t i = 0; i < gradients.size(); ++i) {
        if (!std::isfinite(gradients[i])) {
            throw NumericalError("non-finite gradient for parameter " + model.parameter_name(i));
        }
    }
    const AdamConfig& c = state.config;
    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double bias1 = 1.0 - std::pow(c.beta1, t);
    const double bias2 = 1.0 - std::pow(c.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = gradients[i] + c.weight_decay * params[i];
        double& m = state.first_moment[i];
        double& v = state.second_moment[i];
        m = c.beta1 * m + (1.0 - c.beta1) * g;
        v = c.beta2 * v + (1.0 - c.beta2) * g * g;
        const double m_hat = m / bias1;
        const double v_hat = v / bias2;
        params[i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
}

GradCheckReport grad_check(const LossClosure& loss, const ClassifierModel& model, double tolerance,
                           GradCheckOptions options) {
    std::vector<double> analytic;
    loss(model, &analytic);
    if (analytic.size() != model.parameter_count()) {
        throw ShapeError("grad_check: closure returned " + std::to_string(analytic.size()) +
                         " gradient entries for " + std::to_string(model.parameter_count()) + " parameters");
    }
    GradCheckReport report;
    ClassifierModel probe = model;
    auto params = probe.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double original = params[i];
        params[i] = original + options.step;
        const double up = loss(probe, nullptr);
        params[i] = original - options.step;
        const double down = loss(probe, nullptr);
        params[i] = original;
        if (!std::isfinite(up) || !std::isfinite(down)) {
            throw NumericalError("grad_check: non-finite loss when perturbing " + model.parameter_name(i) +
                                 " by +/-" + std::to_string(options.step));
        }
        const double numeric = (up - down) / (2.0 * options.step);
        const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), options.scale_floor});
        const double rel = std::abs(analytic[i] - numeric) / denom;
        if (rel > report.max_relative_error || report.checked == 0) {
            report.max_relative_error = rel;
            report.worst_index = i;
            report.analytic = analytic[i];
            report.numeric = numeric;
        }
        ++report.checked;
    }
    report.worst_parameter = model.parameter_name(report.worst_index);
    report.passed = report.max_relative_error <= tolerance;
    return report;
}

}  // namespace mlcil

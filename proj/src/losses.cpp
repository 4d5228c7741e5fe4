#include "mlcil/losses.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "mlcil/errors.hpp"

namespace mlcil {

namespace {

struct Term {
    double value;
    double derivative;
};

// -(1 - p)^gamma * ln p. With gamma == 0 this is exactly -ln p (0^0 := 1).
Term down_weighted_positive(double p, double gamma) {
    if (gamma == 0.0) return {-std::log(p), -1.0 / p};
    const double q = 1.0 - p;
    const double w = std::pow(q, gamma);
    const double lp = std::log(p);
    return {-w * lp, gamma * std::pow(q, gamma - 1.0) * lp - w / p};
}

// -p^gamma * ln(1 - p). With gamma == 0 this is exactly -ln(1 - p).
Term down_weighted_negative(double p, double gamma) {
    const double q = 1.0 - p;
    if (gamma == 0.0) return {-std::log(q), 1.0 / q};
    const double w = std::pow(p, gamma);
    const double lq = std::log(q);
    return {-w * lq, -gamma * std::pow(p, gamma - 1.0) * lq + w / q};
}

void check_classes(std::span<const std::size_t> classes, std::size_t outputs, const char* who) {
    for (std::size_t c : classes) {
        if (c >= outputs) {
            throw ShapeError(std::string(who) + ": class index " + std::to_string(c) + " outside " +
                             std::to_string(outputs) + " outputs");
        }
    }
}

void check_labels(std::span<const double> preds, const TriStateLabelVector& labels,
                  std::span<const std::size_t> classes, const char* who) {
    if (labels.size() != preds.size()) {
        throw ShapeError(std::string(who) + ": " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(preds.size()) + " predictions");
    }
    check_classes(classes, preds.size(), who);
    for (std::size_t c : classes) {
        if (!labels.annotated(c)) {
            throw AnnotationError(std::string(who) + ": class " + std::to_string(c) + " has a missing label");
        }
    }
}

void check_aligned(std::span<const double> new_preds, std::span<const double> old_preds,
                   std::span<const std::size_t> classes, const char* who) {
    if (new_preds.size() != old_preds.size()) {
        throw AlignmentError(std::string(who) + ": new predictions cover " + std::to_string(new_preds.size()) +
                             " classes, old predictions " + std::to_string(old_preds.size()));
    }
    check_classes(classes, new_preds.size(), who);
}

// Soft-target distillation with the positive part optionally down-weighted.
LossValue distill(std::span<const double> new_preds, std::span<const double> old_preds,
                  std::span<const std::size_t> old_classes, double gamma) {
    LossValue out{0.0, std::vector<double>(new_preds.size(), 0.0)};
    for (std::size_t c : old_classes) {
        const double target = old_preds[c];
        const double p = new_preds[c];
        const Term pos = down_weighted_positive(p, gamma);
        out.value += target * pos.value - (1.0 - target) * std::log(1.0 - p);
        out.gradient[c] = target * pos.derivative + (1.0 - target) / (1.0 - p);
    }
    return out;
}

}  // namespace

void LossHyperParams::validate() const {
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigError("loss.alpha must be >= 0");
    if (!(beta >= 0.0) || !std::isfinite(beta)) throw ConfigError("loss.beta must be >= 0");
    if (!(lambda_akd >= 0.0 && lambda_akd <= 1.0)) throw ConfigError("loss.lambda_akd must lie in [0, 1]");
    if (!(lambda_er >= 0.0) || !std::isfinite(lambda_er)) throw ConfigError("loss.lambda_er must be >= 0");
}

double decay_exponent(double coef, std::size_t class_count, LogBase base) {
    if (class_count == 0) throw std::domain_error("decay_exponent: class count must be >= 1");
    const double n = static_cast<double>(class_count);
    return coef * (base == LogBase::natural ? std::log(n) : std::log10(n));
}

double training_exponent(const LossHyperParams& params, double coef, std::size_t class_count) {
    if (params.decay == DecayMode::fixed) return coef;
    return decay_exponent(coef, class_count, params.log_base);
}

LossValue bce_loss(std::span<const double> preds, const TriStateLabelVector& labels,
                   std::span<const std::size_t> classes) {
    check_labels(preds, labels, classes, "bce_loss");
    LossValue out{0.0, std::vector<double>(preds.size(), 0.0)};
    for (std::size_t c : classes) {
        const double p = preds[c];
        if (labels.positive(c)) {
            out.value -= std::log(p);
            out.gradient[c] = -1.0 / p;
        } else {
            out.value -= std::log(1.0 - p);
            out.gradient[c] = 1.0 / (1.0 - p);
        }
    }
    return out;
}

LossValue kd_loss(std::span<const double> new_preds, std::span<const double> old_preds,
                  std::span<const std::size_t> old_classes) {
    check_aligned(new_preds, old_preds, old_classes, "kd_loss");
    return distill(new_preds, old_preds, old_classes, 0.0);
}

LossValue cls_loss_with_exponent(std::span<const double> preds, const TriStateLabelVector& labels,
                                 std::span<const std::size_t> classes, double gamma) {
    check_labels(preds, labels, classes, "cls_loss");
    LossValue out{0.0, std::vector<double>(preds.size(), 0.0)};
    for (std::size_t c : classes) {
        const double p = preds[c];
        if (labels.positive(c)) {
            const Term t = down_weighted_positive(p, gamma);
            out.value += t.value;
            out.gradient[c] = t.derivative;
        } else {
            out.value -= std::log(1.0 - p);
            out.gradient[c] = 1.0 / (1.0 - p);
        }
    }
    return out;
}

LossValue cls_loss(std::span<const double> preds, const TriStateLabelVector& labels,
                   std::span<const std::size_t> classes, double alpha, std::size_t total_class_count) {
    return cls_loss_with_exponent(preds, labels, classes, decay_exponent(alpha, total_class_count));
}

LossValue akd_loss_with_exponent(std::span<const double> new_preds, std::span<const double> old_preds,
                                 std::span<const std::size_t> old_classes, double gamma) {
    check_aligned(new_preds, old_preds, old_classes, "akd_loss");
    return distill(new_preds, old_preds, old_classes, gamma);
}

LossValue akd_loss(std::span<const double> new_preds, std::span<const double> old_preds,
                   std::span<const std::size_t> old_classes, double alpha, std::size_t total_class_count) {
    return akd_loss_with_exponent(new_preds, old_preds, old_classes, decay_exponent(alpha, total_class_count));
}

LossValue er_loss_with_exponent(std::span<const double> preds, const TriStateLabelVector& completed_labels,
                                std::span<const std::size_t> old_classes, double gamma) {
    if (completed_labels.size() != preds.size()) {
        throw ShapeError("er_loss: " + std::to_string(completed_labels.size()) + " labels for " +
                         std::to_string(preds.size()) + " predictions");
    }
    check_classes(old_classes, preds.size(), "er_loss");
    for (std::size_t c : old_classes) {
        if (!completed_labels.annotated(c)) {
            throw RelabelIncompleteError("er_loss: old class " + std::to_string(c) +
                                         " is unlabeled; online relabeling has not completed this sample");
        }
    }
    LossValue out{0.0, std::vector<double>(preds.size(), 0.0)};
    for (std::size_t c : old_classes) {
        const double p = preds[c];
        if (completed_labels.positive(c)) {
            out.value -= std::log(p);
            out.gradient[c] = -1.0 / p;
        } else {
            const Term t = down_weighted_negative(p, gamma);
            out.value += t.value;
            out.gradient[c] = t.derivative;
        }
    }
    return out;
}

LossValue er_loss(std::span<const double> preds, const TriStateLabelVector& completed_labels,
                  std::span<const std::size_t> old_classes, double beta, std::size_t total_class_count) {
    return er_loss_with_exponent(preds, completed_labels, old_classes, decay_exponent(beta, total_class_count));
}

LossWeights composite_weights(bool has_old_model, bool has_replay, double lambda_akd, double lambda_er) {
    LossWeights w;
    if (has_old_model) {
        w.classification = lambda_akd;
        w.distillation = 1.0 - lambda_akd;
    }
    w.replay = has_replay ? lambda_er : 0.0;
    return w;
}

double total_loss(double l_cls, std::optional<double> l_akd, std::optional<double> l_er, double lambda_akd,
                  double lambda_er) {
    const LossWeights w = composite_weights(l_akd.has_value(), l_er.has_value(), lambda_akd, lambda_er);
    double total = w.classification * l_cls;
    if (l_akd) total += w.distillation * *l_akd;
    if (l_er) total += w.replay * *l_er;
    return total;
}

}  // namespace mlcil

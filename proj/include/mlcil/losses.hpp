#pragma once

// Per-sample multi-label losses. Every function sums per-class terms over the
// given class set and returns the value together with d(loss)/d(prediction).
// The gradient vector always has one entry per model output; entries for
// classes outside the summed set are exactly zero.
//
// Probabilities are assumed to be clamped into (0, 1) by the model.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "mlcil/labels.hpp"

namespace mlcil {

enum class LogBase { natural, base10 };
enum class DecayMode { adaptive, fixed };

struct LossHyperParams {
    double alpha = 1.2;
    double beta = 0.7;
    double lambda_akd = 0.15;
    double lambda_er = 0.30;
    LogBase log_base = LogBase::natural;
    DecayMode decay = DecayMode::adaptive;

    // alpha, beta >= 0 (0 is the explicit plain-BCE/KD switch),
    // lambda_akd in [0, 1], lambda_er >= 0. Throws ConfigError.
    void validate() const;
};

struct LossValue {
    double value = 0.0;
    std::vector<double> gradient;
};

// coef * log(class_count). Throws std::domain_error for class_count == 0.
double decay_exponent(double coef, std::size_t class_count, LogBase base = LogBase::natural);

// Exponent actually used in training: coef * log|C^{1:t}| in adaptive mode,
// the bare coefficient in fixed mode.
double training_exponent(const LossHyperParams& params, double coef, std::size_t class_count);

LossValue bce_loss(std::span<const double> preds, const TriStateLabelVector& labels,
                   std::span<const std::size_t> classes);

LossValue kd_loss(std::span<const double> new_preds, std::span<const double> old_preds,
                  std::span<const std::size_t> old_classes);

// Positive terms are scaled by (1 - p)^gamma; negatives stay plain BCE.
LossValue cls_loss(std::span<const double> preds, const TriStateLabelVector& labels,
                   std::span<const std::size_t> classes, double alpha, std::size_t total_class_count);
LossValue cls_loss_with_exponent(std::span<const double> preds, const TriStateLabelVector& labels,
                                 std::span<const std::size_t> classes, double gamma);

// Soft-target positive terms are scaled by (1 - p_new)^gamma.
LossValue akd_loss(std::span<const double> new_preds, std::span<const double> old_preds,
                   std::span<const std::size_t> old_classes, double alpha, std::size_t total_class_count);
LossValue akd_loss_with_exponent(std::span<const double> new_preds, std::span<const double> old_preds,
                                 std::span<const std::size_t> old_classes, double gamma);

// Negative terms are scaled by p^gamma; positives stay plain BCE.
// Throws RelabelIncompleteError when an old class is still missing.
LossValue er_loss(std::span<const double> preds, const TriStateLabelVector& completed_labels,
                  std::span<const std::size_t> old_classes, double beta, std::size_t total_class_count);
LossValue er_loss_with_exponent(std::span<const double> preds, const TriStateLabelVector& completed_labels,
                                std::span<const std::size_t> old_classes, double gamma);

struct LossWeights {
    double classification = 1.0;
    double distillation = 0.0;
    double replay = 0.0;
};

// Weights of the composite objective. Without an old model the
// classification loss is unscaled and distillation is off; without a
// replay batch the replay weight is zero.
LossWeights composite_weights(bool has_old_model, bool has_replay, double lambda_akd, double lambda_er);

// lambda_akd * cls + (1 - lambda_akd) * akd + lambda_er * er, with absent
// terms handled as in composite_weights.
double total_loss(double l_cls, std::optional<double> l_akd, std::optional<double> l_er, double lambda_akd,
                  double lambda_er);

}  // namespace mlcil

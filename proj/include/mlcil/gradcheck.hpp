#pragma once

// Finite-difference validation of every training loss, as used by the
// `check-grads` CLI command and the test suites.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mlcil/labels.hpp"
#include "mlcil/matrix.hpp"
#include "mlcil/numeric.hpp"

namespace mlcil {

enum class LossKind { bce, kd, cls, akd, er, composite };

std::string to_string(LossKind kind);
const std::vector<LossKind>& all_loss_kinds();

// One random model + batch. Current-task classes are the upper half of the
// outputs, old classes the lower half.
struct GradDraw {
    ClassifierModel model;
    ClassifierModel old_model;
    Matrix features;
    std::vector<TriStateLabelVector> labels;  // masked to current classes
    Matrix replay_features;
    std::vector<TriStateLabelVector> replay_labels;  // annotated over old classes
    ClassSet current;
    ClassSet old_classes;
    double gamma_pos = 0.0;
    double gamma_neg = 0.0;
    double lambda_akd = 0.15;
    double lambda_er = 0.30;
};

GradDraw random_grad_draw(std::uint64_t seed);

// Batch-mean loss of the given kind as a function of the model parameters.
LossClosure make_loss_closure(LossKind kind, const GradDraw& draw);

struct LossCheckSummary {
    LossKind kind;
    std::size_t draws = 0;
    GradCheckReport worst;
    bool passed = true;
};

std::vector<LossCheckSummary> check_loss_gradients(std::size_t draws, std::uint64_t seed, double tolerance);

}  // namespace mlcil

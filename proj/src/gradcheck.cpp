#include "mlcil/gradcheck.hpp"

#include <random>

#include "mlcil/kernels.hpp"
#include "mlcil/losses.hpp"

namespace mlcil {

std::string to_string(LossKind kind) {
    switch (kind) {
    case LossKind::bce: return "L_bce";
    case LossKind::kd: return "L_kd";
    case LossKind::cls: return "L_cls";
    case LossKind::akd: return "L_akd";
    case LossKind::er: return "L_er";
    case LossKind::composite: return "L_total";
    }
    return "?";
}

const std::vector<LossKind>& all_loss_kinds() {
    static const std::vector<LossKind> kinds{LossKind::bce, LossKind::kd, LossKind::cls,
                                             LossKind::akd, LossKind::er, LossKind::composite};
    return kinds;
}

GradDraw random_grad_draw(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> dim(3, 6);
    const std::size_t inputs = dim(rng);
    const std::size_t hidden = dim(rng);
    const std::size_t outputs = 2 * std::uniform_int_distribution<std::size_t>(1, 3)(rng);
    const std::size_t batch = std::uniform_int_distribution<std::size_t>(1, 5)(rng);

    GradDraw d{ClassifierModel::random(inputs, hidden, outputs, rng()),
               ClassifierModel::random(inputs, hidden, outputs, rng()),
               Matrix(batch, inputs),
               {},
               Matrix(batch, inputs),
               {},
               {},
               {}};
    std::normal_distribution<double> gauss(0.0, 1.0);
    // Non-zero biases so no parameter sits at a symmetric point.
    auto params = d.model.parameters();
    for (std::size_t i = d.model.b1_offset(); i < d.model.w2_offset(); ++i) params[i] = 0.3 * gauss(rng);
    for (std::size_t i = d.model.b2_offset(); i < params.size(); ++i) params[i] = 0.3 * gauss(rng);
    for (double& v : d.features.data()) v = gauss(rng);
    for (double& v : d.replay_features.data()) v = gauss(rng);

    for (std::size_t c = 0; c < outputs / 2; ++c) d.old_classes.push_back(c);
    for (std::size_t c = outputs / 2; c < outputs; ++c) d.current.push_back(c);

    std::bernoulli_distribution coin(0.5);
    for (std::size_t i = 0; i < batch; ++i) {
        TriStateLabelVector y(outputs);
        for (std::size_t c : d.current) y.set(c, coin(rng) ? Label::positive : Label::negative);
        d.labels.push_back(y);
        TriStateLabelVector yr(outputs);
        for (std::size_t c : d.old_classes) yr.set(c, coin(rng) ? Label::positive : Label::negative);
        d.replay_labels.push_back(yr);
    }
    std::uniform_real_distribution<double> coef(0.2, 2.0);
    const std::size_t seen = outputs;
    d.gamma_pos = decay_exponent(coef(rng), seen);
    d.gamma_neg = decay_exponent(coef(rng), seen);
    return d;
}

LossClosure make_loss_closure(LossKind kind, const GradDraw& draw) {
    return [kind, &draw](const ClassifierModel& model, std::vector<double>* analytic) {
        const std::size_t outputs = model.output_dim();
        const std::size_t batch = draw.features.rows();
        const double inv = 1.0 / static_cast<double>(batch);
        const Matrix probs = kernels::forward_batch_serial(model, draw.features);
        const Matrix old_probs = kernels::forward_batch_serial(draw.old_model, draw.features);

        const bool composite = kind == LossKind::composite;
        const LossWeights w = composite_weights(composite, composite, draw.lambda_akd, draw.lambda_er);

        double total = 0.0;
        Matrix grads(batch, outputs);
        auto accumulate = [&](std::size_t row, const LossValue& lv, double weight) {
            total += weight * lv.value * inv;
            auto g = grads.row(row);
            for (std::size_t c = 0; c < outputs; ++c) g[c] += weight * lv.gradient[c] * inv;
        };
        for (std::size_t i = 0; i < batch; ++i) {
            const auto p = probs.row(i);
            const auto q = old_probs.row(i);
            switch (kind) {
            case LossKind::bce: accumulate(i, bce_loss(p, draw.labels[i], draw.current), 1.0); break;
            case LossKind::kd: accumulate(i, kd_loss(p, q, draw.old_classes), 1.0); break;
            case LossKind::cls:
                accumulate(i, cls_loss_with_exponent(p, draw.labels[i], draw.current, draw.gamma_pos), 1.0);
                break;
            case LossKind::akd:
                accumulate(i, akd_loss_with_exponent(p, q, draw.old_classes, draw.gamma_pos), 1.0);
                break;
            case LossKind::er: break;
            case LossKind::composite:
                accumulate(i, cls_loss_with_exponent(p, draw.labels[i], draw.current, draw.gamma_pos),
                           w.classification);
                accumulate(i, akd_loss_with_exponent(p, q, draw.old_classes, draw.gamma_pos), w.distillation);
                break;
            }
        }

        Matrix replay_grads(batch, outputs);
        const bool replay = kind == LossKind::er || composite;
        if (replay) {
            const double weight = composite ? w.replay : 1.0;
            const Matrix rp = kernels::forward_batch_serial(model, draw.replay_features);
            for (std::size_t i = 0; i < batch; ++i) {
                const LossValue lv =
                    er_loss_with_exponent(rp.row(i), draw.replay_labels[i], draw.old_classes, draw.gamma_neg);
                total += weight * lv.value * inv;
                auto g = replay_grads.row(i);
                for (std::size_t c = 0; c < outputs; ++c) g[c] = weight * lv.gradient[c] * inv;
            }
        }

        if (analytic) {
            if (kind == LossKind::er) {
                *analytic = kernels::backward_batch_serial(model, draw.replay_features, replay_grads);
            } else {
                *analytic = kernels::backward_batch_serial(model, draw.features, grads);
                if (replay) {
                    const auto rg = kernels::backward_batch_serial(model, draw.replay_features, replay_grads);
                    for (std::size_t k = 0; k < rg.size(); ++k) (*analytic)[k] += rg[k];
                }
            }
        }
        return total;
    };
}

std::vector<LossCheckSummary> check_loss_gradients(std::size_t draws, std::uint64_t seed, double tolerance) {
    std::vector<LossCheckSummary> out;
    for (LossKind kind : all_loss_kinds()) {
        LossCheckSummary summary{kind, 0, {}, true};
        for (std::size_t i = 0; i < draws; ++i) {
            const GradDraw draw = random_grad_draw(seed + i);
            const GradCheckReport report = grad_check(make_loss_closure(kind, draw), draw.model, tolerance);
            if (summary.draws == 0 || report.max_relative_error > summary.worst.max_relative_error) {
                summary.worst = report;
            }
            ++summary.draws;
            summary.passed = summary.passed && report.passed;
        }
        out.push_back(summary);
    }
    return out;
}

}  // namespace mlcil

#include "mlcil/kernels.hpp"

#include <algorithm>
#include <string>

#include "mlcil/errors.hpp"

namespace mlcil::kernels {

namespace {

void check_inputs(const ClassifierModel& model, const Matrix& inputs) {
    if (inputs.cols() != model.input_dim()) {
        throw ShapeError("batch has " + std::to_string(inputs.cols()) + " feature columns, model expects " +
                         std::to_string(model.input_dim()));
    }
}

void check_gradients(const ClassifierModel& model, const Matrix& inputs, const Matrix& output_gradients) {
    check_inputs(model, inputs);
    if (output_gradients.rows() != inputs.rows() || output_gradients.cols() != model.output_dim()) {
        throw ShapeError("output gradient matrix does not match batch x outputs");
    }
}

}  // namespace

Matrix forward_batch_serial(const ClassifierModel& model, const Matrix& inputs) {
    check_inputs(model, inputs);
    Matrix probs(inputs.rows(), model.output_dim());
    std::vector<double> hidden(model.hidden_dim());
    for (std::size_t r = 0; r < inputs.rows(); ++r) {
        model.forward_into(inputs.row(r), hidden, probs.row(r));
    }
    return probs;
}

Matrix forward_batch(const ClassifierModel& model, const Matrix& inputs) {
    check_inputs(model, inputs);
    Matrix probs(inputs.rows(), model.output_dim());
    const auto rows = static_cast<std::ptrdiff_t>(inputs.rows());
#pragma omp parallel
    {
        std::vector<double> hidden(model.hidden_dim());
#pragma omp for schedule(static)
        for (std::ptrdiff_t r = 0; r < rows; ++r) {
            const auto row = static_cast<std::size_t>(r);
            model.forward_into(inputs.row(row), hidden, probs.row(row));
        }
    }
    return probs;
}

std::vector<double> backward_batch_serial(const ClassifierModel& model, const Matrix& inputs,
                                          const Matrix& output_gradients) {
    check_gradients(model, inputs, output_gradients);
    std::vector<double> grads(model.parameter_count(), 0.0);
    std::vector<double> hidden(model.hidden_dim());
    std::vector<double> probs(model.output_dim());
    std::vector<double> scratch(model.hidden_dim());
    for (std::size_t r = 0; r < inputs.rows(); ++r) {
        model.forward_into(inputs.row(r), hidden, probs);
        model.accumulate_backward(inputs.row(r), hidden, probs, output_gradients.row(r), grads, scratch);
    }
    return grads;
}

std::vector<double> backward_batch(const ClassifierModel& model, const Matrix& inputs,
                                   const Matrix& output_gradients) {
    check_gradients(model, inputs, output_gradients);
    const std::size_t n_params = model.parameter_count();
    const std::size_t n_blocks = (inputs.rows() + kBlockRows - 1) / kBlockRows;
    std::vector<double> partials(n_blocks * n_params, 0.0);
    const auto blocks = static_cast<std::ptrdiff_t>(n_blocks);
#pragma omp parallel
    {
        std::vector<double> hidden(model.hidden_dim());
        std::vector<double> probs(model.output_dim());
        std::vector<double> scratch(model.hidden_dim());
#pragma omp for schedule(static)
        for (std::ptrdiff_t b = 0; b < blocks; ++b) {
            const auto block = static_cast<std::size_t>(b);
            std::span<double> acc(partials.data() + block * n_params, n_params);
            const std::size_t end = std::min(inputs.rows(), (block + 1) * kBlockRows);
            for (std::size_t r = block * kBlockRows; r < end; ++r) {
                model.forward_into(inputs.row(r), hidden, probs);
                model.accumulate_backward(inputs.row(r), hidden, probs, output_gradients.row(r), acc, scratch);
            }
        }
    }
    std::vector<double> grads(n_params, 0.0);
    for (std::size_t block = 0; block < n_blocks; ++block) {
        const double* src = partials.data() + block * n_params;
        for (std::size_t i = 0; i < n_params; ++i) grads[i] += src[i];
    }
    return grads;
}

}  // namespace mlcil::kernels

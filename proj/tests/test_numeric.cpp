#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "mlcil/errors.hpp"
#include "mlcil/numeric.hpp"

using namespace mlcil;

namespace {

// 3 inputs, 2 hidden, 2 outputs with hand-picked parameters.
ClassifierModel tiny_model() {
    ClassifierModel m(3, 2, 2);
    const std::vector<double> p{0.5, -0.25, 0.125, -0.75, 0.3, 0.6,  // w1
                                0.1, -0.2,                          // b1
                                1.5, -2.0, 0.7, 0.9,                // w2
                                0.05, -0.3};                        // b2
    std::copy(p.begin(), p.end(), m.parameters().begin());
    return m;
}

}  // namespace

TEST_CASE("zero parameters give 0.5 everywhere") {
    ClassifierModel m(4, 3, 5);
    const auto p = m.forward(std::vector<double>{1.0, -3.0, 2.5, 100.0});
    for (double v : p) CHECK(v == 0.5);
}

TEST_CASE("huge logits are clamped") {
    CHECK(clamped_logistic(1e6) == 1.0 - kProbEpsilon);
    CHECK(clamped_logistic(-1e6) == kProbEpsilon);
    ClassifierModel m(1, 1, 1);
    m.parameters()[m.b2_offset()] = 1e4;
    CHECK(m.forward(std::vector<double>{0.0})[0] == 1.0 - kProbEpsilon);
}

TEST_CASE("forward matches the multiprecision recomputation") {
    const auto p = tiny_model().forward(std::vector<double>{1.0, -2.0, 0.5});
    CHECK(std::abs(p[0] - 0.95163230973923130348) < 1e-12);
    CHECK(std::abs(p[1] - 0.38032754106172308716) < 1e-12);
}

TEST_CASE("forward matches a straight-line recomputation on a random model") {
    const auto m = ClassifierModel::random(7, 5, 4, 99);
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g;
    std::vector<double> x(7);
    for (double& v : x) v = g(rng);
    const auto p = m.forward(x);
    for (std::size_t k = 0; k < 4; ++k) {
        double z = m.b2()[k];
        for (std::size_t j = 0; j < 5; ++j) {
            double a = m.b1()[j];
            for (std::size_t i = 0; i < 7; ++i) a += m.w1()[j * 7 + i] * x[i];
            z += m.w2()[k * 5 + j] * std::tanh(a);
        }
        CHECK(std::abs(p[k] - 1.0 / (1.0 + std::exp(-z))) < 1e-12);
    }
}

TEST_CASE("forward rejects a wrong input width") {
    CHECK_THROWS_AS(tiny_model().forward(std::vector<double>{1.0, 2.0}), ShapeError);
}

TEST_CASE("backward of -ln p0 matches the hand derivation") {
    const auto m = tiny_model();
    const std::vector<double> x{1.0, -2.0, 0.5};
    const auto p = m.forward(x);
    const auto g = backward(m, x, std::vector<double>{-1.0 / p[0], 0.0});
    const std::vector<double> expected{-0.023547162183725851043, 0.047094324367451702087, -0.011773581091862925522,
                                       0.027126038783860137088,  -0.054252077567720274176, 0.013563019391930068544,
                                       -0.023547162183725851043, 0.027126038783860137088,  -0.039751128660873271946,
                                       0.041029520350742416078,  0.0,                      0.0,
                                       -0.048367690260768696525, 0.0};
    REQUIRE(g.size() == expected.size());
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(std::abs(g[i] - expected[i]) < 1e-12);
}

TEST_CASE("1x1x1 network chain rule") {
    ClassifierModel m(1, 1, 1);
    auto p = m.parameters();
    p[0] = 0.8;   // w1
    p[1] = -0.1;  // b1
    p[2] = 1.7;   // w2
    p[3] = 0.2;   // b2
    const double x = 0.6;
    const double h = std::tanh(0.8 * x - 0.1);
    const double y = 1.0 / (1.0 + std::exp(-(1.7 * h + 0.2)));
    const double dz = 2.5 * y * (1.0 - y);  // dL/dy = 2.5
    const auto g = backward(m, std::vector<double>{x}, std::vector<double>{2.5});
    CHECK(g[3] == doctest::Approx(dz).epsilon(1e-14));
    CHECK(g[2] == doctest::Approx(dz * h).epsilon(1e-14));
    CHECK(g[1] == doctest::Approx(dz * 1.7 * (1 - h * h)).epsilon(1e-14));
    CHECK(g[0] == doctest::Approx(dz * 1.7 * (1 - h * h) * x).epsilon(1e-14));
}

TEST_CASE("zero output gradient gives zero parameter gradient") {
    const auto m = ClassifierModel::random(4, 3, 2, 1);
    const auto g = backward(m, std::vector<double>{1, 2, 3, 4}, std::vector<double>{0.0, 0.0});
    for (double v : g) CHECK(v == 0.0);
}

TEST_CASE("saturated outputs pass no gradient") {
    ClassifierModel m(1, 1, 1);
    m.parameters()[m.b2_offset()] = 100.0;
    const auto g = backward(m, std::vector<double>{1.0}, std::vector<double>{1.0});
    for (double v : g) CHECK(v == 0.0);
}

TEST_CASE("backward matches finite differences on random models") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto m = ClassifierModel::random(5, 4, 3, seed);
        std::mt19937_64 rng(seed + 1000);
        std::normal_distribution<double> g;
        std::vector<double> x(5), w(3);
        for (double& v : x) v = g(rng);
        for (double& v : w) v = g(rng);
        // L = sum_k w_k * p_k
        const LossClosure loss = [&](const ClassifierModel& model, std::vector<double>* grad) {
            const auto p = model.forward(x);
            if (grad) *grad = backward(model, x, w);
            double s = 0.0;
            for (std::size_t k = 0; k < 3; ++k) s += w[k] * p[k];
            return s;
        };
        const auto report = grad_check(loss, m, 1e-5);
        CHECK_MESSAGE(report.passed, "seed ", seed, " worst ", report.worst_parameter, " rel ",
                      report.max_relative_error);
    }
}

TEST_CASE("grad_check on a quadratic") {
    ClassifierModel m(2, 2, 1);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (double& v : m.parameters()) v = u(rng);
    const LossClosure quad = [](const ClassifierModel& model, std::vector<double>* grad) {
        double s = 0.0;
        const auto p = model.parameters();
        if (grad) grad->assign(p.size(), 0.0);
        for (std::size_t i = 0; i < p.size(); ++i) {
            s += 0.5 * (i + 1) * p[i] * p[i];
            if (grad) (*grad)[i] = (i + 1) * p[i];
        }
        return s;
    };
    const auto report = grad_check(quad, m, 1e-8);
    CHECK(report.passed);
    CHECK(report.max_relative_error <= 1e-8);
    CHECK(report.checked == m.parameter_count());
}

TEST_CASE("grad_check reports a wrong gradient and its location") {
    ClassifierModel m(2, 2, 1);
    for (double& v : m.parameters()) v = 0.5;
    const LossClosure wrong = [](const ClassifierModel& model, std::vector<double>* grad) {
        const auto p = model.parameters();
        if (grad) {
            grad->assign(p.size(), 0.0);
            for (std::size_t i = 0; i < p.size(); ++i) (*grad)[i] = p[i];
            (*grad)[model.w2_offset()] *= 2.0;
        }
        double s = 0.0;
        for (double v : p) s += 0.5 * v * v;
        return s;
    };
    const auto report = grad_check(wrong, m, 1e-5);
    CHECK_FALSE(report.passed);
    CHECK(report.worst_index == m.w2_offset());
    CHECK(report.worst_parameter == "w2[0,0]");
}

TEST_CASE("grad_check names the perturbation that made the loss non-finite") {
    ClassifierModel m(1, 1, 1);
    const LossClosure blowup = [](const ClassifierModel& model, std::vector<double>* grad) {
        const auto p = model.parameters();
        if (grad) grad->assign(p.size(), 0.0);
        return p[model.b2_offset()] > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    };
    CHECK_THROWS_WITH_AS(grad_check(blowup, m, 1e-5), doctest::Contains("b2[0]"), NumericalError);
}

TEST_CASE("Adam first step closed form") {
    ClassifierModel m(1, 1, 1);
    auto p = m.parameters();
    p[0] = 1.0;
    OptimizerState st(m.parameter_count(), AdamConfig{0.1, 0.9, 0.999, 1e-8, 0.0});
    optimizer_step(m, std::vector<double>{1.0, 0.0, 0.0, 0.0}, st);
    CHECK(std::abs(m.parameters()[0] - 0.90000000099999999) < 1e-15);
    CHECK(st.step == 1);
    CHECK(m.parameters()[1] == 0.0);
}

TEST_CASE("weight decay alone shrinks by the decay-induced update") {
    ClassifierModel m(1, 1, 1);
    m.parameters()[0] = 2.0;
    OptimizerState st(m.parameter_count(), AdamConfig{0.01, 0.9, 0.999, 1e-8, 1e-4});
    optimizer_step(m, std::vector<double>(4, 0.0), st);
    CHECK(std::abs(m.parameters()[0] - 1.9900004999750012499) < 1e-14);
}

TEST_CASE("zero gradient and zero decay leave parameters alone while moments decay") {
    auto m = ClassifierModel::random(3, 2, 2, 4);
    const auto before = m;
    OptimizerState st(m.parameter_count(), AdamConfig{0.01, 0.9, 0.999, 1e-8, 0.0});
    std::vector<double> g(m.parameter_count(), 0.0);
    g[0] = 1.0;
    optimizer_step(m, g, st);
    const double m1 = st.first_moment[0];
    const double v1 = st.second_moment[0];
    const auto after_first = m;
    std::fill(g.begin(), g.end(), 0.0);
    for (std::size_t i = 1; i < m.parameter_count(); ++i) CHECK(m.parameters()[i] == before.parameters()[i]);
    optimizer_step(m, g, st);
    CHECK(st.first_moment[0] == doctest::Approx(0.9 * m1));
    CHECK(st.second_moment[0] == doctest::Approx(0.999 * v1));
    CHECK(st.step == 2);
    for (std::size_t i = 1; i < m.parameter_count(); ++i) CHECK(m.parameters()[i] == after_first.parameters()[i]);
}

TEST_CASE("non-finite gradients are rejected with the parameter name") {
    auto m = ClassifierModel::random(2, 2, 2, 1);
    OptimizerState st(m.parameter_count());
    std::vector<double> g(m.parameter_count(), 0.0);
    g[m.b1_offset() + 1] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_WITH_AS(optimizer_step(m, g, st), doctest::Contains("b1[1]"), NumericalError);
    CHECK(st.step == 0);
    g.pop_back();
    CHECK_THROWS_AS(optimizer_step(m, g, st), ShapeError);
}

TEST_CASE("snapshot is frozen") {
    auto m = ClassifierModel::random(4, 3, 2, 8);
    const auto snap = snapshot(m, 1);
    CHECK(snap.model() == m);
    CHECK(snap.task() == 1);
    const std::vector<double> x{0.3, -1.0, 2.0, 0.1};
    const auto before = snap.forward(x);
    CHECK(before == m.forward(x));
    const auto hash = parameter_hash(snap.model());

    OptimizerState st(m.parameter_count());
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g;
    for (int step = 0; step < 10; ++step) {
        std::vector<double> grad(m.parameter_count());
        for (double& v : grad) v = g(rng);
        optimizer_step(m, grad, st);
    }
    CHECK(parameter_hash(m) != hash);
    CHECK(parameter_hash(snap.model()) == hash);
    CHECK(snap.forward(x) == before);

    const auto again = snapshot(snap.model(), 1);
    CHECK(again.forward(x) == before);
}

TEST_CASE("same seed gives bit-identical parameters after N steps") {
    auto run = [] {
        auto m = ClassifierModel::random(6, 4, 3, 77);
        OptimizerState st(m.parameter_count());
        std::mt19937_64 rng(2);
        std::normal_distribution<double> g;
        std::vector<double> x(6);
        for (int step = 0; step < 25; ++step) {
            for (double& v : x) v = g(rng);
            optimizer_step(m, backward(m, x, std::vector<double>{1.0, -0.5, 0.25}), st);
        }
        return m;
    };
    CHECK(run() == run());
    CHECK(ClassifierModel::random(6, 4, 3, 1) != ClassifierModel::random(6, 4, 3, 2));
}

TEST_CASE("parameter names") {
    ClassifierModel m(3, 2, 4);
    CHECK(m.parameter_name(0) == "w1[0,0]");
    CHECK(m.parameter_name(5) == "w1[1,2]");
    CHECK(m.parameter_name(m.b1_offset() + 1) == "b1[1]");
    CHECK(m.parameter_name(m.w2_offset() + 7) == "w2[3,1]");
    CHECK(m.parameter_name(m.b2_offset() + 3) == "b2[3]");
}

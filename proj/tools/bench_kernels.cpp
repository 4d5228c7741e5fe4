// Serial vs OpenMP batch kernels. Usage: bench_kernels [rows] [repeats]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <random>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "mlcil/kernels.hpp"

using h_clock = std::chrono::steady_clock;

template <typename F>
double seconds(F&& f, int repeats) {
    const auto t1 = h_clock::now();
    for (int i = 0; i < repeats; ++i) f();
    const auto t2 = h_clock::now();
    return std::chrono::duration<double>(t2 - t1).count() / repeats;
}

int main(int argc, char** argv) {
    const std::size_t rows = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 4096;
    const int repeats = argc > 2 ? std::atoi(argv[2]) : 20;
    const std::size_t d = 32, h = 64, c = 12;

    const auto model = mlcil::ClassifierModel::random(d, h, c, 7);
    mlcil::Matrix x(rows, d);
    mlcil::Matrix g(rows, c);
    std::mt19937_64 rng(11);
    std::normal_distribution<double> gauss;
    for (double& v : x.data()) v = gauss(rng);
    for (double& v : g.data()) v = gauss(rng);

#ifdef _OPENMP
    std::printf("threads: %d\n", omp_get_max_threads());
#endif
    std::printf("rows=%zu d=%zu hidden=%zu outputs=%zu repeats=%d\n", rows, d, h, c, repeats);

    volatile double sink = 0.0;
    const double fs = seconds([&] { sink = sink + mlcil::kernels::forward_batch_serial(model, x)(0, 0); }, repeats);
    const double fp = seconds([&] { sink = sink + mlcil::kernels::forward_batch(model, x)(0, 0); }, repeats);
    const double bs = seconds([&] { sink = sink + mlcil::kernels::backward_batch_serial(model, x, g)[0]; }, repeats);
    const double bp = seconds([&] { sink = sink + mlcil::kernels::backward_batch(model, x, g)[0]; }, repeats);

    std::printf("%-10s %12s %12s %8s\n", "kernel", "serial [ms]", "omp [ms]", "speedup");
    std::printf("%-10s %12.3f %12.3f %8.2f\n", "forward", 1e3 * fs, 1e3 * fp, fs / fp);
    std::printf("%-10s %12.3f %12.3f %8.2f\n", "backward", 1e3 * bs, 1e3 * bp, bs / bp);
    return 0;
}

// Measures a mildly overconfident predictor and prints each value.

#include <cstdio>

#include "calib/calib.hpp"

int main() {
    using namespace calib;
    const auto dist = gen_dbeta({/*beta=*/2.0, /*n=*/20000, SeededRng(7)});

    KernelEstimatorConfig kcfg;
    kcfg.mode = KernelMode::Exact;
    IntervalEstimatorConfig icfg;
    icfg.epsilon = 0.05;
    icfg.rng = SeededRng(11);

    std::printf("binned ECE (20 bins)  %.6f\n", binned_ece(dist, uniform_partition(20)));
    std::printf("interval CE           %.6f\n", sintce_hat(dist, icfg));
    std::printf("smooth CE             %.6f\n", smce(dist));
    std::printf("laplace kernel CE     %.6f\n", kce_estimate(dist, KernelKind::Laplace, kcfg));
    std::printf("lower distance CE     %.6f\n", ldce(dist, 0.02, 0.02));
}

// Timing comparison between the OpenMP kernels and the serial reference on
// training-sized workloads. Not part of the test suite; build and run the
// hvq_bench target directly.

#include <chrono>
#include <cstdio>
#include <random>

#include <omp.h>

#include "hvq/kernels.hpp"

using namespace hvq;
using namespace hvq::kernels;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

template <typename F>
double time_best_of(int reps, F&& fn) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto start = Clock::now();
        fn();
        best = std::min(best, seconds_since(start));
    }
    return best;
}

}  // namespace

int main() {
    const int T = 2048, cin = 64, cout = 64, dilation = 8, P = 64, D = 32;
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> dist(-1, 1);

    SeqTensor x(T, cin);
    for (double& v : x.data) v = dist(rng);
    std::vector<double> kernel(3 * cin * cout), bias(cout);
    for (double& v : kernel) v = dist(rng);
    for (double& v : bias) v = dist(rng);
    SeqTensor gy(T, cout);
    for (double& v : gy.data) v = dist(rng);
    SeqTensor e(T, D), protos(P, D);
    for (double& v : e.data) v = dist(rng);
    for (double& v : protos.data) v = dist(rng);

    std::printf("threads: %d, workload: T=%d cin=%d cout=%d dilation=%d\n", omp_get_max_threads(),
                T, cin, cout, dilation);

    const double fwd_omp =
        time_best_of(5, [&] { conv1d3_forward(x, kernel, bias, cout, dilation); });
    const double fwd_ser =
        time_best_of(5, [&] { serial::conv1d3_forward(x, kernel, bias, cout, dilation); });
    std::printf("conv1d3 forward   omp %8.3f ms   serial %8.3f ms   speedup %.2fx\n",
                fwd_omp * 1e3, fwd_ser * 1e3, fwd_ser / fwd_omp);

    SeqTensor gx;
    std::vector<double> gw, gb;
    const double bwd_omp =
        time_best_of(5, [&] { conv1d3_backward(gy, x, kernel, cout, dilation, gx, gw, gb); });
    const double bwd_ser = time_best_of(
        5, [&] { serial::conv1d3_backward(gy, x, kernel, cout, dilation, gx, gw, gb); });
    std::printf("conv1d3 backward  omp %8.3f ms   serial %8.3f ms   speedup %.2fx\n",
                bwd_omp * 1e3, bwd_ser * 1e3, bwd_ser / bwd_omp);

    std::vector<double> w1(cin * cout);
    for (double& v : w1) v = dist(rng);
    const double p_omp = time_best_of(5, [&] { conv1x1_forward(x, w1, bias, cout); });
    const double p_ser = time_best_of(5, [&] { serial::conv1x1_forward(x, w1, bias, cout); });
    std::printf("conv1x1 forward   omp %8.3f ms   serial %8.3f ms   speedup %.2fx\n", p_omp * 1e3,
                p_ser * 1e3, p_ser / p_omp);

    const double a_omp = time_best_of(5, [&] { cosine_argmax_rows(e, protos); });
    const double a_ser = time_best_of(5, [&] { serial::cosine_argmax_rows(e, protos); });
    std::printf("cosine argmax     omp %8.3f ms   serial %8.3f ms   speedup %.2fx\n", a_omp * 1e3,
                a_ser * 1e3, a_ser / a_omp);

    // sanity: both paths agree bitwise
    SeqTensor y1 = conv1d3_forward(x, kernel, bias, cout, dilation);
    SeqTensor y2 = serial::conv1d3_forward(x, kernel, bias, cout, dilation);
    std::printf("bitwise agreement: %s\n", y1.data == y2.data ? "yes" : "NO");
    return y1.data == y2.data ? 0 : 1;
}

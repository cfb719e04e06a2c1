// Noiseless QGT on an SC(6,40) design: SC-AMP against its state evolution.

#include <cstdio>

#include "scamp.hpp"

int main() {
    using namespace scamp;
    const double pi = 0.3;
    const BaseMatrix base = build_base_matrix(6, 40, 0.5);
    const Dimensions dm = round_dimensions(base, 0.45, 8000);
    const Design design = Design::sample(base, dm.n, dm.p, 1);

    const Vector beta = sample_qgt_signal(dm.p, pi, 1);
    const QgtInstance inst = observe_qgt(design, beta, 0.0, NoiseScaling::raw_variance, 1);

    QgtAmpOptions opt;
    opt.truth = &beta;
    const QgtAmpResult res = run_sc_amp_qgt(design, inst.yt, pi, inst.sigma2, opt);
    const Vector q = quantize(res.beta_hat);

    const ScalarSeResult se = iterate_scalar_se(base, dm.delta_actual, pi, 0.0);
    const SePrediction pred = se_predict_metrics(se);

    std::printf("n=%ld p=%ld delta=%.4f iterations=%d\n", static_cast<long>(dm.n),
                static_cast<long>(dm.p), dm.delta_actual, res.iterations);
    std::printf("mse        amp %.3e  se %.3e\n", mse(res.beta_hat, beta), pred.mse);
    std::printf("corr       amp %.6f  se %.6f\n", normalized_sq_correlation(res.beta_hat, beta),
                pred.correlation);
    std::printf("hamming    %.3e\n", hamming_error_rate(q, beta));
    return 0;
}

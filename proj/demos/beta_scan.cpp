// Short single-chain runs at a few beta values, compared with the
// closed-form length scales. Small enough to finish in seconds.

#include <vortexfil/meanfield.hpp>
#include <vortexfil/observables.hpp>
#include <vortexfil/sampler.hpp>

#include <cstdio>

int main()
{
    using namespace vortexfil;
    SamplerConfig sc;
    sc.max_bisection_level = 4;
    sc.translate_radius = 0.01;
    sc.seed = 7;

    std::printf("%10s %14s %14s %14s %10s\n", "beta", "r2_mc", "r2_3d", "r2_2d", "slope");
    for (double beta : {10.0, 1.0, 0.1, 0.01, 0.001}) {
        const SystemParams params(1e7, beta, 2000.0, 10.0, 10, 64);
        Chain chain = Chain::from_random_start(params, sc);
        for (int s = 0; s < 5000; ++s)
            chain.sweep();
        RunningStats r2, a2;
        for (int s = 0; s < 5000; ++s) {
            chain.sweep();
            r2.accumulate(mean_square_position(chain.state(), params));
            a2.accumulate(mean_square_amplitude(chain.state(), params));
        }
        const auto mf = meanfield_inputs(params);
        std::printf("%10.4g %14.6g %14.6g %14.6g %10.4g\n", beta, r2.mean(), r_squared_3d(mf),
                    r_squared_2d(mf.n_filaments, beta, mf.mu),
                    slope_from_amplitude(a2.mean(), params.delta()));
    }
}

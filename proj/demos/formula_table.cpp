// Prints the mean-field and point-vortex length scales across beta for the
// desk-scale system, together with the turning point.

#include <vortexfil/meanfield.hpp>

#include <cstdio>

int main()
{
    using namespace vortexfil;
    MeanFieldInputs in{1e7, 1.0, 2000.0, 10.0, 10.0};
    std::printf("beta0 = %.6g\n\n%12s %14s %14s\n", beta_turning_point(in), "beta", "r2_3d",
                "r2_2d");
    for (double beta : {100.0, 10.0, 1.0, 0.3, 0.1, 0.03, 0.02, 0.01, 0.003, 0.001}) {
        in.beta = beta;
        std::printf("%12.6g %14.6g %14.6g\n", beta, r_squared_3d(in),
                    r_squared_2d(in.n_filaments, beta, in.mu));
    }
}

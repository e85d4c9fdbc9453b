/* Compile-as-C smoke test: the public header must work from plain C. */

#include <dode/dode.h>

#include <math.h>
#include <stdio.h>
#include <stdlib.h>

static void require(int ok, const char* what) {
    if (!ok) {
        fprintf(stderr, "FAIL: %s (%s)\n", what, dode_last_error());
        exit(1);
    }
}

int main(void) {
    dode_schedule* s = NULL;
    require(dode_schedule_create_vp(0.1, 20.0, 1e-3, &s) == DODE_OK, "create vp schedule");

    double alpha = 0.0, sigma = 0.0;
    require(dode_schedule_alpha_sigma(s, 0.5, &alpha, &sigma) == DODE_OK, "alpha_sigma");
    require(fabs(alpha * alpha + sigma * sigma - 1.0) < 1e-12, "vp identity");

    dode_grid* g = NULL;
    require(dode_grid_create(s, 4, DODE_SPACING_UNIFORM_T, &g) == DODE_OK, "grid");
    require(dode_grid_num_points(g) == 5, "grid size");

    double mean = 0.0;
    dode_oracle* o = NULL;
    require(dode_oracle_create_gaussian(&mean, 1, 1.0, &o) == DODE_OK, "oracle");

    double x0[2];
    require(dode_init_noise(s, 2, 1, 42, x0) == DODE_OK, "init noise");
    dode_trajectory* t = NULL;
    require(dode_sample_run(DODE_SOLVER_DDIM_NOISE, o, s, g, x0, 2, 0, NULL, &t) == DODE_OK,
            "sample");
    require(dode_trajectory_nfe(t) == 4, "nfe");

    dode_trajectory_free(t);
    dode_oracle_free(o);
    dode_grid_free(g);
    dode_schedule_free(s);
    printf("capi smoke ok\n");
    return 0;
}

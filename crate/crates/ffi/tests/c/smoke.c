#include <math.h>
#include <stdio.h>
#include "proud.h"

static const char *CONFIG =
    "seed = 3\n"
    "n_particles = 32\n"
    "dims = 2\n"
    "t_steps = 100\n"
    "[manifold]\n"
    "kind = \"lattice\"\n"
    "vertices = [[0.5, 0.5], [1.0, 1.0]]\n"
    "per_edge = 5\n"
    "stdev = 0.02\n"
    "[objectives]\n"
    "benchmark = \"two_anchor\"\n"
    "[guidance]\n"
    "method = \"PROUD\"\n";

int main(void) {
    double g[4] = {1.0, 0.0, 0.0, 1.0};
    double w[2], v[2], n;
    if (proud_min_norm(g, 2, 2, w, v, &n) != PROUD_STATUS_OK || fabs(w[0] - 0.5) > 1e-12) {
        fprintf(stderr, "min_norm failed\n");
        return 1;
    }

    ProudSampler *s = NULL;
    if (proud_sampler_new(CONFIG, &s) != PROUD_STATUS_OK) {
        fprintf(stderr, "new: %s\n", proud_last_error());
        return 1;
    }
    if (proud_sampler_run(s) != PROUD_STATUS_OK) {
        fprintf(stderr, "run: %s\n", proud_last_error());
        proud_sampler_free(s);
        return 1;
    }
    ProudReport r;
    proud_sampler_report(s, &r);
    printf("proud %s hv=%.6f n=%zu\n", proud_version(), r.hv, r.n_points);
    proud_sampler_free(s);

    double y1[2] = {0.0, 1.0}, y2[2] = {1.0, 1.0};
    bool dom = false;
    if (proud_dominates(y1, y2, 2, &dom) != PROUD_STATUS_OK || !dom) {
        return 1;
    }
    if (proud_dominates(y1, y2, 2, NULL) != PROUD_STATUS_NULL_POINTER) {
        return 1;
    }
    return 0;
}

#include <math.h>
#include <stdio.h>
#include <string.h>

#include "eoslab.h"

static int fail(const char *what) {
    fprintf(stderr, "%s: %s\n", what, eoslab_last_error_message());
    return 1;
}

int main(void) {
    double vf = 0.0;
    if (eoslab_variational_factor(1.0, 0.1, &vf) != EOSLAB_STATUS_OK) return fail("vf");
    if (!(vf > 0.0 && vf < 1.0)) return fail("vf range");
    if (eoslab_variational_factor(-1.0, 0.1, &vf) == EOSLAB_STATUS_OK) return fail("vf domain");
    if (strlen(eoslab_last_error_message()) == 0) return fail("empty message");

    double ev[3] = {4.0, 2.0, 1.0};
    EoslabQuadratic *q = NULL;
    if (eoslab_quadratic_new_rotated(ev, 3, 7, &q) != EOSLAB_STATUS_OK) return fail("quadratic");
    double m[3] = {1.0, -1.0, 0.5}, g[3], loss;
    if (eoslab_quadratic_loss_grad(q, m, 3, &loss, g) != EOSLAB_STATUS_OK) return fail("loss");
    double dot = m[0] * g[0] + m[1] * g[1] + m[2] * g[2];
    if (fabs(2.0 * loss - dot) > 1e-12) return fail("euler identity");
    eoslab_quadratic_free(q);

    size_t dims[3] = {2, 4, 2};
    double x[8] = {1, 0, 0, 1, -1, 0, 0, -1};
    uint32_t y[4] = {0, 1, 0, 1};
    EoslabMlp *net = NULL;
    if (eoslab_mlp_new(dims, 3, x, y, 4, 1, &net) != EOSLAB_STATUS_OK) return fail("mlp");
    size_t n = 0;
    eoslab_mlp_num_params(net, &n);
    if (n != 2 * 4 + 4 + 4 * 2 + 2) return fail("num params");
    double p[22], s = 0.0;
    eoslab_mlp_initial_params(net, p, n);
    if (eoslab_mlp_sharpness(net, p, n, 100, 1e-8, 3, &s) != EOSLAB_STATUS_OK) return fail("sharpness");
    if (!(s > 0.0)) return fail("sharpness sign");
    eoslab_mlp_free(net);
    printf("ok %s\n", eoslab_version());
    return 0;
}

#include <stdio.h>
#include <math.h>
#include "mkdv.h"

#define CHECK(expr) do { MkdvStatus s_ = (expr); if (s_ != MKDV_STATUS_OK) { \
    fprintf(stderr, "%s failed: %s (%s)\n", #expr, mkdv_status_name(s_), mkdv_last_error()); return 1; } } while (0)

int main(void) {
    MkdvField *u = NULL, *v = NULL;
    MkdvFlow *flow = NULL;
    MkdvEnergies a, b;
    CHECK(mkdv_field_sample(8, 7, 0, &u));
    CHECK(mkdv_flow_new(8, MKDV_SIGN_DEFOCUSING, MKDV_EQUATION_MKDV2, 1e-2, 1e-10, &flow));
    CHECK(mkdv_evolve(flow, u, 0.5, &v));
    CHECK(mkdv_field_energies(u, MKDV_SIGN_DEFOCUSING, &a));
    CHECK(mkdv_field_energies(v, MKDV_SIGN_DEFOCUSING, &b));
    if (fabs(a.e1 - b.e1) > 1e-8 * a.e1) { fprintf(stderr, "E1 drift\n"); return 1; }
    if (mkdv_field_energies(NULL, 0, &a) != MKDV_STATUS_NULL_POINTER) return 1;
    mkdv_field_free(v);
    mkdv_field_free(u);
    mkdv_flow_free(flow);
    printf("ok %.12f\n", a.e1);
    return 0;
}

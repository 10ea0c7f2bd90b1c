#include <stdio.h>
#include <string.h>
#include "dynasep.h"

#define CHECK(cond) do { if (!(cond)) { fprintf(stderr, "failed: %s (%s)\n", #cond, dynasep_last_error_message()); return 1; } } while (0)

int main(void) {
    uint32_t caps[3] = {1, 2, 1};
    DynasepProcess *p = NULL;
    CHECK(dynasep_process_new(DYNASEP_PROCESS_KIND_ASEP_R, 0.6, 0.4, caps, 3, &p) == DYNASEP_STATUS_OK);
    double r = 1.0;
    CHECK(dynasep_process_reversibility_residual(p, &r) == DYNASEP_STATUS_OK);
    CHECK(r < 1e-12);

    DynasepDuality *d = NULL;
    CHECK(dynasep_duality_new(DYNASEP_FAMILY_KR, 0.7, 0.3, 0.0, 1.0, caps, 3, &d) == DYNASEP_STATUS_OK);
    CHECK(dynasep_duality_residual(d, &r) == DYNASEP_STATUS_OK);
    CHECK(r < 1e-9);

    uint32_t init[3] = {1, 1, 0};
    DynasepTrajectory *t = NULL;
    CHECK(dynasep_simulate(p, init, 3, 5.0, 7, &t) == DYNASEP_STATUS_OK);
    size_t n = dynasep_trajectory_len(t);
    CHECK(n >= 1);
    uint32_t occ[3];
    double time;
    CHECK(dynasep_trajectory_state(t, n - 1, &time, occ, 3) == DYNASEP_STATUS_OK);
    CHECK(occ[0] + occ[1] + occ[2] == 2);
    CHECK(dynasep_trajectory_state(t, n, &time, occ, 3) == DYNASEP_STATUS_OUT_OF_RANGE);
    CHECK(strlen(dynasep_last_error_message()) > 0);

    CHECK(dynasep_process_new(DYNASEP_PROCESS_KIND_ASEP, -1.0, 0.0, caps, 3, NULL) == DYNASEP_STATUS_NULL_POINTER);

    dynasep_trajectory_free(t);
    dynasep_duality_free(d);
    dynasep_process_free(p);
    printf("ok %s\n", dynasep_version());
    return 0;
}

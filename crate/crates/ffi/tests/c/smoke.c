#include <math.h>
#include <stdio.h>
#include "cuntzlab.h"

#define CHECK(x) do { if (!(x)) { fprintf(stderr, "failed: %s (line %d)\n", #x, __LINE__); return 1; } } while (0)

int main(void) {
    CuntzFamily *f = NULL;
    CHECK(cuntzlab_family_nearest_neighbor(2, &f) == CUNTZ_STATUS_OK);
    double iso = 1.0, comp = 1.0;
    CHECK(cuntzlab_family_cuntz_defect(f, 2, &iso, &comp) == CUNTZ_STATUS_OK);
    CHECK(iso < 1e-12 && comp < 1e-12);

    CuntzComplex one = {1.0, 0.0}, img[4];
    size_t written = 0, level = 0;
    CHECK(cuntzlab_family_apply_s(f, 0, 0, &one, 1, img, 1, &written, &level) == CUNTZ_STATUS_BUFFER_TOO_SMALL);
    CHECK(written == 4);
    CHECK(cuntzlab_family_apply_s(f, 0, 0, &one, 1, img, 4, &written, &level) == CUNTZ_STATUS_OK);
    CHECK(level == 2);
    cuntzlab_family_free(f);

    CuntzState *s = NULL;
    CHECK(cuntzlab_state_nearest_neighbor(3, &s) == CUNTZ_STATUS_OK);
    size_t w[1] = {1};
    CuntzComplex v;
    CHECK(cuntzlab_state_eval(s, w, w, 1, &v) == CUNTZ_STATUS_OK);
    CHECK(fabs(v.re - 1.0 / 3.0) < 1e-12 && fabs(v.im) < 1e-12);
    size_t bad[1] = {7};
    CHECK(cuntzlab_state_eval(s, bad, bad, 1, &v) == CUNTZ_STATUS_INVALID_ARGUMENT);
    char msg[128];
    CHECK(cuntzlab_last_error(msg, sizeof msg) > 0);
    cuntzlab_state_free(s);

    CHECK(cuntzlab_family_haar(2, NULL) == CUNTZ_STATUS_NULL_POINTER);
    printf("cuntzlab %s ok\n", cuntzlab_version());
    return 0;
}

/* Builds a slot network, runs one prediction and prints its digest. */
#include <stdio.h>
#include <stdlib.h>

#include "slotmachine.h"

static int check(SlmStatus status, const char *what) {
    if (status != SLM_STATUS_OK) {
        char msg[256];
        slm_last_error_message(msg, sizeof msg);
        fprintf(stderr, "%s: %s (%s)\n", what, slm_status_name(status), msg);
        return 1;
    }
    return 0;
}

int main(void) {
    SlmNetwork *net = NULL;
    if (check(slm_network_new_slot("lenet", 4, 7, false, &net), "new")) return 1;

    size_t input_len = 0;
    if (check(slm_network_input_len(net, &input_len), "input_len")) return 1;
    float *input = calloc(input_len, sizeof(float));
    float logits[10];
    if (check(slm_network_predict(net, input, input_len, 1, logits, 10), "predict")) return 1;

    char digest[65];
    if (check(slm_network_options_digest(net, digest, sizeof digest), "digest")) return 1;

    SlmNetwork *bad = NULL;
    if (slm_network_new_slot("nope", 4, 7, false, &bad) != SLM_STATUS_INVALID_ARGUMENT) return 2;

    printf("slotmachine %s digest=%s logit0=%g\n", slm_version(), digest, logits[0]);
    free(input);
    slm_network_free(net);
    return 0;
}

/* Minimal C client: build a model, simulate one sentence under full
 * bias, and read the stability metrics back.
 *
 *   cargo build -p retrans-ffi
 *   cc client.c -I../include -L../../../target/debug -lretrans_ffi \
 *      -lpthread -ldl -lm -o client
 */

#include "retrans.h"

#include <assert.h>
#include <stdio.h>
#include <string.h>

static void check(RetransStatus status, const char *what) {
    if (status != RETRANS_STATUS_OK) {
        fprintf(stderr, "%s: status %d: %s\n", what, (int)status, retrans_last_error());
        assert(0);
    }
}

int main(void) {
    printf("retrans %s\n", retrans_version());

    RetransModel *model = NULL;
    check(retrans_model_from_json(
              "{\"seed\":7,\"vocab\":[\"t1\",\"t2\",\"t3\",\"t4\",\"t5\"]}", &model),
          "model_from_json");

    RetransPtl *ptl = NULL;
    check(retrans_simulate(model, "s1 s2 s3 s4 s5", RETRANS_POLICY_RETRANSLATE,
                           1.0, 2, 1, &ptl),
          "simulate");
    assert(retrans_ptl_is_append_only(ptl));

    double ne = -1.0, dal = -1.0;
    check(retrans_ptl_normalized_erasure(ptl, &ne), "normalized_erasure");
    check(retrans_ptl_dal(ptl, &dal), "dal");
    assert(ne == 0.0);

    size_t delays[32];
    size_t len = 0;
    check(retrans_ptl_content_delay(ptl, delays, 32, &len), "content_delay");
    printf("final_len %zu ne %.3f dal %.3f delays", retrans_ptl_final_len(ptl), ne, dal);
    for (size_t j = 0; j < len; j++) {
        printf(" %zu", delays[j]);
    }
    printf("\n");

    char *json = NULL;
    check(retrans_ptl_to_json(ptl, &json), "to_json");
    assert(strstr(json, "\"outputs\"") != NULL);
    retrans_string_free(json);

    retrans_ptl_free(ptl);
    retrans_model_free(model);
    puts("ok");
    return 0;
}

/* Scores one sample and runs a model forward pass through the C API.
 *
 *   cargo build --release -p smem-ffi
 *   cc examples/demo.c -Iinclude ../../target/release/libsmem_ffi.a -lpthread -ldl -lm -o demo
 */
#include <stdio.h>

#include "smem.h"

int main(void) {
    const double main_out[3] = {0.7, 0.2, 0.1};
    const double visual[3] = {0.4, 0.4, 0.3};
    const double question[3] = {0.9, 0.1, 0.05};
    SmemAcquisitionParams params = smem_acquisition_params_default();
    double score = 0.0;

    if (smem_score("smem_full", main_out, visual, question, 3, 42, 0, &params, &score) != SMEM_STATUS_OK) {
        fprintf(stderr, "score: %s\n", smem_last_error());
        return 1;
    }
    printf("smem_full score: %.6f\n", score);

    SmemModel *model = NULL;
    if (smem_model_new(4, 4, 8, 3, 1, &model) != SMEM_STATUS_OK) {
        fprintf(stderr, "model: %s\n", smem_last_error());
        return 1;
    }
    const double x_v[4] = {0.1, 0.2, -0.3, 0.4};
    const double x_q[4] = {1.0, 0.0, 0.5, -0.5};
    double y[3], y_v[3], y_q[3];
    SmemStatus st = smem_model_predict(model, x_v, 4, x_q, 4, y, y_v, y_q, 3);
    if (st == SMEM_STATUS_OK) {
        smem_score("entropy", y, y_v, y_q, 3, 0, 0, NULL, &score);
        printf("untrained model entropy score: %.6f\n", score);
    }
    smem_model_free(model);
    return st == SMEM_STATUS_OK ? 0 : 1;
}

#include <math.h>
#include <stdio.h>
#include <string.h>

#include "nframes.h"

#define CHECK(cond)                                              \
  do {                                                           \
    if (!(cond)) {                                               \
      fprintf(stderr, "%s:%d: check failed: %s\n", __FILE__,     \
              __LINE__, #cond);                                  \
      return 1;                                                  \
    }                                                            \
  } while (0)

int main(void) {
  double f1 = 0.0;
  CHECK(nf_harmonic_f1(0.5, 0.5, &f1) == NF_STATUS_OK);
  CHECK(fabs(f1 - 0.5) < 1e-12);

  double r = 0.0;
  CHECK(nf_rouge_l("the city council", "city council", &r) == NF_STATUS_OK);
  CHECK(r > 0.79 && r < 0.81);

  CHECK(nf_rouge_l(NULL, "x", &r) == NF_STATUS_NULL_POINTER);
  CHECK(nf_last_error_message() != NULL);

  double v[16];
  CHECK(nf_hash_embed("sea level rise", 16, v, 16) == NF_STATUS_OK);
  double norm = 0.0;
  for (int i = 0; i < 16; i++) norm += v[i] * v[i];
  CHECK(fabs(norm - 1.0) < 1e-12);
  CHECK(nf_hash_embed("x", 16, v, 8) == NF_STATUS_BUFFER_TOO_SMALL);

  NfModel *model = NULL;
  CHECK(nf_model_load("/nonexistent/model", &model) == NF_STATUS_IO);
  CHECK(model == NULL);
  nf_model_free(NULL);
  nf_string_free(NULL);

  printf("ok %s\n", nf_version());
  return 0;
}

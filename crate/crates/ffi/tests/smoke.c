#include <math.h>
#include <stdio.h>
#include <string.h>

#include "qnd_mite.h"

#define CHECK(expr)                                                              \
  do {                                                                           \
    if (!(expr)) {                                                               \
      const char *msg = qm_last_error_message();                                 \
      fprintf(stderr, "%s:%d: %s (%s)\n", __FILE__, __LINE__, #expr,             \
              msg ? msg : "no error");                                           \
      return 1;                                                                  \
    }                                                                            \
  } while (0)

int main(void) {
  double v = 0.0;
  CHECK(qm_c_exact(1.0, 2, 1, 0.7853981633974483, &v) == QM_STATUS_OK);
  CHECK(fabs(v - 0.151632664928158) < 1e-12);
  CHECK(qm_c_exact(-1.0, 0, 0, 0.0, &v) == QM_STATUS_INVALID_ARGUMENT);
  CHECK(qm_last_error_message() != NULL);

  QmPlan *plan = NULL;
  QmState *cluster = NULL;
  QmRun *run = NULL;
  CHECK(qm_plan_cluster_c4(&plan) == QM_STATUS_OK);
  CHECK(qm_plan_num_stages(plan) == 4);
  CHECK(qm_state_cluster_c4(&cluster) == QM_STATUS_OK);
  CHECK(qm_run_protocol(plan, NULL, 42, &run) == QM_STATUS_OK);

  double fc = 0.0;
  CHECK(qm_run_final_fidelity(run, "F_C", &fc) == QM_STATUS_OK);
  CHECK(fc > 0.99);
  CHECK(qm_run_final_fidelity(run, "F_9", &fc) == QM_STATUS_NOT_FOUND);

  QmState *final_state = NULL;
  CHECK(qm_run_final_state(run, &final_state) == QM_STATUS_OK);
  CHECK(qm_state_fidelity(final_state, cluster, &fc) == QM_STATUS_OK);
  CHECK(fc > 0.99);

  char *csv = NULL;
  CHECK(qm_run_to_csv(run, &csv) == QM_STATUS_OK);
  CHECK(strncmp(csv, "stage,round,n_c,n_d", 19) == 0);
  printf("%s", csv);

  qm_string_free(csv);
  qm_state_free(final_state);
  qm_run_free(run);
  qm_state_free(cluster);
  qm_plan_free(plan);
  return 0;
}

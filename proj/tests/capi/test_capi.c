/* Exercises the C interface from plain C. */
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "nmpnerf/nmpnerf.h"

static int failures = 0;

#define EXPECT(cond)                                                  \
  do {                                                                \
    if (!(cond)) {                                                    \
      fprintf(stderr, "%s:%d: expected %s (%s)\n", __FILE__, __LINE__, \
              #cond, nmp_last_error());                               \
      ++failures;                                                     \
    }                                                                 \
  } while (0)

static const char* tmpdir(void) {
  const char* t = getenv("TMPDIR");
  return t ? t : "/tmp";
}

int main(void) {
  uint64_t v = 0;
  EXPECT(nmp_morton_expand(11, &v) == NMP_OK && v == 521);
  EXPECT(nmp_morton_expand(5000, &v) == NMP_ERR_DOMAIN);
  EXPECT(strlen(nmp_last_error()) > 0);
  EXPECT(nmp_morton_hash(1, 1, 1, 1u << 19, &v) == NMP_OK && v == 7);
  EXPECT(nmp_xor_hash(1, 1, 1, 1u << 19, &v) == NMP_OK && v == 339493);
  EXPECT(nmp_morton_expand(1, NULL) == NMP_ERR_ARGUMENT);

  nmp_config* cfg = NULL;
  EXPECT(nmp_config_parse("{\"workload\": {\"rays\": 8, \"samples_per_ray\": 8}}", &cfg) == NMP_OK);
  EXPECT(nmp_config_parse("{\"workload\": {\"bogus\": 1}}", &cfg) == NMP_ERR_CONFIG);
  nmp_config* broken = NULL;
  EXPECT(nmp_config_parse("{", &broken) == NMP_ERR_PARSE);
  EXPECT(broken == NULL);
  EXPECT(nmp_config_load("/nonexistent.json", &broken) == NMP_ERR_IO);

  uint64_t fp1 = 0, fp2 = 0;
  EXPECT(nmp_config_fingerprint(cfg, &fp1) == NMP_OK);
  EXPECT(nmp_config_set_seed(cfg, 42) == NMP_OK);
  EXPECT(nmp_config_fingerprint(cfg, &fp2) == NMP_OK);
  EXPECT(fp1 != fp2);
  EXPECT(nmp_config_apply_scenario(cfg, "nope") == NMP_ERR_CONFIG);

  char* js = NULL;
  EXPECT(nmp_config_to_json(cfg, &js) == NMP_OK && strstr(js, "\"seed\": 42") != NULL);
  nmp_string_free(js);

  nmp_step_spec specs[4];
  nmp_config* def = NULL;
  EXPECT(nmp_config_default(&def) == NMP_OK);
  EXPECT(nmp_step_specs(def, 262144, specs) == NMP_OK);
  EXPECT(specs[0].input_bytes == 3u * 1024 * 1024);
  EXPECT(specs[1].intermediate_bytes == 32u * 1024 * 1024);
  nmp_ledger het, data;
  EXPECT(nmp_plan_ledger(def, 262144, NMP_PLAN_HETEROGENEOUS, &het) == NMP_OK);
  EXPECT(nmp_plan_ledger(def, 262144, NMP_PLAN_PURE_DATA, &data) == NMP_OK);
  EXPECT(het.total_bytes < data.total_bytes);
  EXPECT(het.total_bytes == het.cat1_duplication_bytes + het.cat2_interstep_bytes +
                                het.cat3_intrastep_bytes + het.cat4_gradient_reduce_bytes);

  nmp_trace* tr = NULL;
  EXPECT(nmp_trace_generate(cfg, &tr) == NMP_OK);
  EXPECT(nmp_trace_size(tr) > 0);
  EXPECT(nmp_trace_size(tr) <= 64u * 16u * 8u);
  nmp_request r0;
  EXPECT(nmp_trace_get(tr, 0, &r0) == NMP_OK && r0.id == 0 && r0.kernel == 0);
  EXPECT(nmp_trace_get(tr, nmp_trace_size(tr), &r0) == NMP_ERR_ARGUMENT);

  char path[512];
  snprintf(path, sizeof path, "%s/nmpnerf_capi_trace.bin", tmpdir());
  EXPECT(nmp_trace_write(tr, path) == NMP_OK);
  nmp_trace* back = NULL;
  EXPECT(nmp_trace_read(path, &back) == NMP_OK);
  EXPECT(nmp_trace_size(back) == nmp_trace_size(tr));
  nmp_trace_free(back);
  nmp_trace_free(tr);

  char out[512];
  snprintf(out, sizeof out, "%s/nmpnerf_capi_out", tmpdir());
  char* summary = NULL;
  EXPECT(nmp_cmd_trace(cfg, out, &summary) == NMP_OK && strstr(summary, "\"requests\"") != NULL);
  nmp_string_free(summary);
  char trace_path[600];
  snprintf(trace_path, sizeof trace_path, "%s/trace.bin", out);
  EXPECT(nmp_cmd_sim(cfg, out, "c", trace_path, NULL) == NMP_OK);
  EXPECT(nmp_cmd_sim(def, out, "c", trace_path, NULL) == NMP_ERR_CONFIG);
  EXPECT(nmp_cmd_sweep(cfg, "hash_kind", out, 2, &summary) == NMP_OK);
  nmp_string_free(summary);

  double losses[5];
  EXPECT(nmp_toy_train(1, 5, 1e-2, losses) == NMP_OK);
  EXPECT(losses[4] < losses[0]);

  nmp_config_free(cfg);
  nmp_config_free(def);
  nmp_config_free(NULL);
  if (failures) fprintf(stderr, "%d failure(s)\n", failures);
  return failures ? 1 : 0;
}

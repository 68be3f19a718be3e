#ifndef NMPNERF_NMPNERF_H
#define NMPNERF_NMPNERF_H

/*
 * C interface to the near-memory NeRF training simulator.
 *
 * Every fallible call returns an nmp_status. On failure the thread-local
 * message from nmp_last_error() describes the cause. Strings returned through
 * `char**` out-parameters are owned by the caller and released with
 * nmp_string_free().
 */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(NMPNERF_BUILDING)
#    define NMP_API __declspec(dllexport)
#  else
#    define NMP_API __declspec(dllimport)
#  endif
#else
#  define NMP_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum nmp_status {
  NMP_OK = 0,
  NMP_ERR_INVARIANT = 1,
  NMP_ERR_CONFIG = 2,
  NMP_ERR_IO = 3,
  NMP_ERR_PARSE = 4,
  NMP_ERR_DOMAIN = 5,
  NMP_ERR_ARGUMENT = 6,
  NMP_ERR_INTERNAL = 7
} nmp_status;

typedef enum nmp_hash_kind { NMP_HASH_XOR = 0, NMP_HASH_MORTON = 1 } nmp_hash_kind;

typedef enum nmp_plan_kind {
  NMP_PLAN_HETEROGENEOUS = 0,
  NMP_PLAN_PURE_DATA = 1,
  NMP_PLAN_PURE_PARAM = 2
} nmp_plan_kind;

typedef struct nmp_config nmp_config;
typedef struct nmp_trace nmp_trace;

typedef struct nmp_request {
  uint64_t id;
  uint8_t kind;   /* 0 read, 1 write */
  uint64_t address;
  uint32_t size;
  uint8_t kernel; /* 0 HT, 1 HT_b, 2 MLP, 3 MLP_b */
  uint64_t order;
} nmp_request;

/* One row per step in HT, MLP, MLP_b, HT_b order. */
typedef struct nmp_step_spec {
  uint64_t param_bytes;
  uint64_t param_elements;
  uint64_t input_bytes;
  uint64_t output_bytes;
  uint64_t intermediate_bytes;
} nmp_step_spec;

typedef struct nmp_ledger {
  uint64_t cat1_duplication_bytes;
  uint64_t cat2_interstep_bytes;
  uint64_t cat3_intrastep_bytes;
  uint64_t cat4_gradient_reduce_bytes;
  uint64_t total_bytes;
} nmp_ledger;

NMP_API const char* nmp_version(void);
NMP_API const char* nmp_last_error(void);
NMP_API void nmp_string_free(char* s);

/* Configuration */
NMP_API nmp_status nmp_config_default(nmp_config** out);
NMP_API nmp_status nmp_config_load(const char* path, nmp_config** out);
NMP_API nmp_status nmp_config_parse(const char* text, nmp_config** out);
NMP_API void nmp_config_free(nmp_config* cfg);
NMP_API nmp_status nmp_config_set_seed(nmp_config* cfg, uint64_t seed);
NMP_API nmp_status nmp_config_apply_scenario(nmp_config* cfg, const char* scenario);
NMP_API nmp_status nmp_config_fingerprint(const nmp_config* cfg, uint64_t* out);
NMP_API nmp_status nmp_config_to_json(const nmp_config* cfg, char** out);
NMP_API nmp_status nmp_config_output_dir(const nmp_config* cfg, char** out);

/* Entry-level hash-table traces */
NMP_API nmp_status nmp_trace_generate(const nmp_config* cfg, nmp_trace** out);
NMP_API nmp_status nmp_trace_read(const char* path, nmp_trace** out);
NMP_API nmp_status nmp_trace_write(const nmp_trace* trace, const char* path);
NMP_API nmp_status nmp_trace_write_csv(const nmp_trace* trace, const char* path);
NMP_API size_t nmp_trace_size(const nmp_trace* trace);
NMP_API nmp_status nmp_trace_get(const nmp_trace* trace, size_t index, nmp_request* out);
NMP_API void nmp_trace_free(nmp_trace* trace);

/*
 * Commands. Each writes its artifacts under out_dir and returns a JSON
 * summary through `summary` (may be NULL).
 */
NMP_API nmp_status nmp_cmd_trace(const nmp_config* cfg, const char* out_dir, char** summary);
NMP_API nmp_status nmp_cmd_sim(const nmp_config* cfg, const char* out_dir, const char* scenario,
                               const char* trace_path, char** summary);
/* axes: "hash_kind,order" or "hash_kind=morton|xor,strategy"; threads 0 picks a default. */
NMP_API nmp_status nmp_cmd_sweep(const nmp_config* cfg, const char* axes, const char* out_dir,
                                 unsigned threads, char** summary);
NMP_API nmp_status nmp_cmd_report(const nmp_config* cfg, const char* out_dir,
                                  const char* report_path, char** summary);

/* Primitives */
NMP_API nmp_status nmp_morton_expand(uint32_t x, uint64_t* out);
NMP_API nmp_status nmp_morton_hash(uint32_t x, uint32_t y, uint32_t z, uint64_t table_size,
                                   uint64_t* out);
NMP_API nmp_status nmp_xor_hash(uint32_t x, uint32_t y, uint32_t z, uint64_t table_size,
                                uint64_t* out);
NMP_API nmp_status nmp_step_specs(const nmp_config* cfg, uint64_t points, nmp_step_spec out[4]);
NMP_API nmp_status nmp_plan_ledger(const nmp_config* cfg, uint64_t points, nmp_plan_kind kind,
                                   nmp_ledger* out);
/* Trains the reference model on the toy scene; losses[i] is the loss before step i. */
NMP_API nmp_status nmp_toy_train(uint64_t seed, int steps, double learning_rate, double* losses);

#ifdef __cplusplus
}
#endif

#endif /* NMPNERF_NMPNERF_H */

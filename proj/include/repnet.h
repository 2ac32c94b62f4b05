/* repnet — RepVGG-style re-parameterizable network builder, fusion verifier
 * and roofline analyzer. C API over the C++ core; all handles are opaque and
 * every fallible call returns a status code, with a thread-local message
 * available from repnet_last_error(). */
#ifndef REPNET_H
#define REPNET_H

#include <stdint.h>

#if defined(_WIN32)
#define REPNET_API __declspec(dllexport)
#else
#define REPNET_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef struct repnet_model repnet_model;

typedef enum repnet_status {
  REPNET_OK = 0,
  REPNET_ERROR_INVALID_ARGUMENT = 1,
  REPNET_ERROR_SPEC = 2,
  REPNET_ERROR_SHAPE = 3,
  REPNET_ERROR_IO = 4,
  REPNET_ERROR_STATE = 5
} repnet_status;

typedef enum repnet_precision {
  REPNET_PRECISION_F32 = 0,
  REPNET_PRECISION_F64 = 1
} repnet_precision;

REPNET_API const char* repnet_version(void);

/* Message for the most recent failure on this thread; never NULL. */
REPNET_API const char* repnet_last_error(void);

/* Builds a training-form model from a JSON model spec (schema documented in
 * README.md), with seed-deterministic parameters. */
REPNET_API repnet_status repnet_model_create(const char* spec_json, repnet_precision precision,
                                             uint64_t seed, repnet_model** out);

/* Loads a model from a REPF weight file; precision and train/fused mode come
 * from the file. */
REPNET_API repnet_status repnet_model_open(const char* spec_json, const char* weights_path,
                                           repnet_model** out);

REPNET_API void repnet_model_release(repnet_model* model);

REPNET_API repnet_status repnet_model_save(const repnet_model* model, const char* weights_path);

/* Collapses every multi-branch rep conv into its single 3x3 equivalent.
 * Fails with REPNET_ERROR_STATE if the model is already fused. */
REPNET_API repnet_status repnet_model_fuse(repnet_model* model);

/* 1 if fused, 0 if training form, -1 on NULL. */
REPNET_API int repnet_model_is_fused(const repnet_model* model);

/* REPNET_PRECISION_F32/F64, or -1 on NULL. */
REPNET_API int repnet_model_precision(const repnet_model* model);

REPNET_API repnet_status repnet_model_param_count(const repnet_model* model, uint64_t* out);

/* Structure summary as a JSON document; free with repnet_string_release. */
REPNET_API repnet_status repnet_model_describe(const repnet_model* model, char** json_out);

/* dims_out = {n, c, h, w} of pyramid tap 0..2 (P3/P4/P5) for an
 * n x c x height x width input. height and width must be divisible by 32. */
REPNET_API repnet_status repnet_model_output_shape(const repnet_model* model, int tap, int n,
                                                   int height, int width, int dims_out[4]);

/* Runs the feature extractor. Buffers are dense NCHW doubles; p3/p4/p5 must
 * hold the element counts reported by repnet_model_output_shape. */
REPNET_API repnet_status repnet_model_forward(const repnet_model* model, const double* input,
                                              int n, int c, int height, int width, double* p3,
                                              double* p4, double* p5);

/* Compares the training-form forward pass against the fused one on `trials`
 * seeded random inputs. Writes the max abs deviation and whether it is within
 * tolerance. The model itself is left untouched. */
REPNET_API repnet_status repnet_model_verify(const repnet_model* model, int trials, int height,
                                             int width, double tolerance, uint64_t seed,
                                             double* max_abs_deviation, int* passed);

/* Per-layer roofline report for a batch x c x height x width input under the
 * given hardware profile. human_table != 0 renders text, otherwise JSON. */
REPNET_API repnet_status repnet_model_analyze(const repnet_model* model, int batch, int height,
                                              int width, double peak_flops,
                                              double mem_bandwidth_bytes, int human_table,
                                              char** out);

REPNET_API void repnet_string_release(char* s);

#ifdef __cplusplus
}
#endif

#endif /* REPNET_H */

#include "repnet.h"

#include <cstring>

#include "model.hpp"

using namespace repnet;

struct repnet_model {
  Model impl;
};

namespace {

thread_local std::string g_last_error = "no error";

repnet_status map_kind(ErrorKind k) {
  switch (k) {
    case ErrorKind::InvalidArgument: return REPNET_ERROR_INVALID_ARGUMENT;
    case ErrorKind::Spec: return REPNET_ERROR_SPEC;
    case ErrorKind::Shape: return REPNET_ERROR_SHAPE;
    case ErrorKind::Io: return REPNET_ERROR_IO;
    default: return REPNET_ERROR_STATE;
  }
}

template <class Fn>
repnet_status guarded(Fn&& fn) {
  try {
    fn();
    return REPNET_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return map_kind(e.kind());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return REPNET_ERROR_INVALID_ARGUMENT;
  }
}

repnet_status require(bool ok, const char* msg) {
  if (!ok) {
    g_last_error = msg;
    return REPNET_ERROR_INVALID_ARGUMENT;
  }
  return REPNET_OK;
}

char* dup_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

extern "C" {

const char* repnet_version(void) { return "repnet 1.0.0"; }

const char* repnet_last_error(void) { return g_last_error.c_str(); }

repnet_status repnet_model_create(const char* spec_json, repnet_precision precision,
                                  uint64_t seed, repnet_model** out) {
  if (auto s = require(spec_json && out, "spec_json and out must be non-NULL")) return s;
  *out = nullptr;
  return guarded([&] {
    const ModelSpec spec = ModelSpec::parse_json(spec_json);
    const Precision prec =
        precision == REPNET_PRECISION_F32 ? Precision::F32 : Precision::F64;
    *out = new repnet_model{Model::build(spec, prec, seed)};
  });
}

repnet_status repnet_model_open(const char* spec_json, const char* weights_path,
                                repnet_model** out) {
  if (auto s = require(spec_json && weights_path && out,
                       "spec_json, weights_path and out must be non-NULL"))
    return s;
  *out = nullptr;
  return guarded([&] {
    const ModelSpec spec = ModelSpec::parse_json(spec_json);
    *out = new repnet_model{Model::load(spec, weights_path)};
  });
}

void repnet_model_release(repnet_model* model) { delete model; }

repnet_status repnet_model_save(const repnet_model* model, const char* weights_path) {
  if (auto s = require(model && weights_path, "model and weights_path must be non-NULL"))
    return s;
  return guarded([&] { model->impl.save(weights_path); });
}

repnet_status repnet_model_fuse(repnet_model* model) {
  if (auto s = require(model != nullptr, "model must be non-NULL")) return s;
  return guarded([&] { model->impl.fuse(); });
}

int repnet_model_is_fused(const repnet_model* model) {
  return model ? (model->impl.fused() ? 1 : 0) : -1;
}

int repnet_model_precision(const repnet_model* model) {
  if (!model) return -1;
  return model->impl.precision() == Precision::F32 ? REPNET_PRECISION_F32
                                                   : REPNET_PRECISION_F64;
}

repnet_status repnet_model_param_count(const repnet_model* model, uint64_t* out) {
  if (auto s = require(model && out, "model and out must be non-NULL")) return s;
  return guarded([&] { *out = model->impl.param_count(); });
}

repnet_status repnet_model_describe(const repnet_model* model, char** json_out) {
  if (auto s = require(model && json_out, "model and json_out must be non-NULL")) return s;
  return guarded([&] { *json_out = dup_string(model->impl.describe_json()); });
}

repnet_status repnet_model_output_shape(const repnet_model* model, int tap, int n, int height,
                                        int width, int dims_out[4]) {
  if (auto s = require(model && dims_out, "model and dims_out must be non-NULL")) return s;
  return guarded([&] { model->impl.output_shape(tap, n, height, width, dims_out); });
}

repnet_status repnet_model_forward(const repnet_model* model, const double* input, int n, int c,
                                   int height, int width, double* p3, double* p4, double* p5) {
  if (auto s = require(model != nullptr, "model must be non-NULL")) return s;
  return guarded([&] { model->impl.forward(input, n, c, height, width, p3, p4, p5); });
}

repnet_status repnet_model_verify(const repnet_model* model, int trials, int height, int width,
                                  double tolerance, uint64_t seed, double* max_abs_deviation,
                                  int* passed) {
  if (auto s = require(model && max_abs_deviation && passed,
                       "model, max_abs_deviation and passed must be non-NULL"))
    return s;
  return guarded([&] {
    const VerificationReport r = model->impl.verify(trials, height, width, tolerance, seed);
    *max_abs_deviation = r.max_abs_deviation;
    *passed = r.passed ? 1 : 0;
  });
}

repnet_status repnet_model_analyze(const repnet_model* model, int batch, int height, int width,
                                   double peak_flops, double mem_bandwidth_bytes, int human_table,
                                   char** out) {
  if (auto s = require(model && out, "model and out must be non-NULL")) return s;
  return guarded([&] {
    InputDims input;
    input.n = batch;
    input.h = height;
    input.w = width;
    const HardwareProfile hw{peak_flops, mem_bandwidth_bytes, "hw"};
    const AnalysisReport r = model->impl.analyze(input, hw);
    *out = dup_string(human_table ? report_table(r) : report_json(r));
  });
}

void repnet_string_release(char* s) { delete[] s; }

}  // extern "C"

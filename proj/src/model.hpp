#pragma once

#include "analyzer.hpp"
#include "builder.hpp"
#include "weights.hpp"

namespace repnet {

// A built network at one run-level precision, the unit the public API works
// with. All member operations dispatch on the stored precision.
class Model {
public:
  static Model build(const ModelSpec& spec, Precision precision, uint64_t seed);
  static Model load(const ModelSpec& spec, const std::string& weights_path);

  const ModelSpec& spec() const { return spec_; }
  Precision precision() const { return precision_; }
  bool fused() const;
  uint64_t param_count() const;

  void save(const std::string& path) const;
  void fuse();

  // dims_out = {n, c, h, w} of tap 0..2 (P3/P4/P5) for an n x c x h x w input.
  void output_shape(int tap, int n, int h, int w, int dims_out[4]) const;

  // Buffers are NCHW doubles regardless of model precision; f32 models cast
  // at the boundary.
  void forward(const double* input, int n, int c, int h, int w, double* p3, double* p4,
               double* p5) const;

  VerificationReport verify(int trials, int h, int w, double tolerance, uint64_t seed) const;
  AnalysisReport analyze(const InputDims& input, const HardwareProfile& hw) const;
  std::string describe_json() const;

  template <class T>
  const NetworkGraph<T>& graph() const {
    return std::get<NetworkGraph<T>>(graph_);
  }

private:
  ModelSpec spec_;
  Precision precision_ = Precision::F64;
  std::variant<NetworkGraph<float>, NetworkGraph<double>> graph_;
};

}  // namespace repnet

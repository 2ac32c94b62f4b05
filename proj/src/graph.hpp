#pragma once

#include <array>
#include <string>

#include "blocks.hpp"

namespace repnet {

// Structural graph ops with no parameters.
struct Upsample2x {};
struct Concat2 {};

enum class GraphMode { TrainForm, Fused };

inline const char* graph_mode_name(GraphMode m) {
  return m == GraphMode::TrainForm ? "train_form" : "fused";
}

template <class T>
struct GraphNode {
  using Op = std::variant<RepConvTrain<T>, FusedConv<T>, ConvModule<T>, RepBlock<T>, BepC3<T>,
                          Upsample2x, Concat2>;
  std::string name;
  Op op;
  // Producer node ids; negative ids reference graph inputs (-1 -> input 0, ...).
  std::vector<int> inputs;
  int in_ch = 0, out_ch = 0;
};

template <class T>
const char* node_kind(const typename GraphNode<T>::Op& op) {
  switch (op.index()) {
    case 0: return "repconv";
    case 1: return "fused_conv";
    case 2: return "conv_module";
    case 3: return "rep_block";
    case 4: return "bepc3";
    case 5: return "upsample2x";
    default: return "concat";
  }
}

// Feature-extraction network: an ordered node list (already topologically
// sorted) with three exported pyramid taps P3/P4/P5 at strides 8/16/32.
template <class T>
struct NetworkGraph {
  using value_type = T;

  std::vector<int> input_channels = {3};  // one entry per graph input
  GraphMode mode = GraphMode::TrainForm;
  std::vector<GraphNode<T>> nodes;
  std::array<int, 3> taps = {-1, -1, -1};

  bool empty() const { return nodes.empty(); }

  int add_node(std::string name, typename GraphNode<T>::Op op, std::vector<int> inputs,
               int in_ch, int out_ch) {
    nodes.push_back(GraphNode<T>{std::move(name), std::move(op), std::move(inputs), in_ch, out_ch});
    return static_cast<int>(nodes.size()) - 1;
  }

  int ref_channels(int ref) const {
    if (ref >= 0) return nodes[ref].out_ch;
    return input_channels[-ref - 1];
  }

  // Channel continuity, topological order of references, tap presence.
  void validate() const {
    for (size_t i = 0; i < nodes.size(); ++i) {
      const auto& nd = nodes[i];
      const size_t want_inputs = std::holds_alternative<Concat2>(nd.op) ? 2 : 1;
      if (nd.inputs.size() != want_inputs)
        fail(ErrorKind::Shape, "node ", nd.name, " must have ", want_inputs, " input(s)");
      int sum = 0;
      for (int ref : nd.inputs) {
        if (ref >= static_cast<int>(i))
          fail(ErrorKind::Shape, "node ", nd.name, " references a later node");
        if (ref < 0 && -ref > static_cast<int>(input_channels.size()))
          fail(ErrorKind::Shape, "node ", nd.name, " references missing graph input ", -ref - 1);
        sum += ref_channels(ref);
      }
      if (sum != nd.in_ch)
        fail(ErrorKind::Shape, "node ", nd.name, ": declared in_ch ", nd.in_ch,
             " != producer channels ", sum);
      const auto [op_in, op_out] = op_channels(nd);
      if (op_in != nd.in_ch || op_out != nd.out_ch)
        fail(ErrorKind::Shape, "node ", nd.name, ": op is ", op_in, " -> ", op_out,
             " but node declares ", nd.in_ch, " -> ", nd.out_ch);
      std::visit([](const auto& v) {
        using V = std::decay_t<decltype(v)>;
        if constexpr (!std::is_same_v<V, Upsample2x> && !std::is_same_v<V, Concat2>) v.validate();
      }, nd.op);
    }
    if (!nodes.empty())
      for (int t : taps)
        if (t < 0 || t >= static_cast<int>(nodes.size()))
          fail(ErrorKind::Shape, "graph must export exactly three pyramid taps");
  }

  std::array<Tensor4<T>, 3> forward(const std::vector<Tensor4<T>>& inputs) const {
    if (inputs.size() != input_channels.size())
      fail(ErrorKind::Shape, "graph expects ", input_channels.size(), " input(s), got ",
           inputs.size());
    for (size_t i = 0; i < inputs.size(); ++i)
      if (inputs[i].c != input_channels[i])
        fail(ErrorKind::Shape, "graph input ", i, " channels (", inputs[i].c, ") != expected (",
             input_channels[i], ")");
    if (nodes.empty()) fail(ErrorKind::State, "cannot run an empty graph");

    std::vector<Tensor4<T>> out(nodes.size());
    auto resolve = [&](int ref) -> const Tensor4<T>& {
      return ref >= 0 ? out[ref] : inputs[-ref - 1];
    };
    for (size_t i = 0; i < nodes.size(); ++i) {
      const auto& nd = nodes[i];
      out[i] = std::visit([&](const auto& v) -> Tensor4<T> {
        using V = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<V, Upsample2x>) {
          return upsample_nearest2x(resolve(nd.inputs[0]));
        } else if constexpr (std::is_same_v<V, Concat2>) {
          return concat_channels(resolve(nd.inputs[0]), resolve(nd.inputs[1]));
        } else {
          return v.forward(resolve(nd.inputs[0]));
        }
      }, nd.op);
    }
    return {out[taps[0]], out[taps[1]], out[taps[2]]};
  }

  // Single-input convenience; spatial dims must be divisible by 32 so all
  // five stride-2 steps land on whole pixels.
  std::array<Tensor4<T>, 3> forward(const Tensor4<T>& x) const {
    if (input_channels.size() == 1 && (x.h % 32 != 0 || x.w % 32 != 0))
      fail(ErrorKind::Shape, "input spatial dims ", x.h, "x", x.w, " must be divisible by 32");
    std::vector<Tensor4<T>> v;
    v.push_back(x);
    return forward(v);
  }

private:
  static std::pair<int, int> op_channels(const GraphNode<T>& nd) {
    return std::visit([&](const auto& v) -> std::pair<int, int> {
      using V = std::decay_t<decltype(v)>;
      if constexpr (std::is_same_v<V, RepConvTrain<T>>) return {v.in_ch, v.out_ch};
      else if constexpr (std::is_same_v<V, FusedConv<T>>) return {v.params.in_ch, v.params.out_ch};
      else if constexpr (std::is_same_v<V, ConvModule<T>>) return {v.in_ch(), v.out_ch()};
      else if constexpr (std::is_same_v<V, RepBlock<T>>) return {v.in_ch(), v.out_ch()};
      else if constexpr (std::is_same_v<V, BepC3<T>>) return {v.in_channels, v.out_channels};
      else return {nd.in_ch, nd.in_ch};  // upsample/concat preserve the declared width
    }, nd.op);
  }
};

// Replace every training-form rep conv in the graph by its fused single conv.
template <class T>
NetworkGraph<T> fuse_graph(const NetworkGraph<T>& g) {
  if (g.mode == GraphMode::Fused)
    fail(ErrorKind::State, "graph is already fused");
  NetworkGraph<T> out = g;
  out.mode = GraphMode::Fused;
  for (auto& nd : out.nodes) {
    std::visit([&](auto& v) {
      using V = std::decay_t<decltype(v)>;
      if constexpr (std::is_same_v<V, BepUnit<T>> || std::is_same_v<V, RepBlock<T>> ||
                    std::is_same_v<V, BepC3<T>>) {
        detail::fuse_in_place(v);
      }
    }, nd.op);
    if (const auto* rc = std::get_if<RepConvTrain<T>>(&nd.op))
      nd.op = fuse_repconv(*rc);
  }
  return out;
}

template <class T>
uint64_t graph_param_count(const NetworkGraph<T>& g) {
  uint64_t n = 0;
  for (const auto& nd : g.nodes)
    n += std::visit([](const auto& v) -> uint64_t {
      using V = std::decay_t<decltype(v)>;
      if constexpr (std::is_same_v<V, Upsample2x> || std::is_same_v<V, Concat2>) return 0;
      else return param_count(v);
    }, nd.op);
  return n;
}

namespace detail {

template <class T>
bool has_train_repconv(const RepConvSlot<T>& s) { return !slot_is_fused(s); }

template <class T>
bool has_train_repconv(const BepUnit<T>& u) {
  for (const auto& s : u.convs)
    if (has_train_repconv(s)) return true;
  return false;
}

template <class T>
bool has_train_repconv(const RepBlock<T>& b) {
  if (b.holds_bep_units()) {
    for (const auto& u : std::get<1>(b.units))
      if (has_train_repconv(u)) return true;
  } else {
    for (const auto& s : std::get<0>(b.units))
      if (has_train_repconv(s)) return true;
  }
  return false;
}

}  // namespace detail

// True if any multi-branch (training-form) rep conv remains anywhere.
template <class T>
bool graph_has_train_repconv(const NetworkGraph<T>& g) {
  for (const auto& nd : g.nodes) {
    const bool found = std::visit([](const auto& v) -> bool {
      using V = std::decay_t<decltype(v)>;
      if constexpr (std::is_same_v<V, RepConvTrain<T>>) return true;
      else if constexpr (std::is_same_v<V, RepBlock<T>>) return detail::has_train_repconv(v);
      else if constexpr (std::is_same_v<V, BepC3<T>>) return detail::has_train_repconv(v.inner);
      else return false;
    }, nd.op);
    if (found) return true;
  }
  return false;
}

// ---- named tensor enumeration ----------------------------------------------
// Stable dotted names, e.g. backbone.stage1.body.conv0.branch3x3.weight.
// The order and names below are the serialization contract.

namespace detail {

template <class T, class Fn>
void visit_conv(const std::string& prefix, ConvParams<T>& p, Fn&& fn) {
  fn(prefix + ".weight",
     std::vector<uint32_t>{static_cast<uint32_t>(p.out_ch),
                           static_cast<uint32_t>(p.in_ch / p.groups),
                           static_cast<uint32_t>(p.k), static_cast<uint32_t>(p.k)},
     p.weight.data(), p.weight.size());
  if (p.has_bias())
    fn(prefix + ".bias", std::vector<uint32_t>{static_cast<uint32_t>(p.out_ch)}, p.bias.data(),
       p.bias.size());
}

template <class T, class Fn>
void visit_bn(const std::string& prefix, BatchNormParams<T>& p, Fn&& fn) {
  const std::vector<uint32_t> d{static_cast<uint32_t>(p.ch)};
  fn(prefix + ".gamma", d, p.gamma.data(), p.gamma.size());
  fn(prefix + ".beta", d, p.beta.data(), p.beta.size());
  fn(prefix + ".running_mean", d, p.mean.data(), p.mean.size());
  fn(prefix + ".running_var", d, p.var.data(), p.var.size());
  fn(prefix + ".eps", std::vector<uint32_t>{1}, &p.eps, 1);
}

template <class T, class Fn>
void visit_tensors(const std::string& prefix, RepConvTrain<T>& rc, Fn&& fn) {
  visit_conv(prefix + ".branch3x3", rc.branch3x3.conv, fn);
  visit_bn(prefix + ".branch3x3.bn", rc.branch3x3.bn, fn);
  visit_conv(prefix + ".branch1x1", rc.branch1x1.conv, fn);
  visit_bn(prefix + ".branch1x1.bn", rc.branch1x1.bn, fn);
  if (rc.has_identity()) visit_bn(prefix + ".identity.bn", *rc.identity_bn, fn);
}

template <class T, class Fn>
void visit_tensors(const std::string& prefix, FusedConv<T>& fc, Fn&& fn) {
  visit_conv(prefix + ".fused", fc.params, fn);
}

template <class T, class Fn>
void visit_tensors(const std::string& prefix, ConvModule<T>& m, Fn&& fn) {
  visit_conv(prefix + ".conv", m.conv, fn);
  visit_bn(prefix + ".bn", m.bn, fn);
}

template <class T, class Fn>
void visit_tensors(const std::string& prefix, RepConvSlot<T>& s, Fn&& fn) {
  std::visit([&](auto& v) { visit_tensors(prefix, v, fn); }, s);
}

template <class T, class Fn>
void visit_tensors(const std::string& prefix, BepUnit<T>& u, Fn&& fn) {
  for (size_t i = 0; i < u.convs.size(); ++i)
    visit_tensors(prefix + ".conv" + std::to_string(i), u.convs[i], fn);
}

template <class T, class Fn>
void visit_tensors(const std::string& prefix, RepBlock<T>& b, Fn&& fn) {
  if (b.holds_bep_units()) {
    auto& us = std::get<1>(b.units);
    for (size_t i = 0; i < us.size(); ++i)
      visit_tensors(prefix + ".unit" + std::to_string(i), us[i], fn);
  } else {
    auto& cs = std::get<0>(b.units);
    for (size_t i = 0; i < cs.size(); ++i)
      visit_tensors(prefix + ".conv" + std::to_string(i), cs[i], fn);
  }
}

template <class T, class Fn>
void visit_tensors(const std::string& prefix, BepC3<T>& b, Fn&& fn) {
  visit_tensors(prefix + ".split_a", b.split_a, fn);
  visit_tensors(prefix + ".inner", b.inner, fn);
  visit_tensors(prefix + ".split_b", b.split_b, fn);
  visit_tensors(prefix + ".merge", b.merge, fn);
}

}  // namespace detail

// fn(name, dims, T* data, size_t len) for every parameter tensor, in a fixed
// graph-walk order. eps is visited as a one-element tensor.
template <class T, class Fn>
void for_each_tensor(NetworkGraph<T>& g, Fn&& fn) {
  for (auto& nd : g.nodes)
    std::visit([&](auto& v) {
      using V = std::decay_t<decltype(v)>;
      if constexpr (!std::is_same_v<V, Upsample2x> && !std::is_same_v<V, Concat2>)
        detail::visit_tensors(nd.name, v, fn);
    }, nd.op);
}

template <class T, class Fn>
void for_each_tensor(const NetworkGraph<T>& g, Fn&& fn) {
  for_each_tensor(const_cast<NetworkGraph<T>&>(g),
                  [&](const std::string& name, const std::vector<uint32_t>& dims, T* data,
                      size_t len) { fn(name, dims, static_cast<const T*>(data), len); });
}

}  // namespace repnet

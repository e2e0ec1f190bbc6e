// SPDX-License-Identifier: Apache-2.0
//
// Loader and deterministic float32 inference engine for a feed-forward ONNX
// subset: MatMul, Gemm, Add, Sub, Mul, Div, Relu, Sigmoid, Tanh, Flatten,
// Reshape, Transpose, Concat, Slice, Constant. Shapes are inferred and
// checked at load time; inference executes nodes in graph order with fixed
// left-to-right accumulation so repeated runs are bit-identical.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "vnncomp/errors.hpp"

namespace vnncomp::onnx {

struct Tensor {
    std::vector<int64_t> shape;
    std::vector<float> data;

    int64_t numel() const {
        int64_t n = 1;
        for (int64_t d : shape) n *= d;
        return n;
    }
};

enum class OpKind { MatMul, Gemm, Add, Sub, Mul, Div, Relu, Sigmoid, Tanh, Reshape, Transpose, Concat, Slice };

const char* op_name(OpKind kind);

struct GemmParams {
    float alpha = 1.0f;
    float beta = 1.0f;
    bool trans_a = false;
    bool trans_b = false;
};

struct ReshapeParams {
    std::vector<int64_t> target;  // resolved static output shape
};

struct TransposeParams {
    std::vector<int> perm;
};

struct ConcatParams {
    int axis = 0;
};

struct SliceParams {
    // Resolved per-dimension [start, end) with step, covering every axis.
    std::vector<int64_t> starts, ends, steps;
};

using NodeParams = std::variant<std::monostate, GemmParams, ReshapeParams, TransposeParams,
                                ConcatParams, SliceParams>;

struct Node {
    OpKind kind;
    std::string name;
    std::vector<int> inputs;  // value ids
    int output;               // value id
    NodeParams params;
};

// Immutable after load; concurrent infer() calls on one Network are safe.
struct Network {
    std::string input_name;
    std::vector<int64_t> input_shape;
    std::string output_name;
    std::vector<int64_t> output_shape;

    std::vector<Node> nodes;
    // Value table: id 0 is the graph input; constants hold a tensor.
    std::vector<std::optional<Tensor>> constants;
    std::vector<std::vector<int64_t>> value_shapes;
    std::vector<std::string> value_names;

    int64_t parameter_count() const;
    int num_inputs() const;   // element count of the squeezed input
    int num_outputs() const;  // element count of the squeezed output
};

Network load_network(const std::string& path);
Network load_network_bytes(std::string_view bytes);

// x may match input_shape or be any shape with the same element count.
Tensor infer(const Network& net, const Tensor& x);

// Convenience for the flat-vector callers (cex validation, baseline).
std::vector<double> infer_flat(const Network& net, std::span<const double> x);

// Human-readable summary for the `net info` subcommand.
std::string describe(const Network& net);

}  // namespace vnncomp::onnx

// SPDX-License-Identifier: Apache-2.0

#include "vnncomp/onnx_rt.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "proto_wire.hpp"

namespace vnncomp::onnx {

const char* op_name(OpKind kind) {
    switch (kind) {
        case OpKind::MatMul: return "MatMul";
        case OpKind::Gemm: return "Gemm";
        case OpKind::Add: return "Add";
        case OpKind::Sub: return "Sub";
        case OpKind::Mul: return "Mul";
        case OpKind::Div: return "Div";
        case OpKind::Relu: return "Relu";
        case OpKind::Sigmoid: return "Sigmoid";
        case OpKind::Tanh: return "Tanh";
        case OpKind::Reshape: return "Reshape";
        case OpKind::Transpose: return "Transpose";
        case OpKind::Concat: return "Concat";
        case OpKind::Slice: return "Slice";
    }
    return "?";
}

namespace {

using protowire::Reader;
using protowire::WireType;

// ---- raw proto model (only the fields the subset needs) ----

constexpr int kDataTypeFloat = 1;
constexpr int kDataTypeInt32 = 6;
constexpr int kDataTypeInt64 = 7;

struct PTensor {
    std::vector<int64_t> dims;
    int data_type = 0;
    std::vector<float> floats;
    std::vector<int64_t> ints;
    std::string name;
};

struct PAttr {
    std::string name;
    float f = 0;
    int64_t i = 0;
    bool has_f = false, has_i = false, has_t = false;
    std::vector<int64_t> ints;
    PTensor t;
};

struct PNode {
    std::vector<std::string> inputs, outputs;
    std::string name, op_type;
    std::vector<PAttr> attrs;
};

struct PValueInfo {
    std::string name;
    std::vector<int64_t> dims;  // -1 for symbolic/unknown dims
};

struct PGraph {
    std::vector<PNode> nodes;
    std::vector<PTensor> initializers;
    std::vector<PValueInfo> inputs, outputs;
};

PTensor parse_tensor(std::string_view bytes) {
    PTensor t;
    Reader r(bytes);
    std::string_view raw;
    uint32_t field;
    WireType type;
    while (r.next_field(field, type)) {
        switch (field) {
            case 1:  // dims
                if (type == protowire::kLengthDelimited) {
                    Reader pr(r.read_bytes());
                    while (!pr.at_end()) t.dims.push_back(static_cast<int64_t>(pr.read_varint()));
                } else {
                    t.dims.push_back(static_cast<int64_t>(r.read_varint()));
                }
                break;
            case 2: t.data_type = static_cast<int>(r.read_varint()); break;
            case 4:  // float_data
                if (type == protowire::kLengthDelimited) {
                    Reader pr(r.read_bytes());
                    while (!pr.at_end()) t.floats.push_back(pr.read_float());
                } else {
                    t.floats.push_back(r.read_float());
                }
                break;
            case 5:  // int32_data
                if (type == protowire::kLengthDelimited) {
                    Reader pr(r.read_bytes());
                    while (!pr.at_end())
                        t.ints.push_back(static_cast<int32_t>(pr.read_varint()));
                } else {
                    t.ints.push_back(static_cast<int32_t>(r.read_varint()));
                }
                break;
            case 7:  // int64_data
                if (type == protowire::kLengthDelimited) {
                    Reader pr(r.read_bytes());
                    while (!pr.at_end()) t.ints.push_back(static_cast<int64_t>(pr.read_varint()));
                } else {
                    t.ints.push_back(static_cast<int64_t>(r.read_varint()));
                }
                break;
            case 8: t.name = std::string(r.read_bytes()); break;
            case 9: raw = r.read_bytes(); break;
            default: r.skip(type); break;
        }
    }
    if (!raw.empty()) {
        if (t.data_type == kDataTypeFloat) {
            if (raw.size() % 4 != 0)
                throw HarnessError(ErrorCode::MalformedModel, "tensor raw_data size not a multiple of 4");
            t.floats.resize(raw.size() / 4);
            std::memcpy(t.floats.data(), raw.data(), raw.size());
        } else if (t.data_type == kDataTypeInt64) {
            if (raw.size() % 8 != 0)
                throw HarnessError(ErrorCode::MalformedModel, "tensor raw_data size not a multiple of 8");
            t.ints.resize(raw.size() / 8);
            std::memcpy(t.ints.data(), raw.data(), raw.size());
        } else if (t.data_type == kDataTypeInt32) {
            std::vector<int32_t> tmp(raw.size() / 4);
            std::memcpy(tmp.data(), raw.data(), raw.size());
            t.ints.assign(tmp.begin(), tmp.end());
        } else {
            throw HarnessError(ErrorCode::MalformedModel,
                               "unsupported tensor data type " + std::to_string(t.data_type));
        }
    }
    return t;
}

PAttr parse_attr(std::string_view bytes) {
    PAttr a;
    Reader r(bytes);
    uint32_t field;
    WireType type;
    while (r.next_field(field, type)) {
        switch (field) {
            case 1: a.name = std::string(r.read_bytes()); break;
            case 2: a.f = r.read_float(); a.has_f = true; break;
            case 3: a.i = static_cast<int64_t>(r.read_varint()); a.has_i = true; break;
            case 5: a.t = parse_tensor(r.read_bytes()); a.has_t = true; break;
            case 8:  // ints
                if (type == protowire::kLengthDelimited) {
                    Reader pr(r.read_bytes());
                    while (!pr.at_end()) a.ints.push_back(static_cast<int64_t>(pr.read_varint()));
                } else {
                    a.ints.push_back(static_cast<int64_t>(r.read_varint()));
                }
                break;
            default: r.skip(type); break;
        }
    }
    return a;
}

PNode parse_node(std::string_view bytes) {
    PNode n;
    Reader r(bytes);
    uint32_t field;
    WireType type;
    while (r.next_field(field, type)) {
        switch (field) {
            case 1: n.inputs.emplace_back(r.read_bytes()); break;
            case 2: n.outputs.emplace_back(r.read_bytes()); break;
            case 3: n.name = std::string(r.read_bytes()); break;
            case 4: n.op_type = std::string(r.read_bytes()); break;
            case 5: n.attrs.push_back(parse_attr(r.read_bytes())); break;
            default: r.skip(type); break;
        }
    }
    return n;
}

PValueInfo parse_value_info(std::string_view bytes) {
    PValueInfo vi;
    Reader r(bytes);
    uint32_t field;
    WireType type;
    while (r.next_field(field, type)) {
        if (field == 1) {
            vi.name = std::string(r.read_bytes());
        } else if (field == 2) {
            // TypeProto -> tensor_type(1) -> shape(2) -> dim(1) -> dim_value(1)/dim_param(2)
            Reader tr(r.read_bytes());
            uint32_t tf;
            WireType tt;
            while (tr.next_field(tf, tt)) {
                if (tf != 1) { tr.skip(tt); continue; }
                Reader ttr(tr.read_bytes());
                uint32_t ttf;
                WireType ttt;
                while (ttr.next_field(ttf, ttt)) {
                    if (ttf != 2) { ttr.skip(ttt); continue; }
                    Reader sr(ttr.read_bytes());
                    uint32_t sf;
                    WireType st;
                    while (sr.next_field(sf, st)) {
                        if (sf != 1) { sr.skip(st); continue; }
                        Reader dr(sr.read_bytes());
                        uint32_t df;
                        WireType dt;
                        int64_t dim = -1;
                        while (dr.next_field(df, dt)) {
                            if (df == 1) dim = static_cast<int64_t>(dr.read_varint());
                            else dr.skip(dt);
                        }
                        vi.dims.push_back(dim);
                    }
                }
            }
        } else {
            r.skip(type);
        }
    }
    return vi;
}

PGraph parse_graph(std::string_view bytes) {
    PGraph g;
    Reader r(bytes);
    uint32_t field;
    WireType type;
    while (r.next_field(field, type)) {
        switch (field) {
            case 1: g.nodes.push_back(parse_node(r.read_bytes())); break;
            case 5: g.initializers.push_back(parse_tensor(r.read_bytes())); break;
            case 11: g.inputs.push_back(parse_value_info(r.read_bytes())); break;
            case 12: g.outputs.push_back(parse_value_info(r.read_bytes())); break;
            default: r.skip(type); break;
        }
    }
    return g;
}

PGraph parse_model(std::string_view bytes) {
    Reader r(bytes);
    uint32_t field;
    WireType type;
    std::optional<PGraph> graph;
    while (r.next_field(field, type)) {
        if (field == 7)
            graph = parse_graph(r.read_bytes());
        else
            r.skip(type);
    }
    if (!graph)
        throw HarnessError(ErrorCode::MalformedModel, "model has no graph");
    return std::move(*graph);
}

// ---- shape helpers ----

int64_t numel_of(const std::vector<int64_t>& shape) {
    int64_t n = 1;
    for (int64_t d : shape) n *= d;
    return n;
}

std::string shape_str(const std::vector<int64_t>& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

std::vector<int64_t> broadcast_shape(const std::vector<int64_t>& a, const std::vector<int64_t>& b) {
    std::vector<int64_t> out(std::max(a.size(), b.size()));
    for (std::size_t i = 0; i < out.size(); ++i) {
        int64_t da = i < out.size() - a.size() ? 1 : a[i - (out.size() - a.size())];
        int64_t db = i < out.size() - b.size() ? 1 : b[i - (out.size() - b.size())];
        if (da != db && da != 1 && db != 1)
            throw HarnessError(ErrorCode::ShapeInferenceFailure,
                               "cannot broadcast " + shape_str(a) + " with " + shape_str(b));
        out[i] = std::max(da, db);
    }
    return out;
}

// ---- network construction ----

struct Builder {
    const PGraph& graph;
    Network net;
    std::unordered_map<std::string, int> value_ids;                 // name -> value table id
    std::unordered_map<std::string, std::vector<int64_t>> int_vals;  // static int64/int32 tensors
    std::unordered_map<std::string, std::vector<int64_t>> int_val_dims;

    explicit Builder(const PGraph& g) : graph(g) {}

    int add_value(const std::string& name, std::vector<int64_t> shape, std::optional<Tensor> constant) {
        int id = static_cast<int>(net.value_shapes.size());
        net.value_shapes.push_back(std::move(shape));
        net.constants.push_back(std::move(constant));
        net.value_names.push_back(name);
        if (!name.empty()) value_ids[name] = id;
        return id;
    }

    int resolve_value(const PNode& n, const std::string& name) {
        auto it = value_ids.find(name);
        if (it == value_ids.end())
            throw HarnessError(ErrorCode::MalformedModel,
                               "node '" + n.op_type + "' references undefined tensor '" + name + "'");
        return it->second;
    }

    const std::vector<int64_t>& require_ints(const PNode& n, const std::string& name) {
        auto it = int_vals.find(name);
        if (it == int_vals.end())
            throw HarnessError(ErrorCode::ShapeInferenceFailure,
                               "'" + n.op_type + "' needs a constant integer tensor for '" + name + "'");
        return it->second;
    }

    static const PAttr* find_attr(const PNode& n, const std::string& name) {
        for (const auto& a : n.attrs)
            if (a.name == name) return &a;
        return nullptr;
    }

    Network run() {
        std::unordered_set<std::string> init_names;
        for (const auto& t : graph.initializers) init_names.insert(t.name);

        // Graph input = the single non-initializer входной value.
        const PValueInfo* graph_input = nullptr;
        for (const auto& vi : graph.inputs) {
            if (init_names.count(vi.name)) continue;
            if (graph_input)
                throw HarnessError(ErrorCode::MalformedModel, "model has more than one graph input");
            graph_input = &vi;
        }
        if (!graph_input)
            throw HarnessError(ErrorCode::MalformedModel, "model has no graph input");
        if (graph.outputs.size() != 1)
            throw HarnessError(ErrorCode::MalformedModel, "model must have exactly one graph output");

        std::vector<int64_t> in_shape = graph_input->dims;
        if (in_shape.empty())
            throw HarnessError(ErrorCode::ShapeInferenceFailure, "graph input has no shape");
        // A symbolic/zero leading dim is the batch axis; run with batch 1.
        if (in_shape[0] <= 0) in_shape[0] = 1;
        for (int64_t d : in_shape)
            if (d <= 0)
                throw HarnessError(ErrorCode::ShapeInferenceFailure,
                                   "graph input has non-static shape " + shape_str(in_shape));

        net.input_name = graph_input->name;
        net.input_shape = in_shape;
        net.output_name = graph.outputs[0].name;
        add_value(net.input_name, in_shape, std::nullopt);

        for (const auto& t : graph.initializers) add_initializer(t);
        for (const auto& n : graph.nodes) add_node(n);

        auto out_it = value_ids.find(net.output_name);
        if (out_it == value_ids.end())
            throw HarnessError(ErrorCode::MalformedModel,
                               "graph output '" + net.output_name + "' is never produced");
        net.output_shape = net.value_shapes[out_it->second];
        return std::move(net);
    }

    void add_initializer(const PTensor& t) {
        if (t.data_type == kDataTypeFloat) {
            Tensor tensor;
            tensor.shape = t.dims;
            tensor.data = t.floats;
            if (tensor.numel() != static_cast<int64_t>(tensor.data.size()))
                throw HarnessError(ErrorCode::MalformedModel,
                                   "initializer '" + t.name + "' has " + std::to_string(tensor.data.size()) +
                                       " elements for shape " + shape_str(t.dims));
            add_value(t.name, t.dims, std::move(tensor));
        } else if (t.data_type == kDataTypeInt64 || t.data_type == kDataTypeInt32) {
            int_vals[t.name] = t.ints;
            int_val_dims[t.name] = t.dims;
        } else {
            throw HarnessError(ErrorCode::MalformedModel,
                               "initializer '" + t.name + "' has unsupported data type " +
                                   std::to_string(t.data_type));
        }
    }

    void add_node(const PNode& n) {
        if (n.outputs.size() != 1)
            throw HarnessError(ErrorCode::MalformedModel,
                               "node '" + n.op_type + "' must have exactly one output");
        if (n.op_type == "Constant") {
            const PAttr* value = find_attr(n, "value");
            if (!value || !value->has_t)
                throw HarnessError(ErrorCode::MalformedModel, "Constant node without 'value' tensor");
            add_initializer([&] {
                PTensor t = value->t;
                t.name = n.outputs[0];
                return t;
            }());
            return;
        }

        Node node;
        node.name = n.name.empty() ? n.outputs[0] : n.name;

        if (n.op_type == "MatMul") node.kind = OpKind::MatMul;
        else if (n.op_type == "Gemm") node.kind = OpKind::Gemm;
        else if (n.op_type == "Add") node.kind = OpKind::Add;
        else if (n.op_type == "Sub") node.kind = OpKind::Sub;
        else if (n.op_type == "Mul") node.kind = OpKind::Mul;
        else if (n.op_type == "Div") node.kind = OpKind::Div;
        else if (n.op_type == "Relu") node.kind = OpKind::Relu;
        else if (n.op_type == "Sigmoid") node.kind = OpKind::Sigmoid;
        else if (n.op_type == "Tanh") node.kind = OpKind::Tanh;
        else if (n.op_type == "Flatten" || n.op_type == "Reshape") node.kind = OpKind::Reshape;
        else if (n.op_type == "Transpose") node.kind = OpKind::Transpose;
        else if (n.op_type == "Concat") node.kind = OpKind::Concat;
        else if (n.op_type == "Slice") node.kind = OpKind::Slice;
        else throw HarnessError(ErrorCode::UnsupportedOperator, n.op_type);

        std::vector<int64_t> out_shape = infer_shape(n, node);
        node.output = add_value(n.outputs[0], out_shape, std::nullopt);
        net.nodes.push_back(std::move(node));
    }

    std::vector<int64_t> infer_shape(const PNode& n, Node& node) {
        auto in_shape = [&](std::size_t i) -> const std::vector<int64_t>& {
            return net.value_shapes[node.inputs[i]];
        };
        auto fail = [&](const std::string& msg) -> HarnessError {
            return HarnessError(ErrorCode::ShapeInferenceFailure, n.op_type + ": " + msg);
        };

        switch (node.kind) {
            case OpKind::MatMul: {
                require_inputs(n, node, 2, 2);
                auto a = in_shape(0), b = in_shape(1);
                if (a.size() == 1) a = {1, a[0]};  // rank-1 promotion, squeezed below
                const bool b_vec = b.size() == 1;
                if (b_vec) b = {b[0], 1};
                if (a.size() != 2 || b.size() != 2) throw fail("only rank-1/2 operands are supported");
                if (a[1] != b[0])
                    throw fail("inner dimensions disagree: " + shape_str(in_shape(0)) + " x " +
                               shape_str(in_shape(1)));
                std::vector<int64_t> out;
                if (in_shape(0).size() == 2) out.push_back(a[0]);
                if (!b_vec) out.push_back(b[1]);
                return out;
            }
            case OpKind::Gemm: {
                require_inputs(n, node, 2, 3);
                GemmParams p;
                if (const PAttr* a = find_attr(n, "alpha")) p.alpha = a->f;
                if (const PAttr* a = find_attr(n, "beta")) p.beta = a->f;
                if (const PAttr* a = find_attr(n, "transA")) p.trans_a = a->i != 0;
                if (const PAttr* a = find_attr(n, "transB")) p.trans_b = a->i != 0;
                node.params = p;
                auto a = in_shape(0), b = in_shape(1);
                if (a.size() == 1) a = {1, a[0]};
                if (a.size() != 2 || b.size() != 2) throw fail("Gemm operands must be rank 2");
                int64_t m = p.trans_a ? a[1] : a[0];
                int64_t ka = p.trans_a ? a[0] : a[1];
                int64_t kb = p.trans_b ? b[1] : b[0];
                int64_t nn = p.trans_b ? b[0] : b[1];
                if (ka != kb)
                    throw fail("inner dimensions disagree: " + shape_str(in_shape(0)) + " x " +
                               shape_str(in_shape(1)));
                std::vector<int64_t> out = {m, nn};
                if (node.inputs.size() == 3) broadcast_shape(out, in_shape(2));  // validity check
                return out;
            }
            case OpKind::Add:
            case OpKind::Sub:
            case OpKind::Mul:
            case OpKind::Div:
                require_inputs(n, node, 2, 2);
                return broadcast_shape(in_shape(0), in_shape(1));
            case OpKind::Relu:
            case OpKind::Sigmoid:
            case OpKind::Tanh:
                require_inputs(n, node, 1, 1);
                return in_shape(0);
            case OpKind::Reshape: {
                if (n.op_type == "Flatten") {
                    require_inputs(n, node, 1, 1);
                    const auto& s = in_shape(0);
                    int64_t axis = 1;
                    if (const PAttr* a = find_attr(n, "axis")) axis = a->i;
                    if (axis < 0) axis += static_cast<int64_t>(s.size());
                    if (axis < 0 || axis > static_cast<int64_t>(s.size()))
                        throw fail("Flatten axis out of range");
                    int64_t outer = 1, inner = 1;
                    for (int64_t i = 0; i < static_cast<int64_t>(s.size()); ++i)
                        (i < axis ? outer : inner) *= s[i];
                    node.params = ReshapeParams{{outer, inner}};
                    return {outer, inner};
                }
                // Reshape: target comes from a constant int64 tensor.
                if (n.inputs.size() != 2)
                    throw HarnessError(ErrorCode::MalformedModel, "Reshape needs data and shape inputs");
                node.inputs.push_back(resolve_value(n, n.inputs[0]));
                const auto& s = in_shape(0);
                std::vector<int64_t> target = require_ints(n, n.inputs[1]);
                int64_t known = 1, infer_at = -1;
                for (std::size_t i = 0; i < target.size(); ++i) {
                    if (target[i] == 0) target[i] = s.size() > i ? s[i] : 0;
                    if (target[i] == -1) {
                        if (infer_at >= 0) throw fail("multiple -1 dims in Reshape");
                        infer_at = static_cast<int64_t>(i);
                    } else {
                        known *= target[i];
                    }
                }
                int64_t total = numel_of(s);
                if (infer_at >= 0) {
                    if (known == 0 || total % known != 0) throw fail("cannot infer -1 dim");
                    target[infer_at] = total / known;
                } else if (known != total) {
                    throw fail("Reshape changes element count");
                }
                node.params = ReshapeParams{target};
                return target;
            }
            case OpKind::Transpose: {
                require_inputs(n, node, 1, 1);
                const auto& s = in_shape(0);
                TransposeParams p;
                if (const PAttr* a = find_attr(n, "perm")) {
                    for (int64_t v : a->ints) p.perm.push_back(static_cast<int>(v));
                } else {
                    for (int i = static_cast<int>(s.size()) - 1; i >= 0; --i) p.perm.push_back(i);
                }
                if (p.perm.size() != s.size()) throw fail("perm length mismatch");
                std::vector<bool> seen(s.size(), false);
                std::vector<int64_t> out(s.size());
                for (std::size_t i = 0; i < p.perm.size(); ++i) {
                    int ax = p.perm[i];
                    if (ax < 0 || ax >= static_cast<int>(s.size()) || seen[ax])
                        throw fail("perm is not a permutation");
                    seen[ax] = true;
                    out[i] = s[ax];
                }
                node.params = std::move(p);
                return out;
            }
            case OpKind::Concat: {
                if (n.inputs.empty())
                    throw HarnessError(ErrorCode::MalformedModel, "Concat with no inputs");
                for (const auto& name : n.inputs) node.inputs.push_back(resolve_value(n, name));
                const PAttr* a = find_attr(n, "axis");
                if (!a) throw fail("Concat requires axis");
                const auto& first = in_shape(0);
                int axis = static_cast<int>(a->i);
                if (axis < 0) axis += static_cast<int>(first.size());
                if (axis < 0 || axis >= static_cast<int>(first.size())) throw fail("axis out of range");
                std::vector<int64_t> out = first;
                for (std::size_t i = 1; i < node.inputs.size(); ++i) {
                    const auto& s = in_shape(i);
                    if (s.size() != first.size()) throw fail("rank mismatch between Concat inputs");
                    for (std::size_t d = 0; d < s.size(); ++d)
                        if (static_cast<int>(d) != axis && s[d] != first[d])
                            throw fail("non-axis dimension mismatch in Concat");
                    out[axis] += s[axis];
                }
                node.params = ConcatParams{axis};
                return out;
            }
            case OpKind::Slice: {
                if (n.inputs.size() < 3 || n.inputs.size() > 5)
                    throw HarnessError(ErrorCode::MalformedModel, "Slice needs 3..5 inputs");
                node.inputs.push_back(resolve_value(n, n.inputs[0]));
                const auto& s = in_shape(0);
                const auto& starts = require_ints(n, n.inputs[1]);
                const auto& ends = require_ints(n, n.inputs[2]);
                std::vector<int64_t> axes;
                if (n.inputs.size() >= 4) axes = require_ints(n, n.inputs[3]);
                else for (std::size_t i = 0; i < starts.size(); ++i) axes.push_back(i);
                std::vector<int64_t> steps(starts.size(), 1);
                if (n.inputs.size() == 5) steps = require_ints(n, n.inputs[4]);
                if (starts.size() != ends.size() || starts.size() != axes.size() ||
                    starts.size() != steps.size())
                    throw fail("starts/ends/axes/steps lengths disagree");
                SliceParams p;
                p.starts.assign(s.size(), 0);
                p.steps.assign(s.size(), 1);
                p.ends.assign(s.begin(), s.end());
                for (std::size_t i = 0; i < axes.size(); ++i) {
                    int64_t ax = axes[i];
                    if (ax < 0) ax += static_cast<int64_t>(s.size());
                    if (ax < 0 || ax >= static_cast<int64_t>(s.size())) throw fail("axis out of range");
                    if (steps[i] <= 0) throw fail("only positive Slice steps are supported");
                    int64_t dim = s[ax];
                    int64_t start = starts[i] < 0 ? starts[i] + dim : starts[i];
                    int64_t end = ends[i] < 0 ? ends[i] + dim : ends[i];
                    p.starts[ax] = std::clamp<int64_t>(start, 0, dim);
                    p.ends[ax] = std::clamp<int64_t>(end, 0, dim);
                    p.steps[ax] = steps[i];
                }
                std::vector<int64_t> out(s.size());
                for (std::size_t d = 0; d < s.size(); ++d) {
                    int64_t span = p.ends[d] - p.starts[d];
                    out[d] = span <= 0 ? 0 : (span + p.steps[d] - 1) / p.steps[d];
                }
                node.params = std::move(p);
                return out;
            }
        }
        throw fail("unreachable");
    }

    // Resolves the first `max_data` names as data inputs; count must be in [min_data, max_data].
    void require_inputs(const PNode& n, Node& node, std::size_t min_data, std::size_t max_data) {
        if (n.inputs.size() < min_data || n.inputs.size() > max_data)
            throw HarnessError(ErrorCode::MalformedModel,
                               "node '" + n.op_type + "' has " + std::to_string(n.inputs.size()) +
                                   " inputs");
        for (const auto& name : n.inputs) node.inputs.push_back(resolve_value(n, name));
    }
};

}  // namespace

Network load_network_bytes(std::string_view bytes) {
    PGraph graph = parse_model(bytes);
    return Builder(graph).run();
}

Network load_network(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw HarnessError(ErrorCode::MissingFile, "cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return load_network_bytes(buf.str());
}

int64_t Network::parameter_count() const {
    int64_t n = 0;
    for (const auto& c : constants)
        if (c) n += c->numel();
    return n;
}

int Network::num_inputs() const { return static_cast<int>(numel_of(input_shape)); }
int Network::num_outputs() const { return static_cast<int>(numel_of(output_shape)); }

// ---- execution ----

namespace {

struct Executor {
    const Network& net;
    std::vector<Tensor> computed;

    explicit Executor(const Network& n) : net(n), computed(n.value_shapes.size()) {}

    const Tensor& value(int id) const {
        if (net.constants[id]) return *net.constants[id];
        return computed[id];
    }

    static float apply_elt(OpKind kind, float a, float b) {
        switch (kind) {
            case OpKind::Add: return a + b;
            case OpKind::Sub: return a - b;
            case OpKind::Mul: return a * b;
            case OpKind::Div: return a / b;
            default: return 0;
        }
    }

    void eltwise(const Node& node) {
        const Tensor& a = value(node.inputs[0]);
        const Tensor& b = value(node.inputs[1]);
        Tensor out;
        out.shape = broadcast_shape(a.shape, b.shape);
        out.data.resize(numel_of(out.shape));
        const std::size_t rank = out.shape.size();
        // Right-aligned strides; broadcast dims contribute stride 0.
        auto strides_for = [&](const Tensor& t) {
            std::vector<int64_t> strides(rank, 0);
            int64_t s = 1;
            for (int i = static_cast<int>(t.shape.size()) - 1; i >= 0; --i) {
                std::size_t d = rank - t.shape.size() + i;
                strides[d] = t.shape[i] == 1 && out.shape[d] != 1 ? 0 : s;
                s *= t.shape[i];
            }
            return strides;
        };
        auto sa = strides_for(a), sb = strides_for(b);
        std::vector<int64_t> idx(rank, 0);
        for (std::size_t lin = 0; lin < out.data.size(); ++lin) {
            int64_t offa = 0, offb = 0;
            for (std::size_t d = 0; d < rank; ++d) {
                offa += idx[d] * sa[d];
                offb += idx[d] * sb[d];
            }
            out.data[lin] = apply_elt(node.kind, a.data[offa], b.data[offb]);
            for (int d = static_cast<int>(rank) - 1; d >= 0; --d) {
                if (++idx[d] < out.shape[d]) break;
                idx[d] = 0;
            }
        }
        computed[node.output] = std::move(out);
    }

    void matmul(const Node& node) {
        const Tensor& ta = value(node.inputs[0]);
        const Tensor& tb = value(node.inputs[1]);
        const bool a_vec = ta.shape.size() == 1;
        const bool b_vec = tb.shape.size() == 1;
        const int64_t m = a_vec ? 1 : ta.shape[0];
        const int64_t k = a_vec ? ta.shape[0] : ta.shape[1];
        const int64_t n = b_vec ? 1 : tb.shape[1];
        Tensor out;
        out.shape = net.value_shapes[node.output];
        out.data.resize(m * n);
        for (int64_t i = 0; i < m; ++i)
            for (int64_t j = 0; j < n; ++j) {
                float acc = 0.0f;
                for (int64_t t = 0; t < k; ++t)
                    acc += ta.data[i * k + t] * tb.data[b_vec ? t : t * n + j];
                out.data[i * n + j] = acc;
            }
        computed[node.output] = std::move(out);
    }

    void gemm(const Node& node) {
        const auto& p = std::get<GemmParams>(node.params);
        const Tensor& ta = value(node.inputs[0]);
        const Tensor& tb = value(node.inputs[1]);
        const Tensor* tc = node.inputs.size() == 3 ? &value(node.inputs[2]) : nullptr;
        auto a_dims = ta.shape;
        if (a_dims.size() == 1) a_dims = {1, a_dims[0]};
        const int64_t m = p.trans_a ? a_dims[1] : a_dims[0];
        const int64_t k = p.trans_a ? a_dims[0] : a_dims[1];
        const int64_t n = p.trans_b ? tb.shape[0] : tb.shape[1];
        Tensor out;
        out.shape = net.value_shapes[node.output];
        out.data.resize(m * n);
        const int64_t a_cols = a_dims[1], b_cols = tb.shape[1];
        for (int64_t i = 0; i < m; ++i)
            for (int64_t j = 0; j < n; ++j) {
                float acc = 0.0f;
                for (int64_t t = 0; t < k; ++t) {
                    float av = p.trans_a ? ta.data[t * a_cols + i] : ta.data[i * a_cols + t];
                    float bv = p.trans_b ? tb.data[j * b_cols + t] : tb.data[t * b_cols + j];
                    acc += av * bv;
                }
                float y = p.alpha * acc;
                if (tc && p.beta != 0.0f) y += p.beta * bias_at(*tc, i, j, m, n);
                out.data[i * n + j] = y;
            }
        computed[node.output] = std::move(out);
    }

    static float bias_at(const Tensor& c, int64_t i, int64_t j, int64_t m, int64_t n) {
        if (c.shape.empty() || c.numel() == 1) return c.data[0];
        if (c.shape.size() == 1) {
            // [n] broadcast over rows; [m] is also legal when n == 1.
            if (c.shape[0] == n) return c.data[j];
            if (c.shape[0] == m && n == 1) return c.data[i];
        }
        if (c.shape.size() == 2) {
            int64_t ci = c.shape[0] == 1 ? 0 : i;
            int64_t cj = c.shape[1] == 1 ? 0 : j;
            return c.data[ci * c.shape[1] + cj];
        }
        throw HarnessError(ErrorCode::ShapeMismatch, "Gemm bias shape not broadcastable");
    }

    void activation(const Node& node) {
        const Tensor& in = value(node.inputs[0]);
        Tensor out;
        out.shape = in.shape;
        out.data.resize(in.data.size());
        for (std::size_t i = 0; i < in.data.size(); ++i) {
            float v = in.data[i];
            switch (node.kind) {
                case OpKind::Relu: out.data[i] = v > 0.0f ? v : 0.0f; break;
                case OpKind::Sigmoid: out.data[i] = 1.0f / (1.0f + std::exp(-v)); break;
                case OpKind::Tanh: out.data[i] = std::tanh(v); break;
                default: break;
            }
        }
        computed[node.output] = std::move(out);
    }

    void reshape(const Node& node) {
        const Tensor& in = value(node.inputs[0]);
        Tensor out;
        out.shape = std::get<ReshapeParams>(node.params).target;
        out.data = in.data;
        computed[node.output] = std::move(out);
    }

    void transpose(const Node& node) {
        const Tensor& in = value(node.inputs[0]);
        const auto& perm = std::get<TransposeParams>(node.params).perm;
        Tensor out;
        out.shape = net.value_shapes[node.output];
        out.data.resize(in.data.size());
        const std::size_t rank = in.shape.size();
        std::vector<int64_t> in_strides(rank, 1);
        for (int i = static_cast<int>(rank) - 2; i >= 0; --i)
            in_strides[i] = in_strides[i + 1] * in.shape[i + 1];
        std::vector<int64_t> idx(rank, 0);
        for (std::size_t lin = 0; lin < out.data.size(); ++lin) {
            int64_t src = 0;
            for (std::size_t d = 0; d < rank; ++d) src += idx[d] * in_strides[perm[d]];
            out.data[lin] = in.data[src];
            for (int d = static_cast<int>(rank) - 1; d >= 0; --d) {
                if (++idx[d] < out.shape[d]) break;
                idx[d] = 0;
            }
        }
        computed[node.output] = std::move(out);
    }

    void concat(const Node& node) {
        const int axis = std::get<ConcatParams>(node.params).axis;
        Tensor out;
        out.shape = net.value_shapes[node.output];
        out.data.resize(numel_of(out.shape));
        int64_t outer = 1;
        for (int d = 0; d < axis; ++d) outer *= out.shape[d];
        int64_t inner = 1;
        for (std::size_t d = axis + 1; d < out.shape.size(); ++d) inner *= out.shape[d];
        int64_t out_axis = out.shape[axis];
        int64_t axis_off = 0;
        for (int input_id : node.inputs) {
            const Tensor& in = value(input_id);
            int64_t in_axis = in.shape[axis];
            for (int64_t o = 0; o < outer; ++o)
                std::copy_n(in.data.begin() + o * in_axis * inner, in_axis * inner,
                            out.data.begin() + (o * out_axis + axis_off) * inner);
            axis_off += in_axis;
        }
        computed[node.output] = std::move(out);
    }

    void slice(const Node& node) {
        const auto& p = std::get<SliceParams>(node.params);
        const Tensor& in = value(node.inputs[0]);
        Tensor out;
        out.shape = net.value_shapes[node.output];
        out.data.resize(numel_of(out.shape));
        const std::size_t rank = in.shape.size();
        std::vector<int64_t> in_strides(rank, 1);
        for (int i = static_cast<int>(rank) - 2; i >= 0; --i)
            in_strides[i] = in_strides[i + 1] * in.shape[i + 1];
        std::vector<int64_t> idx(rank, 0);
        for (std::size_t lin = 0; lin < out.data.size(); ++lin) {
            int64_t src = 0;
            for (std::size_t d = 0; d < rank; ++d)
                src += (p.starts[d] + idx[d] * p.steps[d]) * in_strides[d];
            out.data[lin] = in.data[src];
            for (int d = static_cast<int>(rank) - 1; d >= 0; --d) {
                if (++idx[d] < out.shape[d]) break;
                idx[d] = 0;
            }
        }
        computed[node.output] = std::move(out);
    }

    void run(const Node& node) {
        switch (node.kind) {
            case OpKind::MatMul: matmul(node); break;
            case OpKind::Gemm: gemm(node); break;
            case OpKind::Add:
            case OpKind::Sub:
            case OpKind::Mul:
            case OpKind::Div: eltwise(node); break;
            case OpKind::Relu:
            case OpKind::Sigmoid:
            case OpKind::Tanh: activation(node); break;
            case OpKind::Reshape: reshape(node); break;
            case OpKind::Transpose: transpose(node); break;
            case OpKind::Concat: concat(node); break;
            case OpKind::Slice: slice(node); break;
        }
    }
};

}  // namespace

Tensor infer(const Network& net, const Tensor& x) {
    if (x.numel() != numel_of(net.input_shape))
        throw HarnessError(ErrorCode::ShapeMismatch,
                           "input has " + std::to_string(x.numel()) + " elements, model expects " +
                               std::to_string(numel_of(net.input_shape)));
    if (static_cast<int64_t>(x.data.size()) != x.numel())
        throw HarnessError(ErrorCode::ShapeMismatch, "tensor data does not match its shape");
    Executor exec(net);
    exec.computed[0] = x;
    exec.computed[0].shape = net.input_shape;
    for (const auto& node : net.nodes) exec.run(node);
    auto it = std::find(net.value_names.begin(), net.value_names.end(), net.output_name);
    int out_id = static_cast<int>(it - net.value_names.begin());
    return exec.value(out_id);
}

std::vector<double> infer_flat(const Network& net, std::span<const double> x) {
    Tensor t;
    t.shape = {static_cast<int64_t>(x.size())};
    t.data.reserve(x.size());
    for (double v : x) t.data.push_back(static_cast<float>(v));
    Tensor y = infer(net, t);
    return std::vector<double>(y.data.begin(), y.data.end());
}

std::string describe(const Network& net) {
    std::ostringstream out;
    out << "input:  " << net.input_name << " " << shape_str(net.input_shape) << "\n";
    out << "output: " << net.output_name << " " << shape_str(net.output_shape) << "\n";
    out << "nodes:  " << net.nodes.size() << "\n";
    for (const auto& node : net.nodes)
        out << "  " << op_name(node.kind) << " -> " << net.value_names[node.output] << " "
            << shape_str(net.value_shapes[node.output]) << "\n";
    out << "parameters: " << net.parameter_count() << "\n";
    return out.str();
}

}  // namespace vnncomp::onnx

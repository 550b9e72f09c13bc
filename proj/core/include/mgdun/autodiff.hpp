// Tape-based reverse-mode autodiff over the fixed op set in tensor.hpp.
// Nodes are appended in evaluation order, so the tape itself is a topological
// order; backward() sweeps it once in reverse. A tape must not be mutated
// from two threads at once; independent tapes are independent.

#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "mgdun/tensor.hpp"

namespace mgdun {

struct Var {
    int i = -1;
    bool valid() const { return i >= 0; }
};

class Tape {
public:
    // Leaves. Parameters want gradients; data inputs normally do not.
    Var leaf(Tensor value, bool requires_grad = false);

    Var conv2d(Var x, Var w, Var b, int stride = 1, int padding = 0);  // b may be invalid
    Var relu(Var x);
    Var maxpool2(Var x);
    Var upsample_nearest2(Var x);
    Var pixel_unshuffle2(Var x);
    Var pixel_shuffle2(Var x);

    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var hadamard(Var a, Var b);
    Var scalar_mul(Var a, float s);
    Var negate(Var a);
    Var exp_elem(Var a);
    Var clamp_elem(Var a, float lo, float hi);
    Var mean_abs(Var a);                     // scalar output (1,1,1,1)
    Var scale_by(Var a, Var scalar);         // scalar is a (1,1,1,1) var
    Var concat_c(Var a, Var b);
    Var slice_c(Var a, int c_begin, int c_end);

    // Reverse sweep from a scalar loss. Gradients of leaves created with
    // requires_grad survive; interior buffers are released as the sweep
    // passes them. Throws on a non-scalar loss.
    void backward(Var loss);

    const Tensor& val(Var v) const;
    // Gradient of the last backward() w.r.t. this node. Empty tensor when the
    // node never received one (disconnected from the loss).
    const Tensor& grad(Var v) const;

    std::size_t size() const { return nodes_.size(); }

private:
    enum class Op : std::uint8_t {
        leaf, conv2d, relu, maxpool2, upsample2, pix_unshuffle, pix_shuffle,
        add, sub, hadamard, scalar_mul, negate, exp, clamp, mean_abs,
        scale_by, concat, slice
    };

    struct Node {
        Op op = Op::leaf;
        std::array<int, 3> in = {-1, -1, -1};
        Tensor val;
        Tensor grad;
        bool needs_grad = false;
        bool is_param = false;
        // op attributes
        int stride = 1, padding = 0;
        float a0 = 0.0f, a1 = 0.0f;  // scalar / clamp bounds
        int c0 = 0, c1 = 0;          // slice range
        std::vector<std::int64_t> argmax;
    };

    Var push(Node n);
    void accum(int idx, Tensor g);
    void accum_scaled(int idx, const Tensor& g, float s);
    bool wants(int idx) const { return idx >= 0 && nodes_[std::size_t(idx)].needs_grad; }

    std::vector<Node> nodes_;
};

}  // namespace mgdun

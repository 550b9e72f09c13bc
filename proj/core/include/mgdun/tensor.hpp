// Dense 4-D float tensor (batch, channels, rows, cols) and the fixed set of
// layer operations the reconstruction network is built from. All math is
// 32-bit; reductions accumulate in 64-bit internally.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace mgdun {

struct Shape {
    int n = 0, c = 0, h = 0, w = 0;

    std::int64_t numel() const {
        return std::int64_t(n) * c * h * w;
    }
    bool operator==(const Shape&) const = default;
    std::string str() const;
};

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape s, float fill = 0.0f);
    static Tensor from(Shape s, std::vector<float> values);

    const Shape& shape() const { return shape_; }
    std::int64_t numel() const { return shape_.numel(); }
    bool empty() const { return data_.empty(); }

    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }
    std::span<float> values() { return data_; }
    std::span<const float> values() const { return data_; }

    float& at(int n, int c, int y, int x) {
        return data_[((std::int64_t(n) * shape_.c + c) * shape_.h + y) * shape_.w + x];
    }
    const float& at(int n, int c, int y, int x) const {
        return data_[((std::int64_t(n) * shape_.c + c) * shape_.h + y) * shape_.w + x];
    }
    float& operator[](std::int64_t i) { return data_[i]; }
    float operator[](std::int64_t i) const { return data_[i]; }

    bool all_finite() const;

private:
    Shape shape_;
    std::vector<float> data_;
};

// Throws std::invalid_argument with `msg` when `cond` is false.
void require(bool cond, const std::string& msg);

// --- layer ops -------------------------------------------------------------
// Cross-correlation convention (no kernel flip), zero padding, stride >= 1.
// weight shape is (outC, inC, kh, kw); bias is (1, outC, 1, 1) or empty.
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              int stride = 1, int padding = 0);
// Gradient kernels used by the tape; exposed so they can be tested directly.
Tensor conv2d_grad_input(const Tensor& grad_out, const Tensor& weight,
                         Shape input_shape, int stride, int padding);
Tensor conv2d_grad_weight(const Tensor& grad_out, const Tensor& input,
                          Shape weight_shape, int stride, int padding);
Tensor conv2d_grad_bias(const Tensor& grad_out);

Tensor relu(const Tensor& x);
// 2x2 non-overlapping max pool; even spatial dims required. `argmax`, when
// given, receives the flat input index of each output's winning element.
Tensor maxpool2(const Tensor& x, std::vector<std::int64_t>* argmax = nullptr);
Tensor upsample_nearest2(const Tensor& x);
Tensor pixel_unshuffle2(const Tensor& x);  // (n,c,h,w) -> (n,4c,h/2,w/2)
Tensor pixel_shuffle2(const Tensor& x);    // exact inverse

// --- elementwise -----------------------------------------------------------
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor scalar_mul(const Tensor& a, float s);
Tensor negate(const Tensor& a);
Tensor exp_elem(const Tensor& a);
Tensor clamp_elem(const Tensor& a, float lo, float hi);
float mean_abs(const Tensor& a);

// --- channel rearrangement (needed by skip connections and coupling) -------
Tensor concat_c(const Tensor& a, const Tensor& b);
Tensor slice_c(const Tensor& a, int c_begin, int c_end);

double dot(const Tensor& a, const Tensor& b);  // 64-bit accumulation
double sum_sq(const Tensor& a);

}  // namespace mgdun

// PSNR, SSIM, and RMSE in 0-255 units for evaluating reconstructions.

#pragma once

#include <vector>

#include "mgdun/tensor.hpp"

namespace mgdun {

// 10*log10(peak^2 / mse); identical inputs report +infinity.
double psnr(const Tensor& a, const Tensor& b, double peak = 1.0);

// Mean local SSIM with an 11x11 Gaussian window (sigma 1.5), K1 = 0.01,
// K2 = 0.03, peak 1.0; channels and batch entries are averaged. Rejects
// images smaller than the window.
double ssim(const Tensor& a, const Tensor& b);

// 255 * sqrt(mse) for inputs in [0,1]. Per image,
// 20*log10(255 / rmse255) equals psnr(a, b, 1.0).
double rmse255(const Tensor& a, const Tensor& b);

struct MetricRow {
    double psnr_db = 0.0;
    double ssim = 0.0;
    double rmse255 = 0.0;
};

struct MetricReport {
    std::vector<MetricRow> per_image;
    MetricRow mean;
};

MetricRow evaluate_pair(const Tensor& pred, const Tensor& gt);
MetricReport evaluate_set(const std::vector<Tensor>& pred,
                          const std::vector<Tensor>& gt);

}  // namespace mgdun

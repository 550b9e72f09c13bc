#include "mgdun/metrics.hpp"

#include <cmath>
#include <limits>

namespace mgdun {

namespace {

double mse(const Tensor& a, const Tensor& b) {
    require(a.shape() == b.shape(), "metrics: shape mismatch " + a.shape().str() +
                                        " vs " + b.shape().str());
    require(a.numel() > 0, "metrics: empty tensors");
    double acc = 0.0;
    for (std::int64_t i = 0; i < a.numel(); ++i) {
        const double d = double(a[i]) - double(b[i]);
        acc += d * d;
    }
    return acc / double(a.numel());
}

}  // namespace

double psnr(const Tensor& a, const Tensor& b, double peak) {
    const double m = mse(a, b);
    if (m == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / m);
}

double rmse255(const Tensor& a, const Tensor& b) {
    return 255.0 * std::sqrt(mse(a, b));
}

double ssim(const Tensor& a, const Tensor& b) {
    require(a.shape() == b.shape(), "ssim: shape mismatch " + a.shape().str() +
                                        " vs " + b.shape().str());
    const Shape& s = a.shape();
    constexpr int win = 11;
    constexpr double sigma = 1.5;
    constexpr double c1 = (0.01 * 1.0) * (0.01 * 1.0);
    constexpr double c2 = (0.03 * 1.0) * (0.03 * 1.0);
    require(s.h >= win && s.w >= win,
            "ssim: image " + s.str() + " smaller than the 11x11 window");

    double wts[win][win];
    double wsum = 0.0;
    for (int y = 0; y < win; ++y)
        for (int x = 0; x < win; ++x) {
            const double dy = y - win / 2, dx = x - win / 2;
            wts[y][x] = std::exp(-(dy * dy + dx * dx) / (2.0 * sigma * sigma));
            wsum += wts[y][x];
        }
    for (auto& row : wts)
        for (auto& v : row) v /= wsum;

    double total = 0.0;
    std::int64_t count = 0;
    for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c)
            for (int oy = 0; oy + win <= s.h; ++oy)
                for (int ox = 0; ox + win <= s.w; ++ox) {
                    double mx = 0, my = 0, mxx = 0, myy = 0, mxy = 0;
                    for (int y = 0; y < win; ++y)
                        for (int x = 0; x < win; ++x) {
                            const double w = wts[y][x];
                            const double va = a.at(n, c, oy + y, ox + x);
                            const double vb = b.at(n, c, oy + y, ox + x);
                            mx += w * va;
                            my += w * vb;
                            mxx += w * va * va;
                            myy += w * vb * vb;
                            mxy += w * va * vb;
                        }
                    const double vx = mxx - mx * mx;
                    const double vy = myy - my * my;
                    const double cxy = mxy - mx * my;
                    const double val = ((2 * mx * my + c1) * (2 * cxy + c2)) /
                                       ((mx * mx + my * my + c1) * (vx + vy + c2));
                    total += val;
                    ++count;
                }
    return total / double(count);
}

MetricRow evaluate_pair(const Tensor& pred, const Tensor& gt) {
    return MetricRow{psnr(pred, gt), ssim(pred, gt), rmse255(pred, gt)};
}

MetricReport evaluate_set(const std::vector<Tensor>& pred,
                          const std::vector<Tensor>& gt) {
    require(pred.size() == gt.size() && !pred.empty(),
            "evaluate_set: need matching non-empty sets");
    MetricReport rep;
    double sp = 0, ss = 0, sr = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        rep.per_image.push_back(evaluate_pair(pred[i], gt[i]));
        sp += rep.per_image.back().psnr_db;
        ss += rep.per_image.back().ssim;
        sr += rep.per_image.back().rmse255;
    }
    const double n = double(pred.size());
    rep.mean = MetricRow{sp / n, ss / n, sr / n};
    return rep;
}

}  // namespace mgdun

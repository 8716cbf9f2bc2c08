#pragma once

#include <functional>
#include <string>

#include "hes/losses.hpp"
#include "hes/rng.hpp"

namespace hes {

// Alpine-d(x) = sum_i |x_i sin(x_i) + 0.1 x_i|, default box [0, 10]^d.
double alpine(const Vector& x);

struct MultihillsParams {
    std::vector<Vector> means;
    std::vector<double> cov_scales;  // isotropic covariance scale per component
    Vector weights;

    static MultihillsParams defaults();
};

// Mixture of isotropic 2-D Gaussian densities, default box [0, 1]^2.
double multihills(const Vector& x, const MultihillsParams& params = MultihillsParams::defaults());

// Regular raster over a rectangle, nodes at the extent edges inclusive,
// row 0 on the y_lo edge. Values are min-max normalized to [0, 1] on load.
struct RasterGrid {
    std::size_t width = 0;
    std::size_t height = 0;
    double x_lo = 0.0, x_hi = 1.0;
    double y_lo = 0.0, y_hi = 1.0;
    std::vector<double> values;  // row-major, height rows of width entries

    double at(std::size_t ix, std::size_t iy) const { return values[iy * width + ix]; }
};

// CSV format: line 1 `width,height,x_lo,x_hi,y_lo,y_hi`, then `height` lines
// of `width` comma-separated values. Parse errors report line and column.
RasterGrid load_raster_csv(const std::string& path);
RasterGrid parse_raster_csv(const std::string& text, const std::string& origin);
void normalize_raster(RasterGrid& grid);

// Bilinear interpolation over the four surrounding nodes; exact at nodes,
// continuous across cell boundaries. Throws OutOfExtent outside the extents.
double raster_eval(const RasterGrid& grid, const Vector& x);

// A black box with noisy evaluation: y = f(x) + N(0, noise_sd^2).
class BlackBox {
public:
    BlackBox(std::function<double(const Vector&)> f, Box box, double noise_sd)
        : f_(std::move(f)), box_(std::move(box)), noise_sd_(noise_sd) {}

    const Box& box() const { return box_; }
    double noise_sd() const { return noise_sd_; }

    double eval_true(const Vector& x) const { return f_(x); }
    double eval_noisy(const Vector& x, RngStream& rng) const {
        return f_(x) + noise_sd_ * rng.normal();
    }

    std::function<double(const Vector&)> truth() const { return f_; }

    // Min / max over a deterministic evaluation grid; used for default noise
    // levels, thresholds and targets.
    struct Range {
        double min;
        double max;
        double span() const { return max - min; }
    };
    Range output_range(std::size_t per_dim = 101) const;

private:
    std::function<double(const Vector&)> f_;
    Box box_;
    double noise_sd_;
};

BlackBox make_alpine_blackbox(std::size_t dim, double noise_sd);
BlackBox make_multihills_blackbox(double noise_sd,
                                  const MultihillsParams& params = MultihillsParams::defaults());
BlackBox make_raster_blackbox(const RasterGrid& grid, double noise_sd);

// Values of the true function on a regular grid over the box (per_dim nodes
// per axis); used for percentile thresholds and accuracy grids.
Vector grid_values(const BlackBox& bb, std::size_t per_dim);
Matrix regular_grid(const Box& box, std::size_t per_dim);

}  // namespace hes

#include "hes/benchfuncs.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "hes/errors.hpp"

namespace hes {

double alpine(const Vector& x) {
    double s = 0.0;
    for (double xi : x) s += std::abs(xi * std::sin(xi) + 0.1 * xi);
    return s;
}

MultihillsParams MultihillsParams::defaults() {
    MultihillsParams p;
    p.means = {{0.25, 0.25}, {0.75, 0.4}, {0.4, 0.75}};
    p.cov_scales = {0.01, 0.01, 0.01};
    p.weights = {0.4, 0.3, 0.3};
    return p;
}

double multihills(const Vector& x, const MultihillsParams& params) {
    if (x.size() != 2) throw DimensionMismatch("multihills: expects 2-D input");
    double s = 0.0;
    for (std::size_t j = 0; j < params.weights.size(); ++j) {
        double d2 = 0.0;
        for (std::size_t c = 0; c < 2; ++c) {
            const double d = x[c] - params.means[j][c];
            d2 += d * d;
        }
        const double cov = params.cov_scales[j];
        s += params.weights[j] * std::exp(-0.5 * d2 / cov) / (2.0 * M_PI * cov);
    }
    return s;
}

namespace {

[[noreturn]] void parse_fail(const std::string& origin, std::size_t line, std::size_t column,
                             const std::string& what) {
    std::ostringstream os;
    os << origin << ":" << line << ":" << column << ": " << what;
    throw ConfigError(os.str());
}

double parse_number(const std::string& token, const std::string& origin, std::size_t line,
                    std::size_t column) {
    try {
        std::size_t used = 0;
        const double v = std::stod(token, &used);
        if (used != token.size()) parse_fail(origin, line, column, "trailing characters in number");
        return v;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        parse_fail(origin, line, column, "expected a number, got '" + token + "'");
    }
}

std::vector<std::pair<std::string, std::size_t>> split_csv_line(const std::string& line) {
    std::vector<std::pair<std::string, std::size_t>> tokens;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == ',') {
            tokens.emplace_back(line.substr(start, i - start), start + 1);
            start = i + 1;
        }
    }
    return tokens;
}

std::string trimmed(std::string s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.pop_back();
    std::size_t b = 0;
    while (b < s.size() && (s[b] == ' ' || s[b] == '\t')) ++b;
    return s.substr(b);
}

}  // namespace

RasterGrid parse_raster_csv(const std::string& text, const std::string& origin) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) parse_fail(origin, 1, 1, "empty raster file");
    auto header = split_csv_line(trimmed(line));
    if (header.size() != 6)
        parse_fail(origin, 1, 1, "header must be width,height,x_lo,x_hi,y_lo,y_hi");
    RasterGrid g;
    const double w = parse_number(header[0].first, origin, 1, header[0].second);
    const double h = parse_number(header[1].first, origin, 1, header[1].second);
    if (w < 2 || h < 2 || w != std::floor(w) || h != std::floor(h))
        parse_fail(origin, 1, 1, "width and height must be integers >= 2");
    g.width = static_cast<std::size_t>(w);
    g.height = static_cast<std::size_t>(h);
    g.x_lo = parse_number(header[2].first, origin, 1, header[2].second);
    g.x_hi = parse_number(header[3].first, origin, 1, header[3].second);
    g.y_lo = parse_number(header[4].first, origin, 1, header[4].second);
    g.y_hi = parse_number(header[5].first, origin, 1, header[5].second);
    if (!(g.x_lo < g.x_hi) || !(g.y_lo < g.y_hi))
        parse_fail(origin, 1, 1, "extents must satisfy lo < hi");

    g.values.resize(g.width * g.height);
    for (std::size_t row = 0; row < g.height; ++row) {
        if (!std::getline(in, line))
            parse_fail(origin, row + 2, 1, "missing raster row");
        auto tokens = split_csv_line(trimmed(line));
        if (tokens.size() != g.width)
            parse_fail(origin, row + 2, 1,
                       "expected " + std::to_string(g.width) + " values, got " +
                           std::to_string(tokens.size()));
        for (std::size_t col = 0; col < g.width; ++col) {
            const double v = parse_number(tokens[col].first, origin, row + 2, tokens[col].second);
            if (!std::isfinite(v))
                parse_fail(origin, row + 2, tokens[col].second, "non-finite raster value");
            g.values[row * g.width + col] = v;
        }
    }
    return g;
}

RasterGrid load_raster_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open raster file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    RasterGrid g = parse_raster_csv(buf.str(), path);
    normalize_raster(g);
    return g;
}

void normalize_raster(RasterGrid& grid) {
    double lo = grid.values[0], hi = grid.values[0];
    for (double v : grid.values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const double span = hi - lo;
    if (span <= 0.0) {
        for (double& v : grid.values) v = 0.0;
        return;
    }
    for (double& v : grid.values) v = (v - lo) / span;
}

double raster_eval(const RasterGrid& grid, const Vector& x) {
    if (x.size() != 2) throw DimensionMismatch("raster_eval: expects 2-D input");
    const double tol_x = 1e-12 * (grid.x_hi - grid.x_lo);
    const double tol_y = 1e-12 * (grid.y_hi - grid.y_lo);
    if (x[0] < grid.x_lo - tol_x || x[0] > grid.x_hi + tol_x || x[1] < grid.y_lo - tol_y ||
        x[1] > grid.y_hi + tol_y)
        throw OutOfExtent("raster_eval: query outside raster extents");

    const double fx = (x[0] - grid.x_lo) / (grid.x_hi - grid.x_lo) * (grid.width - 1);
    const double fy = (x[1] - grid.y_lo) / (grid.y_hi - grid.y_lo) * (grid.height - 1);
    std::size_t ix = static_cast<std::size_t>(std::min(std::max(fx, 0.0),
                                                       static_cast<double>(grid.width - 2)));
    std::size_t iy = static_cast<std::size_t>(std::min(std::max(fy, 0.0),
                                                       static_cast<double>(grid.height - 2)));
    const double tx = std::min(std::max(fx - ix, 0.0), 1.0);
    const double ty = std::min(std::max(fy - iy, 0.0), 1.0);
    const double v00 = grid.at(ix, iy);
    const double v10 = grid.at(ix + 1, iy);
    const double v01 = grid.at(ix, iy + 1);
    const double v11 = grid.at(ix + 1, iy + 1);
    return (1 - tx) * (1 - ty) * v00 + tx * (1 - ty) * v10 + (1 - tx) * ty * v01 + tx * ty * v11;
}

BlackBox::Range BlackBox::output_range(std::size_t per_dim) const {
    const Matrix grid = regular_grid(box_, per_dim);
    Range r{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    Vector x(box_.dim());
    for (std::size_t i = 0; i < grid.rows(); ++i) {
        for (std::size_t c = 0; c < box_.dim(); ++c) x[c] = grid(i, c);
        const double v = f_(x);
        r.min = std::min(r.min, v);
        r.max = std::max(r.max, v);
    }
    return r;
}

BlackBox make_alpine_blackbox(std::size_t dim, double noise_sd) {
    Box box;
    box.lo.assign(dim, 0.0);
    box.hi.assign(dim, 10.0);
    return BlackBox([](const Vector& x) { return alpine(x); }, std::move(box), noise_sd);
}

BlackBox make_multihills_blackbox(double noise_sd, const MultihillsParams& params) {
    Box box;
    box.lo = {0.0, 0.0};
    box.hi = {1.0, 1.0};
    return BlackBox([params](const Vector& x) { return multihills(x, params); }, std::move(box),
                    noise_sd);
}

BlackBox make_raster_blackbox(const RasterGrid& grid, double noise_sd) {
    Box box;
    box.lo = {grid.x_lo, grid.y_lo};
    box.hi = {grid.x_hi, grid.y_hi};
    return BlackBox([grid](const Vector& x) { return raster_eval(grid, x); }, std::move(box),
                    noise_sd);
}

Matrix regular_grid(const Box& box, std::size_t per_dim) {
    const std::size_t d = box.dim();
    std::size_t total = 1;
    for (std::size_t c = 0; c < d; ++c) total *= per_dim;
    Matrix grid(total, d);
    for (std::size_t i = 0; i < total; ++i) {
        std::size_t rem = i;
        for (std::size_t c = 0; c < d; ++c) {
            const std::size_t idx = rem % per_dim;
            rem /= per_dim;
            grid(i, c) = box.lo[c] + box.width(c) * idx / (per_dim - 1);
        }
    }
    return grid;
}

Vector grid_values(const BlackBox& bb, std::size_t per_dim) {
    const Matrix grid = regular_grid(bb.box(), per_dim);
    Vector out(grid.rows());
    Vector x(bb.box().dim());
    for (std::size_t i = 0; i < grid.rows(); ++i) {
        for (std::size_t c = 0; c < x.size(); ++c) x[c] = grid(i, c);
        out[i] = bb.eval_true(x);
    }
    return out;
}

}  // namespace hes

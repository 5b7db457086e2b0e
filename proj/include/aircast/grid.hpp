#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "aircast/error.hpp"
#include "aircast/tensor.hpp"
#include "aircast/time.hpp"

namespace aircast {

constexpr double kDegToRad = M_PI / 180.0;

// Normalize any longitude (including [-180, 180) input) to [0, 360).
inline double normalize_lon(double lon) {
    double x = std::fmod(lon, 360.0);
    if (x < 0.0) x += 360.0;
    return x;
}

// Cell-center latitude/longitude raster descriptor. Latitudes are strictly
// monotone with uniform spacing; longitudes live in [0, 360) with uniform
// spacing modulo 360 (regional crops may wrap the prime meridian, so the
// stored sequence can jump once from ~359 back to ~0).
struct LatLonGrid {
    std::vector<double> lats;
    std::vector<double> lons;
    double resolution_deg = 0.0;

    std::size_t rows() const { return lats.size(); }
    std::size_t cols() const { return lons.size(); }

    // ERA5-style offset grid: centers half a cell away from the poles, so
    // cos(lat) stays positive everywhere. 5.625 degrees gives 32 x 64.
    static LatLonGrid global(double resolution_deg) {
        if (resolution_deg <= 0.0) throw DataError("grid resolution must be positive");
        const auto nlat = static_cast<std::size_t>(std::llround(180.0 / resolution_deg));
        const auto nlon = static_cast<std::size_t>(std::llround(360.0 / resolution_deg));
        if (nlat * resolution_deg != 180.0 || nlon * resolution_deg != 360.0)
            throw DataError("resolution does not divide the sphere evenly");
        LatLonGrid g;
        g.resolution_deg = resolution_deg;
        g.lats.resize(nlat);
        g.lons.resize(nlon);
        for (std::size_t i = 0; i < nlat; ++i)
            g.lats[i] = -90.0 + resolution_deg * (static_cast<double>(i) + 0.5);
        for (std::size_t j = 0; j < nlon; ++j) g.lons[j] = resolution_deg * static_cast<double>(j);
        return g;
    }

    bool is_global() const {
        return std::abs(static_cast<double>(cols()) * resolution_deg - 360.0) < 1e-9 &&
               std::abs(static_cast<double>(rows()) * resolution_deg - 180.0) < 1e-9;
    }

    bool operator==(const LatLonGrid& other) const {
        return lats == other.lats && lons == other.lons &&
               resolution_deg == other.resolution_deg;
    }

    void validate() const {
        if (lats.size() < 1 || lons.size() < 1) throw DataError("empty grid");
        if (resolution_deg <= 0.0) throw DataError("grid resolution must be positive");
        for (std::size_t i = 1; i < lats.size(); ++i) {
            const double step = lats[i] - lats[i - 1];
            if (std::abs(std::abs(step) - resolution_deg) > 1e-9)
                throw DataError("non-uniform latitude spacing");
            if ((step > 0) != (lats[1] > lats[0])) throw DataError("latitudes not monotone");
        }
        for (double lat : lats)
            if (lat < -90.0 || lat > 90.0) throw DataError("latitude outside [-90, 90]");
        for (std::size_t j = 1; j < lons.size(); ++j) {
            double step = lons[j] - lons[j - 1];
            if (step < 0.0) step += 360.0;  // single wrap allowed for crops
            if (std::abs(step - resolution_deg) > 1e-9)
                throw DataError("non-uniform longitude spacing");
        }
        for (double lon : lons)
            if (lon < 0.0 || lon >= 360.0) throw DataError("longitude outside [0, 360)");
    }
};

// One named physical variable on a grid at one timestamp and level.
struct VariableField {
    std::string name;
    std::string units;
    LatLonGrid grid;
    int level_hpa = 0;  // 0 = single level
    UtcHour time = 0;
    Tensor values;  // [H, W]

    void check_shape() const {
        if (values.rank() != 2 || values.dim(0) != grid.rows() || values.dim(1) != grid.cols())
            throw DataError("field '" + name + "' shape " + values.shape_str() +
                            " does not match grid " + std::to_string(grid.rows()) + "x" +
                            std::to_string(grid.cols()));
    }
};

struct BoundingBox {
    double lat_min = 0.0;
    double lat_max = 0.0;
    double lon_min = 0.0;  // [0, 360)
    double lon_max = 0.0;  // lon_min > lon_max means the box wraps across 0
    std::string name;

    bool lon_wraps() const { return lon_min > lon_max; }

    bool contains_lon(double lon) const {
        lon = normalize_lon(lon);
        if (lon_wraps()) return lon >= lon_min || lon <= lon_max;
        return lon >= lon_min && lon <= lon_max;
    }

    bool contains(double lat, double lon) const {
        return lat >= lat_min && lat <= lat_max && contains_lon(lon);
    }
};

// Regional presets, all 8 x 14 cells on the 5.625-degree grid. The paper pins
// only the crop shape; the boxes themselves are config defaults.
inline BoundingBox bbox_mena() {
    return {7.03125, 48.515625, 335.390625, 51.328125, "mena"};
}
inline BoundingBox bbox_east_asia() {
    return {7.03125, 48.515625, 87.890625, 164.53125, "east-asia"};
}
inline BoundingBox bbox_north_america() {
    return {12.65625, 54.140625, 228.515625, 305.859375, "north-america"};
}

inline BoundingBox bbox_preset(const std::string& name) {
    if (name == "mena") return bbox_mena();
    if (name == "east-asia") return bbox_east_asia();
    if (name == "north-america") return bbox_north_america();
    throw UsageError("unknown region preset '" + name +
                     "' (valid: mena, east-asia, north-america)");
}

// ---------------------------------------------------------------------------
// Latitude weights: W[i] = cos(lat_i) / mean_j cos(lat_j). Mean over rows is
// exactly 1 up to rounding, which keeps weighted means comparable with plain
// means on any grid.
// ---------------------------------------------------------------------------
inline std::vector<double> latitude_weights(const LatLonGrid& grid) {
    if (grid.lats.empty()) throw DataError("latitude_weights: empty grid");
    std::vector<double> w(grid.rows());
    double sum = 0.0;
    for (std::size_t i = 0; i < grid.rows(); ++i) {
        if (std::abs(grid.lats[i]) >= 90.0)
            throw DataError("latitude_weights: grid contains a pole row (|lat| >= 90)");
        w[i] = std::cos(grid.lats[i] * kDegToRad);
        sum += w[i];
    }
    const double mean = sum / static_cast<double>(grid.rows());
    for (double& v : w) v /= mean;
    return w;
}

// ---------------------------------------------------------------------------
// Regridding
// ---------------------------------------------------------------------------
namespace detail {

struct Overlap {
    std::size_t src;
    double weight;
};

// Latitude band overlaps: weight = difference of edge sines, proportional to
// the shared spherical band area.
inline std::vector<std::vector<Overlap>> lat_overlaps(const LatLonGrid& src,
                                                      const LatLonGrid& dst) {
    auto edges = [](const LatLonGrid& g) {
        std::vector<double> e(g.rows() + 1);
        for (std::size_t i = 0; i < g.rows(); ++i) e[i] = g.lats[i] - g.resolution_deg / 2.0;
        e[g.rows()] = g.lats.back() + g.resolution_deg / 2.0;
        for (double& v : e) v = std::clamp(v, -90.0, 90.0);
        return e;
    };
    const auto se = edges(src);
    const auto de = edges(dst);
    std::vector<std::vector<Overlap>> out(dst.rows());
    for (std::size_t I = 0; I < dst.rows(); ++I) {
        for (std::size_t i = 0; i < src.rows(); ++i) {
            const double lo = std::max(se[i], de[I]);
            const double hi = std::min(se[i + 1], de[I + 1]);
            if (hi <= lo) continue;
            const double w = std::sin(hi * kDegToRad) - std::sin(lo * kDegToRad);
            if (w > 0.0) out[I].push_back({i, w});
        }
    }
    return out;
}

// Arc overlap length of [a, a+la) and [b, b+lb) on the 360-degree circle.
inline double arc_overlap(double a, double la, double b, double lb) {
    double d = std::fmod(a - b, 360.0);
    if (d < 0.0) d += 360.0;
    // candidate placements of arc A at offset d and d-360 relative to B
    const double o1 = std::min(d + la, lb) - std::max(d, 0.0);
    const double o2 = std::min(d - 360.0 + la, lb) - std::max(d - 360.0, 0.0);
    return std::max(0.0, o1) + std::max(0.0, o2);
}

inline std::vector<std::vector<Overlap>> lon_overlaps(const LatLonGrid& src,
                                                      const LatLonGrid& dst) {
    std::vector<std::vector<Overlap>> out(dst.cols());
    const double ls = src.resolution_deg;
    const double ld = dst.resolution_deg;
    for (std::size_t J = 0; J < dst.cols(); ++J) {
        const double b = dst.lons[J] - ld / 2.0;
        for (std::size_t j = 0; j < src.cols(); ++j) {
            const double a = src.lons[j] - ls / 2.0;
            const double w = arc_overlap(a, ls, b, ld);
            if (w > 1e-12) out[J].push_back({j, w});
        }
    }
    return out;
}

}  // namespace detail

// First-order conservative (area-weighted) regridding between global uniform
// grids. Destination value = area-weighted mean of overlapping source cells,
// so the global area-weighted mean is preserved.
inline VariableField regrid_conservative(const VariableField& field, const LatLonGrid& dst) {
    field.check_shape();
    if (!field.grid.is_global() || !dst.is_global())
        throw DataError("regrid_conservative: only global uniform grids are supported");
    if (field.grid == dst) return field;  // identity overlap, keep bits

    const auto rows = detail::lat_overlaps(field.grid, dst);
    const auto cols = detail::lon_overlaps(field.grid, dst);

    VariableField out;
    out.name = field.name;
    out.units = field.units;
    out.grid = dst;
    out.level_hpa = field.level_hpa;
    out.time = field.time;
    out.values = Tensor({dst.rows(), dst.cols()});
    for (std::size_t I = 0; I < dst.rows(); ++I) {
        double rsum = 0.0;
        for (const auto& r : rows[I]) rsum += r.weight;
        for (std::size_t J = 0; J < dst.cols(); ++J) {
            double csum = 0.0;
            double acc = 0.0;
            for (const auto& c : cols[J]) csum += c.weight;
            for (const auto& r : rows[I])
                for (const auto& c : cols[J])
                    acc += r.weight * c.weight * field.values.at(r.src, c.src);
            const double norm = rsum * csum;
            if (norm <= 0.0) throw NumericError("regrid_conservative: empty overlap");
            out.values.at(I, J) = acc / norm;
        }
    }
    return out;
}

// Bilinear regridding with longitudinal wraparound; latitudes clamp at the
// outermost centers. Exact on affine functions of (lat, lon) away from the
// wrap seam.
inline VariableField regrid_bilinear(const VariableField& field, const LatLonGrid& dst) {
    field.check_shape();
    if (!field.grid.is_global() || !dst.is_global())
        throw DataError("regrid_bilinear: only global uniform grids are supported");
    if (field.grid == dst) return field;

    const auto& src = field.grid;
    const double r = src.resolution_deg;
    const auto n = src.cols();

    VariableField out;
    out.name = field.name;
    out.units = field.units;
    out.grid = dst;
    out.level_hpa = field.level_hpa;
    out.time = field.time;
    out.values = Tensor({dst.rows(), dst.cols()});
    for (std::size_t I = 0; I < dst.rows(); ++I) {
        const double lat = dst.lats[I];
        std::size_t i0, i1;
        double fy;
        if (lat <= src.lats.front()) {
            i0 = i1 = 0;
            fy = 0.0;
        } else if (lat >= src.lats.back()) {
            i0 = i1 = src.rows() - 1;
            fy = 0.0;
        } else {
            const double pos = (lat - src.lats.front()) / r;
            i0 = static_cast<std::size_t>(pos);
            i1 = i0 + 1;
            fy = pos - static_cast<double>(i0);
        }
        for (std::size_t J = 0; J < dst.cols(); ++J) {
            double dl = dst.lons[J] - src.lons.front();
            dl = std::fmod(dl, 360.0);
            if (dl < 0.0) dl += 360.0;
            const double pos = dl / r;
            std::size_t j0 = static_cast<std::size_t>(pos) % n;
            std::size_t j1 = (j0 + 1) % n;
            const double fx = pos - std::floor(pos);
            const double v00 = field.values.at(i0, j0);
            const double v01 = field.values.at(i0, j1);
            const double v10 = field.values.at(i1, j0);
            const double v11 = field.values.at(i1, j1);
            out.values.at(I, J) =
                (1.0 - fy) * ((1.0 - fx) * v00 + fx * v01) + fy * ((1.0 - fx) * v10 + fx * v11);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Regional cropping
// ---------------------------------------------------------------------------

// Row/column index selection of a bounding-box crop. Columns are listed in
// west-to-east order and may wrap past the dateline column of the parent.
struct CropIndex {
    std::vector<std::size_t> row_idx;
    std::vector<std::size_t> col_idx;
    LatLonGrid grid;  // descriptor of the cropped raster
};

inline CropIndex crop_index(const LatLonGrid& grid, const BoundingBox& bbox) {
    CropIndex ci;
    for (std::size_t i = 0; i < grid.rows(); ++i)
        if (grid.lats[i] >= bbox.lat_min && grid.lats[i] <= bbox.lat_max) ci.row_idx.push_back(i);

    std::vector<std::size_t> in_box;
    for (std::size_t j = 0; j < grid.cols(); ++j)
        if (bbox.contains_lon(grid.lons[j])) in_box.push_back(j);

    if (ci.row_idx.empty() || in_box.empty())
        throw DataError("crop_region: bounding box selects no grid cells");

    // Rotate so the selection starts just past the seam and runs eastward.
    std::size_t start = 0;
    if (bbox.lon_wraps()) {
        for (std::size_t k = 0; k < in_box.size(); ++k) {
            if (grid.lons[in_box[k]] >= bbox.lon_min) {
                start = k;
                break;
            }
        }
    }
    for (std::size_t k = 0; k < in_box.size(); ++k)
        ci.col_idx.push_back(in_box[(start + k) % in_box.size()]);

    // Selected block must be contiguous (modulo wrap) on the parent grid.
    for (std::size_t k = 1; k < ci.col_idx.size(); ++k)
        if (ci.col_idx[k] != (ci.col_idx[k - 1] + 1) % grid.cols())
            throw DataError("crop_region: longitude selection is not contiguous");

    ci.grid.resolution_deg = grid.resolution_deg;
    for (std::size_t i : ci.row_idx) ci.grid.lats.push_back(grid.lats[i]);
    for (std::size_t j : ci.col_idx) ci.grid.lons.push_back(grid.lons[j]);
    return ci;
}

inline VariableField crop_region(const VariableField& field, const BoundingBox& bbox) {
    field.check_shape();
    const CropIndex ci = crop_index(field.grid, bbox);
    VariableField out;
    out.name = field.name;
    out.units = field.units;
    out.grid = ci.grid;
    out.level_hpa = field.level_hpa;
    out.time = field.time;
    out.values = Tensor({ci.row_idx.size(), ci.col_idx.size()});
    for (std::size_t a = 0; a < ci.row_idx.size(); ++a)
        for (std::size_t b = 0; b < ci.col_idx.size(); ++b)
            out.values.at(a, b) = field.values.at(ci.row_idx[a], ci.col_idx[b]);
    return out;
}

// Area-weighted global mean: the quantity conservative regridding preserves.
inline double area_weighted_mean(const VariableField& field) {
    field.check_shape();
    const auto& g = field.grid;
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < g.rows(); ++i) {
        const double lo =
            std::clamp(g.lats[i] - g.resolution_deg / 2.0, -90.0, 90.0) * kDegToRad;
        const double hi =
            std::clamp(g.lats[i] + g.resolution_deg / 2.0, -90.0, 90.0) * kDegToRad;
        const double band = std::sin(hi) - std::sin(lo);
        for (std::size_t j = 0; j < g.cols(); ++j) {
            num += band * field.values.at(i, j);
            den += band;
        }
    }
    return num / den;
}

}  // namespace aircast

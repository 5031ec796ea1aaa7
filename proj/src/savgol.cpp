#include "burnmap/savgol.hpp"

#include <cmath>

#include <Eigen/Dense>

namespace burnmap {

namespace {

void check_params(const WavelengthGrid& grid, int window, int polyorder, int deriv) {
    const int nb = static_cast<int>(grid.size());
    if (window < 3 || window % 2 == 0)
        throw DataError("savgol: window must be odd and >= 3");
    if (polyorder < 1 || polyorder >= window)
        throw DataError("savgol: need 1 <= polyorder < window");
    if (window > nb) throw DataError("savgol: window larger than band count");
    if (deriv < 0 || deriv > 2) throw DataError("savgol: deriv must be 0, 1 or 2");
    if (deriv > polyorder) throw DataError("savgol: deriv exceeds polyorder");
    // Edge windows shrink to h+1 bands; the fit there must still carry the
    // requested derivative order.
    if (deriv > 0 && (window - 1) / 2 < deriv)
        throw DataError("savgol: window too small for derivative order");
}

// Least-squares weight row for evaluating the deriv-th derivative of a local
// polynomial fit at x = 0 (band center), sample abscissas dx[0..len).
void weight_row(const double* dx, int len, int polyorder, int deriv, double* w) {
    const int p = std::min(polyorder, len - 1);
    double scale = 0.0;
    for (int j = 0; j < len; ++j) scale = std::max(scale, std::fabs(dx[j]));
    if (scale == 0.0) scale = 1.0;

    Eigen::MatrixXd V(len, p + 1);
    for (int j = 0; j < len; ++j) {
        double t = 1.0;
        for (int m = 0; m <= p; ++m) {
            V(j, m) = t;
            t *= dx[j] / scale;
        }
    }
    // Row `deriv` of (V^T V)^-1 V^T gives the fitted coefficient a_deriv;
    // the derivative at 0 is deriv! * a_deriv / scale^deriv.
    Eigen::MatrixXd G = V.transpose() * V;
    Eigen::MatrixXd pinv = G.ldlt().solve(V.transpose());
    double factor = 1.0;
    for (int m = 2; m <= deriv; ++m) factor *= m;
    factor /= std::pow(scale, deriv);
    for (int j = 0; j < len; ++j) w[j] = factor * pinv(deriv, j);
}

} // namespace

SavgolPlan SavgolPlan::build(const WavelengthGrid& grid, int window, int polyorder,
                             int deriv) {
    check_params(grid, window, polyorder, deriv);
    const int nb = static_cast<int>(grid.size());
    const int h = (window - 1) / 2;

    SavgolPlan plan;
    plan.window = window;
    plan.polyorder = polyorder;
    plan.deriv = deriv;
    plan.start.resize(nb);
    plan.len.resize(nb);
    plan.offset.resize(nb);

    std::vector<double> dx(window);
    for (int i = 0; i < nb; ++i) {
        const int lo = std::max(0, i - h);
        const int hi = std::min(nb - 1, i + h);
        const int len = hi - lo + 1;
        plan.start[i] = lo;
        plan.len[i] = len;
        plan.offset[i] = plan.weights.size();
        for (int j = 0; j < len; ++j) dx[j] = grid[lo + j] - grid[i];
        plan.weights.resize(plan.weights.size() + len);
        weight_row(dx.data(), len, polyorder, deriv,
                   plan.weights.data() + plan.offset[i]);
    }
    return plan;
}

SavgolPlan SavgolPlan::build_regions(const WavelengthGrid& grid,
                                     const std::vector<Region>& regions) {
    const int nb = static_cast<int>(grid.size());
    for (const auto& r : regions) {
        if (!(r.lo_nm < r.hi_nm)) throw DataError("savgol region: lo must be < hi");
        if (r.window < 3 || r.window % 2 == 0 || r.polyorder < 1 ||
            r.polyorder >= r.window)
            throw DataError("savgol region: bad window/polyorder");
    }

    SavgolPlan plan;
    plan.deriv = 0;
    plan.start.resize(nb);
    plan.len.resize(nb);
    plan.offset.resize(nb);

    std::vector<double> dx;
    for (int i = 0; i < nb; ++i) {
        const Region* reg = nullptr;
        for (const auto& r : regions)
            if (grid[i] >= r.lo_nm && grid[i] <= r.hi_nm) {
                reg = &r;
                break;
            }
        plan.offset[i] = plan.weights.size();
        if (!reg) {
            plan.start[i] = i;
            plan.len[i] = 1;
            plan.weights.push_back(1.0); // pass-through
            continue;
        }
        const int h = (std::min(reg->window, nb % 2 ? nb : nb - 1) - 1) / 2;
        const int lo = std::max(0, i - h);
        const int hi = std::min(nb - 1, i + h);
        const int len = hi - lo + 1;
        plan.start[i] = lo;
        plan.len[i] = len;
        dx.resize(len);
        for (int j = 0; j < len; ++j) dx[j] = grid[lo + j] - grid[i];
        plan.weights.resize(plan.weights.size() + len);
        weight_row(dx.data(), len, reg->polyorder, 0,
                   plan.weights.data() + plan.offset[i]);
    }
    return plan;
}

void SavgolPlan::apply(const double* in, double* out) const {
    const int nb = static_cast<int>(start.size());
    for (int i = 0; i < nb; ++i) {
        const double* w = weights.data() + offset[i];
        const double* x = in + start[i];
        double acc = 0.0;
        for (int j = 0; j < len[i]; ++j) acc += w[j] * x[j];
        out[i] = acc;
    }
}

} // namespace burnmap

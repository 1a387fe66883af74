#include "phishsim/tuning.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "phishsim/errors.hpp"

namespace phishsim {

double compactness_mean(std::span<const double> distances) {
    if (distances.empty()) return 0.0;
    double sum = 0.0;
    for (double d : distances) sum += d;
    return sum / static_cast<double>(distances.size());
}

double micd_min(std::span<const double> pairwise_distances) {
    if (pairwise_distances.empty())
        throw MicdUndefinedError("MICD undefined: fewer than two prototypes");
    return *std::min_element(pairwise_distances.begin(), pairwise_distances.end());
}

double qc_ratio(std::span<const double> per_cluster_compactness, double micd) {
    return compactness_mean(per_cluster_compactness) / micd;
}

double compactness(const NcdEngine& engine, std::span<const ByteDocument> members,
                   const ByteDocument& prototype) {
    std::vector<double> dists;
    dists.reserve(members.size());
    for (const auto& m : members) dists.push_back(engine.ncd(m, prototype).value);
    return compactness_mean(dists);
}

double micd(const NcdEngine& engine, const PrototypeSet& set) {
    const auto& protos = set.prototypes();
    if (protos.size() < 2)
        throw MicdUndefinedError("MICD undefined: prototype set has " +
                                 std::to_string(protos.size()) + " prototype(s)");
    set.prime_engine(engine);
    std::vector<double> pairwise;
    pairwise.reserve(protos.size() * (protos.size() - 1) / 2);
    for (std::size_t i = 0; i < protos.size(); ++i)
        for (std::size_t j = i + 1; j < protos.size(); ++j)
            pairwise.push_back(engine.ncd(protos[i], protos[j]).value);
    return micd_min(pairwise);
}

ClusterStats qc_stats(const NcdEngine& engine, const Assignment& assignment,
                      const PrototypeSet& set) {
    double inter = micd(engine, set);  // throws for k < 2

    // Member distances in the assignment are exactly NCD(member, prototype),
    // so compactness needs no recomputation. Prototypes without members are
    // singleton clusters with compactness 0.
    std::map<std::string, std::vector<double>> members;
    for (const auto& [id, entry] : assignment) members[entry.prototype_id].push_back(entry.distance);

    ClusterStats stats;
    stats.k = set.size();
    stats.threshold_used = set.threshold();
    stats.micd = inter;
    for (const auto& proto : set.prototypes()) {
        auto it = members.find(proto.id);
        double c = it == members.end() ? 0.0
                                       : compactness_mean(it->second);
        stats.per_cluster_compactness.push_back(c);
    }
    stats.mean_compactness = compactness_mean(stats.per_cluster_compactness);
    stats.qc = stats.mean_compactness / stats.micd;
    return stats;
}

double PolyFit::operator()(double x) const {
    double u = (2.0 * x - (x_lo + x_hi)) / (x_hi - x_lo);
    double y = 0.0;
    for (std::size_t i = scaled_coeffs.size(); i-- > 0;) y = y * u + scaled_coeffs[i];
    return y;
}

PolyFit fit_polynomial(std::span<const double> xs, std::span<const double> ys, int degree) {
    if (degree < 0) throw std::invalid_argument("negative polynomial degree");
    const std::size_t m = xs.size();
    const std::size_t cols = static_cast<std::size_t>(degree) + 1;
    if (ys.size() != m) throw std::invalid_argument("fit_polynomial: size mismatch");
    if (m < cols)
        throw std::invalid_argument("degree-" + std::to_string(degree) + " fit needs at least " +
                                    std::to_string(cols) + " samples, got " + std::to_string(m));
    auto [lo_it, hi_it] = std::minmax_element(xs.begin(), xs.end());
    double lo = *lo_it, hi = *hi_it;
    if (!(hi > lo)) throw std::invalid_argument("fit_polynomial: degenerate x range");

    // Solve in u in [-1, 1] for conditioning.
    Eigen::MatrixXd V(m, cols);
    Eigen::VectorXd y(m);
    for (std::size_t i = 0; i < m; ++i) {
        double u = (2.0 * xs[i] - (lo + hi)) / (hi - lo);
        double p = 1.0;
        for (std::size_t j = 0; j < cols; ++j) {
            V(i, j) = p;
            p *= u;
        }
        y(i) = ys[i];
    }
    Eigen::VectorXd c = V.colPivHouseholderQr().solve(y);

    PolyFit fit;
    fit.degree = degree;
    fit.x_lo = lo;
    fit.x_hi = hi;
    fit.scaled_coeffs.assign(c.data(), c.data() + cols);

    // Expand sum c_k (a x + b)^k into raw monomials for reporting.
    double a = 2.0 / (hi - lo);
    double b = -(lo + hi) / (hi - lo);
    std::vector<double> raw(cols, 0.0);
    std::vector<double> basis{1.0};  // (a x + b)^k, coefficients low-to-high
    for (std::size_t k = 0; k < cols; ++k) {
        for (std::size_t j = 0; j < basis.size(); ++j) raw[j] += fit.scaled_coeffs[k] * basis[j];
        if (k + 1 < cols) {
            std::vector<double> next(basis.size() + 1, 0.0);
            for (std::size_t j = 0; j < basis.size(); ++j) {
                next[j] += basis[j] * b;
                next[j + 1] += basis[j] * a;
            }
            basis = std::move(next);
        }
    }
    fit.coeffs = std::move(raw);
    return fit;
}

double minimize_fit(const PolyFit& fit, double lo, double hi, double step) {
    if (!(hi >= lo)) throw std::invalid_argument("minimize_fit: empty range");
    double best_x = lo;
    double best_y = fit(lo);
    double min_y = best_y, max_y = best_y;
    for (double x = lo + step; x < hi + step / 2; x += step) {
        double xx = std::min(x, hi);
        double yy = fit(xx);
        min_y = std::min(min_y, yy);
        max_y = std::max(max_y, yy);
        if (yy < best_y) {
            best_y = yy;
            best_x = xx;
        }
    }
    // Numerically flat objective: documented tie rule is the midpoint.
    if (max_y - min_y <= 1e-12 * std::max(1.0, std::abs(max_y))) return (lo + hi) / 2.0;
    return best_x;
}

std::vector<Threshold> default_threshold_grid() {
    std::vector<Threshold> grid;
    for (int i = 5; i <= 60; ++i) grid.push_back(Threshold{i / 100.0});
    return grid;
}

ThresholdSweep fit_and_select(std::vector<SweepPoint> points) {
    if (points.size() < 9)
        throw Error("threshold sweep has " + std::to_string(points.size()) +
                    " usable grid points; the eighth-degree fit needs at least 9");
    std::sort(points.begin(), points.end(),
              [](const SweepPoint& a, const SweepPoint& b) { return a.threshold < b.threshold; });
    std::vector<double> xs, ys;
    xs.reserve(points.size());
    ys.reserve(points.size());
    for (const auto& p : points) {
        xs.push_back(p.threshold);
        ys.push_back(p.qc);
    }
    ThresholdSweep sweep;
    sweep.fit = fit_polynomial(xs, ys, 8);
    double selected = minimize_fit(sweep.fit, xs.front(), xs.back());
    sweep.selected = Threshold::checked(selected);
    sweep.grid = std::move(points);
    return sweep;
}

ThresholdSweep select_threshold(const NcdEngine& engine, const std::vector<ByteDocument>& data,
                                std::span<const Threshold> grid, int parallelism) {
    if (grid.size() < 9)
        throw std::invalid_argument("threshold grid needs at least 9 points for a degree-8 fit");
    std::vector<Threshold> sorted(grid.begin(), grid.end());
    std::sort(sorted.begin(), sorted.end(),
              [](Threshold a, Threshold b) { return a.d < b.d; });

    std::vector<SweepPoint> points;
    std::vector<std::string> warnings;
    for (Threshold t : sorted) {
        ExtractionResult extraction = extract_prototypes(engine, data, t, parallelism);
        if (extraction.set.size() < 2) {
            warnings.push_back("threshold " + std::to_string(t.d) +
                               " dropped: k=" + std::to_string(extraction.set.size()) +
                               " leaves MICD undefined");
            continue;
        }
        ClusterStats stats = qc_stats(engine, extraction.assignment, extraction.set);
        points.push_back(SweepPoint{t.d, stats.qc, stats.k});
    }
    if (points.empty()) throw Error("all grid points degenerate: no threshold yields k >= 2");

    ThresholdSweep sweep = fit_and_select(std::move(points));
    sweep.warnings = std::move(warnings);
    return sweep;
}

namespace {

std::string fmt_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

}  // namespace

std::string sweep_to_csv(const ThresholdSweep& sweep) {
    std::ostringstream out;
    out << "threshold,qc,k\n";
    for (const auto& p : sweep.grid)
        out << fmt_double(p.threshold) << ',' << fmt_double(p.qc) << ',' << p.k << '\n';
    return out.str();
}

std::string sweep_to_json(const ThresholdSweep& sweep) {
    nlohmann::ordered_json j;
    j["selected_threshold"] = sweep.selected.d;
    j["fit"] = {
        {"degree", sweep.fit.degree},
        {"x_lo", sweep.fit.x_lo},
        {"x_hi", sweep.fit.x_hi},
        {"coefficients", sweep.fit.coeffs},
        {"scaled_coefficients", sweep.fit.scaled_coeffs},
    };
    nlohmann::ordered_json grid = nlohmann::ordered_json::array();
    for (const auto& p : sweep.grid)
        grid.push_back({{"threshold", p.threshold}, {"qc", p.qc}, {"k", p.k}});
    j["grid"] = std::move(grid);
    j["warnings"] = sweep.warnings;
    return j.dump(2) + "\n";
}

}  // namespace phishsim

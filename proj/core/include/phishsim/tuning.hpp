#pragma once

#include <span>
#include <string>
#include <vector>

#include "phishsim/document.hpp"
#include "phishsim/ncd.hpp"
#include "phishsim/prototypes.hpp"

namespace phishsim {

// --- distance-level primitives -------------------------------------------
// The corpus-level operations below reduce to these; they are exposed so
// properties (e.g. scale invariance of QC) can be exercised on synthetic
// distance sets directly.

/// Mean of member->prototype distances; 0 for an empty cluster
/// (singleton clusters by convention).
double compactness_mean(std::span<const double> distances);

/// Minimum of the pairwise prototype distances.
/// Throws MicdUndefinedError on an empty list (fewer than 2 prototypes).
double micd_min(std::span<const double> pairwise_distances);

/// Mean cluster compactness divided by MICD.
double qc_ratio(std::span<const double> per_cluster_compactness, double micd);

// --- corpus-level operations ----------------------------------------------

/// Compactness of one cluster: mean NCD between each member and the
/// prototype. `members` excludes the prototype itself.
double compactness(const NcdEngine& engine,
                   std::span<const ByteDocument> members,
                   const ByteDocument& prototype);

/// Minimum inter-cluster distance: the smallest NCD over all unordered
/// prototype pairs. Throws MicdUndefinedError for fewer than 2 prototypes.
double micd(const NcdEngine& engine, const PrototypeSet& set);

struct ClusterStats {
    std::vector<double> per_cluster_compactness;  // one per prototype, selection order
    double mean_compactness = 0.0;
    double micd = 0.0;
    double qc = 0.0;
    Threshold threshold_used;
    std::size_t k = 0;
};

/// Quality of clustering for an extraction result: mean compactness over
/// all k clusters (member distances come from the assignment; prototypes
/// without members count as compactness 0) divided by MICD.
ClusterStats qc_stats(const NcdEngine& engine,
                      const Assignment& assignment,
                      const PrototypeSet& set);

// --- threshold selection ---------------------------------------------------

struct SweepPoint {
    double threshold = 0.0;
    double qc = 0.0;
    std::size_t k = 0;
};

/// Least-squares polynomial fit. For conditioning the fit runs in
/// coordinates scaled to [-1, 1]; `coeffs` are the equivalent raw-domain
/// monomial coefficients (constant term first).
struct PolyFit {
    int degree = 0;
    double x_lo = 0.0;
    double x_hi = 0.0;
    std::vector<double> scaled_coeffs;  // basis u = (2x - (lo+hi)) / (hi - lo)
    std::vector<double> coeffs;         // raw monomial basis in x

    double operator()(double x) const;  // evaluates via the scaled basis
};

/// Fits y ~ poly(x) of the given degree by least squares.
/// Requires at least degree + 1 points.
PolyFit fit_polynomial(std::span<const double> xs, std::span<const double> ys, int degree);

/// Argmin of the fitted polynomial over [lo, hi], located by dense
/// sampling with the given step. A numerically flat objective returns the
/// range midpoint.
double minimize_fit(const PolyFit& fit, double lo, double hi, double step = 1e-4);

struct ThresholdSweep {
    std::vector<SweepPoint> grid;  // surviving grid points, ascending threshold
    PolyFit fit;                   // degree-8 fit over the grid
    Threshold selected;
    std::vector<std::string> warnings;  // dropped grid points etc.
};

/// Default sweep grid: 0.05 to 0.60 in steps of 0.01.
std::vector<Threshold> default_threshold_grid();

/// Runs extraction + QC at every grid threshold, fits an eighth-degree
/// polynomial to (threshold, qc), and selects the minimizing threshold
/// over the grid's closed range. Grid points where k < 2 (MICD undefined)
/// are dropped with a warning; fewer than 9 surviving points or an
/// all-degenerate grid is an error.
ThresholdSweep select_threshold(const NcdEngine& engine,
                                const std::vector<ByteDocument>& data,
                                std::span<const Threshold> grid,
                                int parallelism = 1);

/// Fit + minimize over precomputed sweep points (the tail of
/// select_threshold), exposed for tuning the fit on synthetic QC data.
ThresholdSweep fit_and_select(std::vector<SweepPoint> points);

std::string sweep_to_csv(const ThresholdSweep& sweep);
std::string sweep_to_json(const ThresholdSweep& sweep);

}  // namespace phishsim

#pragma once

#include "collabtime/cohorts.hpp"
#include "collabtime/fitting.hpp"

#include <iosfwd>
#include <span>

namespace collabtime
{

// Tab-separated exports. Each file starts with a "# collabtime <version> ..."
// line followed by the column header row.

/// kind, t0, dt, count: one row per nonzero bucket.
void write_cohorts_tsv(std::ostream& out, const CohortSet& nodes, const CohortSet& edges);

/// kind, t0, total, truncated_count, max_lifetime.
void write_cohort_totals_tsv(std::ostream& out, const CohortSet& nodes, const CohortSet& edges);

/// kind, variant, t0, k, lambda, alpha, c, chi2, reduced_chi2, n_points,
/// n_samples, status. Gaps carry status "nofit:<reason>" and empty values.
void write_fits_tsv(std::ostream& out, std::span<const ParameterSeries> series, const FitOptions& options);

/// t0, fraction, single, total.
void write_single_year_tsv(std::ostream& out, std::span<const SingleYearPoint> points, int threshold);

}  // namespace collabtime

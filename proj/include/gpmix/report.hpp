#pragma once

// Posterior interval table on interpretable scales: probabilities for logit
// coordinates, exponentiated log coordinates, and millisecond equivalents of
// the reading-time costs.

#include <string>
#include <vector>

#include "gpmix/sampler.hpp"

namespace gpmix {

struct ReportRow {
  std::string parameter;
  std::string scale;  // probability, positive, identity, ms_median, ms_mean
  double lo = 0.0;    // 2.5%
  double median = 0.0;
  double hi = 0.0;    // 97.5%
};

/// Rows for every population-level parameter and random-effect scale of an
/// MPT-family or regression fit. Cost rows for MPT fits are differences of
/// successive component medians (and means) at the population location and
/// a region of kReferenceLength characters:
///   att = C2 - C1, gp = C3 - C2, reanalysis = C4 - C3, regression = C5 - C3.
/// Throws DataError naming the first expected parameter that is missing.
std::vector<ReportRow> report_table(const PosteriorDraws& pd);

std::string report_csv(const std::vector<ReportRow>& rows);

}  // namespace gpmix

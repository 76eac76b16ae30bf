#pragma once

namespace latefusion {

double normal_pdf(double x) noexcept;
double normal_cdf(double x) noexcept;
/// Upper tail 1 - cdf(x), accurate far into the tail.
double normal_sf(double x) noexcept;
/// Inverse of normal_cdf on (0, 1); +-infinity at the endpoints.
double normal_quantile(double p);

}  // namespace latefusion

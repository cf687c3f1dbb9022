#include "evpred/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <vector>

#include "evpred/errors.hpp"
#include "evpred/rng.hpp"

namespace evpred {

GradCheckResult gradient_check(const LossClosure& loss, ParameterSet& params,
                               const GradCheckOptions& options) {
  params.zero_grad();
  const double base = loss(true);
  if (!std::isfinite(base)) throw InvalidModel("gradient_check: non-finite loss");

  std::map<std::string, std::vector<double>> analytic;
  for (const auto& [name, p] : params) analytic.emplace(name, p.grad.values());
  params.zero_grad();

  GradCheckResult result;
  Rng rng(options.seed, 0x6C);
  for (auto& [name, p] : params) {
    auto& theta = p.value.values();
    std::vector<std::size_t> coords(theta.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (coords.size() > options.samples_per_tensor) {
      shuffle(coords.begin(), coords.end(), rng);
      coords.resize(options.samples_per_tensor);
    }
    const auto& a = analytic.at(name);
    for (std::size_t idx : coords) {
      const double saved = theta[idx];
      theta[idx] = saved + options.step;
      const double up = loss(false);
      theta[idx] = saved - options.step;
      const double down = loss(false);
      theta[idx] = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw InvalidModel("gradient_check: non-finite loss at " + name);
      }
      const double numeric = (up - down) / (2.0 * options.step);
      const double denom =
          std::max({std::abs(a[idx]), std::abs(numeric), options.denominator_floor});
      const double rel = std::abs(a[idx] - numeric) / denom;
      ++result.coordinates_checked;
      if (result.worst_parameter.empty() || rel > result.max_relative_error) {
        result.max_relative_error = rel;
        result.worst_parameter = name;
        result.worst_index = idx;
      }
    }
  }
  return result;
}

}  // namespace evpred

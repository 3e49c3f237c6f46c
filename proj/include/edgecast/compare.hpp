#ifndef EDGECAST_COMPARE_HPP
#define EDGECAST_COMPARE_HPP

#include <span>

#include "edgecast/metrics.hpp"
#include "edgecast/sensor.hpp"

namespace edgecast::metrics {

/// Run uniform and differential-first dropping at equal total packet loss
/// on the same synthetic stream, once per seed, and return the mean
/// decodable ratios.
StrategyComparison compare_strategies(const sensor::StreamSource::Synthetic& spec,
                                      double loss_fraction,
                                      std::span<const std::uint32_t> seeds);

} // namespace edgecast::metrics

#endif

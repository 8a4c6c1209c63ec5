#include "rla/km_test.hpp"

#include <cmath>
#include <string>

#include "rla/errors.hpp"

namespace rla {

void KmConfig::validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0,1)");
    if (!(gamma > 1.0)) throw ConfigError("gamma must exceed 1");
    if (ell_min < 1 || ell_max < 1) throw ConfigError("ell_min and ell_max must be positive");
    if (ell_min > ell_max) throw ConfigError("ell_min exceeds ell_max");
    if (!(delta > 0.0 && delta <= 2.0)) throw ConfigError("delta must lie in (0,2]");
    if (!(delta < 2.0 * gamma)) throw ConfigError("delta must be below 2*gamma");
}

double km_log_factor(double discrepancy, double delta, double gamma) {
    if (!(gamma > 1.0)) throw ConfigError("gamma must exceed 1");
    const double scale = 2.0 * gamma;
    return std::log1p(-delta / scale) - std::log1p(-discrepancy / scale);
}

double km_log_risk(std::span<const double> discrepancies, double delta, double gamma) {
    double log_risk = 0.0;
    for (double d : discrepancies) log_risk += km_log_factor(d, delta, gamma);
    return log_risk;
}

double km_risk(std::span<const double> discrepancies, double delta, double gamma) {
    return std::exp(km_log_risk(discrepancies, delta, gamma));
}

double TestState::risk() const { return std::exp(log_risk); }

bool km_rejects(double log_risk, const KmConfig& config) { return log_risk <= std::log(config.alpha); }

bool km_should_stop(std::int64_t length, double log_risk, const KmConfig& config) {
    return length >= config.ell_max || (km_rejects(log_risk, config) && length >= config.ell_min);
}

TestState test_step(TestState state, double discrepancy, const KmConfig& config) {
    if (state.stopped) throw StateError("test already stopped");
    if (!(discrepancy >= -2.0 && discrepancy <= 2.0)) throw ConfigError("discrepancy outside [-2,2]");
    state.observed.push_back(discrepancy);
    state.log_risk += km_log_factor(discrepancy, config.delta, config.gamma);
    if (km_should_stop(state.length(), state.log_risk, config)) {
        state.stopped = true;
        state.rejected = km_rejects(state.log_risk, config);
    }
    return state;
}

std::int64_t sample_size(double alpha, double delta, double gamma, double lambda) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0,1)");
    if (!(gamma > 1.0)) throw ConfigError("gamma must exceed 1");
    if (!(delta > 0.0)) throw ConfigError("margin must be positive");
    const double inv = 1.0 / (2.0 * gamma);
    const double denom = inv + lambda * std::log(1.0 - inv);
    if (!(denom > 0.0)) throw ConfigError("lambda too large for gamma");
    return static_cast<std::int64_t>(std::ceil(-std::log(alpha) / (delta * denom)));
}

}  // namespace rla

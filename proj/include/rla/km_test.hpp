#pragma once

// Kaplan-Markov adaptive audit test.
//
// The running statistic is kept as a natural logarithm so that long audits
// (10^5+ draws) neither underflow nor overflow; the stop/reject thresholds
// are compared in log space as well.

#include <cstdint>
#include <span>
#include <vector>

namespace rla {

struct KmConfig {
    double alpha = 0.05;
    double gamma = 1.1;
    std::int64_t ell_min = 1;
    std::int64_t ell_max = 10000;
    double delta = 0.05;  ///< margin handed over by the auditor

    /// Throws ConfigError unless every field is in range.
    void validate() const;
};

/// log of a single multiplicative factor (1 - delta/2g) / (1 - d/2g).
double km_log_factor(double discrepancy, double delta, double gamma);

double km_log_risk(std::span<const double> discrepancies, double delta, double gamma);
double km_risk(std::span<const double> discrepancies, double delta, double gamma);

struct TestState {
    std::vector<double> observed;
    double log_risk = 0.0;
    bool stopped = false;
    bool rejected = false;

    double risk() const;
    std::int64_t length() const noexcept { return static_cast<std::int64_t>(observed.size()); }
};

/// Appends one discrepancy and re-evaluates the stopping rule. Pass the state by
/// value (std::move it in) to keep long audits linear.
TestState test_step(TestState state, double discrepancy, const KmConfig& config);

/// Whether a statistic at (length, log_risk) has hit the stopping rule.
bool km_should_stop(std::int64_t length, double log_risk, const KmConfig& config);
bool km_rejects(double log_risk, const KmConfig& config);

/// Smallest sample size that tolerates a lambda*delta fraction of 1-vote overstatements.
std::int64_t sample_size(double alpha, double delta, double gamma, double lambda);

}  // namespace rla

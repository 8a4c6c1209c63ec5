#pragma once

// Monte Carlo experiments: risk estimation against adversaries, the single-
// iteration discrepancy distribution under distorted CVRs, and the
// fraction-of-CVR-generated simulation for adaptive audits.

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "rla/adversary.hpp"
#include "rla/auditor.hpp"

namespace rla {

struct WilsonInterval {
    double lower = 0.0;
    double upper = 1.0;
};

/// Wilson score interval; z defaults to the two-sided 95% quantile.
WilsonInterval wilson_interval(std::int64_t successes, std::int64_t trials, double z = 1.959963984540054);

struct ExperimentReport {
    std::int64_t trials = 0;
    std::int64_t consistent = 0;
    double estimate = 0.0;
    WilsonInterval interval;
    double alpha = 0.0;
    bool violation = false;  ///< Wilson lower bound above alpha
    double mean_iterations = 0.0;
    std::vector<std::string> transcript_digests;  ///< per trial, empty unless requested
    double wall_seconds = 0.0;
};

using ElectionGenerator = std::function<Election(std::mt19937_64& rng)>;

/// An adversary for one trial. `election` replaces the generated election when
/// the adversary controls how ballots are labeled.
struct AdversarySetup {
    std::unique_ptr<Adversary> adversary;
    std::shared_ptr<const Election> election;
};

using AdversaryFactory = std::function<AdversarySetup(std::shared_ptr<const Election> election, std::mt19937_64& rng)>;

struct RiskOptions {
    unsigned threads = 1;
    bool transcript_digests = false;
    ConsistencyCheck check;  ///< empty: the real check for the configured mode
};

/// Runs `trials` audits. Trial t uses audit seed derive_seed(seed, t) and a
/// separate generator stream for the election and adversary; results do not
/// depend on the thread count. Throws ConfigError if a trial's election is valid.
ExperimentReport estimate_risk(const ElectionGenerator& generator, const AdversaryFactory& adversaries,
                               const AuditConfig& config, std::int64_t trials, std::uint64_t seed,
                               const RiskOptions& options = {});

/// Invalid election: every batch holds a tie among `batch_size` ballots
/// (blank ballots fill odd sizes), and the tabulation overstates the winner by
/// round(mu_tab * |B|) votes spread over random batches. A fraction
/// `two_vote_share` of the overstatement units are two-vote (loser read as
/// winner), the rest one-vote (blank read as winner).
Election tied_invalid_election(int batches, std::int64_t batch_size, double mu_tab, std::mt19937_64& rng,
                               double two_vote_share = 0.5);

/// Valid election with per-ballot votes drawn as winner/loser/blank with the
/// given probabilities; the tabulation is the true count. Identifiers are unique.
Election random_valid_election(int batches, std::int64_t batch_size, double p_winner, double p_loser,
                               std::mt19937_64& rng);

/// Discrepancy of every row of the transformed CVR an honest adversary would
/// serve for `batch`, exactly as the auditor scores it (2 for every row when
/// the check fails).
std::vector<int> honest_row_discrepancies(const Manifest& manifest, const Tabulation& normalized,
                                          TransformKind transform, const CvrTable& served,
                                          const BallotFamily& family, int batch, bool forbid_overvotes = false);

/// Closed-form interval for Pr[D = v], index v + 2.
struct PmfBounds {
    std::array<double, 5> lower{};
    std::array<double, 5> upper{};
    std::string source;  ///< "tabulation", "served" or "composed"
};

/// Bounds for a distorted tabulation CVR (stage two absent), for a distorted
/// served CVR around `base` (stage one absent), or the composed two-stage
/// bounds; clamped to [0, 1].
PmfBounds completeness_bounds(const DistortionSpec& stage1, const DistortionSpec& stage2, std::int64_t total_ballots,
                              const std::array<double, 5>& base);

struct DistributionOptions {
    Placement placement = Placement::Uniform;
    double sigmas = 3.0;
};

struct DiscrepancyReport {
    std::int64_t draws = 0;
    std::array<std::int64_t, 5> counts{};
    std::array<double, 5> pmf{};
    std::array<double, 5> exact_pmf{};  ///< from summing over every batch and row
    PmfBounds bounds;
    std::array<bool, 5> within{};
    bool all_within = true;
};

/// Single-iteration discrepancy of the Force auditor against the honest
/// adversary on a two-stage distortion: stage1 applied to the canonical CVR
/// fixes the tabulation, stage2 applied on top gives the served CVR.
DiscrepancyReport discrepancy_distribution(const BallotFamily& family, const DistortionSpec& stage1,
                                           const DistortionSpec& stage2, std::int64_t draws, std::uint64_t seed,
                                           const DistributionOptions& options = {});

struct SyntheticManifestSpec {
    enum class Kind { Equal, Lognormal, Explicit };
    Kind kind = Kind::Equal;
    std::int64_t k = 1;
    std::int64_t size = 100;         ///< Equal
    double log_mean = 5.0;           ///< Lognormal
    double log_sigma = 0.5;          ///< Lognormal
    std::vector<std::int64_t> sizes; ///< Explicit

    Manifest generate(std::mt19937_64& rng) const;
};

struct CvrFractionReport {
    std::int64_t trials = 0;
    std::int64_t sample_size = 0;
    std::int64_t batches = 0;
    double mean_distinct = 0.0;
    double sd_distinct = 0.0;
    double oracle_distinct = 0.0;      ///< sum over batches of 1 - (1 - p)^n
    double mean_fraction = 0.0;        ///< ballots in picked batches / all ballots
    double oracle_fraction = 0.0;
    double mean_batch_fraction = 0.0;  ///< picked batches / all batches
};

/// Draws n ballots with replacement per trial and counts the batches touched.
CvrFractionReport simulate_cvr_fraction(const Manifest& manifest, std::int64_t n, std::int64_t trials,
                                        std::uint64_t seed);

}  // namespace rla

#pragma once

// JSON configuration for the simulate subcommands, and JSON renderings of
// their reports.
//
//   {
//     "audit":      { AuditConfig fields as in session config },
//     "election":   {"kind": "tied_invalid", "batches": 10, "batch_size": 100,
//                    "mu_tab": 0.1, "two_vote_share": 0.5}
//                 | {"kind": "random_valid", "batches": 50, "batch_size": 200,
//                    "p_winner": 0.5, "p_loser": 0.45},
//     "adversary":  "honest|distortion|duplicate_label|withhold|whitewash",
//     "distortion": {"o1": 0, "o2": 0, "u1": 0, "u2": 0, "a": 0, "d": 0},
//     "placement":  "uniform|concentrated",
//     "withhold":   {"policy": "loser_votes", "base": "whitewash|honest"},
//     "stage1": {...}, "stage2": {...}, "draws": 100000,      (completeness)
//     "manifest": {"kind": "equal|lognormal|explicit", ...},  (cvr-fraction)
//     "sample_size": 220,
//     "trials": 1000, "seed": 1
//   }
//
// Every field is optional; command-line flags override trials and seed.

#include <cstdint>
#include <optional>

#include "json.hpp"
#include "rla/simulation.hpp"

namespace rla {

using Json = nlohmann::json;

struct ElectionSpec {
    enum class Kind { TiedInvalid, RandomValid };
    Kind kind = Kind::TiedInvalid;
    int batches = 10;
    std::int64_t batch_size = 100;
    double mu_tab = 0.1;
    double two_vote_share = 0.5;
    double p_winner = 0.5;
    double p_loser = 0.45;

    Election generate(std::mt19937_64& rng) const;
};

enum class AdversaryKind { Honest, Distortion, DuplicateLabel, Withhold, Whitewash };

std::string_view to_string(AdversaryKind kind) noexcept;
AdversaryKind adversary_kind_from_string(std::string_view name);

struct AdversarySpec {
    AdversaryKind kind = AdversaryKind::Honest;
    DistortionSpec distortion;
    Placement placement = Placement::Uniform;
    WithholdPolicy withhold_policy = WithholdPolicy::LoserVotes;
    AdversaryKind withhold_base = AdversaryKind::Whitewash;  ///< Honest or Whitewash
};

/// Builds a fresh adversary per trial. Honest serves the canonical CVR;
/// distortion serves a distorted canonical CVR honestly.
AdversaryFactory make_adversary_factory(const AdversarySpec& spec);

struct SimulationConfig {
    AuditConfig audit;
    ElectionSpec election;
    AdversarySpec adversary;
    DistortionSpec stage1;
    DistortionSpec stage2;
    std::int64_t draws = 100000;
    SyntheticManifestSpec manifest;
    std::int64_t sample_size = 220;
    std::int64_t trials = 1000;
    std::uint64_t seed = 1;
};

/// Throws ConfigError on unknown fields or bad values.
SimulationConfig simulation_config_from_json(const Json& j);
Json simulation_config_to_json(const SimulationConfig& config);

Json distortion_to_json(const DistortionSpec& spec);
DistortionSpec distortion_from_json(const Json& j);

/// Wall time is left out unless `timing`, so that output is seed-reproducible.
Json report_to_json(const ExperimentReport& report, bool timing = false);
Json report_to_json(const DiscrepancyReport& report);
Json report_to_json(const CvrFractionReport& report);

}  // namespace rla

#include "rla/sim_config.hpp"

#include "rla/errors.hpp"
#include "rla/session.hpp"

namespace rla {
namespace {

template <typename T>
T field(const Json& j, const char* name, T fallback) {
    return j.contains(name) ? j.at(name).get<T>() : fallback;
}

void reject_unknown(const Json& j, std::initializer_list<std::string_view> known, std::string_view where) {
    if (!j.is_object()) throw ConfigError(std::string(where) + " must be a JSON object");
    for (const auto& [k, v] : j.items()) {
        bool ok = false;
        for (auto name : known) ok = ok || k == name;
        if (!ok) throw ConfigError("unknown field '" + k + "' in " + std::string(where));
    }
}

ElectionSpec election_from_json(const Json& j) {
    reject_unknown(j, {"kind", "batches", "batch_size", "mu_tab", "two_vote_share", "p_winner", "p_loser"}, "election");
    ElectionSpec e;
    const auto kind = field<std::string>(j, "kind", "tied_invalid");
    if (kind == "tied_invalid") e.kind = ElectionSpec::Kind::TiedInvalid;
    else if (kind == "random_valid") e.kind = ElectionSpec::Kind::RandomValid;
    else throw ConfigError("unknown election kind '" + kind + "'");
    e.batches = field(j, "batches", e.batches);
    e.batch_size = field(j, "batch_size", e.batch_size);
    e.mu_tab = field(j, "mu_tab", e.mu_tab);
    e.two_vote_share = field(j, "two_vote_share", e.two_vote_share);
    e.p_winner = field(j, "p_winner", e.p_winner);
    e.p_loser = field(j, "p_loser", e.p_loser);
    return e;
}

Json election_to_json(const ElectionSpec& e) {
    if (e.kind == ElectionSpec::Kind::RandomValid) {
        return Json{{"kind", "random_valid"}, {"batches", e.batches}, {"batch_size", e.batch_size},
                    {"p_winner", e.p_winner}, {"p_loser", e.p_loser}};
    }
    return Json{{"kind", "tied_invalid"}, {"batches", e.batches}, {"batch_size", e.batch_size},
                {"mu_tab", e.mu_tab}, {"two_vote_share", e.two_vote_share}};
}

SyntheticManifestSpec manifest_from_json(const Json& j) {
    reject_unknown(j, {"kind", "k", "size", "log_mean", "log_sigma", "sizes"}, "manifest");
    SyntheticManifestSpec m;
    const auto kind = field<std::string>(j, "kind", "equal");
    if (kind == "equal") m.kind = SyntheticManifestSpec::Kind::Equal;
    else if (kind == "lognormal") m.kind = SyntheticManifestSpec::Kind::Lognormal;
    else if (kind == "explicit") m.kind = SyntheticManifestSpec::Kind::Explicit;
    else throw ConfigError("unknown manifest kind '" + kind + "'");
    m.k = field(j, "k", m.k);
    m.size = field(j, "size", m.size);
    m.log_mean = field(j, "log_mean", m.log_mean);
    m.log_sigma = field(j, "log_sigma", m.log_sigma);
    m.sizes = field(j, "sizes", m.sizes);
    if (m.kind == SyntheticManifestSpec::Kind::Explicit && !j.contains("k")) m.k = static_cast<std::int64_t>(m.sizes.size());
    return m;
}

Json manifest_to_json(const SyntheticManifestSpec& m) {
    switch (m.kind) {
        case SyntheticManifestSpec::Kind::Equal: return Json{{"kind", "equal"}, {"k", m.k}, {"size", m.size}};
        case SyntheticManifestSpec::Kind::Lognormal:
            return Json{{"kind", "lognormal"}, {"k", m.k}, {"log_mean", m.log_mean}, {"log_sigma", m.log_sigma}};
        case SyntheticManifestSpec::Kind::Explicit: return Json{{"kind", "explicit"}, {"sizes", m.sizes}};
    }
    return Json::object();
}

Json pmf_to_json(const std::array<double, 5>& p) { return Json(std::vector<double>(p.begin(), p.end())); }

}  // namespace

Election ElectionSpec::generate(std::mt19937_64& rng) const {
    if (kind == Kind::RandomValid) return random_valid_election(batches, batch_size, p_winner, p_loser, rng);
    return tied_invalid_election(batches, batch_size, mu_tab, rng, two_vote_share);
}

std::string_view to_string(AdversaryKind kind) noexcept {
    switch (kind) {
        case AdversaryKind::Honest: return "honest";
        case AdversaryKind::Distortion: return "distortion";
        case AdversaryKind::DuplicateLabel: return "duplicate_label";
        case AdversaryKind::Withhold: return "withhold";
        case AdversaryKind::Whitewash: return "whitewash";
    }
    return "honest";
}

AdversaryKind adversary_kind_from_string(std::string_view name) {
    for (auto k : {AdversaryKind::Honest, AdversaryKind::Distortion, AdversaryKind::DuplicateLabel,
                   AdversaryKind::Withhold, AdversaryKind::Whitewash}) {
        if (to_string(k) == name) return k;
    }
    throw ConfigError("unknown adversary '" + std::string(name) + "'");
}

AdversaryFactory make_adversary_factory(const AdversarySpec& spec) {
    return [spec](std::shared_ptr<const Election> election, std::mt19937_64& rng) -> AdversarySetup {
        AdversarySetup setup;
        switch (spec.kind) {
            case AdversaryKind::Honest:
                setup.adversary = std::make_unique<HonestAdversary>(election->family, canonical_cvr(election->family));
                break;
            case AdversaryKind::Distortion: {
                auto distorted = apply_distortion(canonical_cvr(election->family), spec.distortion, rng,
                                                  spec.placement, &election->family);
                setup.adversary = std::make_unique<HonestAdversary>(election->family, std::move(distorted.cvr));
                break;
            }
            case AdversaryKind::DuplicateLabel: {
                auto attack = duplicate_label_attack(*election);
                setup.election = std::make_shared<const Election>(std::move(attack.election));
                // The adversary only keeps per-batch positions, so the relabeled family can move.
                setup.adversary = std::move(attack.adversary);
                break;
            }
            case AdversaryKind::Withhold: {
                std::unique_ptr<Adversary> base;
                if (spec.withhold_base == AdversaryKind::Whitewash) {
                    base = std::make_unique<WhitewashAdversary>(*election, rng());
                } else {
                    base = std::make_unique<HonestAdversary>(election->family, canonical_cvr(election->family));
                }
                setup.adversary = std::make_unique<WithholdAdversary>(std::move(base), election->family,
                                                                      spec.withhold_policy);
                break;
            }
            case AdversaryKind::Whitewash:
                setup.adversary = std::make_unique<WhitewashAdversary>(*election, rng());
                break;
        }
        return setup;
    };
}

Json distortion_to_json(const DistortionSpec& s) {
    return Json{{"o1", s.o1}, {"o2", s.o2}, {"u1", s.u1}, {"u2", s.u2}, {"a", s.a}, {"d", s.d}};
}

DistortionSpec distortion_from_json(const Json& j) {
    reject_unknown(j, {"o1", "o2", "u1", "u2", "a", "d"}, "distortion");
    DistortionSpec s;
    s.o1 = field(j, "o1", s.o1);
    s.o2 = field(j, "o2", s.o2);
    s.u1 = field(j, "u1", s.u1);
    s.u2 = field(j, "u2", s.u2);
    s.a = field(j, "a", s.a);
    s.d = field(j, "d", s.d);
    for (auto v : {s.o1, s.o2, s.u1, s.u2, s.a, s.d}) {
        if (v < 0) throw ConfigError("distortion counts must be nonnegative");
    }
    return s;
}

SimulationConfig simulation_config_from_json(const Json& j) {
    reject_unknown(j,
                   {"audit", "election", "adversary", "distortion", "placement", "withhold", "stage1", "stage2", "draws",
                    "manifest", "sample_size", "trials", "seed"},
                   "simulation config");
    SimulationConfig c;
    try {
        if (j.contains("audit")) c.audit = config_from_json(j.at("audit"));
        if (j.contains("election")) c.election = election_from_json(j.at("election"));
        if (j.contains("adversary")) c.adversary.kind = adversary_kind_from_string(j.at("adversary").get<std::string>());
        if (j.contains("distortion")) c.adversary.distortion = distortion_from_json(j.at("distortion"));
        if (j.contains("placement")) c.adversary.placement = placement_from_string(j.at("placement").get<std::string>());
        if (j.contains("withhold")) {
            const Json& w = j.at("withhold");
            reject_unknown(w, {"policy", "base"}, "withhold");
            if (w.contains("policy")) c.adversary.withhold_policy = withhold_policy_from_string(w.at("policy").get<std::string>());
            if (w.contains("base")) {
                c.adversary.withhold_base = adversary_kind_from_string(w.at("base").get<std::string>());
                if (c.adversary.withhold_base != AdversaryKind::Honest && c.adversary.withhold_base != AdversaryKind::Whitewash) {
                    throw ConfigError("withhold base must be honest or whitewash");
                }
            }
        }
        if (j.contains("stage1")) c.stage1 = distortion_from_json(j.at("stage1"));
        if (j.contains("stage2")) c.stage2 = distortion_from_json(j.at("stage2"));
        c.draws = field(j, "draws", c.draws);
        if (j.contains("manifest")) c.manifest = manifest_from_json(j.at("manifest"));
        c.sample_size = field(j, "sample_size", c.sample_size);
        c.trials = field(j, "trials", c.trials);
        if (j.contains("seed")) {
            const Json& s = j.at("seed");
            c.seed = s.is_string() ? std::stoull(s.get<std::string>()) : s.get<std::uint64_t>();
        }
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("bad simulation config value: ") + e.what());
    } catch (const std::logic_error& e) {
        throw ConfigError(std::string("bad simulation config value: ") + e.what());
    }
    return c;
}

Json simulation_config_to_json(const SimulationConfig& c) {
    return Json{{"audit", config_to_json(c.audit)},
                {"election", election_to_json(c.election)},
                {"adversary", std::string(to_string(c.adversary.kind))},
                {"distortion", distortion_to_json(c.adversary.distortion)},
                {"placement", std::string(to_string(c.adversary.placement))},
                {"withhold",
                 {{"policy", std::string(to_string(c.adversary.withhold_policy))},
                  {"base", std::string(to_string(c.adversary.withhold_base))}}},
                {"stage1", distortion_to_json(c.stage1)},
                {"stage2", distortion_to_json(c.stage2)},
                {"draws", c.draws},
                {"manifest", manifest_to_json(c.manifest)},
                {"sample_size", c.sample_size},
                {"trials", c.trials},
                {"seed", std::to_string(c.seed)}};
}

Json report_to_json(const ExperimentReport& r, bool timing) {
    Json j{{"trials", r.trials},
           {"consistent", r.consistent},
           {"estimate", r.estimate},
           {"wilson_lower", r.interval.lower},
           {"wilson_upper", r.interval.upper},
           {"alpha", r.alpha},
           {"violation", r.violation},
           {"mean_iterations", r.mean_iterations}};
    if (!r.transcript_digests.empty()) j["transcript_digests"] = r.transcript_digests;
    if (timing) j["wall_seconds"] = r.wall_seconds;
    return j;
}

Json report_to_json(const DiscrepancyReport& r) {
    return Json{{"draws", r.draws},
                {"discrepancies", {-2, -1, 0, 1, 2}},
                {"counts", std::vector<std::int64_t>(r.counts.begin(), r.counts.end())},
                {"pmf", pmf_to_json(r.pmf)},
                {"exact_pmf", pmf_to_json(r.exact_pmf)},
                {"lower", pmf_to_json(r.bounds.lower)},
                {"upper", pmf_to_json(r.bounds.upper)},
                {"bounds", r.bounds.source},
                {"within", std::vector<bool>(r.within.begin(), r.within.end())},
                {"all_within", r.all_within}};
}

Json report_to_json(const CvrFractionReport& r) {
    return Json{{"trials", r.trials},
                {"sample_size", r.sample_size},
                {"batches", r.batches},
                {"mean_distinct", r.mean_distinct},
                {"sd_distinct", r.sd_distinct},
                {"oracle_distinct", r.oracle_distinct},
                {"mean_fraction", r.mean_fraction},
                {"oracle_fraction", r.oracle_fraction},
                {"mean_batch_fraction", r.mean_batch_fraction}};
}

}  // namespace rla

#include "rla/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>
#include <unordered_map>

#include "rla/errors.hpp"

namespace rla {

WilsonInterval wilson_interval(std::int64_t successes, std::int64_t trials, double z) {
    if (trials <= 0) throw ConfigError("trials must be positive");
    const double n = static_cast<double>(trials);
    const double p = static_cast<double>(successes) / n;
    const double z2 = z * z;
    const double center = (p + z2 / (2 * n)) / (1 + z2 / n);
    const double half = z * std::sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / (1 + z2 / n);
    return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

namespace {

constexpr std::uint64_t kGeneratorStream = 0x6a09e667f3bcc909ULL;

struct TrialResult {
    bool consistent = false;
    std::int64_t iterations = 0;
    std::string digest;
};

template <class Fn>
void parallel_for(std::int64_t count, unsigned threads, Fn fn) {
    threads = std::max(1u, threads);
    if (threads == 1 || count < 2) {
        for (std::int64_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::int64_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (std::int64_t i = next++; i < count; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                    next = count;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

Identifier ballot_label(int batch, std::int64_t position) {
    return "b" + std::to_string(batch) + "-" + std::to_string(position + 1);
}

}  // namespace

ExperimentReport estimate_risk(const ElectionGenerator& generator, const AdversaryFactory& adversaries,
                               const AuditConfig& config, std::int64_t trials, std::uint64_t seed,
                               const RiskOptions& options) {
    if (trials <= 0) throw ConfigError("trials must be positive");
    config.validate();
    const auto start = std::chrono::steady_clock::now();
    std::vector<TrialResult> results(static_cast<std::size_t>(trials));

    parallel_for(trials, options.threads, [&](std::int64_t t) {
        const auto index = static_cast<std::uint64_t>(t);
        std::mt19937_64 rng(derive_seed(seed ^ kGeneratorStream, index));
        auto election = std::make_shared<const Election>(generator(rng));
        AdversarySetup setup = adversaries(election, rng);
        const Election& played = setup.election ? *setup.election : *election;
        if (margins(played).valid) throw ConfigError("risk is only defined over invalid elections");
        AuditConfig trial_config = config;
        trial_config.rng_seed = derive_seed(seed, index);
        trial_config.record_cvr_digests = options.transcript_digests;
        const AuditOutcome outcome = run_audit(*setup.adversary, played, trial_config, options.check);
        auto& r = results[static_cast<std::size_t>(t)];
        r.consistent = outcome.verdict == Verdict::Consistent;
        r.iterations = static_cast<std::int64_t>(outcome.transcript.iterations.size());
        if (options.transcript_digests) r.digest = transcript_digest(outcome.transcript);
    });

    ExperimentReport report;
    report.trials = trials;
    report.alpha = config.alpha;
    double iterations = 0;
    for (auto& r : results) {
        report.consistent += r.consistent ? 1 : 0;
        iterations += static_cast<double>(r.iterations);
        if (options.transcript_digests) report.transcript_digests.push_back(std::move(r.digest));
    }
    report.estimate = static_cast<double>(report.consistent) / static_cast<double>(trials);
    report.interval = wilson_interval(report.consistent, trials);
    report.violation = report.interval.lower > config.alpha;
    report.mean_iterations = iterations / static_cast<double>(trials);
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

Election tied_invalid_election(int batches, std::int64_t batch_size, double mu_tab, std::mt19937_64& rng,
                               double two_vote_share) {
    if (batches < 1 || batch_size < 2) throw ConfigError("need at least one batch of two ballots");
    if (mu_tab <= 0.0) throw ConfigError("mu_tab must be positive");
    std::vector<std::vector<Ballot>> family(static_cast<std::size_t>(batches));
    Tabulation tab;
    const std::int64_t each = (batch_size * 9 / 10) / 2;
    for (int b = 0; b < batches; ++b) {
        auto& batch = family[static_cast<std::size_t>(b)];
        for (std::int64_t p = 0; p < batch_size; ++p) {
            const int w = p < each ? 1 : 0;
            const int l = p >= each && p < 2 * each ? 1 : 0;
            batch.push_back({ballot_label(b + 1, p), w, l, b + 1});
        }
        std::shuffle(batch.begin(), batch.end(), rng);
        tab.push_back({batch_size, each, each});
    }
    auto units = static_cast<std::int64_t>(std::llround(mu_tab * static_cast<double>(batches * batch_size)));
    std::uniform_int_distribution<int> pick(0, batches - 1);
    std::bernoulli_distribution two(two_vote_share);
    std::int64_t stalls = 0;
    while (units > 0) {
        auto& t = tab[static_cast<std::size_t>(pick(rng))];
        if (units >= 2 && t.l > 0 && two(rng)) {
            t.w += 1;
            t.l -= 1;
            units -= 2;
        } else if (t.w + t.l < t.s) {
            t.w += 1;
            units -= 1;
        } else if (++stalls > 1000000) {
            throw ConfigError("mu_tab too large for the election size");
        }
    }
    return Election(BallotFamily(std::move(family)), std::move(tab));
}

Election random_valid_election(int batches, std::int64_t batch_size, double p_winner, double p_loser,
                               std::mt19937_64& rng) {
    if (batches < 1 || batch_size < 1) throw ConfigError("need at least one nonempty batch");
    std::vector<std::vector<Ballot>> family(static_cast<std::size_t>(batches));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int b = 0; b < batches; ++b) {
        for (std::int64_t p = 0; p < batch_size; ++p) {
            const double x = u(rng);
            const int w = x < p_winner ? 1 : 0;
            const int l = !w && x < p_winner + p_loser ? 1 : 0;
            family[static_cast<std::size_t>(b)].push_back({ballot_label(b + 1, p), w, l, b + 1});
        }
    }
    BallotFamily f(std::move(family));
    Tabulation tab = tab_of_cvr(canonical_cvr(f));
    return Election(std::move(f), std::move(tab));
}

std::vector<int> honest_row_discrepancies(const Manifest& manifest, const Tabulation& normalized,
                                          TransformKind transform, const CvrTable& served,
                                          const BallotFamily& family, int batch, bool forbid_overvotes) {
    const auto size = static_cast<std::size_t>(manifest.at(static_cast<std::size_t>(batch - 1)));
    CvrTable input = served;
    input.batch_index = batch;
    const auto out = apply_transform(transform, manifest, normalized, input);
    if (!out || !check_consistent(manifest, normalized, *out, forbid_overvotes).ok) return std::vector<int>(size, 2);

    std::unordered_map<std::string_view, const Ballot*> by_id;
    for (const auto& b : family.batch(batch)) by_id.emplace(b.identifier, &b);
    std::vector<int> d;
    d.reserve(size);
    for (const auto& row : out->rows) {
        std::optional<Ballot> delivered;
        if (!is_reserved_identifier(row.identifier)) {
            if (auto it = by_id.find(row.identifier); it != by_id.end()) delivered = *it->second;
        }
        d.push_back(comparison_discrepancy(row, delivered, batch));
    }
    return d;
}

PmfBounds completeness_bounds(const DistortionSpec& s1, const DistortionSpec& s2, std::int64_t total_ballots,
                              const std::array<double, 5>& base) {
    const double n = static_cast<double>(total_ballots);
    PmfBounds b;
    // Index v + 2 for discrepancy v.
    const auto set = [&b, n](int v, double lo, double hi) {
        b.lower[static_cast<std::size_t>(v + 2)] = lo / n;
        b.upper[static_cast<std::size_t>(v + 2)] = hi / n;
    };
    const auto o1 = static_cast<double>(s1.o1), o2 = static_cast<double>(s1.o2), u1 = static_cast<double>(s1.u1),
               u2 = static_cast<double>(s1.u2), a = static_cast<double>(s1.a), d = static_cast<double>(s1.d);
    const auto p1 = static_cast<double>(s2.o1), p2 = static_cast<double>(s2.o2), q1 = static_cast<double>(s2.u1),
               q2 = static_cast<double>(s2.u2), ap = static_cast<double>(s2.a), dp = static_cast<double>(s2.d);
    const double e = o1 + o2 + u1 + u2;
    const double ep = p1 + p2 + q1 + q2;

    if (s2.zero()) {
        b.source = "tabulation";
        set(2, o2 - 2 * a - d, o2 + a + 2 * d);
        set(1, o1 - 3 * a - 2 * d, o1 + 2 * a + 3 * d);
        set(-1, u1 - 3 * a - 2 * d, u1 + 2 * a + 2 * d);
        set(-2, u2 - 2 * a - d, u2 + a + d);
        b.lower[2] = 1 - (e + 3 * a + 3 * d) / n;
        b.upper[2] = 1 - (e - 3 * a - 3 * d) / n;
    } else if (s1.zero()) {
        b.source = "served";
        const std::array<double, 5> width = {
            2 * p2 + p1 + q2 + q1 + 2 * ap + 3 * dp,
            2 * p2 + 2 * p1 + 2 * q2 + 2 * q1 + 2 * ap + 3 * dp,
            2 * p2 + 2 * p1 + 2 * q2 + 2 * q1 + 3 * ap + 3 * dp,
            2 * p2 + 2 * p1 + 2 * q2 + 2 * q1 + 2 * ap + 3 * dp,
            p2 + p1 + 2 * q2 + q1 + 2 * ap + 3 * dp,
        };
        for (std::size_t i = 0; i < 5; ++i) {
            b.lower[i] = base[i] - width[i] / n;
            b.upper[i] = base[i] + width[i] / n;
        }
    } else {
        b.source = "composed";
        const double w2 = 2 * a + 2 * d + p2 + p1 + 2 * q2 + q1 + 2 * ap + 3 * dp;
        const double w1 = 3 * a + 3 * d + 2 * p2 + 2 * p1 + 2 * q2 + 2 * q1 + 2 * ap + 3 * dp;
        const double wm1 = 3 * a + 2 * d + 2 * p2 + 2 * p1 + 2 * q2 + 2 * q1 + 2 * ap + 3 * dp;
        const double wm2 = 2 * a + d + 2 * p2 + p1 + q2 + q1 + 2 * ap + 3 * dp;
        set(2, o2 - w2, o2 + w2);
        set(1, o1 - w1, o1 + w1);
        set(-1, u1 - wm1, u1 + wm1);
        set(-2, u2 - wm2, u2 + wm2);
        b.lower[2] = 1 - (e + 2 * ep) / n - 3 * (a + d + ap + dp) / n;
        b.upper[2] = 1;
    }
    for (std::size_t i = 0; i < 5; ++i) {
        b.lower[i] = std::clamp(b.lower[i], 0.0, 1.0);
        b.upper[i] = std::clamp(b.upper[i], 0.0, 1.0);
    }
    return b;
}

namespace {

struct ServedTables {
    Manifest manifest;
    std::vector<std::vector<int>> rows;  ///< discrepancy of each row, per batch
    std::array<double, 5> exact{};
};

ServedTables score_served(const BallotFamily& family, const GlobalCvr& served, const Tabulation& tabulation) {
    ServedTables out;
    for (int b = 1; b <= family.num_batches(); ++b) out.manifest.push_back(static_cast<std::int64_t>(family.batch(b).size()));
    const Normalization norm = normalize_tabulation(out.manifest, tabulation, AuditMode::Ballot);
    std::int64_t total = 0;
    std::array<std::int64_t, 5> counts{};
    for (int b = 1; b <= family.num_batches(); ++b) {
        out.rows.push_back(honest_row_discrepancies(out.manifest, norm.tabulation, TransformKind::Force,
                                                    served[static_cast<std::size_t>(b - 1)], family, b));
        for (int d : out.rows.back()) ++counts[static_cast<std::size_t>(d + 2)];
        total += out.manifest[static_cast<std::size_t>(b - 1)];
    }
    for (std::size_t i = 0; i < 5; ++i) out.exact[i] = static_cast<double>(counts[i]) / static_cast<double>(total);
    return out;
}

}  // namespace

DiscrepancyReport discrepancy_distribution(const BallotFamily& family, const DistortionSpec& stage1,
                                           const DistortionSpec& stage2, std::int64_t draws, std::uint64_t seed,
                                           const DistributionOptions& options) {
    if (draws <= 0) throw ConfigError("draws must be positive");
    std::mt19937_64 rng(derive_seed(seed ^ kGeneratorStream, 0));
    const GlobalCvr canonical = canonical_cvr(family);
    const DistortionResult first = apply_distortion(canonical, stage1, rng, options.placement, &family);
    const Tabulation tab = tab_of_cvr(first.cvr);
    const DistortionResult second = apply_distortion(first.cvr, stage2, rng, options.placement, &family);

    const ServedTables served = score_served(family, second.cvr, tab);
    std::array<double, 5> base{};
    if (stage1.zero() && !stage2.zero()) base = score_served(family, first.cvr, tab).exact;

    DiscrepancyReport report;
    report.draws = draws;
    report.exact_pmf = served.exact;
    const CounterRng counter(seed);
    for (std::int64_t i = 1; i <= draws; ++i) {
        const int beta = sample_batch(counter, served.manifest, i);
        const auto& rows = served.rows[static_cast<std::size_t>(beta - 1)];
        const auto r = counter.below(rows.size(), CounterRng::row_slot(static_cast<std::uint64_t>(i)));
        ++report.counts[static_cast<std::size_t>(rows[r] + 2)];
    }
    const double n = static_cast<double>(draws);
    report.bounds = completeness_bounds(stage1, stage2, family.total_size(), base);
    for (std::size_t i = 0; i < 5; ++i) {
        report.pmf[i] = static_cast<double>(report.counts[i]) / n;
        const double lo = report.bounds.lower[i];
        const double hi = report.bounds.upper[i];
        const double slack_lo = options.sigmas * std::sqrt(lo * (1 - lo) / n);
        const double slack_hi = options.sigmas * std::sqrt(hi * (1 - hi) / n);
        report.within[i] = report.pmf[i] >= lo - slack_lo && report.pmf[i] <= hi + slack_hi;
        report.all_within = report.all_within && report.within[i];
    }
    return report;
}

Manifest SyntheticManifestSpec::generate(std::mt19937_64& rng) const {
    Manifest m;
    switch (kind) {
        case Kind::Equal:
            if (k < 1 || size < 1) throw ConfigError("equal manifest needs k >= 1 and size >= 1");
            m.assign(static_cast<std::size_t>(k), size);
            break;
        case Kind::Lognormal: {
            if (k < 1) throw ConfigError("lognormal manifest needs k >= 1");
            std::lognormal_distribution<double> dist(log_mean, log_sigma);
            for (std::int64_t i = 0; i < k; ++i) m.push_back(std::max<std::int64_t>(1, std::llround(dist(rng))));
            break;
        }
        case Kind::Explicit:
            if (sizes.empty()) throw ConfigError("explicit manifest is empty");
            for (auto s : sizes) {
                if (s < 1) throw ConfigError("manifest sizes must be at least 1");
            }
            m = sizes;
            break;
    }
    return m;
}

CvrFractionReport simulate_cvr_fraction(const Manifest& manifest, std::int64_t n, std::int64_t trials,
                                        std::uint64_t seed) {
    if (manifest.empty()) throw ConfigError("empty manifest");
    if (n < 1) throw ConfigError("sample size must be at least 1");
    if (trials < 1) throw ConfigError("trials must be positive");
    std::vector<std::int64_t> cumulative;
    std::int64_t total = 0;
    for (auto s : manifest) {
        if (s < 0) throw ConfigError("negative manifest entry");
        total += s;
        cumulative.push_back(total);
    }
    if (total == 0) throw ConfigError("manifest has no ballots");

    CvrFractionReport report;
    report.trials = trials;
    report.sample_size = n;
    report.batches = static_cast<std::int64_t>(manifest.size());
    for (auto s : manifest) {
        const double p = static_cast<double>(s) / static_cast<double>(total);
        const double hit = 1 - std::pow(1 - p, static_cast<double>(n));
        report.oracle_distinct += hit;
        report.oracle_fraction += p * hit;
    }

    double sum = 0, sum_sq = 0, fraction = 0;
    std::vector<char> marked(manifest.size());
    for (std::int64_t t = 0; t < trials; ++t) {
        std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
        std::uniform_int_distribution<std::int64_t> ballot(0, total - 1);
        std::fill(marked.begin(), marked.end(), 0);
        std::int64_t distinct = 0, covered = 0;
        for (std::int64_t i = 0; i < n; ++i) {
            const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), ballot(rng));
            const auto b = static_cast<std::size_t>(it - cumulative.begin());
            if (!marked[b]) {
                marked[b] = 1;
                ++distinct;
                covered += manifest[b];
            }
        }
        sum += static_cast<double>(distinct);
        sum_sq += static_cast<double>(distinct) * static_cast<double>(distinct);
        fraction += static_cast<double>(covered) / static_cast<double>(total);
    }
    const double tn = static_cast<double>(trials);
    report.mean_distinct = sum / tn;
    report.sd_distinct = std::sqrt(std::max(0.0, sum_sq / tn - report.mean_distinct * report.mean_distinct));
    report.mean_fraction = fraction / tn;
    report.mean_batch_fraction = report.mean_distinct / static_cast<double>(manifest.size());
    return report;
}

}  // namespace rla

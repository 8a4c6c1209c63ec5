#include "rla/exact_risk.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <set>
#include <tuple>
#include <unordered_map>

#include "rla/errors.hpp"

namespace rla {
namespace {

constexpr double kTieWindow = 1e-9;

std::int64_t checked_pow(std::int64_t base, std::int64_t exp) {
    __int128 v = 1;
    for (std::int64_t i = 0; i < exp; ++i) {
        v *= base;
        if (v > INT64_MAX / 8) throw ConfigError("exact risk: instance too large");
    }
    return static_cast<std::int64_t>(v);
}

/// Stopping rule on a state, with the log-risk summed in a fixed order.
struct Stopper {
    KmConfig km;
    std::int64_t* near_ties;

    /// nullopt: keep going; otherwise whether the audit ends Consistent.
    std::optional<bool> stop(std::int64_t length, double log_risk) const {
        if (!km_should_stop(length, log_risk, km)) return std::nullopt;
        if (near_ties && std::abs(log_risk - std::log(km.alpha)) < kTieWindow) ++*near_ties;
        return km_rejects(log_risk, km);
    }
};

// ---------------------------------------------------------------- ballot mode

// Row keys: class k (best ballot net 1, 0, or -1/none) times row net n in
// {-1, 0, 1}; index 3*k + n + 1.
constexpr int kKeys = 9;
using KeyCounts = std::array<int, kKeys>;

struct BallotBatch {
    std::int64_t size = 0;
    std::vector<KeyCounts> tables;
    bool error_allowed = false;
};

class BallotGame {
public:
    BallotGame(std::vector<BallotBatch> batches, const Stopper& stopper, std::int64_t total, std::int64_t ell_max)
        : batches_(std::move(batches)), stopper_(stopper), ell_max_(ell_max) {
        pow_.resize(static_cast<std::size_t>(ell_max + 1));
        for (std::int64_t i = 0; i <= ell_max; ++i) pow_[static_cast<std::size_t>(i)] = checked_pow(total, i);
        for (int v = 0; v < 5; ++v) log_f_[v] = km_log_factor(v - 2, stopper.km.delta, stopper.km.gamma);
        memo_.assign(9 * 9 * 9 * 9 * 9, -1);
    }

    std::int64_t scale() const { return pow_.back(); }
    std::int64_t root() { return value({0, 0, 0, 0, 0}, 0); }
    std::int64_t states = 0;
    bool monotone = true;

private:
    static int encode(const std::array<int, 5>& c) {
        int k = 0;
        for (int v = 4; v >= 0; --v) k = k * 9 + c[static_cast<std::size_t>(v)];
        return k;
    }

    double log_risk(const std::array<int, 5>& c) const {
        double lr = 0.0;
        for (int v = 0; v < 5; ++v) {
            for (int i = 0; i < c[static_cast<std::size_t>(v)]; ++i) lr += log_f_[v];
        }
        return lr;
    }

    std::int64_t child(std::array<int, 5> c, std::int64_t length, int d) {
        ++c[static_cast<std::size_t>(d + 2)];
        if (auto done = stopper_.stop(length + 1, log_risk(c))) {
            return *done ? pow_[static_cast<std::size_t>(ell_max_ - length - 1)] : 0;
        }
        return value(c, length + 1);
    }

    std::int64_t value(const std::array<int, 5>& c, std::int64_t length) {
        const int key = encode(c);
        if (memo_[static_cast<std::size_t>(key)] >= 0) return memo_[static_cast<std::size_t>(key)];
        ++states;
        std::array<std::int64_t, 5> ch{};
        for (int d = -2; d <= 2; ++d) ch[static_cast<std::size_t>(d + 2)] = child(c, length, d);
        for (int i = 0; i + 1 < 5; ++i) {
            if (ch[static_cast<std::size_t>(i)] < ch[static_cast<std::size_t>(i + 1)]) monotone = false;
        }
        std::array<std::int64_t, kKeys> kv{};
        for (int k = 0; k < 3; ++k) {
            const int m = 1 - k;
            for (int n = -1; n <= 1; ++n) {
                const int with_ballot = n - m;
                const int without = n + 1;
                kv[static_cast<std::size_t>(3 * k + n + 1)] =
                    std::max(ch[static_cast<std::size_t>(with_ballot + 2)], ch[static_cast<std::size_t>(without + 2)]);
            }
        }
        std::int64_t total = 0;
        for (const auto& b : batches_) {
            std::int64_t best = b.error_allowed ? b.size * ch[4] : 0;
            for (const auto& t : b.tables) {
                std::int64_t v = 0;
                for (int i = 0; i < kKeys; ++i) v += t[static_cast<std::size_t>(i)] * kv[static_cast<std::size_t>(i)];
                best = std::max(best, v);
            }
            total += best;
        }
        memo_[static_cast<std::size_t>(key)] = total;
        return total;
    }

    std::vector<BallotBatch> batches_;
    Stopper stopper_;
    std::int64_t ell_max_;
    std::vector<std::int64_t> pow_;
    double log_f_[5]{};
    std::vector<std::int64_t> memo_;
};

void enumerate_rows(int type, std::int64_t left, std::int64_t w, std::int64_t l, int plus, int zero, bool overvotes,
                    std::vector<int>& cur, std::vector<std::vector<int>>& out) {
    if (type == 12) {
        if (left == 0 && w == 0 && l == 0) out.push_back(cur);
        return;
    }
    const int cls = type / 4;
    const int pattern = type % 4;
    const int pw = pattern / 2;
    const int pl = pattern % 2;
    std::int64_t cap = left;
    if (cls == 0) cap = std::min<std::int64_t>(cap, plus);
    if (cls == 1) cap = std::min<std::int64_t>(cap, zero);
    if (pw) cap = std::min(cap, w);
    if (pl) cap = std::min(cap, l);
    if (pattern == 3 && !overvotes) cap = 0;
    for (std::int64_t n = 0; n <= cap; ++n) {
        cur[static_cast<std::size_t>(type)] = static_cast<int>(n);
        enumerate_rows(type + 1, left - n, w - pw * n, l - pl * n, plus - (cls == 0 ? static_cast<int>(n) : 0),
                       zero - (cls == 1 ? static_cast<int>(n) : 0), overvotes, cur, out);
    }
    cur[static_cast<std::size_t>(type)] = 0;
}

ExactRiskResult ballot_exact(const Election& election, const AuditConfig& config, const Normalization& norm) {
    const bool overvotes = config.mode != AuditMode::BallotNoOvervote;
    const bool error_allowed = config.transform != TransformKind::Force;
    std::vector<BallotBatch> batches;
    for (int beta = 1; beta <= election.family.num_batches(); ++beta) {
        const auto ballots = election.family.batch(beta);
        std::map<Identifier, int> best;
        for (const auto& b : ballots) {
            auto [it, inserted] = best.emplace(b.identifier, b.net());
            if (!inserted) it->second = std::max(it->second, b.net());
        }
        int plus = 0;
        int zero = 0;
        for (const auto& [id, net] : best) {
            if (net == 1) ++plus;
            if (net == 0) ++zero;
        }
        const BatchTally& t = norm.tabulation[static_cast<std::size_t>(beta - 1)];
        BallotBatch batch;
        batch.size = t.s;
        batch.error_allowed = error_allowed;
        std::set<KeyCounts> keyed;
        for (const auto& rows : consistent_row_multisets(t.s, t.w, t.l, plus, zero, overvotes)) {
            KeyCounts kc{};
            for (int type = 0; type < 12; ++type) {
                const int pattern = type % 4;
                const int net = (pattern / 2) - (pattern % 2);
                kc[static_cast<std::size_t>(3 * (type / 4) + net + 1)] += rows[static_cast<std::size_t>(type)];
            }
            keyed.insert(kc);
        }
        batch.tables.assign(keyed.begin(), keyed.end());
        if (batch.size > 0) batches.push_back(std::move(batch));
    }

    ExactRiskResult result;
    result.auditable = true;
    Stopper stopper{config.km(norm.mu.to_double()), &result.near_ties};
    std::int64_t total = 0;
    for (const auto& b : batches) total += b.size;
    BallotGame game(std::move(batches), stopper, total, config.ell_max);
    const std::int64_t u = game.root();
    result.probability = Rational(u, game.scale());
    result.states = game.states;
    result.monotone = game.monotone;
    return result;
}

// ----------------------------------------------------------------- group mode

constexpr int kDenom = 60;  // lcm(1..6): every group discrepancy is k/60

struct Comp {
    int w = 0;
    int l = 0;
    int b = 0;
    int size() const { return w + l + b; }
    auto operator<=>(const Comp&) const = default;
};

/// One way to play a batch: weight (ballot positions) per discrepancy key k,
/// the discrepancy being k / kDenom. Sorted by key.
using Spread = std::vector<std::pair<int, int>>;

struct GroupBatch {
    int size = 0;
    /// Undominated spreads per partition (committed game), or a single list
    /// covering every partition (recommit game).
    std::vector<std::vector<Spread>> spreads;
    std::vector<std::vector<int>> keys;  ///< keys used by each list
};

void enumerate_partitions(Comp left, const Comp& floor, std::size_t max_groups, std::vector<Comp>& cur,
                          std::vector<std::vector<Comp>>& out) {
    if (left.size() == 0) {
        out.push_back(cur);
        return;
    }
    if (cur.size() == max_groups) return;
    for (int w = 0; w <= left.w; ++w) {
        for (int l = 0; l <= left.l; ++l) {
            for (int b = 0; b <= left.b; ++b) {
                const Comp g{w, l, b};
                if (g.size() == 0 || g < floor) continue;
                cur.push_back(g);
                enumerate_partitions({left.w - w, left.l - l, left.b - b}, g, max_groups, cur, out);
                cur.pop_back();
            }
        }
    }
}

/// Highest net of any s ballots from the group.
int best_subset_net(const Comp& g, int s) {
    const int a = std::min(s, g.w);
    const int c = std::min(s - a, g.b);
    return a - (s - a - c);
}

/// Every declared table for the partition, scored with the best subset for
/// each group; extra declared groups and oversized declarations score 2.
void enumerate_spreads(const std::vector<Comp>& groups, std::size_t j, int S, int W, int L, std::vector<int>& weight,
                       std::set<std::vector<int>>& out) {
    if (j == groups.size()) {
        if (S > 0) {
            if (W > S || L > S) return;
            weight[4 * kDenom] += S;
        } else if (W != 0 || L != 0) {
            return;
        }
        out.insert(weight);
        if (S > 0) weight[4 * kDenom] -= S;
        return;
    }
    const Comp& g = groups[j];
    for (int s = 0; s <= S; ++s) {
        for (int w = 0; w <= std::min(s, W); ++w) {
            for (int l = 0; l <= std::min(s, L); ++l) {
                int key = 4 * kDenom;
                if (s > 0 && s <= g.size()) key = ((w - l) - best_subset_net(g, s)) * kDenom / s + 2 * kDenom;
                if (s > 0) weight[static_cast<std::size_t>(key)] += s;
                enumerate_spreads(groups, j + 1, S - s, W - w, L - l, weight, out);
                if (s > 0) weight[static_cast<std::size_t>(key)] -= s;
            }
        }
    }
}

/// Drops spreads that are stochastically dominated (more weight on higher
/// discrepancies at every threshold); with a monotone continuation value
/// they are never better.
std::vector<Spread> undominated(const std::set<std::vector<int>>& dense) {
    std::vector<std::vector<int>> cum;
    for (const auto& w : dense) {
        std::vector<int> c(w.size());
        int run = 0;
        for (std::size_t i = 0; i < w.size(); ++i) c[i] = run += w[i];
        cum.push_back(std::move(c));
    }
    std::vector<Spread> out;
    for (std::size_t i = 0; i < cum.size(); ++i) {
        bool dominated = false;
        for (std::size_t j = 0; j < cum.size() && !dominated; ++j) {
            if (i == j) continue;
            bool ge = true;
            bool gt = false;
            for (std::size_t k = 0; k < cum[i].size() && ge; ++k) {
                if (cum[j][k] < cum[i][k]) ge = false;
                if (cum[j][k] > cum[i][k]) gt = true;
            }
            // Equal cumulative profiles are identical spreads; the set already deduplicates.
            dominated = ge && gt;
        }
        if (dominated) continue;
        const auto& w = *std::next(dense.begin(), static_cast<std::ptrdiff_t>(i));
        Spread sp;
        for (std::size_t k = 0; k < w.size(); ++k) {
            if (w[k] != 0) sp.emplace_back(static_cast<int>(k), w[k]);
        }
        out.push_back(std::move(sp));
    }
    return out;
}

GroupBatch build_group_batch(const Comp& all, int W, int L, bool recommit) {
    std::vector<std::vector<Comp>> partitions;
    std::vector<Comp> cur;
    enumerate_partitions(all, Comp{}, kExactMaxGroups, cur, partitions);
    GroupBatch batch;
    batch.size = all.size();
    std::set<std::vector<int>> pooled;
    for (const auto& groups : partitions) {
        std::set<std::vector<int>> dense;
        std::vector<int> weight(4 * kDenom + 1, 0);
        enumerate_spreads(groups, 0, all.size(), W, L, weight, recommit ? pooled : dense);
        if (!recommit) batch.spreads.push_back(undominated(dense));
    }
    if (recommit) batch.spreads.push_back(undominated(pooled));
    for (const auto& list : batch.spreads) {
        std::set<int> keys;
        for (const auto& sp : list) {
            for (const auto& [k, w] : sp) keys.insert(k);
        }
        batch.keys.emplace_back(keys.begin(), keys.end());
    }
    return batch;
}

class GroupGame {
public:
    GroupGame(std::vector<GroupBatch> batches, const Stopper& stopper, std::int64_t total, std::int64_t ell_max,
              bool recommit)
        : batches_(std::move(batches)), stopper_(stopper), ell_max_(ell_max), recommit_(recommit) {
        pow_.resize(static_cast<std::size_t>(ell_max + 1));
        for (std::int64_t i = 0; i <= ell_max; ++i) pow_[static_cast<std::size_t>(i)] = checked_pow(total, i);
        for (int k = -2 * kDenom; k <= 2 * kDenom; ++k) {
            log_f_.push_back(km_log_factor(static_cast<double>(k) / kDenom, stopper.km.delta, stopper.km.gamma));
        }
    }

    std::int64_t scale() const { return pow_.back(); }
    std::int64_t root() {
        State s;
        s.commit.fill(-1);
        return value(s);
    }
    std::int64_t states() const { return static_cast<std::int64_t>(memo_.size()); }
    bool monotone = true;

private:
    struct State {
        std::array<std::uint8_t, kExactMaxLength> d{};  ///< sorted keys
        int length = 0;
        std::array<std::int8_t, kExactMaxBatches> commit{};  ///< partition index, -1 before the first CVR

        unsigned __int128 key() const {
            unsigned __int128 k = static_cast<unsigned>(length);
            for (int i = 0; i < length; ++i) k = (k << 8) | d[static_cast<std::size_t>(i)];
            for (auto c : commit) k = (k << 8) | static_cast<std::uint8_t>(c);
            return k;
        }
    };

    struct KeyHash {
        std::size_t operator()(unsigned __int128 k) const noexcept {
            return std::hash<std::uint64_t>{}(static_cast<std::uint64_t>(k) ^
                                              (static_cast<std::uint64_t>(k >> 64) * 0x9e3779b97f4a7c15ULL));
        }
    };

    std::int64_t child(const State& s, int key) {
        State next = s;
        const auto code = static_cast<std::uint8_t>(key);
        auto* end = next.d.begin() + next.length;
        auto* pos = std::upper_bound(next.d.begin(), end, code);
        std::copy_backward(pos, end, end + 1);
        *pos = code;
        ++next.length;
        double lr = 0.0;
        for (int i = 0; i < next.length; ++i) lr += log_f_[next.d[static_cast<std::size_t>(i)]];
        if (auto done = stopper_.stop(next.length, lr)) {
            return *done ? pow_[static_cast<std::size_t>(ell_max_ - next.length)] : 0;
        }
        return value(next);
    }

    std::int64_t list_value(const State& s, std::size_t bi, std::size_t li) {
        State after = s;
        if (!recommit_) after.commit[bi] = static_cast<std::int8_t>(li);
        const auto& keys = batches_[bi].keys[li];
        std::array<std::int64_t, 4 * kDenom + 1> ch{};
        std::int64_t prev = -1;
        for (int k : keys) {
            const std::int64_t v = child(after, k);
            ch[static_cast<std::size_t>(k)] = v;
            if (prev >= 0 && v > prev) monotone = false;
            prev = v;
        }
        std::int64_t best = 0;
        for (const auto& sp : batches_[bi].spreads[li]) {
            std::int64_t v = 0;
            for (const auto& [k, w] : sp) v += w * ch[static_cast<std::size_t>(k)];
            best = std::max(best, v);
        }
        return best;
    }

    std::int64_t value(const State& s) {
        const auto key = s.key();
        if (auto it = memo_.find(key); it != memo_.end()) return it->second;
        std::int64_t total = 0;
        for (std::size_t bi = 0; bi < batches_.size(); ++bi) {
            if (s.commit[bi] >= 0) {
                total += list_value(s, bi, static_cast<std::size_t>(s.commit[bi]));
                continue;
            }
            std::int64_t best = 0;
            for (std::size_t li = 0; li < batches_[bi].spreads.size(); ++li) {
                best = std::max(best, list_value(s, bi, li));
            }
            total += best;
        }
        memo_.emplace(key, total);
        return total;
    }

    std::vector<GroupBatch> batches_;
    Stopper stopper_;
    std::int64_t ell_max_;
    bool recommit_;
    std::vector<std::int64_t> pow_;
    std::vector<double> log_f_;
    std::unordered_map<unsigned __int128, std::int64_t, KeyHash> memo_;
};

ExactRiskResult group_exact(const Election& election, const AuditConfig& config, const Normalization& norm,
                            bool recommit) {
    std::vector<GroupBatch> batches;
    std::int64_t total = 0;
    for (int beta = 1; beta <= election.family.num_batches(); ++beta) {
        Comp all;
        for (const auto& b : election.family.batch(beta)) {
            // An overvote nets to zero in a group count, like a blank.
            if (b.net() > 0) ++all.w;
            else if (b.net() < 0) ++all.l;
            else ++all.b;
        }
        if (all.size() == 0) continue;
        const BatchTally& t = norm.tabulation[static_cast<std::size_t>(beta - 1)];
        total += all.size();
        // Spread lists only depend on the batch contents, so families of elections share them.
        thread_local std::map<std::tuple<Comp, std::int64_t, std::int64_t, bool>, GroupBatch> cache;
        const auto key = std::make_tuple(all, t.w, t.l, recommit);
        auto it = cache.find(key);
        if (it == cache.end()) {
            it = cache.emplace(key, build_group_batch(all, static_cast<int>(t.w), static_cast<int>(t.l), recommit)).first;
        }
        batches.push_back(it->second);
    }
    ExactRiskResult result;
    result.auditable = true;
    Stopper stopper{config.km(norm.mu.to_double()), &result.near_ties};
    GroupGame game(std::move(batches), stopper, total, config.ell_max, recommit);
    const std::int64_t u = game.root();
    result.probability = Rational(u, game.scale());
    result.states = game.states();
    result.monotone = game.monotone;
    return result;
}

}  // namespace

std::vector<std::vector<int>> consistent_row_multisets(std::int64_t size, std::int64_t w, std::int64_t l,
                                                       int plus_labels, int zero_labels, bool allow_overvotes) {
    std::vector<std::vector<int>> out;
    std::vector<int> cur(12, 0);
    enumerate_rows(0, size, w, l, plus_labels, zero_labels, allow_overvotes, cur, out);
    return out;
}

ExactRiskResult exact_risk_small(const Election& election, const AuditConfig& config, const ExactOptions& options) {
    config.validate();
    if (config.rounds) throw ConfigError("exact risk: only sequential audits are supported");
    if (election.family.num_batches() > kExactMaxBatches) throw ConfigError("exact risk: too many batches");
    if (election.family.total_size() > kExactMaxBallots) throw ConfigError("exact risk: too many ballots");
    if (config.ell_max > kExactMaxLength) throw ConfigError("exact risk: ell_max too large");
    if (election.family.total_size() == 0) throw ConfigError("exact risk: empty election");
    const Normalization norm = normalize_tabulation(election.manifest(), election.tabulation, config.mode);
    if (!norm.auditable) return ExactRiskResult{};
    if (config.mode == AuditMode::Group) return group_exact(election, config, norm, options.group_recommit);
    return ballot_exact(election, config, norm);
}

Rational exact_risk_fixed(const std::vector<std::vector<int>>& row_discrepancies, const AuditConfig& config,
                          const Rational& mu) {
    config.validate();
    if (!(mu > Rational(0))) return Rational(0);
    std::int64_t total = 0;
    std::array<std::int64_t, 5> weight{};
    for (const auto& rows : row_discrepancies) {
        for (int d : rows) {
            if (d < -2 || d > 2) throw ConfigError("exact risk: discrepancy outside [-2,2]");
            ++weight[static_cast<std::size_t>(d + 2)];
            ++total;
        }
    }
    if (total == 0) throw ConfigError("exact risk: empty election");
    const KmConfig km = config.km(mu.to_double());
    const std::int64_t ell_max = config.ell_max;
    std::vector<std::int64_t> pow(static_cast<std::size_t>(ell_max + 1));
    for (std::int64_t i = 0; i <= ell_max; ++i) pow[static_cast<std::size_t>(i)] = checked_pow(total, i);
    double log_f[5];
    for (int v = 0; v < 5; ++v) log_f[v] = km_log_factor(v - 2, km.delta, km.gamma);

    std::map<std::array<int, 5>, std::int64_t> memo;
    auto value = [&](auto&& self, const std::array<int, 5>& c, std::int64_t length) -> std::int64_t {
        if (auto it = memo.find(c); it != memo.end()) return it->second;
        std::int64_t sum = 0;
        for (int v = 0; v < 5; ++v) {
            if (weight[static_cast<std::size_t>(v)] == 0) continue;
            auto next = c;
            ++next[static_cast<std::size_t>(v)];
            double lr = 0.0;
            for (int u = 0; u < 5; ++u) {
                for (int i = 0; i < next[static_cast<std::size_t>(u)]; ++i) lr += log_f[u];
            }
            std::int64_t sub;
            if (km_should_stop(length + 1, lr, km)) {
                sub = km_rejects(lr, km) ? pow[static_cast<std::size_t>(ell_max - length - 1)] : 0;
            } else {
                sub = self(self, next, length + 1);
            }
            sum += weight[static_cast<std::size_t>(v)] * sub;
        }
        memo.emplace(c, sum);
        return sum;
    };
    return Rational(value(value, {0, 0, 0, 0, 0}, 0), pow.back());
}

}  // namespace rla

#include "rla/transforms.hpp"

#include <algorithm>
#include <numeric>
#include <string>
#include <unordered_set>

#include "rla/errors.hpp"

namespace rla {

namespace {

struct BatchTarget {
    std::int64_t s;
    std::int64_t w;
    std::int64_t l;
};

BatchTarget target_for(const Manifest& manifest, const Tabulation& tabulation, int beta) {
    if (beta < 1 || static_cast<std::size_t>(beta) > manifest.size() || manifest.size() != tabulation.size()) {
        throw ConfigError("CVR batch index does not match manifest/tabulation");
    }
    const auto i = static_cast<std::size_t>(beta - 1);
    return {manifest[i], tabulation[i].w, tabulation[i].l};
}

// Only reserved labels can collide with generated ones, so only those are tracked.
class BotLabels {
public:
    explicit BotLabels(const std::vector<CvrRow>& rows) {
        for (const auto& r : rows) {
            if (is_reserved_identifier(r.identifier)) used_.insert(r.identifier);
        }
    }
    Identifier next() {
        for (;;) {
            Identifier id = reserved_identifier(counter_++);
            if (used_.empty() || used_.insert(id).second) return id;
        }
    }

private:
    std::unordered_set<std::string> used_;
    std::uint64_t counter_ = 1;
};

// Steps shared by both forcing transforms: unique labels, then size.
void dedupe_and_resize(std::vector<CvrRow>& rows, std::int64_t size, BotLabels& bots) {
    // Later copies of a label are relabeled; the first occurrence keeps it.
    std::vector<std::size_t> order(rows.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&rows](std::size_t a, std::size_t b) { return rows[a].identifier < rows[b].identifier; });
    std::vector<std::size_t> repeats;
    for (std::size_t k = 1; k < order.size(); ++k) {
        if (rows[order[k]].identifier == rows[order[k - 1]].identifier) repeats.push_back(order[k]);
    }
    std::sort(repeats.begin(), repeats.end());
    for (auto i : repeats) rows[i].identifier = bots.next();
    while (static_cast<std::int64_t>(rows.size()) < size) rows.push_back({bots.next(), 0, 0});
    while (static_cast<std::int64_t>(rows.size()) > size) rows.pop_back();
}

std::int64_t column_sum(const std::vector<CvrRow>& rows, int CvrRow::*column) {
    std::int64_t n = 0;
    for (const auto& r : rows) n += r.*column;
    return n;
}

// Walk i from the last row down, forcing the column value.
void force_column(std::vector<CvrRow>& rows, int CvrRow::*column, std::int64_t target) {
    std::int64_t current = column_sum(rows, column);
    if (current == target) return;
    auto i = static_cast<std::ptrdiff_t>(rows.size()) - 1;
    while (current < target && i >= 0) {
        auto& cell = rows[static_cast<std::size_t>(i)].*column;
        if (cell == 0) ++current;
        cell = 1;
        --i;
    }
    while (current > target && i >= 0) {
        auto& cell = rows[static_cast<std::size_t>(i)].*column;
        if (cell == 1) --current;
        cell = 0;
        --i;
    }
}

template <class Pred>
CvrRow* last_row_where(std::vector<CvrRow>& rows, Pred pred) {
    for (auto it = rows.rbegin(); it != rows.rend(); ++it) {
        if (pred(*it)) return &*it;
    }
    return nullptr;
}

}  // namespace

std::string_view to_string(TransformKind kind) noexcept {
    switch (kind) {
        case TransformKind::Identity: return "identity";
        case TransformKind::Force: return "force";
        case TransformKind::ForceNoOvervote: return "force_no_overvote";
    }
    return "identity";
}

TransformKind transform_from_string(std::string_view name) {
    if (name == "identity") return TransformKind::Identity;
    if (name == "force") return TransformKind::Force;
    if (name == "force_no_overvote") return TransformKind::ForceNoOvervote;
    throw ConfigError("unknown transform: " + std::string(name));
}

CvrTable transform_identity(const Manifest&, const Tabulation&, const CvrTable& cvr) { return cvr; }

CvrTable transform_force(const Manifest& manifest, const Tabulation& tabulation, const CvrTable& cvr) {
    const BatchTarget target = target_for(manifest, tabulation, cvr.batch_index);
    CvrTable out = cvr;
    // Vote values outside {0,1} are clamped before forcing.
    for (auto& r : out.rows) {
        r.votes_w = std::clamp(r.votes_w, 0, 1);
        r.votes_l = std::clamp(r.votes_l, 0, 1);
    }
    BotLabels bots(out.rows);
    dedupe_and_resize(out.rows, target.s, bots);
    force_column(out.rows, &CvrRow::votes_w, target.w);
    force_column(out.rows, &CvrRow::votes_l, target.l);
    return out;
}

std::optional<CvrTable> transform_force_no_overvote(const Manifest& manifest, const Tabulation& tabulation,
                                                    const CvrTable& cvr) {
    for (const auto& r : cvr.rows) {
        if ((r.votes_w != 0 && r.votes_w != 1) || (r.votes_l != 0 && r.votes_l != 1)) return std::nullopt;
    }
    const BatchTarget target = target_for(manifest, tabulation, cvr.batch_index);
    if (target.w + target.l > target.s) throw ConfigError("tabulation not normalized for overvote-free forcing");

    CvrTable out = cvr;
    BotLabels bots(out.rows);
    dedupe_and_resize(out.rows, target.s, bots);
    std::stable_partition(out.rows.begin(), out.rows.end(),
                          [](const CvrRow& r) { return !is_reserved_identifier(r.identifier); });
    for (auto& r : out.rows) {
        if (r.overvote()) r.votes_w = 0;
    }

    auto& rows = out.rows;
    std::int64_t w = column_sum(rows, &CvrRow::votes_w);
    std::int64_t l = column_sum(rows, &CvrRow::votes_l);
    const auto is = [](int wv, int lv) { return [wv, lv](const CvrRow& r) { return r.votes_w == wv && r.votes_l == lv; }; };
    const auto set = [](CvrRow* r, int wv, int lv) {
        r->votes_w = wv;
        r->votes_l = lv;
    };
    // Each pass below moves W (then L) one unit toward its target; existence of
    // the row searched for follows from W^tab + L^tab <= S and no overvotes.
    while (w < target.w) {
        if (l > target.l) {
            set(last_row_where(rows, is(0, 1)), 1, 0);
            --l;
        } else {
            set(last_row_where(rows, is(0, 0)), 1, 0);
        }
        ++w;
    }
    while (w > target.w) {
        if (l < target.l) {
            set(last_row_where(rows, is(1, 0)), 0, 1);
            ++l;
        } else {
            set(last_row_where(rows, is(1, 0)), 0, 0);
        }
        --w;
    }
    while (l < target.l) {
        set(last_row_where(rows, is(0, 0)), 0, 1);
        ++l;
    }
    while (l > target.l) {
        set(last_row_where(rows, is(0, 1)), 0, 0);
        --l;
    }
    return out;
}

std::optional<CvrTable> apply_transform(TransformKind kind, const Manifest& manifest, const Tabulation& tabulation,
                                        const CvrTable& cvr) {
    switch (kind) {
        case TransformKind::Identity: return transform_identity(manifest, tabulation, cvr);
        case TransformKind::Force: return transform_force(manifest, tabulation, cvr);
        case TransformKind::ForceNoOvervote: return transform_force_no_overvote(manifest, tabulation, cvr);
    }
    return cvr;
}

}  // namespace rla

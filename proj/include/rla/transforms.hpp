#pragma once

// CVR rewriting applied by the auditor before the consistency check.
//
// All transforms expect a tabulation already normalized against the manifest
// (see normalize_tabulation in auditor.hpp). Relabeled and padded rows use
// reserved "__bot:<t>" identifiers numbered from 1 per invocation, skipping any
// that already occur in the table.

#include <optional>
#include <string_view>

#include "rla/election.hpp"

namespace rla {

enum class TransformKind { Identity, Force, ForceNoOvervote };

std::string_view to_string(TransformKind kind) noexcept;
TransformKind transform_from_string(std::string_view name);

CvrTable transform_identity(const Manifest& manifest, const Tabulation& tabulation, const CvrTable& cvr);

/// Minimal-edit rewrite to a uniquely labeled table whose size and column sums
/// match the manifest and tabulation. Edits scan from the last row backwards;
/// vote values outside {0,1} are clamped first.
CvrTable transform_force(const Manifest& manifest, const Tabulation& tabulation, const CvrTable& cvr);

/// Like transform_force but never leaves a (1,1) row. Returns nullopt when the
/// input holds a vote value outside {0,1}. Requires W^tab + L^tab <= S^act.
std::optional<CvrTable> transform_force_no_overvote(const Manifest& manifest, const Tabulation& tabulation,
                                                    const CvrTable& cvr);

/// Dispatch on kind; nullopt means the transform itself reported Error.
std::optional<CvrTable> apply_transform(TransformKind kind, const Manifest& manifest, const Tabulation& tabulation,
                                        const CvrTable& cvr);

}  // namespace rla

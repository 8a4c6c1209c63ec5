#pragma once

// CSV ingestion and serialization.
//
//   manifest    batch_id,size
//   tabulation  batch_id,s_tab,w_tab,l_tab
//   CVR         row,identifier,w,l
//   group CVR   group,s,w,l
//   ballots     batch_id,identifier,w,l   (physical ballots, for offline audits)
//
// UTF-8, header row required, RFC 4180 quoting, LF or CRLF line ends. Batch
// ids, rows and groups are 1-based and contiguous. Errors carry 1-based line
// and column numbers.

#include <string>
#include <string_view>
#include <vector>

#include "rla/election.hpp"
#include "rla/group_auditor.hpp"

namespace rla {

struct CsvRecord {
    std::vector<std::string> fields;
    std::vector<std::size_t> columns;  ///< 1-based character column where each field starts
    std::size_t line = 0;
};

/// Splits into records; blank lines are skipped. Throws ParseError on bad
/// quoting or invalid UTF-8.
std::vector<CsvRecord> read_csv(std::string_view bytes);

Manifest parse_manifest(std::string_view bytes);

/// Rejects a tie in the grand totals unless `allow_tie`.
Tabulation parse_tabulation(std::string_view bytes, bool allow_tie = false);

/// `batch_index` is stamped on the table; rows must be 1..n in order.
CvrTable parse_cvr(std::string_view bytes, int batch_index);

GroupCvrTable parse_group_cvr(std::string_view bytes, int batch_index);

/// Ballots grouped by batch; every batch id from 1 to the largest must appear.
BallotFamily parse_ballots(std::string_view bytes);

std::string serialize_manifest(const Manifest& manifest);
std::string serialize_tabulation(const Tabulation& tabulation);
std::string serialize_cvr(const CvrTable& cvr);
std::string serialize_group_cvr(const GroupCvrTable& cvr);
std::string serialize_ballots(const BallotFamily& family);

/// Quotes a field when it holds a comma, quote, line break or edge whitespace.
std::string csv_field(std::string_view value);

}  // namespace rla

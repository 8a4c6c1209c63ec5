#include "rla/csv_io.hpp"

#include <charconv>
#include <map>

#include "rla/errors.hpp"

namespace rla {
namespace {

/// Byte length of the UTF-8 sequence starting at s[i], or 0 if invalid.
std::size_t utf8_length(std::string_view s, std::size_t i) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t n = 0;
    std::uint32_t cp = 0;
    if (c < 0x80) return 1;
    if ((c & 0xE0) == 0xC0) {
        n = 2;
        cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
        n = 3;
        cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
        n = 4;
        cp = c & 0x07;
    } else {
        return 0;
    }
    if (i + n > s.size()) return 0;
    for (std::size_t k = 1; k < n; ++k) {
        const auto cc = static_cast<unsigned char>(s[i + k]);
        if ((cc & 0xC0) != 0x80) return 0;
        cp = (cp << 6) | (cc & 0x3F);
    }
    static constexpr std::uint32_t kMin[] = {0, 0, 0x80, 0x800, 0x10000};
    if (cp < kMin[n] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return 0;
    return n;
}

void expect_header(const std::vector<CsvRecord>& records, std::initializer_list<std::string_view> names) {
    if (records.empty()) throw ParseError("missing header row", 1, 0);
    const CsvRecord& h = records.front();
    std::size_t i = 0;
    for (auto name : names) {
        if (i >= h.fields.size()) {
            throw ParseError("header is missing column '" + std::string(name) + "'", h.line, 0);
        }
        if (h.fields[i] != name) {
            throw ParseError("expected header column '" + std::string(name) + "', found '" + h.fields[i] + "'", h.line,
                             h.columns[i]);
        }
        ++i;
    }
    if (h.fields.size() != names.size()) throw ParseError("unexpected extra header column", h.line, h.columns[i]);
}

void expect_width(const CsvRecord& rec, std::size_t width) {
    if (rec.fields.size() != width) {
        throw ParseError("expected " + std::to_string(width) + " fields, found " + std::to_string(rec.fields.size()),
                         rec.line, 0);
    }
}

std::int64_t integer(const CsvRecord& rec, std::size_t i, std::string_view what) {
    const std::string& f = rec.fields[i];
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
    if (f.empty() || ec != std::errc() || ptr != f.data() + f.size()) {
        throw ParseError(std::string(what) + " is not an integer: '" + f + "'", rec.line, rec.columns[i]);
    }
    if (v < 0) throw ParseError(std::string(what) + " is negative", rec.line, rec.columns[i]);
    return v;
}

int vote(const CsvRecord& rec, std::size_t i, std::string_view what) {
    const std::int64_t v = integer(rec, i, what);
    if (v > 1) throw ParseError(std::string(what) + " must be 0 or 1", rec.line, rec.columns[i]);
    return static_cast<int>(v);
}

void expect_sequence(const CsvRecord& rec, std::int64_t value, std::int64_t expected, std::string_view what) {
    if (value != expected) {
        throw ParseError(std::string(what) + " " + std::to_string(value) + " out of sequence (expected " +
                             std::to_string(expected) + ")",
                         rec.line, rec.columns[0]);
    }
}

const Identifier& identifier(const CsvRecord& rec, std::size_t i) {
    if (is_reserved_identifier(rec.fields[i])) {
        throw ParseError("identifier '" + rec.fields[i] + "' uses the reserved prefix " + std::string(kReservedPrefix),
                         rec.line, rec.columns[i]);
    }
    return rec.fields[i];
}

}  // namespace

std::vector<CsvRecord> read_csv(std::string_view bytes) {
    if (bytes.substr(0, 3) == "\xEF\xBB\xBF") bytes.remove_prefix(3);
    std::vector<CsvRecord> out;
    std::size_t line = 1;
    std::size_t col = 1;
    std::size_t i = 0;
    CsvRecord rec;
    std::string field;
    bool field_started = false;
    auto end_field = [&] {
        rec.fields.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_record = [&] {
        const bool blank = rec.fields.size() == 1 && rec.fields[0].empty();
        if (!blank) out.push_back(std::move(rec));
        rec = CsvRecord{};
    };
    while (i < bytes.size()) {
        if (!field_started) {
            rec.line = rec.fields.empty() ? line : rec.line;
            rec.columns.push_back(col);
            field_started = true;
            if (bytes[i] == '"') {
                const std::size_t open_line = line;
                const std::size_t open_col = col;
                ++i;
                ++col;
                for (;;) {
                    if (i >= bytes.size()) throw ParseError("unterminated quoted field", open_line, open_col);
                    const char c = bytes[i];
                    if (c == '"') {
                        if (i + 1 < bytes.size() && bytes[i + 1] == '"') {
                            field += '"';
                            i += 2;
                            col += 2;
                            continue;
                        }
                        ++i;
                        ++col;
                        break;
                    }
                    const std::size_t n = utf8_length(bytes, i);
                    if (n == 0) throw ParseError("invalid UTF-8", line, col);
                    field.append(bytes.substr(i, n));
                    i += n;
                    if (c == '\n') {
                        ++line;
                        col = 1;
                    } else {
                        ++col;
                    }
                }
                if (i < bytes.size() && bytes[i] != ',' && bytes[i] != '\n' && bytes[i] != '\r') {
                    throw ParseError("unexpected character after closing quote", line, col);
                }
                continue;
            }
        }
        const char c = bytes[i];
        if (c == ',') {
            end_field();
            ++i;
            ++col;
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && (i + 1 >= bytes.size() || bytes[i + 1] != '\n')) {
                throw ParseError("bare carriage return", line, col);
            }
            end_field();
            end_record();
            i += c == '\r' ? 2 : 1;
            ++line;
            col = 1;
        } else if (c == '"') {
            throw ParseError("quote inside an unquoted field", line, col);
        } else {
            const std::size_t n = utf8_length(bytes, i);
            if (n == 0) throw ParseError("invalid UTF-8", line, col);
            field.append(bytes.substr(i, n));
            i += n;
            ++col;
        }
    }
    if (field_started || !rec.fields.empty()) {
        end_field();
        end_record();
    }
    return out;
}

Manifest parse_manifest(std::string_view bytes) {
    const auto records = read_csv(bytes);
    expect_header(records, {"batch_id", "size"});
    Manifest out;
    for (std::size_t k = 1; k < records.size(); ++k) {
        const CsvRecord& rec = records[k];
        expect_width(rec, 2);
        expect_sequence(rec, integer(rec, 0, "batch_id"), static_cast<std::int64_t>(k), "batch_id");
        out.push_back(integer(rec, 1, "size"));
    }
    if (out.empty()) throw ParseError("manifest has no batches", records.front().line + 1, 0);
    return out;
}

Tabulation parse_tabulation(std::string_view bytes, bool allow_tie) {
    const auto records = read_csv(bytes);
    expect_header(records, {"batch_id", "s_tab", "w_tab", "l_tab"});
    Tabulation out;
    std::int64_t w = 0;
    std::int64_t l = 0;
    for (std::size_t k = 1; k < records.size(); ++k) {
        const CsvRecord& rec = records[k];
        expect_width(rec, 4);
        expect_sequence(rec, integer(rec, 0, "batch_id"), static_cast<std::int64_t>(k), "batch_id");
        BatchTally t{integer(rec, 1, "s_tab"), integer(rec, 2, "w_tab"), integer(rec, 3, "l_tab")};
        w += t.w;
        l += t.l;
        out.push_back(t);
    }
    if (out.empty()) throw ParseError("tabulation has no batches", records.front().line + 1, 0);
    if (w == l && !allow_tie) {
        throw ParseError("tie: tabulated winner and loser totals are both " + std::to_string(w), 0, 0);
    }
    return out;
}

CvrTable parse_cvr(std::string_view bytes, int batch_index) {
    const auto records = read_csv(bytes);
    expect_header(records, {"row", "identifier", "w", "l"});
    CvrTable out;
    out.batch_index = batch_index;
    for (std::size_t k = 1; k < records.size(); ++k) {
        const CsvRecord& rec = records[k];
        expect_width(rec, 4);
        expect_sequence(rec, integer(rec, 0, "row"), static_cast<std::int64_t>(k), "row");
        out.rows.push_back(CvrRow{identifier(rec, 1), vote(rec, 2, "w"), vote(rec, 3, "l")});
    }
    return out;
}

GroupCvrTable parse_group_cvr(std::string_view bytes, int batch_index) {
    const auto records = read_csv(bytes);
    expect_header(records, {"group", "s", "w", "l"});
    GroupCvrTable out;
    out.batch_index = batch_index;
    for (std::size_t k = 1; k < records.size(); ++k) {
        const CsvRecord& rec = records[k];
        expect_width(rec, 4);
        expect_sequence(rec, integer(rec, 0, "group"), static_cast<std::int64_t>(k), "group");
        GroupCvrRow g{integer(rec, 1, "s"), integer(rec, 2, "w"), integer(rec, 3, "l")};
        if (g.w > g.s || g.l > g.s) throw ParseError("group votes exceed its size", rec.line, rec.columns[1]);
        out.groups.push_back(g);
    }
    return out;
}

BallotFamily parse_ballots(std::string_view bytes) {
    const auto records = read_csv(bytes);
    expect_header(records, {"batch_id", "identifier", "w", "l"});
    std::map<std::int64_t, std::vector<Ballot>> batches;
    for (std::size_t k = 1; k < records.size(); ++k) {
        const CsvRecord& rec = records[k];
        expect_width(rec, 4);
        const std::int64_t b = integer(rec, 0, "batch_id");
        if (b < 1) throw ParseError("batch_id must be at least 1", rec.line, rec.columns[0]);
        batches[b].push_back(Ballot{identifier(rec, 1), vote(rec, 2, "w"), vote(rec, 3, "l"), static_cast<int>(b)});
    }
    if (batches.empty()) throw ParseError("no ballots", records.front().line + 1, 0);
    std::vector<std::vector<Ballot>> out;
    for (const auto& [b, ballots] : batches) {
        if (b != static_cast<std::int64_t>(out.size()) + 1) {
            throw ParseError("batch " + std::to_string(out.size() + 1) + " has no ballots", 0, 0);
        }
        out.push_back(ballots);
    }
    return BallotFamily(std::move(out));
}

std::string csv_field(std::string_view value) {
    const bool edge_space = !value.empty() && (value.front() == ' ' || value.back() == ' ');
    if (value.find_first_of(",\"\r\n") == std::string_view::npos && !edge_space) return std::string(value);
    std::string out = "\"";
    for (char c : value) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string serialize_manifest(const Manifest& manifest) {
    std::string out = "batch_id,size\n";
    for (std::size_t i = 0; i < manifest.size(); ++i) {
        out += std::to_string(i + 1) + "," + std::to_string(manifest[i]) + "\n";
    }
    return out;
}

std::string serialize_tabulation(const Tabulation& tabulation) {
    std::string out = "batch_id,s_tab,w_tab,l_tab\n";
    for (std::size_t i = 0; i < tabulation.size(); ++i) {
        const auto& t = tabulation[i];
        out += std::to_string(i + 1) + "," + std::to_string(t.s) + "," + std::to_string(t.w) + "," +
               std::to_string(t.l) + "\n";
    }
    return out;
}

std::string serialize_cvr(const CvrTable& cvr) {
    std::string out = "row,identifier,w,l\n";
    for (std::size_t i = 0; i < cvr.rows.size(); ++i) {
        const auto& r = cvr.rows[i];
        out += std::to_string(i + 1) + "," + csv_field(r.identifier) + "," + std::to_string(r.votes_w) + "," +
               std::to_string(r.votes_l) + "\n";
    }
    return out;
}

std::string serialize_group_cvr(const GroupCvrTable& cvr) {
    std::string out = "group,s,w,l\n";
    for (std::size_t i = 0; i < cvr.groups.size(); ++i) {
        const auto& g = cvr.groups[i];
        out += std::to_string(i + 1) + "," + std::to_string(g.s) + "," + std::to_string(g.w) + "," +
               std::to_string(g.l) + "\n";
    }
    return out;
}

std::string serialize_ballots(const BallotFamily& family) {
    std::string out = "batch_id,identifier,w,l\n";
    for (int b = 1; b <= family.num_batches(); ++b) {
        for (const auto& ballot : family.batch(b)) {
            out += std::to_string(b) + "," + csv_field(ballot.identifier) + "," + std::to_string(ballot.votes_w) +
                   "," + std::to_string(ballot.votes_l) + "\n";
        }
    }
    return out;
}

}  // namespace rla

#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace phishsim {

enum class Label { Phishing, Legitimate, Unknown };

std::string to_string(Label label);
Label parse_label(std::string_view text);

/// Calendar date with day resolution, UTC.
using Date = std::chrono::sys_days;

/// Parses "YYYY-MM-DD"; longer ISO-8601 strings are accepted and truncated
/// to their date part. Throws CorpusError on malformed input.
Date parse_date(std::string_view iso);

std::string format_date(Date date);

/// ISO-8601 week identification, used for weekly bucketing.
struct IsoWeek {
    int year = 0;
    int week = 0;  // 1..53

    auto operator<=>(const IsoWeek&) const = default;
};

IsoWeek iso_week_of(Date date);

std::string to_string(const IsoWeek& week);  // "2020-W22"

/// An identified, immutable byte sequence with provenance metadata.
/// `bytes` must be non-empty; ingestion rejects empty documents and `id`
/// must be unique within any corpus the document participates in.
struct ByteDocument {
    std::string id;
    std::string bytes;
    std::string source_path;
    Label label = Label::Unknown;
    Date timestamp{};
};

}  // namespace phishsim

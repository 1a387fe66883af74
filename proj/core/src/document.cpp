#include "phishsim/document.hpp"

#include <charconv>
#include <cstdio>

#include "phishsim/errors.hpp"

namespace phishsim {

std::string to_string(Label label) {
    switch (label) {
        case Label::Phishing: return "phishing";
        case Label::Legitimate: return "legitimate";
        case Label::Unknown: return "unknown";
    }
    return "unknown";
}

Label parse_label(std::string_view text) {
    if (text == "phishing") return Label::Phishing;
    if (text == "legitimate") return Label::Legitimate;
    if (text == "unknown") return Label::Unknown;
    throw CorpusError("unknown label: '" + std::string(text) + "'");
}

namespace {

bool parse_int(std::string_view s, int& out) {
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

}  // namespace

Date parse_date(std::string_view iso) {
    // Accept "YYYY-MM-DD" or any longer ISO-8601 string with that prefix.
    if (iso.size() > 10 && (iso[10] == 'T' || iso[10] == ' ')) iso = iso.substr(0, 10);
    if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-')
        throw CorpusError("malformed date: '" + std::string(iso) + "' (want YYYY-MM-DD)");
    int y = 0, m = 0, d = 0;
    if (!parse_int(iso.substr(0, 4), y) || !parse_int(iso.substr(5, 2), m) ||
        !parse_int(iso.substr(8, 2), d))
        throw CorpusError("malformed date: '" + std::string(iso) + "'");
    std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{unsigned(m)},
                                    std::chrono::day{unsigned(d)}};
    if (!ymd.ok()) throw CorpusError("invalid calendar date: '" + std::string(iso) + "'");
    return std::chrono::sys_days{ymd};
}

std::string format_date(Date date) {
    std::chrono::year_month_day ymd{date};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", int(ymd.year()), unsigned(ymd.month()),
                  unsigned(ymd.day()));
    return buf;
}

IsoWeek iso_week_of(Date date) {
    using namespace std::chrono;
    // ISO week-year of a date is the calendar year of its week's Thursday.
    weekday wd{date};
    sys_days thursday = date + days(4 - int(wd.iso_encoding()));
    year_month_day ymd{thursday};
    sys_days jan1{year_month_day{ymd.year(), January, day{1}}};
    int week = int((thursday - jan1).count()) / 7 + 1;
    return IsoWeek{int(ymd.year()), week};
}

std::string to_string(const IsoWeek& week) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-W%02d", week.year, week.week);
    return buf;
}

}  // namespace phishsim

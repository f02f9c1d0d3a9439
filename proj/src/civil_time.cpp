#include "flexclust/civil_time.hpp"

#include <charconv>
#include <cstdio>

namespace flexclust {

namespace {

bool read_fixed(std::string_view text, std::size_t pos, std::size_t width, int& out)
{
    if (pos + width > text.size()) {
        return false;
    }
    int value = 0;
    for (std::size_t i = pos; i < pos + width; ++i) {
        const char c = text[i];
        if (c < '0' || c > '9') {
            return false;
        }
        value = value * 10 + (c - '0');
    }
    out = value;
    return true;
}

std::optional<Date> parse_date_prefix(std::string_view text)
{
    int y = 0, m = 0, d = 0;
    if (text.size() < 10 || text[4] != '-' || text[7] != '-') {
        return std::nullopt;
    }
    if (!read_fixed(text, 0, 4, y) || !read_fixed(text, 5, 2, m) || !read_fixed(text, 8, 2, d)) {
        return std::nullopt;
    }
    const std::chrono::year_month_day ymd{
        std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
        std::chrono::day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) {
        return std::nullopt;
    }
    return Date{ymd};
}

} // namespace

std::optional<Date> parse_date(std::string_view text)
{
    if (text.size() != 10) {
        return std::nullopt;
    }
    return parse_date_prefix(text);
}

std::optional<Timestamp> parse_timestamp(std::string_view text)
{
    if (text.size() != 19 || text[10] != 'T' || text[13] != ':' || text[16] != ':') {
        return std::nullopt;
    }
    auto date = parse_date_prefix(text);
    if (!date) {
        return std::nullopt;
    }
    int hh = 0, mm = 0, ss = 0;
    if (!read_fixed(text, 11, 2, hh) || !read_fixed(text, 14, 2, mm) || !read_fixed(text, 17, 2, ss)) {
        return std::nullopt;
    }
    if (hh > 23 || mm > 59 || ss > 59) {
        return std::nullopt;
    }
    return make_timestamp(*date, hh, mm, ss);
}

std::string format_date(Date d)
{
    const std::chrono::year_month_day ymd{d};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

std::string format_timestamp(Timestamp t)
{
    const Date d = date_of(t);
    const long long secs = (t - Timestamp{d}).count();
    char buf[48];
    std::snprintf(buf, sizeof buf, "T%02lld:%02lld:%02lld", secs / 3600, (secs / 60) % 60, secs % 60);
    return format_date(d) + buf;
}

} // namespace flexclust

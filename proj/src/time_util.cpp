#include "rw/time_util.hpp"

#include <charconv>

namespace rw {

std::int64_t days_from_civil(int y, unsigned m, unsigned d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& year, unsigned& month, unsigned& day) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    day = doy - (153 * mp + 2) / 5 + 1;
    month = mp + (mp < 10 ? 3 : -9);
    year = static_cast<int>(y + (month <= 2));
}

int weekday_index(std::int64_t days) {
    // 1970-01-01 was a Thursday (index 3 with Monday = 0).
    return static_cast<int>(((days % 7) + 7 + 3) % 7);
}

namespace {

bool parse_fixed_uint(std::string_view s, std::size_t pos, std::size_t len, unsigned& out) {
    unsigned v = 0;
    for (std::size_t i = pos; i < pos + len; ++i) {
        const char c = s[i];
        if (c < '0' || c > '9') return false;
        v = v * 10 + static_cast<unsigned>(c - '0');
    }
    out = v;
    return true;
}

}  // namespace

bool parse_iso8601(std::string_view text, Timestamp& out) {
    if (text.size() != 20 || text[4] != '-' || text[7] != '-' || text[10] != 'T' ||
        text[13] != ':' || text[16] != ':' || text[19] != 'Z') {
        return false;
    }
    unsigned y, mo, d, h, mi, s;
    if (!parse_fixed_uint(text, 0, 4, y) || !parse_fixed_uint(text, 5, 2, mo) ||
        !parse_fixed_uint(text, 8, 2, d) || !parse_fixed_uint(text, 11, 2, h) ||
        !parse_fixed_uint(text, 14, 2, mi) || !parse_fixed_uint(text, 17, 2, s)) {
        return false;
    }
    if (mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 || s > 60) return false;
    out = days_from_civil(static_cast<int>(y), mo, d) * 86400 + h * 3600 + mi * 60 + s;
    return true;
}

bool parse_date(std::string_view text, Timestamp& out) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') return false;
    unsigned y, mo, d;
    if (!parse_fixed_uint(text, 0, 4, y) || !parse_fixed_uint(text, 5, 2, mo) ||
        !parse_fixed_uint(text, 8, 2, d)) {
        return false;
    }
    if (mo < 1 || mo > 12 || d < 1 || d > 31) return false;
    out = days_from_civil(static_cast<int>(y), mo, d) * 86400;
    return true;
}

namespace {

void put2(char* p, unsigned v) {
    p[0] = static_cast<char>('0' + v / 10);
    p[1] = static_cast<char>('0' + v % 10);
}

}  // namespace

void format_iso8601(Timestamp ts, char* out) {
    std::int64_t days = ts / 86400;
    std::int64_t sec = ts % 86400;
    if (sec < 0) {
        sec += 86400;
        days -= 1;
    }
    int y;
    unsigned mo, d;
    civil_from_days(days, y, mo, d);
    out[0] = static_cast<char>('0' + (y / 1000) % 10);
    out[1] = static_cast<char>('0' + (y / 100) % 10);
    out[2] = static_cast<char>('0' + (y / 10) % 10);
    out[3] = static_cast<char>('0' + y % 10);
    out[4] = '-';
    put2(out + 5, mo);
    out[7] = '-';
    put2(out + 8, d);
    out[10] = 'T';
    put2(out + 11, static_cast<unsigned>(sec / 3600));
    out[13] = ':';
    put2(out + 14, static_cast<unsigned>((sec / 60) % 60));
    out[16] = ':';
    put2(out + 17, static_cast<unsigned>(sec % 60));
    out[19] = 'Z';
}

std::string format_iso8601(Timestamp ts) {
    char buf[20];
    format_iso8601(ts, buf);
    return std::string(buf, 20);
}

std::string format_date(Timestamp ts) {
    return format_iso8601(ts).substr(0, 10);
}

}  // namespace rw

#include "regimevol/dates.hpp"

#include <cstdio>
#include <stdexcept>

namespace regimevol {

namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }

int parse_int(const std::string& s, std::size_t pos, std::size_t len) {
    int v = 0;
    for (std::size_t i = pos; i < pos + len; ++i) {
        if (i >= s.size() || !is_digit(s[i])) {
            throw std::invalid_argument("bad numeric field in date/time: '" + s + "'");
        }
        v = v * 10 + (s[i] - '0');
    }
    return v;
}

}  // namespace

std::int64_t Date::serial() const {
    // Howard Hinnant's days-from-civil.
    std::int64_t y = year;
    y -= month <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const std::int64_t yoe = y - era * 400;
    const std::int64_t doy = (153 * (month + (month > 2 ? -3 : 9)) + 2) / 5 + day - 1;
    const std::int64_t doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + doe - 719468;
}

Date Date::from_serial(std::int64_t z) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const std::int64_t doe = z - era * 146097;
    const std::int64_t yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y = yoe + era * 400;
    const std::int64_t doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const std::int64_t mp = (5 * doy + 2) / 153;
    const std::int64_t d = doy - (153 * mp + 2) / 5 + 1;
    const std::int64_t m = mp + (mp < 10 ? 3 : -9);
    return Date{static_cast<int>(y + (m <= 2)), static_cast<int>(m), static_cast<int>(d)};
}

std::string Date::to_string() const {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", year, month, day);
    return buf;
}

Date Date::parse(const std::string& text) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
        throw std::invalid_argument("expected YYYY-MM-DD date, got '" + text + "'");
    }
    Date d{parse_int(text, 0, 4), parse_int(text, 5, 2), parse_int(text, 8, 2)};
    if (d.month < 1 || d.month > 12 || d.day < 1 || d.day > 31) {
        throw std::invalid_argument("date out of range: '" + text + "'");
    }
    return d;
}

TimeOfDay TimeOfDay::parse(const std::string& text) {
    if (text.size() != 5 && text.size() != 8) {
        throw std::invalid_argument("expected HH:MM or HH:MM:SS time, got '" + text + "'");
    }
    if (text[2] != ':' || (text.size() == 8 && text[5] != ':')) {
        throw std::invalid_argument("bad time separator in '" + text + "'");
    }
    const int h = parse_int(text, 0, 2);
    const int m = parse_int(text, 3, 2);
    if (h > 23 || m > 59) {
        throw std::invalid_argument("time out of range: '" + text + "'");
    }
    return TimeOfDay{h * 60 + m};
}

Timestamp Timestamp::parse(const std::string& text) {
    if (text.size() < 16 || (text[10] != ' ' && text[10] != 'T')) {
        throw std::invalid_argument("expected 'YYYY-MM-DD HH:MM[:SS]' timestamp, got '" + text + "'");
    }
    return Timestamp{Date::parse(text.substr(0, 10)), TimeOfDay::parse(text.substr(11))};
}

}  // namespace regimevol

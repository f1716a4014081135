#pragma once

#include <compare>
#include <cstdint>
#include <string>

namespace regimevol {

// Calendar date. No timezone handling: all timestamps in the input data are
// exchange-local and only the ordering matters.
struct Date {
    int year = 0;
    int month = 0;
    int day = 0;

    auto operator<=>(const Date&) const = default;

    // Days since 1970-01-01 (civil). Valid for the whole Gregorian range we care about.
    std::int64_t serial() const;

    std::string to_string() const;  // YYYY-MM-DD

    static Date from_serial(std::int64_t days);
    static Date parse(const std::string& text);  // strict YYYY-MM-DD
};

// Minutes since midnight, used for session filtering of intraday bars.
struct TimeOfDay {
    int minutes = 0;

    auto operator<=>(const TimeOfDay&) const = default;

    static TimeOfDay parse(const std::string& text);  // HH:MM or HH:MM:SS
};

// ISO-8601-ish timestamp "YYYY-MM-DD HH:MM[:SS]" or "YYYY-MM-DDTHH:MM[:SS]".
struct Timestamp {
    Date date;
    TimeOfDay time;

    auto operator<=>(const Timestamp&) const = default;

    static Timestamp parse(const std::string& text);
};

}  // namespace regimevol

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "regimevol/dates.hpp"

namespace regimevol::ingest {

struct BarRecord {
    Timestamp timestamp;
    double close = 0.0;  // > 0
};

struct TradingDayBars {
    Date date;
    std::vector<double> closes;  // ordered, all > 0, size >= 2

    int n_returns() const { return static_cast<int>(closes.size()) - 1; }
};

struct CalendarConfig {
    int full_day_returns = 78;                  // N in the RV scaling
    TimeOfDay session_start{9 * 60 + 30};
    TimeOfDay session_end{16 * 60};
    bool include_overnight = false;
};

struct ParsedBars {
    std::vector<TradingDayBars> days;  // sorted by date
    int dropped_days = 0;              // days with < 2 in-session closes
    int dropped_out_of_session = 0;    // bars outside [session_start, session_end]
};

// Bars CSV: header `timestamp,close`, ISO-8601 timestamps, strictly increasing
// within the file. Rows outside the configured session are skipped; days left
// with fewer than two closes are dropped and counted.
ParsedBars parse_bars(const std::string& path, const CalendarConfig& config);

// Daily series CSV: header `date,value`, strictly increasing dates.
struct DailySeries {
    std::vector<Date> dates;
    std::vector<double> values;
};
DailySeries parse_daily(const std::string& path);

// Intraday log returns r_i = ln(close[i+1]/close[i]).
std::vector<double> log_returns(const TradingDayBars& day);

// Same, with the overnight gap from the previous day's last close prepended.
std::vector<double> log_returns_with_overnight(double prev_close, const TradingDayBars& day);

struct AlignedSeries {
    std::vector<Date> dates;  // SPX trading calendar, strictly increasing
    std::vector<double> rv;
    std::vector<double> vix;
    std::vector<double> kurtosis;
    std::vector<double> jump;
    // one mask per feature column, true where the value was imputed
    std::vector<std::uint8_t> vix_imputed;
    std::vector<std::uint8_t> kurtosis_imputed;
    std::vector<std::uint8_t> jump_imputed;
};

// Restricts everything to the RV calendar; feature observations on other dates
// are dropped, gaps on retained dates are linearly interpolated over calendar
// position, endpoint gaps take the nearest available value.
AlignedSeries align(const DailySeries& rv, const DailySeries& vix,
                    const DailySeries& kurtosis, const DailySeries& jump);

}  // namespace regimevol::ingest

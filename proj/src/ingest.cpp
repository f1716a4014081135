#include "regimevol/ingest.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "regimevol/csv.hpp"

namespace regimevol::ingest {

ParsedBars parse_bars(const std::string& path, const CalendarConfig& config) {
    const auto table = csv::read(path, {"timestamp", "close"});
    ParsedBars out;
    Timestamp prev{};
    bool have_prev = false;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        const std::string ctx = path + ": line " + std::to_string(table.line_numbers[i]);
        Timestamp ts;
        try {
            ts = Timestamp::parse(row[0]);
        } catch (const std::exception& e) {
            throw std::runtime_error(ctx + ": " + e.what());
        }
        const double close = csv::parse_double(row[1], ctx);
        if (!(close > 0.0)) {
            throw std::runtime_error(ctx + ": non-positive price " + row[1]);
        }
        if (have_prev && !(prev < ts)) {
            throw std::runtime_error(ctx + ": timestamps not strictly increasing");
        }
        prev = ts;
        have_prev = true;
        if (ts.time < config.session_start || config.session_end < ts.time) {
            ++out.dropped_out_of_session;
            continue;
        }
        if (out.days.empty() || out.days.back().date != ts.date) {
            out.days.push_back(TradingDayBars{ts.date, {}});
        }
        out.days.back().closes.push_back(close);
    }
    // drop days that cannot produce a return
    std::vector<TradingDayBars> kept;
    kept.reserve(out.days.size());
    for (auto& day : out.days) {
        if (day.closes.size() < 2) {
            ++out.dropped_days;
        } else {
            kept.push_back(std::move(day));
        }
    }
    out.days = std::move(kept);
    if (out.days.empty()) {
        throw std::runtime_error(path + ": no complete trading day (need >= 2 in-session closes)");
    }
    return out;
}

DailySeries parse_daily(const std::string& path) {
    const auto table = csv::read(path, {"date", "value"});
    DailySeries out;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const std::string ctx = path + ": line " + std::to_string(table.line_numbers[i]);
        Date d;
        try {
            d = Date::parse(table.rows[i][0]);
        } catch (const std::exception& e) {
            throw std::runtime_error(ctx + ": " + e.what());
        }
        if (!out.dates.empty() && !(out.dates.back() < d)) {
            throw std::runtime_error(ctx + ": dates not strictly increasing");
        }
        out.dates.push_back(d);
        out.values.push_back(csv::parse_double(table.rows[i][1], ctx));
    }
    return out;
}

std::vector<double> log_returns(const TradingDayBars& day) {
    if (day.closes.size() < 2) {
        throw std::invalid_argument("log_returns: need at least 2 closes on " + day.date.to_string());
    }
    std::vector<double> r(day.closes.size() - 1);
    for (std::size_t i = 0; i + 1 < day.closes.size(); ++i) {
        r[i] = std::log(day.closes[i + 1] / day.closes[i]);
    }
    return r;
}

std::vector<double> log_returns_with_overnight(double prev_close, const TradingDayBars& day) {
    if (!(prev_close > 0.0)) {
        throw std::invalid_argument("log_returns_with_overnight: non-positive previous close");
    }
    if (day.closes.empty()) {
        throw std::invalid_argument("log_returns_with_overnight: empty day");
    }
    std::vector<double> r;
    r.reserve(day.closes.size());
    r.push_back(std::log(day.closes.front() / prev_close));
    for (std::size_t i = 0; i + 1 < day.closes.size(); ++i) {
        r.push_back(std::log(day.closes[i + 1] / day.closes[i]));
    }
    return r;
}

namespace {

// Projects `series` onto `calendar`; interior gaps interpolated linearly over
// calendar position, endpoint gaps extended with the nearest value.
void impute_onto(const std::vector<Date>& calendar, const DailySeries& series,
                 const std::string& name, std::vector<double>& values,
                 std::vector<std::uint8_t>& imputed) {
    const std::size_t n = calendar.size();
    values.assign(n, std::numeric_limits<double>::quiet_NaN());
    imputed.assign(n, 1);
    std::size_t j = 0;
    std::size_t present = 0;
    for (std::size_t i = 0; i < n; ++i) {
        while (j < series.dates.size() && series.dates[j] < calendar[i]) ++j;
        if (j < series.dates.size() && series.dates[j] == calendar[i]) {
            values[i] = series.values[j];
            imputed[i] = 0;
            ++present;
        }
    }
    if (present == 0) {
        throw std::runtime_error("align: feature column '" + name + "' has no observation on the trading calendar");
    }
    if (present == n) return;
    // interior interpolation
    std::size_t prev = n;  // last index with an observed value
    for (std::size_t i = 0; i < n; ++i) {
        if (!imputed[i]) {
            if (prev != n && i > prev + 1) {
                for (std::size_t k = prev + 1; k < i; ++k) {
                    const double t = static_cast<double>(k - prev) / static_cast<double>(i - prev);
                    values[k] = values[prev] + t * (values[i] - values[prev]);
                }
            }
            prev = i;
        }
    }
    // endpoint extension
    std::size_t first = 0;
    while (imputed[first]) ++first;
    for (std::size_t i = 0; i < first; ++i) values[i] = values[first];
    std::size_t last = n - 1;
    while (imputed[last]) --last;
    for (std::size_t i = last + 1; i < n; ++i) values[i] = values[last];
}

}  // namespace

AlignedSeries align(const DailySeries& rv, const DailySeries& vix,
                    const DailySeries& kurtosis, const DailySeries& jump) {
    if (rv.dates.empty()) {
        throw std::invalid_argument("align: empty RV series");
    }
    AlignedSeries out;
    out.dates = rv.dates;
    out.rv = rv.values;
    impute_onto(out.dates, vix, "vix", out.vix, out.vix_imputed);
    impute_onto(out.dates, kurtosis, "kurtosis", out.kurtosis, out.kurtosis_imputed);
    impute_onto(out.dates, jump, "jump", out.jump, out.jump_imputed);
    return out;
}

}  // namespace regimevol::ingest

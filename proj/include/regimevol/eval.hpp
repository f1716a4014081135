#pragma once

#include <span>
#include <string>
#include <vector>

#include "regimevol/dates.hpp"
#include "regimevol/forecast.hpp"

namespace regimevol::eval {

double mse(std::span<const double> y_true, std::span<const double> y_pred);

// 100 * mean(|y - yhat| / |y|); throws if any target is zero (the report path
// excludes and counts such rows instead).
double mape(std::span<const double> y_true, std::span<const double> y_pred);

struct PeriodSpec {
    std::string name;
    Date start;
    Date end;  // exclusive
    int horizon = 5;
};

struct ResultGroup {
    std::string model;
    std::string period;
    int n_regimes = 1;
    std::vector<forecast::ForecastRecord> records;
};

struct ReportRow {
    std::string model;
    std::string period;
    double mape = 0.0;
    double mse = 0.0;  // raw, original RV units
    int n_regimes = 1;
    std::size_t n_records = 0;
    std::size_t zero_targets_excluded = 0;  // rows skipped by the MAPE guard
};

struct BacktestReport {
    std::vector<ReportRow> rows;
    std::vector<std::string> files;  // everything written, relative to out_dir
};

// Writes report.csv (MSE scaled by 1e6 as in the tables), metrics_raw.csv, and
// one series_<model>_<period>.csv per group.
BacktestReport report(const std::vector<ResultGroup>& groups, const std::string& out_dir);

}  // namespace regimevol::eval

#include "regimevol/eval.hpp"

#include <cmath>
#include <stdexcept>

#include "regimevol/csv.hpp"

namespace regimevol::eval {

double mse(std::span<const double> y_true, std::span<const double> y_pred) {
    if (y_true.empty() || y_true.size() != y_pred.size()) {
        throw std::invalid_argument("mse: series must be nonempty and of equal length");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const double d = y_true[i] - y_pred[i];
        s += d * d;
    }
    return s / static_cast<double>(y_true.size());
}

double mape(std::span<const double> y_true, std::span<const double> y_pred) {
    if (y_true.empty() || y_true.size() != y_pred.size()) {
        throw std::invalid_argument("mape: series must be nonempty and of equal length");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        if (y_true[i] == 0.0) {
            throw std::invalid_argument("mape: zero target at position " + std::to_string(i));
        }
        s += std::abs(y_true[i] - y_pred[i]) / std::abs(y_true[i]);
    }
    return 100.0 * s / static_cast<double>(y_true.size());
}

BacktestReport report(const std::vector<ResultGroup>& groups, const std::string& out_dir) {
    BacktestReport rep;
    csv::Writer table(out_dir + "/report.csv");
    table.row({"model", "period", "mape", "mse_x1e6", "n_regimes", "n_records"});
    csv::Writer raw(out_dir + "/metrics_raw.csv");
    raw.row({"model", "period", "mape", "mse", "n_records", "zero_targets_excluded"});

    for (const auto& g : groups) {
        if (g.records.empty()) {
            throw std::runtime_error("report: empty record group for model '" + g.model +
                                     "', period '" + g.period + "'");
        }
        std::vector<double> yt, yp, yt_nz, yp_nz;
        std::size_t zeros = 0;
        for (const auto& r : g.records) {
            yt.push_back(r.y_true);
            yp.push_back(r.y_pred);
            if (r.y_true == 0.0) {
                ++zeros;
            } else {
                yt_nz.push_back(r.y_true);
                yp_nz.push_back(r.y_pred);
            }
        }
        ReportRow row;
        row.model = g.model;
        row.period = g.period;
        row.n_regimes = g.n_regimes;
        row.n_records = g.records.size();
        row.zero_targets_excluded = zeros;
        row.mse = mse(yt, yp);
        if (yt_nz.empty()) {
            throw std::runtime_error("report: all targets zero for model '" + g.model +
                                     "', period '" + g.period + "', MAPE undefined");
        }
        row.mape = mape(yt_nz, yp_nz);

        table.row({row.model, row.period, csv::format_double(row.mape),
                   csv::format_double(row.mse * 1e6), std::to_string(row.n_regimes),
                   std::to_string(row.n_records)});
        raw.row({row.model, row.period, csv::format_double(row.mape), csv::format_double(row.mse),
                 std::to_string(row.n_records), std::to_string(zeros)});

        const std::string series_name = "series_" + g.model + "_" + g.period + ".csv";
        csv::Writer series(out_dir + "/" + series_name);
        series.row({"date", "y_true", "y_pred"});
        for (const auto& r : g.records) {
            series.row({r.date.to_string(), csv::format_double(r.y_true),
                        csv::format_double(r.y_pred)});
        }
        series.close();
        rep.files.push_back(series_name);
        rep.rows.push_back(std::move(row));
    }
    table.close();
    raw.close();
    rep.files.push_back("report.csv");
    rep.files.push_back("metrics_raw.csv");
    return rep;
}

}  // namespace regimevol::eval

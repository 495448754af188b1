#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "leadlag/panel.hpp"
#include "leadlag/shaker.hpp"

namespace leadlag {

/// Strictly positive trend values (index levels). Positivity keeps the
/// symmetric percentage denominator well defined.
struct TrendSeries {
    std::vector<double> values;
    std::string label;

    TrendSeries() = default;
    TrendSeries(std::vector<double> v, std::string l);
};

struct BacktestConfig {
    int p1 = 1;                    // shaker count
    int p2 = 1;                    // pool size per shaker
    double wp = 0.01;              // trigger threshold on 1-day return
    double q = 0.5;                // cash fraction per buy
    double initial_cash = 10000.0;
    double transaction_cost = 0.0; // fraction of trade value
    bool sell_fraction_q = false;  // default liquidates the whole pool

    void validate() const;
};

struct PortfolioState {
    double cash = 0.0;
    std::map<Eigen::Index, double> holdings; // entity -> share count
    std::vector<double> equity_curve;        // total value per day
};

struct BacktestDay {
    std::string date;
    double cash = 0.0;
    double holdings_value = 0.0;
    double total_value = 0.0;
    int action_count = 0;
};

struct BacktestResult {
    PortfolioState state;
    std::vector<BacktestDay> log;
};

/// One-step trend monitor: m_{t+r} = m_t * sum_u ratio_u f_u / sum_u f_u,
/// where ratio_u = price_now[u] / price_prev[u] over the report's top
/// shakers. Throws ZeroDenominatorError when all selected f are zero or a
/// prior price is zero.
double monitor_trend(double m_t, const Eigen::VectorXd& prices_prev,
                     const Eigen::VectorXd& prices_now, const ShakerReport& shakers);

/// Symmetric mean absolute percentage error, in [0, 2].
double smape(const TrendSeries& predicted, const TrendSeries& truth);

/// Pairs each of the top p1 shakers with the p2 entities it influences most
/// (largest W(u, j), j != u; ties to the lower entity index). Returns
/// p1 * p2 pairs. Throws InsufficientEntitiesError when p2 >= N or p1 > N.
std::vector<std::pair<Eigen::Index, Eigen::Index>> screening(
    const ShakerReport& report, const Eigen::MatrixXd& w, const BacktestConfig& cfg);

/// Long-only threshold backtest over main-view prices (L x N, strictly
/// positive). Day 0 only records the initial state. Each later day, shakers
/// are processed in ranking order: a 1-day return >= wp buys the shaker's
/// pool with q of the remaining cash split equally, anything else liquidates
/// the pool at that day's prices. Fractional shares; cash never goes
/// negative.
BacktestResult run_backtest(const Eigen::MatrixXd& prices,
                            const std::vector<std::string>& dates,
                            const std::vector<std::pair<Eigen::Index, Eigen::Index>>& pairs,
                            const BacktestConfig& cfg);

} // namespace leadlag

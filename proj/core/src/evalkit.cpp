#include "leadlag/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "leadlag/errors.hpp"

namespace leadlag {

TrendSeries::TrendSeries(std::vector<double> v, std::string l)
    : values(std::move(v)), label(std::move(l)) {
    for (const double x : values) {
        if (!(x > 0.0) || !std::isfinite(x)) {
            throw DataError("trend series '" + label + "' must be strictly positive and finite");
        }
    }
}

void BacktestConfig::validate() const {
    if (p1 < 1 || p2 < 1) {
        throw ConfigError("backtest: p1 and p2 must be >= 1");
    }
    if (!(q > 0.0) || q > 1.0) {
        throw ConfigError("backtest: q must lie in (0, 1]");
    }
    if (!(wp > 0.0)) {
        throw ConfigError("backtest: wp must be > 0");
    }
    if (!(initial_cash > 0.0)) {
        throw ConfigError("backtest: initial_cash must be > 0");
    }
    if (transaction_cost < 0.0 || transaction_cost >= 1.0) {
        throw ConfigError("backtest: transaction_cost must lie in [0, 1)");
    }
}

double monitor_trend(double m_t, const Eigen::VectorXd& prices_prev,
                     const Eigen::VectorXd& prices_now, const ShakerReport& shakers) {
    if (!(m_t > 0.0)) {
        throw DataError("monitor_trend: current trend value must be positive");
    }
    if (prices_prev.size() != prices_now.size()) {
        throw LengthMismatchError("monitor_trend: price vectors differ in length");
    }
    double numerator = 0.0;
    double weight_sum = 0.0;
    const int count = std::min<int>(shakers.top, static_cast<int>(shakers.ranking.size()));
    for (int i = 0; i < count; ++i) {
        const Eigen::Index u = shakers.ranking[static_cast<std::size_t>(i)];
        if (u >= prices_prev.size()) {
            throw ShapeMismatchError("monitor_trend: shaker index outside price vector");
        }
        const double f_u = shakers.f(u);
        if (f_u == 0.0) {
            continue;
        }
        if (prices_prev(u) == 0.0) {
            throw ZeroDenominatorError("monitor_trend: zero prior price for a shaker");
        }
        numerator += (prices_now(u) / prices_prev(u)) * f_u;
        weight_sum += f_u;
    }
    if (weight_sum == 0.0) {
        throw ZeroDenominatorError("monitor_trend: all shaker strengths are zero");
    }
    return m_t * numerator / weight_sum;
}

double smape(const TrendSeries& predicted, const TrendSeries& truth) {
    if (predicted.values.size() != truth.values.size()) {
        throw LengthMismatchError("smape: series lengths differ");
    }
    if (predicted.values.empty()) {
        throw LengthMismatchError("smape: series are empty");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < predicted.values.size(); ++i) {
        const double a = predicted.values[i];
        const double b = truth.values[i];
        sum += std::abs(a - b) / ((a + b) / 2.0);
    }
    return sum / static_cast<double>(predicted.values.size());
}

std::vector<std::pair<Eigen::Index, Eigen::Index>> screening(const ShakerReport& report,
                                                             const Eigen::MatrixXd& w,
                                                             const BacktestConfig& cfg) {
    cfg.validate();
    const Eigen::Index n = w.rows();
    if (w.cols() != n) {
        throw ShapeMismatchError("screening: influence matrix must be square");
    }
    if (cfg.p2 >= n) {
        throw InsufficientEntitiesError("screening: p2 must be smaller than the entity count");
    }
    if (cfg.p1 > static_cast<int>(n)) {
        throw InsufficientEntitiesError("screening: p1 exceeds the entity count");
    }

    std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
    pairs.reserve(static_cast<std::size_t>(cfg.p1) * static_cast<std::size_t>(cfg.p2));
    for (int i = 0; i < cfg.p1; ++i) {
        const Eigen::Index u = report.ranking[static_cast<std::size_t>(i)];
        std::vector<Eigen::Index> candidates;
        candidates.reserve(static_cast<std::size_t>(n - 1));
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j != u) {
                candidates.push_back(j);
            }
        }
        std::stable_sort(candidates.begin(), candidates.end(),
                         [&](Eigen::Index lhs, Eigen::Index rhs) {
                             if (w(u, lhs) != w(u, rhs)) {
                                 return w(u, lhs) > w(u, rhs);
                             }
                             return lhs < rhs;
                         });
        for (int j = 0; j < cfg.p2; ++j) {
            pairs.emplace_back(u, candidates[static_cast<std::size_t>(j)]);
        }
    }
    return pairs;
}

BacktestResult run_backtest(const Eigen::MatrixXd& prices, const std::vector<std::string>& dates,
                            const std::vector<std::pair<Eigen::Index, Eigen::Index>>& pairs,
                            const BacktestConfig& cfg) {
    cfg.validate();
    const Eigen::Index days = prices.rows();
    const Eigen::Index n = prices.cols();
    if (days < 1) {
        throw DataError("run_backtest: need at least one day of prices");
    }
    if (static_cast<Eigen::Index>(dates.size()) != days) {
        throw LengthMismatchError("run_backtest: dates and price rows differ");
    }
    if (!(prices.minCoeff() > 0.0)) {
        throw DataError("run_backtest: prices must be strictly positive");
    }
    for (const auto& [shaker, entity] : pairs) {
        if (shaker < 0 || shaker >= n || entity < 0 || entity >= n) {
            throw ShapeMismatchError("run_backtest: pair index outside price matrix");
        }
    }

    // Group pool entities per shaker, preserving the ranking order the pairs
    // arrived in.
    std::vector<std::pair<Eigen::Index, std::vector<Eigen::Index>>> pools;
    for (const auto& [shaker, entity] : pairs) {
        auto it = std::find_if(pools.begin(), pools.end(),
                               [&](const auto& p) { return p.first == shaker; });
        if (it == pools.end()) {
            pools.push_back({shaker, {entity}});
        } else {
            it->second.push_back(entity);
        }
    }

    BacktestResult result;
    result.state.cash = cfg.initial_cash;
    auto& holdings = result.state.holdings;

    auto holdings_value_at = [&](Eigen::Index t) {
        double value = 0.0;
        for (const auto& [entity, shares] : holdings) {
            value += shares * prices(t, entity);
        }
        return value;
    };

    auto log_day = [&](Eigen::Index t, int actions) {
        BacktestDay day;
        day.date = dates[static_cast<std::size_t>(t)];
        day.cash = result.state.cash;
        day.holdings_value = holdings_value_at(t);
        day.total_value = day.cash + day.holdings_value;
        day.action_count = actions;
        result.log.push_back(day);
        result.state.equity_curve.push_back(day.total_value);
    };

    // No prior price on the first day; only the starting state is recorded.
    log_day(0, 0);

    for (Eigen::Index t = 1; t < days; ++t) {
        int actions = 0;
        for (const auto& [shaker, pool] : pools) {
            const double ret = prices(t, shaker) / prices(t - 1, shaker) - 1.0;
            if (ret >= cfg.wp) {
                const double spend = cfg.q * result.state.cash;
                if (spend > 0.0 && !pool.empty()) {
                    const double invested = spend * (1.0 - cfg.transaction_cost);
                    const double per_entity = invested / static_cast<double>(pool.size());
                    for (const Eigen::Index entity : pool) {
                        holdings[entity] += per_entity / prices(t, entity);
                    }
                    result.state.cash -= spend;
                    ++actions;
                }
            } else {
                double proceeds = 0.0;
                const double fraction = cfg.sell_fraction_q ? cfg.q : 1.0;
                for (const Eigen::Index entity : pool) {
                    auto it = holdings.find(entity);
                    if (it == holdings.end() || it->second <= 0.0) {
                        continue;
                    }
                    const double sold = it->second * fraction;
                    proceeds += sold * prices(t, entity);
                    it->second -= sold;
                    if (it->second <= 0.0) {
                        holdings.erase(it);
                    }
                }
                if (proceeds > 0.0) {
                    result.state.cash += proceeds * (1.0 - cfg.transaction_cost);
                    ++actions;
                }
            }
        }
        if (result.state.cash < 0.0) {
            throw SolverError("run_backtest: cash went negative (accounting bug)");
        }
        log_day(t, actions);
    }
    return result;
}

} // namespace leadlag

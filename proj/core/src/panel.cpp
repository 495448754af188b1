#include "leadlag/panel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include "leadlag/errors.hpp"

namespace leadlag {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) {
        return {};
    }
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) {
        fields.push_back(trim(field));
    }
    if (!line.empty() && line.back() == ',') {
        fields.emplace_back();
    }
    return fields;
}

double parse_value(const std::string& text) {
    double value = 0.0;
    const char* begin = text.data();
    const char* end = begin + text.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end || text.empty()) {
        throw NonNumericValueError("ingest_csv: non-numeric value '" + text + "'");
    }
    return value;
}

bool parse_tick(const std::string& text, long long& out) {
    const char* begin = text.data();
    const char* end = begin + text.size();
    auto [ptr, ec] = std::from_chars(begin, end, out);
    return ec == std::errc() && ptr == end && !text.empty();
}

std::string format_value(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

} // namespace

Eigen::Index PanelSeries::view_index(const std::string& view) const {
    const auto it = std::find(views.begin(), views.end(), view);
    if (it == views.end()) {
        throw UnknownViewError("unknown view '" + view + "'");
    }
    return static_cast<Eigen::Index>(it - views.begin());
}

Eigen::Index PanelSeries::entity_index(const std::string& entity) const {
    const auto it = std::find(entities.begin(), entities.end(), entity);
    return it == entities.end() ? -1 : static_cast<Eigen::Index>(it - entities.begin());
}

Eigen::Index PanelSeries::timestamp_index(const std::string& label) const {
    const auto it = std::find(timestamps.begin(), timestamps.end(), label);
    return it == timestamps.end() ? -1 : static_cast<Eigen::Index>(it - timestamps.begin());
}

void PanelSeries::validate() const {
    auto check_unique_sorted = [](const std::vector<std::string>& ids, const char* what,
                                  bool require_sorted) {
        std::set<std::string> seen(ids.begin(), ids.end());
        if (seen.size() != ids.size()) {
            throw DataError(std::string("panel: duplicate ") + what + " identifier");
        }
        if (require_sorted && !std::is_sorted(ids.begin(), ids.end())) {
            throw DataError(std::string("panel: ") + what + " identifiers not sorted");
        }
    };
    check_unique_sorted(views, "view", true);
    check_unique_sorted(entities, "entity", true);
    check_unique_sorted(timestamps, "timestamp", false);
    if (values.size() != views.size()) {
        throw DataError("panel: one value matrix per view required");
    }
    for (const auto& m : values) {
        if (m.rows() != num_timestamps() || m.cols() != num_entities()) {
            throw DataError("panel: value matrix shape mismatch");
        }
        if (!m.allFinite()) {
            throw DataError("panel: values contain NaN or Inf");
        }
    }
}

PanelSeries ingest_csv(const std::string& path, const CsvSchema& schema) {
    std::ifstream file(path);
    if (!file.is_open()) {
        throw DataError("ingest_csv: cannot open '" + path + "'");
    }

    std::string line;
    if (!std::getline(file, line)) {
        throw DataError("ingest_csv: empty file '" + path + "'");
    }
    const auto header = split_line(line);
    auto column_of = [&](const std::string& name) -> std::size_t {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) {
            throw DataError("ingest_csv: missing column '" + name + "' in header");
        }
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t c_ts = column_of(schema.timestamp_column);
    const std::size_t c_entity = column_of(schema.entity_column);
    const std::size_t c_view = column_of(schema.view_column);
    const std::size_t c_value = column_of(schema.value_column);
    const std::size_t needed = std::max({c_ts, c_entity, c_view, c_value}) + 1;

    struct Cell {
        std::string timestamp;
        std::string entity;
        std::string view;
        double value;
    };
    std::vector<Cell> cells;
    std::set<std::string> view_set, entity_set, ts_set;

    std::size_t line_no = 1;
    while (std::getline(file, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        const auto fields = split_line(line);
        if (fields.size() < needed) {
            throw DataError("ingest_csv: line " + std::to_string(line_no) +
                            " has too few columns");
        }
        Cell cell{fields[c_ts], fields[c_entity], fields[c_view], 0.0};
        cell.value = parse_value(fields[c_value]);
        view_set.insert(cell.view);
        entity_set.insert(cell.entity);
        ts_set.insert(cell.timestamp);
        cells.push_back(std::move(cell));
    }
    if (cells.empty()) {
        throw DataError("ingest_csv: no data rows in '" + path + "'");
    }

    PanelSeries panel;
    panel.views.assign(view_set.begin(), view_set.end());
    panel.entities.assign(entity_set.begin(), entity_set.end());
    panel.timestamps.assign(ts_set.begin(), ts_set.end());

    // Integer ticks sort numerically, anything else lexicographically
    // (ISO-8601 labels are already in order either way).
    bool all_ticks = true;
    std::vector<long long> ticks(panel.timestamps.size());
    for (std::size_t i = 0; i < panel.timestamps.size(); ++i) {
        if (!parse_tick(panel.timestamps[i], ticks[i])) {
            all_ticks = false;
            break;
        }
    }
    if (all_ticks) {
        std::sort(panel.timestamps.begin(), panel.timestamps.end(),
                  [](const std::string& a, const std::string& b) {
                      long long ta = 0, tb = 0;
                      parse_tick(a, ta);
                      parse_tick(b, tb);
                      return ta < tb;
                  });
    }

    std::unordered_map<std::string, Eigen::Index> ts_idx, entity_idx, view_idx;
    for (std::size_t i = 0; i < panel.timestamps.size(); ++i) {
        ts_idx[panel.timestamps[i]] = static_cast<Eigen::Index>(i);
    }
    for (std::size_t i = 0; i < panel.entities.size(); ++i) {
        entity_idx[panel.entities[i]] = static_cast<Eigen::Index>(i);
    }
    for (std::size_t i = 0; i < panel.views.size(); ++i) {
        view_idx[panel.views[i]] = static_cast<Eigen::Index>(i);
    }

    const Eigen::Index n_ts = panel.num_timestamps();
    const Eigen::Index n_ent = panel.num_entities();
    std::vector<Eigen::MatrixXd> filled(panel.views.size());
    std::vector<Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>> present(panel.views.size());
    for (auto& m : filled) {
        m = Eigen::MatrixXd::Zero(n_ts, n_ent);
    }
    for (auto& p : present) {
        p.setConstant(n_ts, n_ent, false);
    }

    for (const auto& cell : cells) {
        const Eigen::Index v = view_idx[cell.view];
        const Eigen::Index t = ts_idx[cell.timestamp];
        const Eigen::Index e = entity_idx[cell.entity];
        auto& seen = present[static_cast<std::size_t>(v)](t, e);
        if (seen) {
            throw DuplicateCellError("ingest_csv: duplicate cell (" + cell.timestamp + ", " +
                                     cell.entity + ", " + cell.view + ")");
        }
        seen = true;
        filled[static_cast<std::size_t>(v)](t, e) = cell.value;
    }

    for (std::size_t v = 0; v < panel.views.size(); ++v) {
        for (Eigen::Index e = 0; e < n_ent; ++e) {
            for (Eigen::Index t = 0; t < n_ts; ++t) {
                if (present[v](t, e)) {
                    continue;
                }
                if (schema.fill == FillPolicy::ForwardFill && t > 0) {
                    filled[v](t, e) = filled[v](t - 1, e);
                    present[v](t, e) = true;
                } else {
                    throw MissingCellError("ingest_csv: missing cell (" + panel.timestamps[t] +
                                           ", " + panel.entities[e] + ", " + panel.views[v] +
                                           ")");
                }
            }
        }
    }

    if (schema.transform == ValueTransform::Raw) {
        panel.values = std::move(filled);
        panel.validate();
        return panel;
    }

    if (n_ts < 2) {
        throw DataError("ingest_csv: return transform needs at least 2 timestamps");
    }
    std::vector<Eigen::MatrixXd> transformed(panel.views.size());
    for (std::size_t v = 0; v < panel.views.size(); ++v) {
        transformed[v].resize(n_ts - 1, n_ent);
        for (Eigen::Index e = 0; e < n_ent; ++e) {
            for (Eigen::Index t = 1; t < n_ts; ++t) {
                const double prev = filled[v](t - 1, e);
                const double cur = filled[v](t, e);
                if (schema.transform == ValueTransform::SimpleReturn) {
                    if (prev == 0.0) {
                        throw DataError("ingest_csv: zero price before return at (" +
                                        panel.timestamps[t] + ", " + panel.entities[e] + ")");
                    }
                    transformed[v](t - 1, e) = cur / prev - 1.0;
                } else {
                    if (prev <= 0.0 || cur <= 0.0) {
                        throw DataError("ingest_csv: non-positive price before log return at (" +
                                        panel.timestamps[t] + ", " + panel.entities[e] + ")");
                    }
                    transformed[v](t - 1, e) = std::log(cur / prev);
                }
            }
        }
    }
    panel.timestamps.erase(panel.timestamps.begin());
    panel.values = std::move(transformed);
    panel.validate();
    return panel;
}

void export_csv(const PanelSeries& panel, const std::string& path) {
    std::ofstream file(path, std::ios::binary);
    if (!file.is_open()) {
        throw DataError("export_csv: cannot open '" + path + "' for writing");
    }
    file << "timestamp,entity,view,value\n";
    for (Eigen::Index t = 0; t < panel.num_timestamps(); ++t) {
        for (Eigen::Index e = 0; e < panel.num_entities(); ++e) {
            for (Eigen::Index v = 0; v < panel.num_views(); ++v) {
                file << panel.timestamps[static_cast<std::size_t>(t)] << ','
                     << panel.entities[static_cast<std::size_t>(e)] << ','
                     << panel.views[static_cast<std::size_t>(v)] << ','
                     << format_value(panel.value(v, t, e)) << '\n';
            }
        }
    }
    if (!file) {
        throw DataError("export_csv: write failed for '" + path + "'");
    }
}

PanelSeries standardize_columns(const PanelSeries& panel) {
    PanelSeries out = panel;
    const double rows = static_cast<double>(panel.num_timestamps());
    for (auto& m : out.values) {
        for (Eigen::Index e = 0; e < m.cols(); ++e) {
            const double mean = m.col(e).mean();
            m.col(e).array() -= mean;
            const double sd = std::sqrt(m.col(e).squaredNorm() / rows);
            if (sd > 0.0) {
                m.col(e) /= sd;
            }
        }
    }
    return out;
}

PanelSeries slice_window(const PanelSeries& panel, Eigen::Index begin, Eigen::Index end) {
    if (begin < 0 || end >= panel.num_timestamps() || begin > end) {
        throw ConfigError("slice_window: window out of range");
    }
    PanelSeries out;
    out.views = panel.views;
    out.entities = panel.entities;
    out.timestamps.assign(panel.timestamps.begin() + begin, panel.timestamps.begin() + end + 1);
    out.values.reserve(panel.values.size());
    for (const auto& m : panel.values) {
        out.values.push_back(m.middleRows(begin, end - begin + 1));
    }
    return out;
}

LagPair make_lag_pair(const PanelSeries& panel, const std::string& view, Eigen::Index begin,
                      Eigen::Index end) {
    const Eigen::Index v = panel.view_index(view);
    if (begin < 0 || end >= panel.num_timestamps() || begin > end) {
        throw ConfigError("make_lag_pair: window out of range");
    }
    const Eigen::Index window = end - begin + 1;
    if (window < 3) {
        throw WindowTooShortError("make_lag_pair: window needs at least 3 timestamps, got " +
                                  std::to_string(window));
    }
    const Eigen::Index s = window - 1;
    LagPair pair;
    pair.view = view;
    pair.x = panel.values[static_cast<std::size_t>(v)].middleRows(begin, s);
    pair.y = panel.values[static_cast<std::size_t>(v)].middleRows(begin + 1, s);
    return pair;
}

LagPair make_lag_pair(const PanelSeries& panel, const std::string& view,
                      const std::string& begin_label, const std::string& end_label) {
    const Eigen::Index begin = panel.timestamp_index(begin_label);
    if (begin < 0) {
        throw ConfigError("make_lag_pair: unknown timestamp '" + begin_label + "'");
    }
    const Eigen::Index end = panel.timestamp_index(end_label);
    if (end < 0) {
        throw ConfigError("make_lag_pair: unknown timestamp '" + end_label + "'");
    }
    return make_lag_pair(panel, view, begin, end);
}

} // namespace leadlag

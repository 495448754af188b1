#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace leadlag {

/// Aligned multi-view panel: one L x N value matrix per view, rows indexed
/// by timestamp and columns by entity. Index lists are duplicate-free,
/// entities and views sorted lexicographically, timestamps strictly
/// increasing. Immutable after construction; safe to share across threads.
struct PanelSeries {
    std::vector<std::string> views;
    std::vector<std::string> entities;
    std::vector<std::string> timestamps;
    std::vector<Eigen::MatrixXd> values; // values[v] is L x N

    Eigen::Index num_views() const { return static_cast<Eigen::Index>(views.size()); }
    Eigen::Index num_entities() const { return static_cast<Eigen::Index>(entities.size()); }
    Eigen::Index num_timestamps() const { return static_cast<Eigen::Index>(timestamps.size()); }

    /// Index of a view id; throws UnknownViewError if absent.
    Eigen::Index view_index(const std::string& view) const;
    /// Index of an entity id, or -1 if absent.
    Eigen::Index entity_index(const std::string& entity) const;
    /// Index of a timestamp label, or -1 if absent.
    Eigen::Index timestamp_index(const std::string& label) const;

    double value(Eigen::Index view, Eigen::Index t, Eigen::Index entity) const {
        return values[static_cast<std::size_t>(view)](t, entity);
    }

    /// Validates the invariants above; throws DataError on violation.
    void validate() const;
};

/// One-step lag pair for a single view: Y row i is the panel row one step
/// after X row i.
struct LagPair {
    Eigen::MatrixXd x; // S x N
    Eigen::MatrixXd y; // S x N
    std::string view;
};

enum class ValueTransform { Raw, SimpleReturn, LogReturn };
enum class FillPolicy { Reject, ForwardFill };

/// Column mapping and ingest policies for the long-format CSV
/// `timestamp,entity,view,value`.
struct CsvSchema {
    std::string timestamp_column = "timestamp";
    std::string entity_column = "entity";
    std::string view_column = "view";
    std::string value_column = "value";
    ValueTransform transform = ValueTransform::Raw;
    FillPolicy fill = FillPolicy::Reject;
};

/// Reads a long-format CSV into a dense, aligned panel. Entities and views
/// are sorted lexicographically; timestamps sort numerically when every
/// label parses as an integer tick, lexicographically otherwise (ISO-8601).
/// Throws MissingCellError, DuplicateCellError, NonNumericValueError.
PanelSeries ingest_csv(const std::string& path, const CsvSchema& schema = {});

/// Writes the mirror long-format CSV, rows ordered (timestamp, entity, view).
/// Values use shortest round-trip formatting so re-ingesting reproduces the
/// tensor bit-exactly.
void export_csv(const PanelSeries& panel, const std::string& path);

/// Z-scores every (view, entity) series over all rows. Constant series are
/// centered and left at zero.
PanelSeries standardize_columns(const PanelSeries& panel);

/// Restricts the panel to timestamp rows [begin, end] inclusive.
PanelSeries slice_window(const PanelSeries& panel, Eigen::Index begin, Eigen::Index end);

/// Builds the lag pair for one view over the inclusive timestamp-index
/// window [begin, end]; S = end - begin. The window must contain at least
/// three timestamps. Throws WindowTooShortError, UnknownViewError.
LagPair make_lag_pair(const PanelSeries& panel, const std::string& view,
                      Eigen::Index begin, Eigen::Index end);

/// Overload resolving window bounds from timestamp labels.
LagPair make_lag_pair(const PanelSeries& panel, const std::string& view,
                      const std::string& begin_label, const std::string& end_label);

} // namespace leadlag

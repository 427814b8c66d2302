#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mfagl/csv.hpp"
#include "mfagl/date.hpp"
#include "mfagl/error.hpp"
#include "mfagl/regions.hpp"

namespace mfagl {

/// hierarchy.csv: small_area_id,large_area_id[,weight]. Weight defaults to 1.
inline RegionHierarchy load_hierarchy(const std::string& path) {
    const csv::Table table =
        csv::Table::read(path, {"small_area_id", "large_area_id", "weight"},
                         std::vector<std::string>{"small_area_id", "large_area_id"});
    std::map<AreaId, AreaId> parent;
    std::map<AreaId, double> weight;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        const std::string where = path + " row " + std::to_string(i + 2);
        if (row[0].empty() || row[1].empty())
            throw IoError(where + ": empty area id");
        if (parent.count(row[0]))
            throw IoError(where + ": duplicate small area '" + row[0] + "'");
        parent[row[0]] = row[1];
        if (row.size() == 3 && !row[2].empty()) {
            const double w = csv::parse_double(row[2], where + " weight");
            if (!(w >= 0.0 && w <= 1.0))
                throw IoError(where + ": weight " + row[2] + " outside [0,1]");
            weight[row[0]] = w;
        }
    }
    return RegionHierarchy(std::move(parent), std::move(weight));
}

inline void write_hierarchy(const std::string& path, const RegionHierarchy& hierarchy) {
    csv::Writer out(path, {"small_area_id", "large_area_id", "weight"});
    for (const auto& [q, p] : hierarchy.parent_map())
        out.row({q, p, csv::format_double(hierarchy.weight(q))});
    out.close();
}

/// labels.csv: period,large_area_id,value with period as YYYY-MM.
inline MixedFrequencyPanel::LabelMap load_labels(const std::string& path) {
    const csv::Table table = csv::Table::read(path, {"period", "large_area_id", "value"});
    MixedFrequencyPanel::LabelMap labels;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        const std::string where = path + " row " + std::to_string(i + 2);
        const Period period = Period::parse(row[0]);
        const auto key = std::make_pair(row[1], period);
        if (labels.count(key))
            throw IoError(where + ": duplicate label for (" + row[1] + ", " + row[0] + ")");
        labels[key] = csv::parse_double(row[2], where + " value");
    }
    return labels;
}

inline void write_labels(const std::string& path, const MixedFrequencyPanel::LabelMap& labels) {
    csv::Writer out(path, {"period", "large_area_id", "value"});
    for (const auto& [key, value] : labels)
        out.row({key.second.to_string(), key.first, csv::format_double(value)});
    out.close();
}

/// features.csv: date,small_area_id,visit_count with non-negative counts.
inline MixedFrequencyPanel::FeatureMap load_features(const std::string& path) {
    const csv::Table table = csv::Table::read(path, {"date", "small_area_id", "visit_count"});
    MixedFrequencyPanel::FeatureMap features;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        const std::string where = path + " row " + std::to_string(i + 2);
        const Date date = Date::parse(row[0]);
        const double value = csv::parse_double(row[2], where + " visit_count");
        if (value < 0.0)
            throw IoError(where + ": negative visit_count " + row[2]);
        const auto key = std::make_pair(row[1], date);
        if (features.count(key))
            throw IoError(where + ": duplicate feature for (" + row[1] + ", " + row[0] + ")");
        features[key] = value;
    }
    return features;
}

inline void write_features(const std::string& path,
                           const MixedFrequencyPanel::FeatureMap& features) {
    csv::Writer out(path, {"date", "small_area_id", "visit_count"});
    // Keyed by (area, date); emit date-major to keep files diff-friendly.
    std::vector<std::pair<std::pair<Date, AreaId>, double>> rows;
    rows.reserve(features.size());
    for (const auto& [key, value] : features)
        rows.push_back({{key.second, key.first}, value});
    std::sort(rows.begin(), rows.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [key, value] : rows)
        out.row({key.first.to_string(), key.second, csv::format_double(value)});
    out.close();
}

/// Assembles a panel from the three input files. The calendar covers every
/// feature date and every labeled period, day by day.
inline MixedFrequencyPanel load_panel(const std::string& hierarchy_path,
                                      const std::string& labels_path,
                                      const std::string& features_path) {
    RegionHierarchy hierarchy = load_hierarchy(hierarchy_path);
    MixedFrequencyPanel::LabelMap labels = load_labels(labels_path);
    MixedFrequencyPanel::FeatureMap features = load_features(features_path);
    std::vector<Date> dates;
    for (const auto& [key, value] : features) dates.push_back(key.second);
    std::vector<Period> periods;
    for (const auto& [key, value] : labels) periods.push_back(key.second);
    FrequencyCalendar calendar = FrequencyCalendar::covering(dates, periods);
    return MixedFrequencyPanel(std::move(hierarchy), std::move(calendar), std::move(features),
                               std::move(labels));
}

} // namespace mfagl

#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "mfagl/csv.hpp"
#include "mfagl/date.hpp"
#include "mfagl/error.hpp"

namespace mfagl::geo {

inline constexpr double kEarthRadiusM = 6'371'000.0;

struct GpsPoint {
    Timestamp t = 0;
    double lat = 0.0;
    double lon = 0.0;
};

struct GpsTrajectory {
    std::string user;
    std::vector<GpsPoint> points; // strictly increasing timestamps
};

inline void validate_trajectory(const GpsTrajectory& traj) {
    for (std::size_t i = 0; i < traj.points.size(); ++i) {
        const GpsPoint& p = traj.points[i];
        if (!(p.lat >= -90.0 && p.lat <= 90.0) || !(p.lon >= -180.0 && p.lon <= 180.0))
            throw InvalidArgument("user '" + traj.user + "' point " + std::to_string(i) +
                                  " has coordinates outside the valid range");
        if (i > 0 && p.t <= traj.points[i - 1].t)
            throw InvalidArgument("user '" + traj.user + "' timestamps are not strictly increasing at point " +
                                  std::to_string(i));
    }
}

struct Poi {
    std::string office_id;
    double lat = 0.0;
    double lon = 0.0;
    double radius_m = 0.0; // building radius, > 0
};

struct StayPoint {
    double lat = 0.0;
    double lon = 0.0;
    Timestamp start = 0;
    Timestamp end = 0;
    int count = 0;
};

/// Great-circle distance in meters.
inline double haversine(double lat1, double lon1, double lat2, double lon2) {
    const double rad = std::numbers::pi / 180.0;
    const double dphi = (lat2 - lat1) * rad;
    const double dlambda = (lon2 - lon1) * rad;
    const double s1 = std::sin(dphi / 2.0);
    const double s2 = std::sin(dlambda / 2.0);
    const double a = s1 * s1 + std::cos(lat1 * rad) * std::cos(lat2 * rad) * s2 * s2;
    return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(a)));
}

inline int count_within_radius(const GpsTrajectory& traj, const Poi& poi, double radius_m) {
    if (!(radius_m > 0.0)) throw InvalidArgument("radius must be positive");
    int n = 0;
    for (const GpsPoint& p : traj.points)
        if (haversine(p.lat, p.lon, poi.lat, poi.lon) <= radius_m) ++n;
    return n;
}

/// Anchor-based stay-point extraction: a maximal run of points within
/// dist_threshold_m of its first point, lasting at least time_threshold_s,
/// becomes one stay point at the run's centroid.
inline std::vector<StayPoint> detect_stay_points(const GpsTrajectory& traj,
                                                 double dist_threshold_m = 200.0,
                                                 double time_threshold_s = 300.0) {
    if (!(dist_threshold_m > 0.0) || !(time_threshold_s > 0.0))
        throw InvalidArgument("stay-point thresholds must be positive");
    std::vector<StayPoint> out;
    const auto& pts = traj.points;
    std::size_t i = 0;
    while (i < pts.size()) {
        std::size_t j = i + 1;
        while (j < pts.size() &&
               haversine(pts[i].lat, pts[i].lon, pts[j].lat, pts[j].lon) <= dist_threshold_m)
            ++j;
        const auto span = static_cast<double>(pts[j - 1].t - pts[i].t);
        if (span >= time_threshold_s) {
            StayPoint sp;
            sp.start = pts[i].t;
            sp.end = pts[j - 1].t;
            sp.count = static_cast<int>(j - i);
            for (std::size_t k = i; k < j; ++k) {
                sp.lat += pts[k].lat;
                sp.lon += pts[k].lon;
            }
            sp.lat /= sp.count;
            sp.lon /= sp.count;
            out.push_back(sp);
            i = j;
        } else {
            ++i;
        }
    }
    return out;
}

/// Mean and max segment speed in km/h.
inline std::pair<double, double> speed_profile(const GpsTrajectory& traj) {
    if (traj.points.size() < 2)
        throw InvalidArgument("speed profile needs at least 2 points, got " +
                              std::to_string(traj.points.size()));
    double sum = 0.0, maxv = 0.0;
    for (std::size_t i = 1; i < traj.points.size(); ++i) {
        const GpsPoint& a = traj.points[i - 1];
        const GpsPoint& b = traj.points[i];
        const double meters = haversine(a.lat, a.lon, b.lat, b.lon);
        const double seconds = static_cast<double>(b.t - a.t);
        const double kmh = meters / seconds * 3.6;
        sum += kmh;
        maxv = std::max(maxv, kmh);
    }
    return {sum / static_cast<double>(traj.points.size() - 1), maxv};
}

namespace detail {

/// Local-planar (equirectangular) displacement from `from` to `to`, meters.
inline std::pair<double, double> planar_offset(double from_lat, double from_lon, double to_lat,
                                               double to_lon) {
    const double rad = std::numbers::pi / 180.0;
    const double dx = (to_lon - from_lon) * rad * std::cos(from_lat * rad) * kEarthRadiusM;
    const double dy = (to_lat - from_lat) * rad * kEarthRadiusM;
    return {dx, dy};
}

} // namespace detail

/// For the 9 points nearest the POI (ascending distance, ties by trajectory
/// order): the segment speed into each point, and the cosine at the point
/// between the vector to its predecessor and the vector to the POI. Slots
/// without a point or a predecessor hold -1.
inline std::pair<std::array<double, 9>, std::array<double, 9>>
nearest9_features(const GpsTrajectory& traj, const Poi& poi) {
    std::array<double, 9> speed_at;
    std::array<double, 9> cosine_at;
    speed_at.fill(-1.0);
    cosine_at.fill(-1.0);
    std::vector<std::pair<double, std::size_t>> by_dist;
    by_dist.reserve(traj.points.size());
    for (std::size_t i = 0; i < traj.points.size(); ++i)
        by_dist.push_back({haversine(traj.points[i].lat, traj.points[i].lon, poi.lat, poi.lon), i});
    std::sort(by_dist.begin(), by_dist.end());
    const std::size_t take = std::min<std::size_t>(9, by_dist.size());
    for (std::size_t slot = 0; slot < take; ++slot) {
        const std::size_t k = by_dist[slot].second;
        if (k == 0) continue; // no predecessor: sentinels stay
        const GpsPoint& prev = traj.points[k - 1];
        const GpsPoint& here = traj.points[k];
        const double meters = haversine(prev.lat, prev.lon, here.lat, here.lon);
        speed_at[slot] = meters / static_cast<double>(here.t - prev.t) * 3.6;
        const auto [ax, ay] = detail::planar_offset(here.lat, here.lon, prev.lat, prev.lon);
        const auto [bx, by] = detail::planar_offset(here.lat, here.lon, poi.lat, poi.lon);
        const double na = std::sqrt(ax * ax + ay * ay);
        const double nb = std::sqrt(bx * bx + by * by);
        if (na == 0.0 || nb == 0.0) continue; // undefined angle: sentinel
        cosine_at[slot] = std::clamp((ax * bx + ay * by) / (na * nb), -1.0, 1.0);
    }
    return {speed_at, cosine_at};
}

inline std::vector<double> default_radius_ladder() {
    return {500.0, 400.0, 300.0, 200.0, 150.0, 100.0, 90.0, 80.0, 70.0,
            60.0,  50.0,  40.0,  30.0,  20.0,  10.0,  5.0,  3.0};
}

struct ExtractionConfig {
    std::vector<double> radius_ladder = default_radius_ladder();
    double stay_dist_m = 200.0;
    double stay_time_s = 300.0;
};

/// Everything extracted for one (trajectory, POI) pair. Speed and angle
/// fields hold -1 where undefined.
struct GeoFeatureRow {
    std::vector<int> records_inside;  // one count per ladder radius
    int records_outside_500m = 0;
    double poi_radius = 0.0;
    int records_inside_building = 0;
    double mean_speed = -1.0;
    double max_speed = -1.0;
    int stay_count = 0;
    std::array<double, 9> speed_at{};
    std::array<double, 9> cosine_at{};
};

inline GeoFeatureRow extract_features(const GpsTrajectory& traj, const Poi& poi,
                                      const ExtractionConfig& config = {}) {
    if (!(poi.radius_m > 0.0)) throw InvalidArgument("poi '" + poi.office_id + "' radius must be positive");
    GeoFeatureRow row;
    row.records_inside.reserve(config.radius_ladder.size());
    for (const double r : config.radius_ladder)
        row.records_inside.push_back(count_within_radius(traj, poi, r));
    int inside_500 = 0;
    for (const GpsPoint& p : traj.points)
        if (haversine(p.lat, p.lon, poi.lat, poi.lon) <= 500.0) ++inside_500;
    row.records_outside_500m = static_cast<int>(traj.points.size()) - inside_500;
    row.poi_radius = poi.radius_m;
    row.records_inside_building = count_within_radius(traj, poi, poi.radius_m);
    if (traj.points.size() >= 2) {
        const auto [mean, maxv] = speed_profile(traj);
        row.mean_speed = mean;
        row.max_speed = maxv;
    }
    row.stay_count =
        static_cast<int>(detect_stay_points(traj, config.stay_dist_m, config.stay_time_s).size());
    const auto [speeds, cosines] = nearest9_features(traj, poi);
    row.speed_at = speeds;
    row.cosine_at = cosines;
    return row;
}

/// Visit iff records_inside_building >= min_inside and at least one stay point.
struct ThresholdClassifier {
    int min_inside = 3;
};

/// Visit iff sigma(w . x + b) > 0.5 over the row encoded in CSV column order.
struct LogisticClassifier {
    Eigen::VectorXd weights;
    double bias = 0.0;
};

using VisitClassifier = std::variant<ThresholdClassifier, LogisticClassifier>;

/// Numeric fields in the geofeatures.csv column order.
inline Eigen::VectorXd encode_row(const GeoFeatureRow& row) {
    const auto n = static_cast<Eigen::Index>(row.records_inside.size());
    Eigen::VectorXd v(n + 6 + 18);
    Eigen::Index at = 0;
    for (const int c : row.records_inside) v[at++] = c;
    v[at++] = row.records_outside_500m;
    v[at++] = row.poi_radius;
    v[at++] = row.records_inside_building;
    v[at++] = row.mean_speed;
    v[at++] = row.max_speed;
    v[at++] = row.stay_count;
    for (const double s : row.speed_at) v[at++] = s;
    for (const double c : row.cosine_at) v[at++] = c;
    return v;
}

inline bool classify_visit(const GeoFeatureRow& row, const VisitClassifier& classifier) {
    if (const auto* rule = std::get_if<ThresholdClassifier>(&classifier))
        return row.records_inside_building >= rule->min_inside && row.stay_count >= 1;
    const auto& logistic = std::get<LogisticClassifier>(classifier);
    const Eigen::VectorXd x = encode_row(row);
    if (logistic.weights.size() != x.size())
        throw ShapeError("logistic classifier has " + std::to_string(logistic.weights.size()) +
                         " weights; row encodes " + std::to_string(x.size()) + " fields");
    const double z = logistic.weights.dot(x) + logistic.bias;
    const double p = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    return p > 0.5;
}

/// Office with minimal haversine distance; ties go to the smaller office_id.
inline const Poi& assign_office(double lat, double lon, const std::vector<Poi>& offices) {
    if (offices.empty()) throw InvalidArgument("office list is empty");
    const Poi* best = &offices.front();
    double best_dist = haversine(lat, lon, best->lat, best->lon);
    for (std::size_t i = 1; i < offices.size(); ++i) {
        const double d = haversine(lat, lon, offices[i].lat, offices[i].lon);
        if (d < best_dist || (d == best_dist && offices[i].office_id < best->office_id)) {
            best = &offices[i];
            best_dist = d;
        }
    }
    return *best;
}

/// One extracted row per (user, day, office-region with points).
struct ExtractedRow {
    std::string user;
    Date date;
    std::string office_id;
    GeoFeatureRow features;
};

/// Splits each user's points by UTC day, routes each point to its nearest
/// office, and extracts one feature row per (user, day, office).
inline std::vector<ExtractedRow> extract_rows(const std::vector<GpsTrajectory>& trajectories,
                                              const std::vector<Poi>& offices,
                                              const ExtractionConfig& config = {}) {
    if (offices.empty()) throw InvalidArgument("office list is empty");
    std::map<std::string, const Poi*> office_by_id;
    for (const Poi& poi : offices) office_by_id[poi.office_id] = &poi;
    std::vector<ExtractedRow> out;
    for (const GpsTrajectory& traj : trajectories) {
        validate_trajectory(traj);
        // (day, office) -> sub-trajectory, ordered for stable output
        std::map<std::pair<Date, std::string>, GpsTrajectory> split;
        for (const GpsPoint& p : traj.points) {
            const Poi& office = assign_office(p.lat, p.lon, offices);
            GpsTrajectory& sub = split[{date_of_timestamp(p.t), office.office_id}];
            sub.user = traj.user;
            sub.points.push_back(p);
        }
        for (const auto& [key, sub] : split) {
            ExtractedRow row;
            row.user = traj.user;
            row.date = key.first;
            row.office_id = key.second;
            row.features = extract_features(sub, *office_by_id.at(key.second), config);
            out.push_back(std::move(row));
        }
    }
    return out;
}

/// Classified visit counts, at most one per (user, day, office).
inline std::map<std::pair<std::string, Date>, int>
daily_visit_counts(const std::vector<GpsTrajectory>& trajectories, const std::vector<Poi>& offices,
                   const VisitClassifier& classifier, const ExtractionConfig& config = {}) {
    std::map<std::pair<std::string, Date>, int> counts;
    for (const ExtractedRow& row : extract_rows(trajectories, offices, config))
        if (classify_visit(row.features, classifier)) counts[{row.office_id, row.date}] += 1;
    return counts;
}

/// trajectories.csv: user_id,timestamp,lat,lon with ISO-8601 UTC timestamps.
/// Rows may arrive in any order; points are sorted per user.
inline std::vector<GpsTrajectory> load_trajectories(const std::string& path) {
    const csv::Table table = csv::Table::read(path, {"user_id", "timestamp", "lat", "lon"});
    std::map<std::string, std::vector<GpsPoint>> by_user;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        const std::string where = path + " row " + std::to_string(i + 2);
        GpsPoint p;
        p.t = parse_timestamp(row[1]);
        p.lat = csv::parse_double(row[2], where + " lat");
        p.lon = csv::parse_double(row[3], where + " lon");
        by_user[row[0]].push_back(p);
    }
    std::vector<GpsTrajectory> out;
    out.reserve(by_user.size());
    for (auto& [user, points] : by_user) {
        std::sort(points.begin(), points.end(),
                  [](const GpsPoint& a, const GpsPoint& b) { return a.t < b.t; });
        GpsTrajectory traj;
        traj.user = user;
        traj.points = std::move(points);
        validate_trajectory(traj); // rejects duplicate timestamps
        out.push_back(std::move(traj));
    }
    return out;
}

inline void write_trajectories(const std::string& path,
                               const std::vector<GpsTrajectory>& trajectories) {
    csv::Writer out(path, {"user_id", "timestamp", "lat", "lon"});
    for (const GpsTrajectory& traj : trajectories)
        for (const GpsPoint& p : traj.points)
            out.row({traj.user, format_timestamp(p.t), csv::format_double(p.lat),
                     csv::format_double(p.lon)});
    out.close();
}

/// pois.csv: office_id,lat,lon,radius_m.
inline std::vector<Poi> load_pois(const std::string& path) {
    const csv::Table table = csv::Table::read(path, {"office_id", "lat", "lon", "radius_m"});
    std::vector<Poi> out;
    std::map<std::string, bool> seen;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        const std::string where = path + " row " + std::to_string(i + 2);
        if (seen.count(row[0])) throw IoError(where + ": duplicate office '" + row[0] + "'");
        seen[row[0]] = true;
        Poi poi;
        poi.office_id = row[0];
        poi.lat = csv::parse_double(row[1], where + " lat");
        poi.lon = csv::parse_double(row[2], where + " lon");
        poi.radius_m = csv::parse_double(row[3], where + " radius_m");
        if (!(poi.lat >= -90.0 && poi.lat <= 90.0) || !(poi.lon >= -180.0 && poi.lon <= 180.0))
            throw IoError(where + ": coordinates outside the valid range");
        if (!(poi.radius_m > 0.0)) throw IoError(where + ": radius_m must be positive");
        out.push_back(std::move(poi));
    }
    return out;
}

inline void write_pois(const std::string& path, const std::vector<Poi>& pois) {
    csv::Writer out(path, {"office_id", "lat", "lon", "radius_m"});
    for (const Poi& poi : pois)
        out.row({poi.office_id, csv::format_double(poi.lat), csv::format_double(poi.lon),
                 csv::format_double(poi.radius_m)});
    out.close();
}

namespace detail {

inline std::string radius_label(double r) {
    std::string s = csv::format_double(r);
    // 500.0 prints as "500"; keep labels integral where the value is
    return s;
}

} // namespace detail

inline std::vector<std::string> geofeature_header(const std::vector<double>& ladder) {
    std::vector<std::string> h = {"user_id", "date", "office_id"};
    for (const double r : ladder) h.push_back("records_inside_" + detail::radius_label(r) + "m");
    h.insert(h.end(), {"records_outside_500m", "poi_radius", "records_inside_building",
                       "mean_speed", "max_speed", "stay_count"});
    for (int i = 1; i <= 9; ++i) h.push_back("speed_at_" + std::to_string(i));
    for (int i = 1; i <= 9; ++i) h.push_back("cosine_at_" + std::to_string(i));
    return h;
}

inline void write_geofeatures(const std::string& path, const std::vector<ExtractedRow>& rows,
                              const std::vector<double>& ladder) {
    csv::Writer out(path, geofeature_header(ladder));
    for (const ExtractedRow& r : rows) {
        if (r.features.records_inside.size() != ladder.size())
            throw ShapeError("row for user '" + r.user + "' has " +
                             std::to_string(r.features.records_inside.size()) +
                             " radius counts; ladder has " + std::to_string(ladder.size()));
        std::vector<std::string> cells = {r.user, r.date.to_string(), r.office_id};
        for (const int c : r.features.records_inside) cells.push_back(std::to_string(c));
        cells.push_back(std::to_string(r.features.records_outside_500m));
        cells.push_back(csv::format_double(r.features.poi_radius));
        cells.push_back(std::to_string(r.features.records_inside_building));
        cells.push_back(csv::format_double(r.features.mean_speed));
        cells.push_back(csv::format_double(r.features.max_speed));
        cells.push_back(std::to_string(r.features.stay_count));
        for (const double s : r.features.speed_at) cells.push_back(csv::format_double(s));
        for (const double c : r.features.cosine_at) cells.push_back(csv::format_double(c));
        out.row(cells);
    }
    out.close();
}

/// Reads geofeatures.csv back, reconstructing the ladder from the header.
inline std::pair<std::vector<ExtractedRow>, std::vector<double>>
load_geofeatures(const std::string& path) {
    const csv::Table table = csv::Table::read(path, {});
    const auto& header = table.header;
    std::vector<double> ladder;
    std::size_t at = 3;
    if (header.size() < 3 || header[0] != "user_id" || header[1] != "date" ||
        header[2] != "office_id")
        throw IoError(path + ": unexpected geofeature header start");
    const std::string prefix = "records_inside_";
    while (at < header.size() && header[at].rfind(prefix, 0) == 0 &&
           header[at] != "records_inside_building") {
        std::string core = header[at].substr(prefix.size());
        if (core.empty() || core.back() != 'm')
            throw IoError(path + ": malformed radius column '" + header[at] + "'");
        core.pop_back();
        ladder.push_back(csv::parse_double(core, path + " header radius"));
        ++at;
    }
    const std::vector<std::string> expected = geofeature_header(ladder);
    if (header != expected) throw IoError(path + ": geofeature header does not match its ladder");
    std::vector<ExtractedRow> rows;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& cells = table.rows[i];
        const std::string where = path + " row " + std::to_string(i + 2);
        ExtractedRow r;
        r.user = cells[0];
        r.date = Date::parse(cells[1]);
        r.office_id = cells[2];
        std::size_t c = 3;
        for (std::size_t k = 0; k < ladder.size(); ++k)
            r.features.records_inside.push_back(
                static_cast<int>(csv::parse_double(cells[c++], where)));
        r.features.records_outside_500m = static_cast<int>(csv::parse_double(cells[c++], where));
        r.features.poi_radius = csv::parse_double(cells[c++], where);
        r.features.records_inside_building = static_cast<int>(csv::parse_double(cells[c++], where));
        r.features.mean_speed = csv::parse_double(cells[c++], where);
        r.features.max_speed = csv::parse_double(cells[c++], where);
        r.features.stay_count = static_cast<int>(csv::parse_double(cells[c++], where));
        for (auto& s : r.features.speed_at) s = csv::parse_double(cells[c++], where);
        for (auto& s : r.features.cosine_at) s = csv::parse_double(cells[c++], where);
        rows.push_back(std::move(r));
    }
    return {std::move(rows), std::move(ladder)};
}

} // namespace mfagl::geo

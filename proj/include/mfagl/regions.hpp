#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mfagl/date.hpp"
#include "mfagl/error.hpp"

namespace mfagl {

using AreaId = std::string;

/// Spatial hierarchy: small areas q nested inside large areas p, with an
/// aggregation weight per small area (1 by default).
class RegionHierarchy {
public:
    RegionHierarchy() = default;

    explicit RegionHierarchy(std::map<AreaId, AreaId> parent_of,
                             std::map<AreaId, double> weight_of = {})
        : parent_(std::move(parent_of)), weight_(std::move(weight_of)) {
        for (const auto& [q, w] : weight_) {
            if (!parent_.count(q))
                throw InvalidArgument("weight references unknown small area '" + q + "'");
            if (!(w >= 0.0 && w <= 1.0))
                throw InvalidArgument("weight for '" + q + "' outside [0,1]");
        }
        std::set<AreaId> larges;
        for (const auto& [q, p] : parent_) {
            small_.push_back(q);
            larges.insert(p);
            children_[p].push_back(q);
        }
        large_.assign(larges.begin(), larges.end());
        for (auto& [p, kids] : children_) std::sort(kids.begin(), kids.end());
    }

    const std::vector<AreaId>& small_areas() const { return small_; }
    const std::vector<AreaId>& large_areas() const { return large_; }

    bool has_small(const AreaId& q) const { return parent_.count(q) != 0; }
    bool has_large(const AreaId& p) const { return children_.count(p) != 0; }

    const AreaId& parent(const AreaId& q) const {
        const auto it = parent_.find(q);
        if (it == parent_.end()) throw LookupError("unknown small area '" + q + "'");
        return it->second;
    }

    double weight(const AreaId& q) const {
        if (!parent_.count(q)) throw LookupError("unknown small area '" + q + "'");
        const auto it = weight_.find(q);
        return it == weight_.end() ? 1.0 : it->second;
    }

    const std::vector<AreaId>& children(const AreaId& p) const {
        const auto it = children_.find(p);
        if (it == children_.end()) throw LookupError("unknown large area '" + p + "'");
        return it->second;
    }

    const std::map<AreaId, AreaId>& parent_map() const { return parent_; }
    const std::map<AreaId, double>& weight_map() const { return weight_; }

    bool operator==(const RegionHierarchy& other) const {
        if (parent_ != other.parent_) return false;
        // Weight maps compare through the default: an absent entry equals 1.
        for (const auto& [q, p] : parent_)
            if (weight(q) != other.weight(q)) return false;
        return true;
    }

private:
    std::map<AreaId, AreaId> parent_;
    std::map<AreaId, double> weight_;
    std::vector<AreaId> small_, large_;
    std::map<AreaId, std::vector<AreaId>> children_;
};

/// Maps a small area to its unique parent.
inline const AreaId& map_region(const RegionHierarchy& hierarchy, const AreaId& q) {
    return hierarchy.parent(q);
}

/// Mixed-frequency calendar: ordered fine ticks (days) grouped into ordered
/// coarse periods (months). The grouping must be monotone and onto.
class FrequencyCalendar {
public:
    FrequencyCalendar() = default;

    FrequencyCalendar(std::vector<Date> ticks, const std::map<Date, Period>& period_of) {
        std::sort(ticks.begin(), ticks.end());
        ticks.erase(std::unique(ticks.begin(), ticks.end()), ticks.end());
        if (ticks.empty()) throw InvalidArgument("calendar needs at least one fine tick");
        ticks_ = std::move(ticks);
        period_index_.reserve(ticks_.size());
        std::vector<Period> seen;
        for (const Date& tick : ticks_) {
            const auto it = period_of.find(tick);
            if (it == period_of.end())
                throw InvalidArgument("tick " + tick.to_string() + " has no coarse period");
            if (seen.empty() || it->second != seen.back()) {
                if (!seen.empty() && it->second < seen.back())
                    throw InvalidArgument("period mapping is not monotone at " + tick.to_string());
                seen.push_back(it->second);
            }
            period_index_.push_back(static_cast<int>(seen.size()) - 1);
        }
        periods_ = std::move(seen);
    }

    /// All days from `first` to `last`, each mapped to its calendar month.
    static FrequencyCalendar daily(Date first, Date last) {
        if (last < first) throw InvalidArgument("calendar range is empty");
        std::vector<Date> ticks;
        std::map<Date, Period> period_of;
        for (Date d = first; d <= last; d = d.plus_days(1)) {
            ticks.push_back(d);
            period_of[d] = Period::of(d);
        }
        return FrequencyCalendar(std::move(ticks), period_of);
    }

    /// Daily calendar spanning every given date and every day of every given
    /// period.
    static FrequencyCalendar covering(std::span<const Date> dates,
                                      std::span<const Period> periods) {
        if (dates.empty() && periods.empty())
            throw InvalidArgument("cannot build a calendar from no dates and no periods");
        std::optional<Date> lo, hi;
        const auto widen = [&](Date d) {
            if (!lo || d < *lo) lo = d;
            if (!hi || *hi < d) hi = d;
        };
        for (const Date& d : dates) widen(d);
        for (const Period& p : periods) {
            widen(p.first_day());
            widen(p.last_day());
        }
        return daily(*lo, *hi);
    }

    const std::vector<Date>& fine_ticks() const { return ticks_; }
    const std::vector<Period>& coarse_periods() const { return periods_; }

    bool has_tick(const Date& d) const {
        return std::binary_search(ticks_.begin(), ticks_.end(), d);
    }

    bool has_period(const Period& p) const {
        return std::binary_search(periods_.begin(), periods_.end(), p);
    }

    int tick_index(const Date& d) const {
        const auto it = std::lower_bound(ticks_.begin(), ticks_.end(), d);
        if (it == ticks_.end() || *it != d)
            throw LookupError("date " + d.to_string() + " is outside the calendar");
        return static_cast<int>(it - ticks_.begin());
    }

    int period_index(const Period& p) const {
        const auto it = std::lower_bound(periods_.begin(), periods_.end(), p);
        if (it == periods_.end() || *it != p)
            throw LookupError("period " + p.to_string() + " is outside the calendar");
        return static_cast<int>(it - periods_.begin());
    }

    const Period& period(const Date& d) const { return periods_[period_index_[tick_index(d)]]; }

    /// Fine ticks belonging to one coarse period (contiguous by construction).
    std::span<const Date> ticks_in(const Period& p) const {
        const int pi = period_index(p);
        const auto lo = std::lower_bound(period_index_.begin(), period_index_.end(), pi);
        const auto hi = std::upper_bound(period_index_.begin(), period_index_.end(), pi);
        return {ticks_.data() + (lo - period_index_.begin()),
                static_cast<std::size_t>(hi - lo)};
    }

    bool operator==(const FrequencyCalendar& other) const {
        return ticks_ == other.ticks_ && periods_ == other.periods_ &&
               period_index_ == other.period_index_;
    }

private:
    std::vector<Date> ticks_;
    std::vector<Period> periods_;
    std::vector<int> period_index_; // per tick
};

/// Maps a fine tick to its coarse period.
inline const Period& map_time(const FrequencyCalendar& calendar, const Date& tau) {
    return calendar.period(tau);
}

/// Category vocabularies the one-hot blocks encode against. Frozen into a
/// model at training time; unseen categories at prediction time are errors.
struct Vocabulary {
    std::vector<int> years;          // ascending
    std::vector<AreaId> small_areas; // ascending
    std::vector<AreaId> large_areas; // ascending

    static Vocabulary from(const RegionHierarchy& hierarchy, const FrequencyCalendar& calendar) {
        Vocabulary v;
        std::set<int> years;
        for (const Date& d : calendar.fine_ticks()) years.insert(d.year());
        v.years.assign(years.begin(), years.end());
        v.small_areas = hierarchy.small_areas();
        v.large_areas = hierarchy.large_areas();
        return v;
    }

    int year_index(int year) const {
        const auto it = std::lower_bound(years.begin(), years.end(), year);
        if (it == years.end() || *it != year)
            throw LookupError("year " + std::to_string(year) + " is not in the vocabulary");
        return static_cast<int>(it - years.begin());
    }

    int small_index(const AreaId& q) const {
        const auto it = std::lower_bound(small_areas.begin(), small_areas.end(), q);
        if (it == small_areas.end() || *it != q)
            throw LookupError("small area '" + q + "' is not in the vocabulary");
        return static_cast<int>(it - small_areas.begin());
    }

    int large_index(const AreaId& p) const {
        const auto it = std::lower_bound(large_areas.begin(), large_areas.end(), p);
        if (it == large_areas.end() || *it != p)
            throw LookupError("large area '" + p + "' is not in the vocabulary");
        return static_cast<int>(it - large_areas.begin());
    }

    /// Total width of the concatenated one-hot blocks
    /// (years + 12 months + 31 days + large areas + small areas).
    int dummy_dim() const {
        return static_cast<int>(years.size() + 12 + 31 + large_areas.size() + small_areas.size());
    }

    bool operator==(const Vocabulary&) const = default;
};

/// Model input at (q, tau): lagged daily visit counts plus calendar and area
/// dummies. Lag slots with no feature record are zero-filled and flagged in
/// the padding mask.
struct FeatureWindow {
    AreaId origin_area;
    Date origin_date;
    Eigen::VectorXd visit_lags; // oldest first, most recent last
    std::vector<bool> padded;   // true where no record existed
    Eigen::VectorXd year_onehot, month_onehot, day_onehot;
    Eigen::VectorXd large_area_onehot, small_area_onehot;

    /// One-hot blocks concatenated in declaration order.
    Eigen::VectorXd dummies() const {
        Eigen::VectorXd out(year_onehot.size() + month_onehot.size() + day_onehot.size() +
                            large_area_onehot.size() + small_area_onehot.size());
        Eigen::Index at = 0;
        for (const Eigen::VectorXd* block :
             {&year_onehot, &month_onehot, &day_onehot, &large_area_onehot, &small_area_onehot}) {
            out.segment(at, block->size()) = *block;
            at += block->size();
        }
        return out;
    }
};

/// Features at fine granularity, labels at coarse granularity. Labels for
/// trailing periods may be absent (the nowcasting regime). Immutable after
/// construction; the label observer is a test seam.
class MixedFrequencyPanel {
public:
    using FeatureMap = std::map<std::pair<AreaId, Date>, double>;
    using LabelMap = std::map<std::pair<AreaId, Period>, double>;

    MixedFrequencyPanel(RegionHierarchy hierarchy, FrequencyCalendar calendar,
                        FeatureMap features, LabelMap labels)
        : hierarchy_(std::move(hierarchy)),
          calendar_(std::move(calendar)),
          raw_features_(std::move(features)),
          raw_labels_(std::move(labels)),
          vocabulary_(Vocabulary::from(hierarchy_, calendar_)) {
        const std::size_t n_small = hierarchy_.small_areas().size();
        const std::size_t n_ticks = calendar_.fine_ticks().size();
        feature_values_.assign(n_small * n_ticks, 0.0);
        feature_present_.assign(n_small * n_ticks, 0);
        for (const auto& [key, value] : raw_features_) {
            const auto& [q, date] = key;
            if (!hierarchy_.has_small(q)) {
                violations_.push_back("feature at (" + q + ", " + date.to_string() +
                                      ") references unknown small area '" + q + "'");
                continue;
            }
            if (!calendar_.has_tick(date)) {
                violations_.push_back("feature at (" + q + ", " + date.to_string() +
                                      ") is dated outside the calendar");
                continue;
            }
            const std::size_t slot = static_cast<std::size_t>(vocabulary_.small_index(q)) * n_ticks +
                                     static_cast<std::size_t>(calendar_.tick_index(date));
            feature_values_[slot] = value;
            feature_present_[slot] = 1;
        }

        const std::size_t n_large = hierarchy_.large_areas().size();
        const std::size_t n_periods = calendar_.coarse_periods().size();
        label_values_.assign(n_large * n_periods, 0.0);
        label_present_.assign(n_large * n_periods, 0);
        for (const auto& [key, value] : raw_labels_) {
            const auto& [p, period] = key;
            if (!hierarchy_.has_large(p)) {
                violations_.push_back("label at (" + p + ", " + period.to_string() +
                                      ") references unknown large area '" + p + "'");
                continue;
            }
            if (!calendar_.has_period(period)) {
                violations_.push_back("label at (" + p + ", " + period.to_string() +
                                      ") references a period outside the calendar");
                continue;
            }
            const std::size_t slot = static_cast<std::size_t>(vocabulary_.large_index(p)) * n_periods +
                                     static_cast<std::size_t>(calendar_.period_index(period));
            label_values_[slot] = value;
            label_present_[slot] = 1;
        }
    }

    const RegionHierarchy& hierarchy() const { return hierarchy_; }
    const FrequencyCalendar& calendar() const { return calendar_; }
    const Vocabulary& vocabulary() const { return vocabulary_; }

    std::optional<double> feature_at(const AreaId& q, const Date& date) const {
        if (!hierarchy_.has_small(q)) throw LookupError("unknown small area '" + q + "'");
        if (!calendar_.has_tick(date)) return std::nullopt;
        const std::size_t slot =
            static_cast<std::size_t>(vocabulary_.small_index(q)) * calendar_.fine_ticks().size() +
            static_cast<std::size_t>(calendar_.tick_index(date));
        if (!feature_present_[slot]) return std::nullopt;
        return feature_values_[slot];
    }

    std::optional<double> label_at(const AreaId& p, const Period& period) const {
        if (!hierarchy_.has_large(p)) throw LookupError("unknown large area '" + p + "'");
        if (label_observer_) label_observer_(p, period);
        if (!calendar_.has_period(period)) return std::nullopt;
        const std::size_t slot =
            static_cast<std::size_t>(vocabulary_.large_index(p)) * calendar_.coarse_periods().size() +
            static_cast<std::size_t>(calendar_.period_index(period));
        if (!label_present_[slot]) return std::nullopt;
        return label_values_[slot];
    }

    /// Sorted (p, t) pairs that carry a label. Does not fire the observer.
    std::vector<std::pair<AreaId, Period>> labeled_pairs() const {
        std::vector<std::pair<AreaId, Period>> keys;
        keys.reserve(raw_labels_.size());
        for (const auto& [key, value] : raw_labels_)
            if (hierarchy_.has_large(key.first) && calendar_.has_period(key.second))
                keys.push_back(key);
        return keys;
    }

    const FeatureMap& raw_features() const { return raw_features_; }
    const LabelMap& raw_labels() const { return raw_labels_; }
    const std::vector<std::string>& violations() const { return violations_; }

    /// Test instrumentation: observes every label value lookup.
    void set_label_observer(std::function<void(const AreaId&, const Period&)> observer) const {
        label_observer_ = std::move(observer);
    }

    bool operator==(const MixedFrequencyPanel& other) const {
        return hierarchy_ == other.hierarchy_ && calendar_ == other.calendar_ &&
               raw_features_ == other.raw_features_ && raw_labels_ == other.raw_labels_;
    }

private:
    RegionHierarchy hierarchy_;
    FrequencyCalendar calendar_;
    FeatureMap raw_features_;
    LabelMap raw_labels_;
    Vocabulary vocabulary_;
    std::vector<double> feature_values_;
    std::vector<std::uint8_t> feature_present_;
    std::vector<double> label_values_;
    std::vector<std::uint8_t> label_present_;
    std::vector<std::string> violations_;
    mutable std::function<void(const AreaId&, const Period&)> label_observer_;
};

/// Empty iff every panel invariant holds; violations name entity and rule.
inline std::vector<std::string> validate_panel(const MixedFrequencyPanel& panel) {
    return panel.violations();
}

inline Eigen::VectorXd one_hot(int size, int index) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(size);
    v[index] = 1.0;
    return v;
}

/// Assembles the model input at (q, tau) against an explicit vocabulary.
/// visit_lags[i] holds the feature at tau - (lag_days - 1 - i) days; days
/// with no record are zero-filled and flagged in the padding mask.
inline FeatureWindow build_feature_window(const MixedFrequencyPanel& panel, const AreaId& q,
                                          const Date& tau, int lag_days, const Vocabulary& vocab) {
    if (lag_days < 1) throw InvalidArgument("lag_days must be at least 1");
    FeatureWindow window;
    window.origin_area = q;
    window.origin_date = tau;
    window.visit_lags = Eigen::VectorXd::Zero(lag_days);
    window.padded.assign(static_cast<std::size_t>(lag_days), true);
    for (int i = 0; i < lag_days; ++i) {
        const Date day = tau.plus_days(-(lag_days - 1 - i));
        if (const auto value = panel.feature_at(q, day)) {
            window.visit_lags[i] = *value;
            window.padded[static_cast<std::size_t>(i)] = false;
        }
    }
    window.year_onehot = one_hot(static_cast<int>(vocab.years.size()), vocab.year_index(tau.year()));
    window.month_onehot = one_hot(12, tau.month() - 1);
    window.day_onehot = one_hot(31, tau.day() - 1);
    window.small_area_onehot =
        one_hot(static_cast<int>(vocab.small_areas.size()), vocab.small_index(q));
    window.large_area_onehot = one_hot(static_cast<int>(vocab.large_areas.size()),
                                       vocab.large_index(panel.hierarchy().parent(q)));
    return window;
}

/// Same, against the panel's own vocabulary.
inline FeatureWindow build_feature_window(const MixedFrequencyPanel& panel, const AreaId& q,
                                          const Date& tau, int lag_days) {
    return build_feature_window(panel, q, tau, lag_days, panel.vocabulary());
}

/// True when at least one lag slot in the window has a real record.
inline bool window_has_data(const MixedFrequencyPanel& panel, const AreaId& q, const Date& tau,
                            int lag_days) {
    for (int back = 0; back < lag_days; ++back)
        if (panel.feature_at(q, tau.plus_days(-back))) return true;
    return false;
}

} // namespace mfagl

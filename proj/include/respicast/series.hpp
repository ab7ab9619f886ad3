#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "respicast/date.hpp"
#include "respicast/errors.hpp"

namespace respicast {

enum class Pathogen { SarsCov2, Influenza, Rsv };
enum class DataStream { Cases, Admissions };

std::string to_string(Pathogen p);
std::string to_string(DataStream s);
std::optional<Pathogen> pathogen_from_string(const std::string& s);
std::optional<DataStream> stream_from_string(const std::string& s);

struct SeriesKey {
    Pathogen pathogen;
    DataStream stream;
    auto operator<=>(const SeriesKey&) const = default;
    std::string to_string() const;
};

// Dated daily counts for one (pathogen, stream), dense from start_date to
// origin_date. Immutable after construction.
class CountSeries {
public:
    CountSeries(Pathogen pathogen, DataStream stream, Date start,
                std::vector<long long> counts);

    Pathogen pathogen() const { return pathogen_; }
    DataStream stream() const { return stream_; }
    SeriesKey key() const { return {pathogen_, stream_}; }
    Date start_date() const { return start_; }
    Date origin_date() const { return start_ + std::int64_t(counts_.size()) - 1; }
    std::size_t size() const { return counts_.size(); }
    long long count(std::size_t i) const { return counts_[i]; }
    const std::vector<long long>& counts() const { return counts_; }

    bool covers(Date d) const { return d >= start_ && d <= origin_date(); }
    long long count_on(Date d) const { return counts_[std::size_t(d - start_)]; }
    long long total() const;

private:
    Pathogen pathogen_;
    DataStream stream_;
    Date start_;
    std::vector<long long> counts_;
};

// One weekly snapshot of the surveillance data.
struct DataRound {
    int round_index = 0;
    Date origin_date;
    std::map<SeriesKey, CountSeries> series;
};

struct DayOfWeekEffects {
    std::array<double, 7> omega{1, 1, 1, 1, 1, 1, 1}; // indexed Mon..Sun
    int window_weeks = 0;
    bool degenerate = false;
};

struct Revision {
    Date date;
    SeriesKey key;
    long long old_count;
    long long new_count;
};

struct DateInterval {
    Date first;
    Date last; // inclusive
    std::int64_t length() const { return last - first + 1; }
};

enum class OutOfRangePolicy { DropWarn, Error };

// Tally unit records (one ISO date string per event) into daily counts over
// the requested range; days with no events get zero.
CountSeries ingest_unit_records(const std::vector<std::string>& event_dates,
                                DateInterval range, Pathogen pathogen, DataStream stream,
                                OutOfRangePolicy policy = OutOfRangePolicy::DropWarn);

// Trailing min(days, len) days ending at origin_date.
CountSeries window_series(const CountSeries& s, std::int64_t days);

// Multiplicative weekday reporting pattern over the trailing window of whole
// weeks (at most max_weeks). The seven effects average to 1; an all-zero
// window yields the flagged all-ones default.
DayOfWeekEffects estimate_dow_effects(const CountSeries& s, int max_weeks = 16);

// Count revisions between two rounds: one entry per (key, date) present in
// both rounds where the counts differ.
std::vector<Revision> diff_rounds(const DataRound& earlier, const DataRound& later);

} // namespace respicast

#include "respicast/series.hpp"

#include <algorithm>

#include "respicast/log.hpp"

namespace respicast {

std::string to_string(Pathogen p) {
    switch (p) {
        case Pathogen::SarsCov2: return "sars_cov_2";
        case Pathogen::Influenza: return "influenza";
        case Pathogen::Rsv: return "rsv";
    }
    return "?";
}

std::string to_string(DataStream s) {
    return s == DataStream::Cases ? "cases" : "admissions";
}

std::optional<Pathogen> pathogen_from_string(const std::string& s) {
    if (s == "sars_cov_2" || s == "sars-cov-2" || s == "sarscov2") return Pathogen::SarsCov2;
    if (s == "influenza" || s == "flu") return Pathogen::Influenza;
    if (s == "rsv") return Pathogen::Rsv;
    return std::nullopt;
}

std::optional<DataStream> stream_from_string(const std::string& s) {
    if (s == "cases") return DataStream::Cases;
    if (s == "admissions") return DataStream::Admissions;
    return std::nullopt;
}

std::string SeriesKey::to_string() const {
    return respicast::to_string(pathogen) + "/" + respicast::to_string(stream);
}

CountSeries::CountSeries(Pathogen pathogen, DataStream stream, Date start,
                         std::vector<long long> counts)
    : pathogen_(pathogen), stream_(stream), start_(start), counts_(std::move(counts)) {
    if (counts_.empty()) throw ParameterError("CountSeries must cover at least one day");
    for (long long c : counts_)
        if (c < 0) throw DataError("CountSeries: negative count");
}

long long CountSeries::total() const {
    long long t = 0;
    for (long long c : counts_) t += c;
    return t;
}

CountSeries ingest_unit_records(const std::vector<std::string>& event_dates,
                                DateInterval range, Pathogen pathogen, DataStream stream,
                                OutOfRangePolicy policy) {
    if (range.last < range.first) throw ParameterError("ingest: empty date range");
    std::vector<long long> counts(std::size_t(range.length()), 0);
    std::size_t dropped = 0;
    for (std::size_t i = 0; i < event_dates.size(); ++i) {
        auto d = Date::parse(event_dates[i]);
        if (!d)
            throw DataError("ingest: unparseable event_date '" + event_dates[i] +
                            "' at row " + std::to_string(i));
        if (*d < range.first || *d > range.last) {
            if (policy == OutOfRangePolicy::Error)
                throw DataError("ingest: event_date " + d->iso() + " outside range at row " +
                                std::to_string(i));
            ++dropped;
            continue;
        }
        ++counts[std::size_t(*d - range.first)];
    }
    if (dropped > 0)
        log_warn("ingest: dropped " + std::to_string(dropped) + " out-of-range event(s) for " +
                 SeriesKey{pathogen, stream}.to_string());
    return CountSeries(pathogen, stream, range.first, std::move(counts));
}

CountSeries window_series(const CountSeries& s, std::int64_t days) {
    if (days < 1) throw ParameterError("window_series: days must be >= 1");
    std::int64_t len = std::int64_t(s.size());
    std::int64_t keep = std::min(days, len);
    std::vector<long long> tail(s.counts().end() - keep, s.counts().end());
    return CountSeries(s.pathogen(), s.stream(), s.start_date() + (len - keep), std::move(tail));
}

DayOfWeekEffects estimate_dow_effects(const CountSeries& s, int max_weeks) {
    if (s.size() < 7) throw ParameterError("estimate_dow_effects: series shorter than one week");
    if (max_weeks < 1 || max_weeks > 16)
        throw ParameterError("estimate_dow_effects: max_weeks must be in [1, 16]");
    std::int64_t weeks = std::min<std::int64_t>(std::int64_t(s.size()) / 7, max_weeks);
    std::int64_t window = weeks * 7;
    std::size_t first = s.size() - std::size_t(window);

    DayOfWeekEffects eff;
    eff.window_weeks = int(weeks);
    std::array<long long, 7> class_sum{};
    long long total = 0;
    for (std::size_t i = first; i < s.size(); ++i) {
        int wd = (s.start_date() + std::int64_t(i)).weekday();
        class_sum[std::size_t(wd)] += s.count(i);
        total += s.count(i);
    }
    if (total == 0) {
        eff.degenerate = true;
        return eff; // all-ones default
    }
    for (int w = 0; w < 7; ++w)
        eff.omega[std::size_t(w)] = 7.0 * double(class_sum[std::size_t(w)]) / double(total);
    return eff;
}

std::vector<Revision> diff_rounds(const DataRound& earlier, const DataRound& later) {
    std::vector<Revision> out;
    bool shared = false;
    for (const auto& [key, early_s] : earlier.series) {
        auto it = later.series.find(key);
        if (it == later.series.end()) continue;
        shared = true;
        const CountSeries& late_s = it->second;
        Date lo = std::max(early_s.start_date(), late_s.start_date());
        Date hi = std::min(early_s.origin_date(), late_s.origin_date());
        for (Date d = lo; d <= hi; ++d) {
            long long a = early_s.count_on(d);
            long long b = late_s.count_on(d);
            if (a != b) out.push_back({d, key, a, b});
        }
    }
    if (!shared) log_warn("diff_rounds: rounds share no series keys");
    return out;
}

} // namespace respicast

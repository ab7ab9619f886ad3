#pragma once

#include <chrono>
#include <charconv>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace respicast {

// Calendar day, stored as days since 1970-01-01. All series in this project
// are daily, so plain day arithmetic is the only thing we need.
class Date {
public:
    Date() = default;
    explicit Date(std::int64_t days_since_epoch) : days_(days_since_epoch) {}

    static Date from_ymd(int year, unsigned month, unsigned day) {
        std::chrono::year_month_day ymd{std::chrono::year{year},
                                        std::chrono::month{month},
                                        std::chrono::day{day}};
        return Date(std::chrono::sys_days{ymd}.time_since_epoch().count());
    }

    // Strict ISO 8601 "YYYY-MM-DD".
    static std::optional<Date> parse(std::string_view s) {
        if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
        int y = 0;
        unsigned m = 0, d = 0;
        auto num = [](std::string_view t, auto& out) {
            auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
            return ec == std::errc{} && p == t.data() + t.size();
        };
        if (!num(s.substr(0, 4), y) || !num(s.substr(5, 2), m) || !num(s.substr(8, 2), d))
            return std::nullopt;
        std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m},
                                        std::chrono::day{d}};
        if (!ymd.ok()) return std::nullopt;
        return Date(std::chrono::sys_days{ymd}.time_since_epoch().count());
    }

    std::string iso() const {
        std::chrono::year_month_day ymd{
            std::chrono::sys_days{std::chrono::days{days_}}};
        char buf[11];
        int y = int(ymd.year());
        unsigned m = unsigned(ymd.month()), d = unsigned(ymd.day());
        buf[0] = char('0' + y / 1000); buf[1] = char('0' + y / 100 % 10);
        buf[2] = char('0' + y / 10 % 10); buf[3] = char('0' + y % 10);
        buf[4] = '-';
        buf[5] = char('0' + m / 10); buf[6] = char('0' + m % 10);
        buf[7] = '-';
        buf[8] = char('0' + d / 10); buf[9] = char('0' + d % 10);
        buf[10] = '\0';
        return std::string(buf);
    }

    // 0 = Monday .. 6 = Sunday.
    int weekday() const {
        std::chrono::weekday wd{std::chrono::sys_days{std::chrono::days{days_}}};
        return int(wd.iso_encoding()) - 1;
    }

    std::int64_t days_since_epoch() const { return days_; }

    Date operator+(std::int64_t n) const { return Date(days_ + n); }
    Date operator-(std::int64_t n) const { return Date(days_ - n); }
    std::int64_t operator-(Date other) const { return days_ - other.days_; }
    Date& operator+=(std::int64_t n) { days_ += n; return *this; }
    Date& operator++() { ++days_; return *this; }
    auto operator<=>(const Date&) const = default;

private:
    std::int64_t days_ = 0;
};

inline const char* weekday_name(int wd) {
    static const char* names[7] = {"Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun"};
    return names[wd];
}

} // namespace respicast

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "respicast/date.hpp"
#include "respicast/delay.hpp"
#include "respicast/gp.hpp"
#include "respicast/series.hpp"

namespace respicast {

// Synthetic epidemic with fully known parameters, generated from the same
// equations the forecaster fits. Streams are emitted only for the delay
// pmfs that are present.
struct ScenarioSpec {
    int length = 0;            // observed days
    std::vector<double> rt;    // per-day reproduction numbers, size = length
    double seed_infections = 0.0;
    std::optional<DiscretePMF> gen_pmf;
    std::optional<DiscretePMF> report_pmf;
    std::optional<DiscretePMF> admit_pmf;
    std::optional<DayOfWeekEffects> dow; // applied to both streams
    double p_c = 1.0;
    double k_c = 25.0;
    double k_h = 25.0;
    std::vector<double> chr;   // empty = 1, one value = constant, else per-day
    Pathogen pathogen = Pathogen::SarsCov2;
    Date start = Date::from_ymd(2025, 5, 1);
    std::uint64_t seed = 1;

    void validate() const;
};

struct ScenarioTruth {
    std::vector<double> infections; // I_t over the observed days
    std::vector<double> rt;
    std::vector<double> z; // expected reported infections; empty without report pmf
    std::vector<double> h; // expected admitted infections; empty without admit pmf
    bool extinct = false;  // the renewal process can no longer produce cases
    std::optional<CountSeries> cases;
    std::optional<CountSeries> admissions;
};

// Runs the generative process: a 21-day constant ramp at seed_infections
// gives the convolutions full support on day one, then per-day renewal
// draws, forward convolutions and count draws.
ScenarioTruth simulate(const ScenarioSpec& spec);

// R trajectory sampled from the same process the forecaster assumes,
// clamped like the filter clamps its own draws.
std::vector<double> gp_rt_trajectory(int length, const GPKernel& kernel, int window,
                                     std::uint64_t seed, bool init_includes_signal = false);

} // namespace respicast

#pragma once

// CSV ingestion for mixed-frequency data: FRED-style transformation codes,
// business-day holiday interpolation, and calendar regularization into the
// tempo-indexed MultiFreqSeries layout.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "esncast/series.hpp"
#include "esncast/util.hpp"

namespace esncast {

// ---------------------------------------------------------------------------
// Dates

struct Date {
    int year = 1970, month = 1, day = 1;

    auto operator<=>(const Date&) const = default;

    static Date parse(const std::string& iso) {
        Date d;
        if (std::sscanf(iso.c_str(), "%d-%d-%d", &d.year, &d.month, &d.day) != 3 ||
            d.month < 1 || d.month > 12 || d.day < 1 || d.day > 31)
            throw DataError("bad ISO-8601 date: '" + iso + "'");
        return d;
    }

    std::string str() const {
        char buf[16];
        std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", year, month, day);
        return buf;
    }

    int quarter() const { return (month - 1) / 3 + 1; }

    // Days since 1970-01-01 (proleptic Gregorian), used for weekday math.
    long serial() const {
        int y = year, m = month;
        if (m <= 2) {
            y -= 1;
            m += 12;
        }
        long era = (y >= 0 ? y : y - 399) / 400;
        unsigned yoe = static_cast<unsigned>(y - era * 400);
        unsigned doy = (153u * (m - 3) + 2) / 5 + day - 1;
        unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
        return era * 146097 + static_cast<long>(doe) - 719468;
    }

    // 0 = Monday ... 6 = Sunday
    int weekday() const { return static_cast<int>(((serial() % 7) + 7 + 3) % 7); }
    bool is_business_day() const { return weekday() < 5; }

    Date next_day() const {
        static const int md[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
        int dm = md[month - 1];
        if (month == 2 && (year % 4 == 0 && (year % 100 != 0 || year % 400 == 0))) dm = 29;
        Date n = *this;
        if (++n.day > dm) {
            n.day = 1;
            if (++n.month > 12) {
                n.month = 1;
                ++n.year;
            }
        }
        return n;
    }
};

enum class Frequency { Quarterly, Monthly, Daily };

inline Frequency frequency_from_string(const std::string& s) {
    if (s == "quarterly") return Frequency::Quarterly;
    if (s == "monthly") return Frequency::Monthly;
    if (s == "daily") return Frequency::Daily;
    throw ConfigError("unknown frequency '" + s + "'");
}

struct RawSeries {
    std::string code;
    Frequency frequency = Frequency::Quarterly;
    int transform_code = 1;  // 1..7
    std::vector<std::pair<Date, double>> observations;

    void validate() const {
        if (transform_code < 1 || transform_code > 7)
            throw DataError(code + ": transform code " + std::to_string(transform_code) +
                            " unsupported (1-7 only)");
        for (std::size_t i = 1; i < observations.size(); ++i)
            if (!(observations[i - 1].first < observations[i].first))
                throw DataError(code + ": dates not strictly increasing near " +
                                observations[i].first.str());
    }
};

// One file per series, header "date,value", ISO dates.
inline RawSeries load_series_csv(const std::string& path, std::string code, Frequency freq,
                                 int transform_code) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    RawSeries s{std::move(code), freq, transform_code, {}};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        if (lineno == 1 && line.rfind("date", 0) == 0) continue;
        auto comma = line.find(',');
        if (comma == std::string::npos)
            throw DataError(path + ":" + std::to_string(lineno) + " (" + s.code +
                            "): expected 'date,value'");
        try {
            Date d = Date::parse(line.substr(0, comma));
            double v = std::stod(line.substr(comma + 1));
            s.observations.emplace_back(d, v);
        } catch (const std::exception& e) {
            throw DataError(path + ":" + std::to_string(lineno) + " (" + s.code + "): " +
                            e.what());
        }
    }
    s.validate();
    return s;
}

// ---------------------------------------------------------------------------
// Transformations (FRED codes 1-7)

// 1 none, 2 diff, 3 double diff, 4 log, 5 dlog, 6 ddlog, 7 pct change.
// Leading undefined entries are dropped.
inline RawSeries apply_transform(const RawSeries& s) {
    s.validate();
    auto require_positive = [&](const std::pair<Date, double>& o) {
        if (!(o.second > 0.0))
            throw DataError(s.code + ": nonpositive value " + std::to_string(o.second) +
                            " under log transform at " + o.first.str());
    };
    RawSeries out{s.code, s.frequency, s.transform_code, {}};
    const auto& v = s.observations;
    auto diff = [](const std::vector<std::pair<Date, double>>& x) {
        std::vector<std::pair<Date, double>> d;
        for (std::size_t i = 1; i < x.size(); ++i)
            d.emplace_back(x[i].first, x[i].second - x[i - 1].second);
        return d;
    };
    switch (s.transform_code) {
        case 1: out.observations = v; break;
        case 2: out.observations = diff(v); break;
        case 3: out.observations = diff(diff(v)); break;
        case 4:
            for (const auto& o : v) {
                require_positive(o);
                out.observations.emplace_back(o.first, std::log(o.second));
            }
            break;
        case 5:
        case 6: {
            std::vector<std::pair<Date, double>> logged;
            for (const auto& o : v) {
                require_positive(o);
                logged.emplace_back(o.first, std::log(o.second));
            }
            out.observations = s.transform_code == 5 ? diff(logged) : diff(diff(logged));
            break;
        }
        case 7:
            for (std::size_t i = 1; i < v.size(); ++i) {
                if (v[i - 1].second == 0.0)
                    throw DataError(s.code + ": zero value under percent change at " +
                                    v[i - 1].first.str());
                out.observations.emplace_back(v[i].first, v[i].second / v[i - 1].second - 1.0);
            }
            break;
        default:
            throw DataError(s.code + ": transform code out of range");
    }
    return out;
}

// Fills missing business days with the mean of the five preceding available
// values; fills feed later fills left-to-right. Weekends are not gaps.
inline RawSeries interpolate_holidays(const RawSeries& s) {
    if (s.frequency != Frequency::Daily)
        throw ConfigError(s.code + ": holiday interpolation applies to daily series only");
    s.validate();
    if (s.observations.empty()) return s;
    RawSeries out{s.code, s.frequency, s.transform_code, {}};
    std::size_t i = 0;
    for (Date d = s.observations.front().first; d <= s.observations.back().first;
         d = d.next_day()) {
        if (i < s.observations.size() && s.observations[i].first == d) {
            out.observations.emplace_back(d, s.observations[i].second);
            ++i;
            continue;
        }
        if (!d.is_business_day()) continue;
        if (out.observations.size() < 5)
            throw DataError(s.code + ": gap at " + d.str() +
                            " with fewer than five preceding observations");
        double m = 0.0;
        for (std::size_t j = out.observations.size() - 5; j < out.observations.size(); ++j)
            m += out.observations[j].second;
        out.observations.emplace_back(d, m / 5.0);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Calendar regularization

struct QuarterKey {
    int year, quarter;
    auto operator<=>(const QuarterKey&) const = default;
    std::string str() const { return std::to_string(year) + "Q" + std::to_string(quarter); }
};

inline QuarterKey quarter_of(const Date& d) { return {d.year, d.quarter()}; }

namespace detail {

// Splits the daily observations of one quarter into `kappa` equal-length bins
// and keeps the last observation of each (uneven remainders go to the later
// bins so the final bin always ends on the quarter's last observation).
inline std::vector<double> bin_quarter(const std::string& code, const QuarterKey& qk,
                                       const std::vector<double>& values, Eigen::Index kappa) {
    std::size_t n = values.size();
    if (n < static_cast<std::size_t>(kappa))
        throw DataError(code + ": quarter " + qk.str() + " has " + std::to_string(n) +
                        " daily observations, need at least " + std::to_string(kappa));
    std::vector<double> out(kappa);
    std::size_t base = n / kappa, extra = n % kappa;
    std::size_t pos = 0;
    for (Eigen::Index b = 0; b < kappa; ++b) {
        std::size_t len = base + (static_cast<std::size_t>(b) >= kappa - extra ? 1 : 0);
        pos += len;
        out[b] = values[pos - 1];
    }
    return out;
}

}  // namespace detail

struct GroupedSeries {
    std::string group;
    std::vector<RawSeries> members;  // all same frequency
};

// Aligns a set of transformed series groups onto the target's quarterly
// calendar: monthly -> kappa 3, daily -> kappa daily_kappa via binning,
// quarterly -> kappa 1. The usable span is the intersection of all series.
inline MultiFreqSeries regularize_calendar(const RawSeries& target,
                                           const std::vector<GroupedSeries>& groups,
                                           Eigen::Index daily_kappa = 60) {
    if (target.frequency != Frequency::Quarterly)
        throw ConfigError("regularize_calendar: target must be quarterly");
    if (target.observations.empty()) throw DataError("regularize_calendar: empty target");

    // Intersect spans at quarter granularity.
    QuarterKey first = quarter_of(target.observations.front().first);
    QuarterKey last = quarter_of(target.observations.back().first);
    auto shrink = [&](const RawSeries& s) {
        first = std::max(first, quarter_of(s.observations.front().first));
        last = std::min(last, quarter_of(s.observations.back().first));
    };
    for (const auto& g : groups)
        for (const auto& s : g.members) {
            if (s.observations.empty()) throw DataError(s.code + ": empty series");
            shrink(s);
        }
    // Partial first/last quarters of high-frequency series would be ragged;
    // trim to quarters fully covered by everything.
    auto covered = [](const RawSeries& s, const QuarterKey& qk) {
        std::map<QuarterKey, int> cnt;
        for (const auto& o : s.observations) cnt[quarter_of(o.first)]++;
        auto it = cnt.find(qk);
        int need = s.frequency == Frequency::Monthly ? 3 : s.frequency == Frequency::Daily ? 1 : 1;
        return it != cnt.end() && it->second >= need;
    };
    for (const auto& g : groups)
        for (const auto& s : g.members) {
            while (first <= last && !covered(s, first))
                first = first.quarter == 4 ? QuarterKey{first.year + 1, 1}
                                           : QuarterKey{first.year, first.quarter + 1};
            while (first <= last && !covered(s, last))
                last = last.quarter == 1 ? QuarterKey{last.year - 1, 4}
                                         : QuarterKey{last.year, last.quarter - 1};
        }
    if (!(first <= last)) throw DataError("regularize_calendar: no common quarters across series");

    std::vector<QuarterKey> quarters;
    for (QuarterKey q = first;; q = q.quarter == 4 ? QuarterKey{q.year + 1, 1}
                                                   : QuarterKey{q.year, q.quarter + 1}) {
        quarters.push_back(q);
        if (q == last) break;
    }
    Eigen::Index periods = static_cast<Eigen::Index>(quarters.size());

    MultiFreqSeries out;
    out.first_period = first.str();
    out.last_period = last.str();
    out.target.resize(periods);
    {
        std::map<QuarterKey, double> tv;
        for (const auto& o : target.observations) tv[quarter_of(o.first)] = o.second;
        for (Eigen::Index t = 0; t < periods; ++t) {
            auto it = tv.find(quarters[static_cast<std::size_t>(t)]);
            if (it == tv.end())
                throw DataError(target.code + ": missing quarter " +
                                quarters[static_cast<std::size_t>(t)].str());
            out.target(t) = it->second;
        }
    }

    for (const auto& g : groups) {
        if (g.members.empty()) continue;
        Frequency freq = g.members.front().frequency;
        for (const auto& s : g.members)
            if (s.frequency != freq)
                throw DataError("group " + g.group + ": mixed frequencies");
        Eigen::Index kappa = freq == Frequency::Quarterly ? 1
                             : freq == Frequency::Monthly ? 3
                                                          : daily_kappa;
        FrequencyGroup fg;
        fg.name = g.group;
        fg.kappa = kappa;
        fg.dim = static_cast<Eigen::Index>(g.members.size());
        fg.series.resize(periods * kappa, fg.dim);
        for (Eigen::Index col = 0; col < fg.dim; ++col) {
            const RawSeries& s = g.members[static_cast<std::size_t>(col)];
            std::map<QuarterKey, std::vector<double>> per_quarter;
            for (const auto& o : s.observations)
                per_quarter[quarter_of(o.first)].push_back(o.second);
            for (Eigen::Index t = 0; t < periods; ++t) {
                const QuarterKey& qk = quarters[static_cast<std::size_t>(t)];
                auto it = per_quarter.find(qk);
                if (it == per_quarter.end())
                    throw DataError(s.code + ": missing quarter " + qk.str());
                std::vector<double> vals;
                if (freq == Frequency::Quarterly) {
                    vals = {it->second.back()};
                } else if (freq == Frequency::Monthly) {
                    if (it->second.size() != 3)
                        throw DataError(s.code + ": quarter " + qk.str() + " has " +
                                        std::to_string(it->second.size()) +
                                        " monthly observations, expected 3");
                    vals = it->second;
                } else {
                    vals = detail::bin_quarter(s.code, qk, it->second, kappa);
                }
                for (Eigen::Index sidx = 0; sidx < kappa; ++sidx)
                    fg.series(t * kappa + sidx, col) = vals[static_cast<std::size_t>(sidx)];
            }
        }
        fg.validate();
        out.groups.push_back(std::move(fg));
    }
    out.validate();
    return out;
}

// ---------------------------------------------------------------------------
// Manifest

// Manifest JSON: { "target": {file, code, transform_code},
//                  "series": [ {file, code, frequency, transform_code, group}... ],
//                  "daily_kappa": 60 }
inline MultiFreqSeries load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open manifest " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw DataError("manifest " + path + ": " + e.what());
    }
    std::string dir = path.find('/') == std::string::npos ? "" : path.substr(0, path.rfind('/') + 1);
    auto resolve = [&](const std::string& f) { return f.front() == '/' ? f : dir + f; };

    const auto& jt = j.at("target");
    RawSeries target = apply_transform(
        load_series_csv(resolve(jt.at("file").get<std::string>()),
                        jt.at("code").get<std::string>(), Frequency::Quarterly,
                        jt.value("transform_code", 1)));

    std::map<std::string, GroupedSeries> groups;
    for (const auto& je : j.at("series")) {
        Frequency f = frequency_from_string(je.at("frequency").get<std::string>());
        RawSeries s = load_series_csv(resolve(je.at("file").get<std::string>()),
                                      je.at("code").get<std::string>(), f,
                                      je.value("transform_code", 1));
        if (f == Frequency::Daily) s = interpolate_holidays(s);
        s = apply_transform(s);
        std::string gname = je.at("group").get<std::string>();
        auto& g = groups[gname];
        g.group = gname;
        g.members.push_back(std::move(s));
    }
    std::vector<GroupedSeries> ordered;
    ordered.reserve(groups.size());
    for (auto& [_, g] : groups) ordered.push_back(std::move(g));
    return regularize_calendar(target, ordered, j.value("daily_kappa", 60));
}

}  // namespace esncast

#include "survmct/survdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <istream>

namespace survmct {

namespace {

void validate_observation(double time, int status, int line_for_message = -1) {
    auto fail = [&](const std::string& what) {
        if (line_for_message > 0) {
            throw DataError("line " + std::to_string(line_for_message) + ": " + what);
        }
        throw DataError(what);
    };
    if (!std::isfinite(time) || !(time > 0.0)) {
        fail("time must be a finite positive number");
    }
    if (status != 0 && status != 1) {
        fail("status must be 0 (censored) or 1 (event)");
    }
}

} // namespace

SurvivalSample SurvivalSample::from_rows(const std::vector<Row>& rows) {
    std::vector<Observation> obs;
    obs.reserve(rows.size());
    std::vector<std::string> labels;
    for (const auto& r : rows) {
        validate_observation(r.time, r.status);
        if (r.group.empty()) {
            throw DataError("group label must be non-empty");
        }
        auto it = std::find(labels.begin(), labels.end(), r.group);
        int g;
        if (it == labels.end()) {
            g = static_cast<int>(labels.size());
            labels.push_back(r.group);
        } else {
            g = static_cast<int>(it - labels.begin());
        }
        obs.push_back({r.time, r.status, g});
    }
    return from_observations(std::move(obs), std::move(labels));
}

SurvivalSample SurvivalSample::from_observations(std::vector<Observation> obs,
                                                 std::vector<std::string> labels) {
    if (labels.size() < 2) {
        throw DataError("sample must contain at least two groups");
    }
    for (std::size_t a = 0; a < labels.size(); ++a) {
        if (labels[a].empty()) throw DataError("group label must be non-empty");
        for (std::size_t b = a + 1; b < labels.size(); ++b) {
            if (labels[a] == labels[b]) throw DataError("duplicate group label: " + labels[a]);
        }
    }
    std::vector<int> sizes(labels.size(), 0);
    for (const auto& o : obs) {
        validate_observation(o.time, o.status);
        if (o.group < 0 || o.group >= static_cast<int>(labels.size())) {
            throw DataError("group index out of range");
        }
        ++sizes[static_cast<std::size_t>(o.group)];
    }
    for (std::size_t j = 0; j < sizes.size(); ++j) {
        if (sizes[j] == 0) {
            throw DataError("group " + labels[j] + " has no subjects");
        }
    }
    SurvivalSample s;
    s.obs_ = std::move(obs);
    s.labels_ = std::move(labels);
    s.group_size_ = std::move(sizes);
    return s;
}

std::optional<int> SurvivalSample::group_index(const std::string& label) const {
    auto it = std::find(labels_.begin(), labels_.end(), label);
    if (it == labels_.end()) return std::nullopt;
    return static_cast<int>(it - labels_.begin());
}

int SurvivalSample::total_events() const {
    int e = 0;
    for (const auto& o : obs_) e += o.status;
    return e;
}

SurvivalSample SurvivalSample::with_reference(const std::string& label) const {
    auto ref = group_index(label);
    if (!ref) {
        throw std::invalid_argument("unknown group label: " + label);
    }
    std::vector<int> remap(labels_.size());
    std::vector<std::string> new_labels;
    new_labels.reserve(labels_.size());
    new_labels.push_back(labels_[static_cast<std::size_t>(*ref)]);
    remap[static_cast<std::size_t>(*ref)] = 0;
    for (int j = 0; j < k(); ++j) {
        if (j == *ref) continue;
        remap[static_cast<std::size_t>(j)] = static_cast<int>(new_labels.size());
        new_labels.push_back(labels_[static_cast<std::size_t>(j)]);
    }
    std::vector<Observation> new_obs = obs_;
    for (auto& o : new_obs) o.group = remap[static_cast<std::size_t>(o.group)];
    return from_observations(std::move(new_obs), std::move(new_labels));
}

RiskTable build_risk_table(const SurvivalSample& sample) {
    RiskTable rt;
    rt.k_ = sample.k();
    rt.n_ = sample.n();
    rt.group_size_.assign(sample.labels().size(), 0);
    for (int j = 0; j < sample.k(); ++j) rt.group_size_[static_cast<std::size_t>(j)] = sample.group_size(j);

    std::vector<double> event_times;
    for (const auto& o : sample.observations()) {
        if (o.status == 1) event_times.push_back(o.time);
    }
    if (event_times.empty()) {
        throw DataError("sample contains no events");
    }
    std::sort(event_times.begin(), event_times.end());
    event_times.erase(std::unique(event_times.begin(), event_times.end()), event_times.end());
    rt.times_ = std::move(event_times);
    const std::size_t T = rt.times_.size();

    rt.at_risk_.assign(static_cast<std::size_t>(rt.k_) * T, 0);
    rt.events_.assign(static_cast<std::size_t>(rt.k_) * T, 0);
    rt.total_at_risk_.assign(T, 0);
    rt.total_events_.assign(T, 0);
    rt.event_count_.assign(static_cast<std::size_t>(rt.k_), 0);
    rt.subject_event_idx_.assign(static_cast<std::size_t>(rt.k_), {});
    for (int j = 0; j < rt.k_; ++j) {
        rt.subject_event_idx_[static_cast<std::size_t>(j)].reserve(
            static_cast<std::size_t>(rt.group_size_[static_cast<std::size_t>(j)]));
    }

    // Sorted follow-up times per group drive the at-risk counts.
    std::vector<std::vector<double>> sorted_times(static_cast<std::size_t>(rt.k_));
    for (const auto& o : sample.observations()) {
        sorted_times[static_cast<std::size_t>(o.group)].push_back(o.time);
    }
    for (auto& v : sorted_times) std::sort(v.begin(), v.end());

    for (const auto& o : sample.observations()) {
        int idx = -1;
        if (o.status == 1) {
            auto it = std::lower_bound(rt.times_.begin(), rt.times_.end(), o.time);
            idx = static_cast<int>(it - rt.times_.begin());
            rt.events_[rt.idx(o.group, idx)] += 1;
            rt.event_count_[static_cast<std::size_t>(o.group)] += 1;
        }
        rt.subject_event_idx_[static_cast<std::size_t>(o.group)].push_back(idx);
    }

    for (int j = 0; j < rt.k_; ++j) {
        const auto& st = sorted_times[static_cast<std::size_t>(j)];
        for (std::size_t t = 0; t < T; ++t) {
            auto it = std::lower_bound(st.begin(), st.end(), rt.times_[t]);
            rt.at_risk_[rt.idx(j, static_cast<int>(t))] =
                static_cast<long>(st.end() - it);
        }
    }
    // Totals accumulate in ascending group order; downstream code relies on
    // this exact summation order for bitwise two-group reductions.
    for (std::size_t t = 0; t < T; ++t) {
        long y = 0;
        long d = 0;
        for (int j = 0; j < rt.k_; ++j) {
            y += rt.at_risk_[rt.idx(j, static_cast<int>(t))];
            d += rt.events_[rt.idx(j, static_cast<int>(t))];
        }
        rt.total_at_risk_[t] = y;
        rt.total_events_[t] = d;
    }
    return rt;
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(trim(cur));
    return out;
}

} // namespace

SurvivalSample parse_csv(std::istream& in, const ColumnSpec& columns) {
    std::string line;
    int line_no = 0;
    // Header.
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        header = split_fields(line);
        break;
    }
    if (header.empty()) {
        throw DataError("empty input: no header row");
    }
    auto find_col = [&](const std::string& name) {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) {
            throw DataError("missing required column: " + name);
        }
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t c_time = find_col(columns.time);
    const std::size_t c_status = find_col(columns.status);
    const std::size_t c_group = find_col(columns.group);
    const std::size_t needed = std::max({c_time, c_status, c_group}) + 1;

    std::vector<SurvivalSample::Row> rows;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split_fields(line);
        if (fields.size() < needed) {
            throw DataError("line " + std::to_string(line_no) + ": expected at least " +
                            std::to_string(needed) + " fields, got " +
                            std::to_string(fields.size()));
        }
        SurvivalSample::Row r;
        const std::string& ts = fields[c_time];
        char* end = nullptr;
        r.time = std::strtod(ts.c_str(), &end);
        if (ts.empty() || end != ts.c_str() + ts.size()) {
            throw DataError("line " + std::to_string(line_no) + ": cannot parse time '" + ts + "'");
        }
        const std::string& ss = fields[c_status];
        if (ss == "0") {
            r.status = 0;
        } else if (ss == "1") {
            r.status = 1;
        } else {
            throw DataError("line " + std::to_string(line_no) + ": status must be 0 or 1, got '" + ss + "'");
        }
        r.group = fields[c_group];
        if (r.group.empty()) {
            throw DataError("line " + std::to_string(line_no) + ": empty group label");
        }
        validate_observation(r.time, r.status, line_no);
        rows.push_back(std::move(r));
    }
    if (rows.empty()) {
        throw DataError("no data rows after header");
    }
    return SurvivalSample::from_rows(rows);
}

} // namespace survmct

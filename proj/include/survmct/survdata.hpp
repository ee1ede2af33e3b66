#pragma once

// Right-censored k-sample data model: validated samples, the aligned
// risk-set/event table every statistic is computed from, and CSV ingestion.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace survmct {

// Malformed or unusable input data (as opposed to bad configuration, which
// is reported via std::invalid_argument).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Observation {
    double time = 0.0; // follow-up time, > 0 and finite
    int status = 0;    // 1 = event, 0 = right-censored
    int group = 0;     // zero-based group index
};

// Immutable k-group right-censored sample.  Group indices follow the order of
// first appearance of their labels; at least two groups are required and each
// group holds at least one subject.
class SurvivalSample {
public:
    struct Row {
        double time = 0.0;
        int status = 0;
        std::string group;
    };

    static SurvivalSample from_rows(const std::vector<Row>& rows);
    static SurvivalSample from_observations(std::vector<Observation> obs,
                                            std::vector<std::string> labels);

    [[nodiscard]] int n() const { return static_cast<int>(obs_.size()); }
    [[nodiscard]] int k() const { return static_cast<int>(labels_.size()); }
    [[nodiscard]] int group_size(int j) const { return group_size_.at(static_cast<std::size_t>(j)); }
    [[nodiscard]] const std::string& label(int j) const { return labels_.at(static_cast<std::size_t>(j)); }
    [[nodiscard]] const std::vector<std::string>& labels() const { return labels_; }
    [[nodiscard]] std::span<const Observation> observations() const { return obs_; }
    [[nodiscard]] std::optional<int> group_index(const std::string& label) const;
    [[nodiscard]] int total_events() const;

    // Reorders groups so `label` becomes group 0 (the reference); the other
    // groups keep their relative order.  Throws std::invalid_argument if the
    // label does not name a group.
    [[nodiscard]] SurvivalSample with_reference(const std::string& label) const;

private:
    SurvivalSample() = default;

    std::vector<Observation> obs_; // input order preserved
    std::vector<std::string> labels_;
    std::vector<int> group_size_;
};

// Event-time-aligned counting-process table.  Column t refers to the t-th
// distinct event time (ascending, all groups pooled).  Censoring times do not
// create columns; they only reduce the at-risk counts.
class RiskTable {
public:
    [[nodiscard]] int num_times() const { return static_cast<int>(times_.size()); }
    [[nodiscard]] int k() const { return k_; }
    [[nodiscard]] int n() const { return n_; }
    [[nodiscard]] double time(int t) const { return times_.at(static_cast<std::size_t>(t)); }
    [[nodiscard]] long at_risk(int j, int t) const { return at_risk_[idx(j, t)]; }
    [[nodiscard]] long events(int j, int t) const { return events_[idx(j, t)]; }
    [[nodiscard]] long total_at_risk(int t) const { return total_at_risk_.at(static_cast<std::size_t>(t)); }
    [[nodiscard]] long total_events(int t) const { return total_events_.at(static_cast<std::size_t>(t)); }
    [[nodiscard]] int group_size(int j) const { return group_size_.at(static_cast<std::size_t>(j)); }
    [[nodiscard]] long event_count(int j) const { return event_count_.at(static_cast<std::size_t>(j)); }

    // For each subject of group j (order of appearance in the sample): the
    // index into the event-time grid if the subject experienced an event,
    // -1 if censored.  This is the alignment contract for wild-bootstrap
    // multiplier vectors.
    [[nodiscard]] const std::vector<int>& subject_event_index(int j) const {
        return subject_event_idx_.at(static_cast<std::size_t>(j));
    }

    friend RiskTable build_risk_table(const SurvivalSample& sample);

private:
    [[nodiscard]] std::size_t idx(int j, int t) const {
        return static_cast<std::size_t>(j) * times_.size() + static_cast<std::size_t>(t);
    }

    std::vector<double> times_;
    std::vector<long> at_risk_;  // k x T, row-major by group
    std::vector<long> events_;   // k x T, row-major by group
    std::vector<long> total_at_risk_;
    std::vector<long> total_events_;
    std::vector<int> group_size_;
    std::vector<long> event_count_;
    std::vector<std::vector<int>> subject_event_idx_;
    int k_ = 0;
    int n_ = 0;
};

// Throws DataError if the sample contains no events.
RiskTable build_risk_table(const SurvivalSample& sample);

struct ColumnSpec {
    std::string time = "time";
    std::string status = "status";
    std::string group = "group";
};

// Reads a comma-separated file with a header row.  Required columns are
// located by name; extra columns are ignored; blank lines are skipped.
// Throws DataError with a 1-based line number on malformed content.
SurvivalSample parse_csv(std::istream& in, const ColumnSpec& columns = {});

} // namespace survmct

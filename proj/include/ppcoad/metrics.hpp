#pragma once

// Decaying-memory evaluation metrics: sFDR, power and the cumulative data
// acquisition rate (CDAR), with Monte Carlo aggregation across runs.

#include <cmath>
#include <vector>

#include "ppcoad/core.hpp"

namespace ppcoad {

struct RunTrace {
    std::vector<double> sfdr;   // F_t / (R_t + eta)
    std::vector<double> power;  // TP_t / (A_t + eta)
    std::vector<double> cdar;   // sum_tau delta^(t - tau) U_tau

    std::size_t size() const noexcept { return sfdr.size(); }
};

class MetricsTracker {
public:
    MetricsTracker(double delta, double eta)
        : false_(delta), detections_(delta), true_pos_(delta), anomalies_(delta), acquired_(delta), eta_(eta) {
        if (!(eta > 0.0)) throw Error("smoothing eta must be positive");
    }

    void update(bool decision, Truth truth, bool acquired) {
        if (truth == Truth::unknown) throw Error("metrics need a ground-truth label at every step");
        const double a_hat = decision ? 1.0 : 0.0;
        const double a = truth == Truth::anomaly ? 1.0 : 0.0;
        false_.push(a_hat * (1.0 - a));
        detections_.push(a_hat);
        true_pos_.push(a_hat * a);
        anomalies_.push(a);
        acquired_.push(acquired ? 1.0 : 0.0);
        trace_.sfdr.push_back(sfdr_ratio());
        trace_.power.push_back(power_ratio());
        trace_.cdar.push_back(cdar());
    }

    double sfdr_ratio() const { return false_.value() / (detections_.value() + eta_); }
    double power_ratio() const { return true_pos_.value() / (anomalies_.value() + eta_); }
    double cdar() const { return acquired_.value(); }

    double false_mass() const { return false_.value(); }
    double detection_mass() const { return detections_.value(); }

    const RunTrace& trace() const noexcept { return trace_; }

private:
    DecayedSum false_, detections_, true_pos_, anomalies_, acquired_;
    double eta_;
    RunTrace trace_;
};

struct MeanSe {
    std::vector<double> mean;
    std::vector<double> se;
};

struct AggregateTrace {
    MeanSe sfdr, power, cdar;
    std::size_t runs = 0;

    std::size_t size() const noexcept { return sfdr.mean.size(); }
};

namespace detail {

// Pointwise mean and standard error (sample standard deviation / sqrt(runs)).
inline MeanSe mean_se(const std::vector<const std::vector<double>*>& series) {
    const std::size_t T = series.front()->size();
    const double R = static_cast<double>(series.size());
    MeanSe out{std::vector<double>(T, 0.0), std::vector<double>(T, 0.0)};
    for (std::size_t t = 0; t < T; ++t) {
        double sum = 0.0;
        for (const auto* s : series) sum += (*s)[t];
        const double mean = sum / R;
        double ss = 0.0;
        for (const auto* s : series) ss += ((*s)[t] - mean) * ((*s)[t] - mean);
        out.mean[t] = mean;
        out.se[t] = series.size() > 1 ? std::sqrt(ss / (R - 1.0)) / std::sqrt(R) : 0.0;
    }
    return out;
}

}  // namespace detail

inline AggregateTrace aggregate(const std::vector<RunTrace>& traces) {
    if (traces.empty()) throw Error("cannot aggregate an empty set of runs");
    const std::size_t T = traces.front().size();
    std::vector<const std::vector<double>*> s, p, c;
    for (const auto& tr : traces) {
        if (tr.size() != T || tr.power.size() != T || tr.cdar.size() != T)
            throw Error("run traces differ in length");
        s.push_back(&tr.sfdr);
        p.push_back(&tr.power);
        c.push_back(&tr.cdar);
    }
    return AggregateTrace{detail::mean_se(s), detail::mean_se(p), detail::mean_se(c), traces.size()};
}

}  // namespace ppcoad

#pragma once

#include <cstdio>
#include <ostream>
#include <string>

#include "conquer/environment.hpp"

namespace conquer {

// Fixed CSV number format so identical runs produce byte-identical files.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

inline constexpr const char* kTraceHeader = "t,policy,m,n,y,queried,regret,cum_regret,error,eps_t,q_t";

inline std::string trace_row(const std::string& policy, const TraceRecord& rec,
                             double cum_regret) {
    std::string row;
    row += std::to_string(rec.t);
    row += ',';
    row += policy;
    row += ',';
    row += std::to_string(rec.m);
    row += ',';
    if (rec.n) row += std::to_string(*rec.n);
    row += ',';
    if (rec.y) row += std::to_string(*rec.y);
    row += ',';
    row += rec.queried ? '1' : '0';
    row += ',';
    row += format_double(rec.instantaneous_regret);
    row += ',';
    row += format_double(cum_regret);
    row += ',';
    row += format_double(rec.error);
    row += ',';
    row += format_double(rec.eps_t);
    row += ',';
    row += format_double(rec.q_t);
    return row;
}

// Streams rounds to CSV, accumulating the cumulative regret column.
class TraceWriter {
public:
    TraceWriter(std::ostream& os, std::string policy) : os_(os), policy_(std::move(policy)) {
        os_ << kTraceHeader << '\n';
    }

    void write(const TraceRecord& rec) {
        cum_regret_ += rec.instantaneous_regret;
        os_ << trace_row(policy_, rec, cum_regret_) << '\n';
    }

    double cum_regret() const { return cum_regret_; }

private:
    std::ostream& os_;
    std::string policy_;
    double cum_regret_ = 0.0;
};

}  // namespace conquer
